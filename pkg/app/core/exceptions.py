from typing import Optional


class CamError(Exception):
    """Base class for every error the engine raises on purpose."""

    exit_code = 1


class ConfigError(CamError):
    """Invalid or missing configuration (flags, env, cam.toml)."""

    exit_code = 2


class ContractError(CamError, ValueError):
    """A caller broke an operation's precondition."""


class InvariantError(CamError, RuntimeError):
    """Internal structures disagree with each other (stale replicas, dangling ids)."""


class ProviderError(CamError):
    """Embedding/summarization/selection backend failed after retries."""

    def __init__(self, message: str, status_code: Optional[int] = None):
        super().__init__(message)
        self.status_code = status_code

    def __str__(self) -> str:
        base = super().__str__()
        if self.status_code is None:
            return base
        return f"{base} (HTTP {self.status_code})"


class RetrievalError(CamError):
    """Associative exploration aborted; no partial answer is produced."""


class EmptyMemoryError(CamError):
    exit_code = 3

    def __init__(self, message: str = "empty memory"):
        super().__init__(message)


class UnknownNodeError(CamError, LookupError):
    pass


class SnapshotError(CamError):
    pass


class IntegrityError(SnapshotError):
    pass


class VersionError(SnapshotError):
    pass
