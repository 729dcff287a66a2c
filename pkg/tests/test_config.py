import os

import pytest

from app.core.config import Settings, load_settings
from app.core.exceptions import ConfigError
from app.schemas.engine import MemoryScope


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Run every test from an empty directory with no CAM_* variables."""
    for name in list(os.environ):
        if name.startswith("CAM_"):
            monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)

# ==========================================
# 1. TEST SOURCES AND PRECEDENCE
# ==========================================

def test_defaults_without_sources():
    """Test plain defaults"""
    settings = load_settings()
    assert settings.batch_size == 50
    assert settings.scope == MemoryScope.UNIFIED
    assert settings.engine.alpha == 0.7

def test_toml_file_is_read(tmp_path):
    """Test values from an explicit config file"""
    path = tmp_path / "custom.toml"
    path.write_text('batch_size = 7\nscope = "document"\n\n[engine]\nalpha = 0.9\nk = 3\n')
    settings = load_settings(str(path))
    assert settings.batch_size == 7
    assert settings.scope == MemoryScope.DOCUMENT
    assert (settings.engine.alpha, settings.engine.k) == (0.9, 3)

def test_default_cam_toml_in_working_directory(tmp_path):
    """Test ./cam.toml is picked up without --config"""
    (tmp_path / "cam.toml").write_text("batch_size = 11\n")
    assert Settings().batch_size == 11

def test_env_beats_file(tmp_path, monkeypatch):
    """Test environment over TOML"""
    path = tmp_path / "custom.toml"
    path.write_text("batch_size = 7\n[engine]\ntheta = 0.4\n")
    monkeypatch.setenv("CAM_BATCH_SIZE", "9")
    monkeypatch.setenv("CAM_ENGINE__THETA", "0.6")
    settings = load_settings(str(path))
    assert settings.batch_size == 9
    assert settings.engine.theta == 0.6

def test_flags_beat_env(monkeypatch):
    """Test explicit overrides over environment"""
    monkeypatch.setenv("CAM_BATCH_SIZE", "9")
    monkeypatch.setenv("CAM_ENGINE__K", "4")
    settings = load_settings(batch_size=3, k=6)
    assert settings.batch_size == 3
    assert settings.engine.k == 6

def test_flat_engine_override_keeps_other_engine_values(tmp_path):
    """Test one engine flag does not reset the rest of [engine]"""
    path = tmp_path / "custom.toml"
    path.write_text("[engine]\nalpha = 0.9\n")
    settings = load_settings(str(path), s=8)
    assert settings.engine.alpha == 0.9
    assert settings.engine.s == 8

def test_none_overrides_are_ignored():
    """Test unset flags fall through to lower sources"""
    assert load_settings(batch_size=None, alpha=None).batch_size == 50

# ==========================================
# 2. TEST ERRORS
# ==========================================

def test_invalid_value_is_config_error():
    """Test out-of-range values map to ConfigError (exit 2)"""
    with pytest.raises(ConfigError) as excinfo:
        load_settings(alpha=1.5)
    assert "[0, 1]" in str(excinfo.value)
    assert excinfo.value.exit_code == 2

def test_missing_config_file():
    """Test a --config pointing nowhere"""
    with pytest.raises(ConfigError):
        load_settings("does-not-exist.toml")

def test_provider_config_from_settings():
    """Test the provider connection block"""
    provider = load_settings(max_retries=5).provider_config()
    assert provider.max_retries == 5
    assert provider.api_key_env_name == "CAM_API_KEY"
