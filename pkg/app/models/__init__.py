from app.models.cluster_registry import ClusterRegistry
from app.models.hierarchy import MemoryHierarchy, MemoryLevel, UpwardMapping
from app.models.level_graph import EmbeddingMatrix, LevelGraph
from app.models.replica_network import ReplicaNetwork

# Export for convenience
__all__ = [
    'ClusterRegistry',
    'EmbeddingMatrix',
    'LevelGraph',
    'MemoryHierarchy',
    'MemoryLevel',
    'ReplicaNetwork',
    'UpwardMapping',
]
