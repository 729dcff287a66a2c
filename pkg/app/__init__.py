"""CAM - incremental hierarchical memory engine"""
__version__ = "1.0.0"
