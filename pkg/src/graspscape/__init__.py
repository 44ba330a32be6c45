"""graspscape: grasp synthesis policies, quality metrics, and behavioral maps."""

__version__ = "0.1.0"
