from .trajectory import Trajectory, read_trajectory, write_trajectory

__all__ = ["Trajectory", "read_trajectory", "write_trajectory"]
