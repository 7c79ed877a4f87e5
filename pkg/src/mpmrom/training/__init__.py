from .dataset import SnapshotDataset, TrajectoryInstance, build_dataset
from .fit import LOG_FIELDS, TrainConfig, data_scaling, fit, write_training_log
from .loss import loss_and_gradients
from .optim import AdamState, adam_update, cosine_lr

__all__ = [
    "AdamState",
    "LOG_FIELDS",
    "SnapshotDataset",
    "TrainConfig",
    "TrajectoryInstance",
    "adam_update",
    "build_dataset",
    "cosine_lr",
    "data_scaling",
    "fit",
    "loss_and_gradients",
    "write_training_log",
]
