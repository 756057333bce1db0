"""Split-learning parties, training/detection loops and run bookkeeping."""

from grid_shield.splitlearn.parties import ServerEndpoint, SplitClient, SplitServer, local_pair
from grid_shield.splitlearn.engine import Detection, detect, handshake, score_windows, train_epoch
from grid_shield.splitlearn.threshold import DriftConfig, DriftMonitor, DriftState, calibrate_threshold
from grid_shield.splitlearn.manifest import RunManifest, read_loss_log, write_loss_log

__all__ = [
    "SplitClient",
    "SplitServer",
    "ServerEndpoint",
    "local_pair",
    "Detection",
    "handshake",
    "train_epoch",
    "score_windows",
    "detect",
    "calibrate_threshold",
    "DriftConfig",
    "DriftMonitor",
    "DriftState",
    "RunManifest",
    "write_loss_log",
    "read_loss_log",
]
