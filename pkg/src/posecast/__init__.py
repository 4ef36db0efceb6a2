"""posecast: human pose forecasting with hop-partitioned spatio-temporal
graph convolutions, built on a small reverse-mode autodiff engine."""

from . import attention, autodiff, data, gradcheck, graphs, layers, model, training
from .graphs import SkeletonGraph, build_hop_partition, build_multigraph
from .model import ModelConfig, build_model, load_checkpoint, save_checkpoint
from .training import TrainConfig, evaluate, mpjpe_value, train

__version__ = "0.1.0"
