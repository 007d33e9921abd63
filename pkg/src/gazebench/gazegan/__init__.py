"""Desk-scale GazeGAN: autograd kernels, networks, losses and a toy trainer."""
from .autograd import Tensor, conv2d, conv_transpose2d, leaky_relu, relu, sigmoid, spatial_softmax
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check, run_suite
from .histogram import HistogramSpec, acs_loss, hist_estimate, minmax_normalize
from .losses import LossWeights, adversarial_loss, content_loss
from .networks import (
    CscConfig,
    DiscriminatorConfig,
    GeneratorConfig,
    csc_forward,
    discriminator_forward,
    generator_forward,
    generator_outputs,
)
from .train import Adam, GanState, TrainConfig, TrainingError, ablation, synthetic_set, train, train_step

__all__ = [
    "Adam",
    "CscConfig",
    "DiscriminatorConfig",
    "GanState",
    "GeneratorConfig",
    "GradCheckReport",
    "HistogramSpec",
    "LossWeights",
    "Tensor",
    "TrainConfig",
    "TrainingError",
    "ablation",
    "acs_loss",
    "adversarial_loss",
    "content_loss",
    "conv2d",
    "conv_transpose2d",
    "csc_forward",
    "discriminator_forward",
    "generator_forward",
    "generator_outputs",
    "grad_check",
    "hist_estimate",
    "leaky_relu",
    "load_checkpoint",
    "minmax_normalize",
    "relu",
    "run_suite",
    "save_checkpoint",
    "sigmoid",
    "spatial_softmax",
    "synthetic_set",
    "train",
    "train_step",
]
