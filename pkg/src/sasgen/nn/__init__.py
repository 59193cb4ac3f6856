"""Minimal double-precision neural network stack with input gradients."""
from .checkpoint import load_network, save_network
from .gradcheck import finite_diff_check
from .layers import (BatchNorm, ChannelSoftmax, Conv2D, Deconv2D, Dense, Flatten, LeakyReLU,
                     ReLU, Reshape)
from .losses import loss_kl, loss_mse
from .network import ForwardPass, Network
from .optim import Adam, adam_step

__all__ = [
    "Adam", "BatchNorm", "ChannelSoftmax", "Conv2D", "Deconv2D", "Dense", "Flatten",
    "ForwardPass", "LeakyReLU", "Network", "ReLU", "Reshape", "adam_step",
    "finite_diff_check", "load_network", "loss_kl", "loss_mse", "save_network",
]
