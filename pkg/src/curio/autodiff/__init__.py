from .nets import ConstantNet, Network, init_network, layer_dims, load_weights, restore, save_weights
from .optim import Adam, AdamState, adam_step
from .tensor import ShapeError, Tensor, gradient_check

__all__ = [
    "Adam", "AdamState", "ConstantNet", "Network", "ShapeError", "Tensor", "adam_step",
    "gradient_check", "init_network", "layer_dims", "load_weights", "restore", "save_weights",
]
