from .checkpoint import dumps_checkpoint, load_checkpoint, loads_checkpoint, save_checkpoint
from .layers import (conv3d_backward, conv3d_forward, dense_forward, dropout_forward,
                     maxpool3d_backward, maxpool3d_forward, relu, trunc_normal)
from .network import (Network, NetworkConfig, adam_step, backward, forward, init_network,
                      loss_and_gradients, predict)

__all__ = [
    "Network", "NetworkConfig", "adam_step", "backward", "conv3d_backward", "conv3d_forward",
    "dense_forward", "dropout_forward", "dumps_checkpoint", "forward", "init_network", "load_checkpoint",
    "loads_checkpoint", "loss_and_gradients", "maxpool3d_backward", "maxpool3d_forward", "predict", "relu",
    "save_checkpoint", "trunc_normal",
]
