"""From-scratch recurrent network kernel: layers, BPTT, gradient checking."""

from .gradcheck import GradCheckReport, grad_check, relative_error
from .layers import (
    BatchNorm,
    Dense,
    Dropout,
    LayerSpec,
    LstmParams,
    Recurrent,
    batchnorm_backward,
    batchnorm_forward,
    bidirectional_backward,
    bidirectional_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    lstm_backward,
    lstm_cell_forward,
    lstm_forward,
    recurrent_backward,
    recurrent_forward,
    sigmoid,
)
from .network import (
    ForwardCache,
    ModelParams,
    NetworkSpec,
    init_params,
    mse_loss,
    network_backward,
    network_forward,
    predict,
)

__all__ = [
    "BatchNorm",
    "Dense",
    "Dropout",
    "ForwardCache",
    "GradCheckReport",
    "LayerSpec",
    "LstmParams",
    "ModelParams",
    "NetworkSpec",
    "Recurrent",
    "batchnorm_backward",
    "batchnorm_forward",
    "bidirectional_backward",
    "bidirectional_forward",
    "dense_backward",
    "dense_forward",
    "dropout_backward",
    "dropout_forward",
    "grad_check",
    "init_params",
    "lstm_backward",
    "lstm_cell_forward",
    "lstm_forward",
    "mse_loss",
    "network_backward",
    "network_forward",
    "predict",
    "recurrent_backward",
    "recurrent_forward",
    "relative_error",
    "sigmoid",
]
