from .gradcheck import GradCheckReport, grad_check
from .layers import (
    LSTM,
    ConvLSTM,
    Conv2D,
    Dense,
    Flatten,
    GlobalAvgPool,
    L2Norm,
    Layer,
    MaxPool2D,
    ReLU,
    Residual,
    Sequence,
    Sigmoid,
    Softmax,
    Tanh,
    layer_from_config,
)
from .model import ModelGraph
from .recurrent import convlstm_step, convlstm_step_backward, lstm_step, lstm_step_backward
from .serialize import load_model, save_model
from .train import TrainConfig, train

__all__ = [
    "Conv2D", "ConvLSTM", "Dense", "Flatten", "GlobalAvgPool", "GradCheckReport", "L2Norm",
    "LSTM", "Layer", "MaxPool2D", "ModelGraph", "ReLU", "Residual", "Sequence", "Sigmoid",
    "Softmax", "Tanh", "TrainConfig", "convlstm_step", "convlstm_step_backward", "grad_check",
    "layer_from_config", "load_model", "lstm_step", "lstm_step_backward", "save_model", "train",
]
