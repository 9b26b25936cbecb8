"""From-scratch LSTM regressor with exact backpropagation through time."""
from .gradcheck import finite_diff_gradcheck, squared_loss
from .model import LstmConfig, LstmModel, fit_lstm, streams, train_minibatch
from .network import (
    GATES,
    CellCache,
    ForwardCache,
    LstmParams,
    LstmState,
    init_params,
    lstm_backward,
    lstm_cell_forward,
    lstm_forward,
    sigmoid,
)
from .optim import AdamState, adam_step, clip_by_global_norm, global_norm

__all__ = [
    "GATES", "AdamState", "CellCache", "ForwardCache", "LstmConfig", "LstmModel",
    "LstmParams", "LstmState", "adam_step", "clip_by_global_norm", "finite_diff_gradcheck",
    "fit_lstm", "global_norm", "init_params", "lstm_backward", "lstm_cell_forward",
    "lstm_forward", "sigmoid", "squared_loss", "streams", "train_minibatch",
]
