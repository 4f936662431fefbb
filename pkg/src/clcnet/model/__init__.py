from .checkpoint import Checkpoint
from .config import TrainConfig
from .network import (
    ModelParams, featurize, featurize_all, forward, init_params, parameter_count, run_backward,
    run_forward, zero_params,
)
from .optim import AdamState, adam_step
from .pipeline import Enhancer, StreamingEnhancer
from .train import TrainResult, train
