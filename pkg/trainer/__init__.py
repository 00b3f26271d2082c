from .config import TrainConfig
from .loss import cross_entropy
from .optim import OptimizerState, optimizer_step, poly_lr
from .stage import STAGES, ClipSource, StageResult, run_stage
from .step import accumulate_clip_gradients, clip_loss, gradient_norms, train_clip_step
