"""Adaptive learning-rate tuning: a two-phase LR controller, a small SGD
trainer to drive it, baseline schedulers, and an oracle-following simulator
for delay measurements."""

from aalr.checkpoints import (
    Checkpoint,
    CorruptCheckpointError,
    FileCheckpointStore,
    MemoryCheckpointStore,
    NoCheckpointError,
)
from aalr.controller import (
    ControllerState,
    Directive,
    InitializationError,
    Phase,
    ProtocolError,
    ReinitializeModel,
    RestoreCheckpoint,
    SaveCheckpoint,
    SetLr,
    Stop,
    TrainEpochs,
    initial_directives,
    lr_trajectory,
    new_controller,
    observe,
    observe_phase1,
    observe_phase2,
)
from aalr.errors import DomainError, FormatError, ShapeError
from aalr.oracle import (
    Boundary,
    OptSchedule,
    SimTrajectory,
    delay_ratio,
    epochs_to_match_decrease,
    epochs_to_match_increase,
    matched_decrease_closed_form,
    simulate,
)
from aalr.schedules import CosineRestarts, CyclicTriangular, StepDecay, lr_at
from aalr.trainer import (
    AttackConfig,
    Dataset,
    EpochRecord,
    Model,
    SgdConfig,
    accuracy,
    backward,
    fgsm,
    forward_loss,
    init_model,
    input_gradient,
    load_idx,
    make_synthetic,
    predict,
    sgd_step,
    softmax,
    train_epoch,
)

__version__ = "0.1.0"
