"""Target-selection baseline models: numpy forward/backward with
numba-accelerated recurrent kernels."""
from .params import (  # noqa: F401
    ModelConfig,
    VARIANTS,
    init_params,
    load_params,
    param_shapes,
    save_params,
)
from .network import (  # noqa: F401
    Batch,
    backward,
    cross_entropy,
    encode_context_plain,
    encode_dialogue,
    forward,
    loss_and_grads,
    make_batch,
    relation_sum,
    softmax,
)
from .train import (  # noqa: F401
    AdamState,
    EpochLog,
    TrainingDiverged,
    TrainResult,
    adam_step,
    clip_global_norm,
    evaluate_loss,
    train,
)
from .evaluate import (  # noqa: F401
    EvalReport,
    VariantReport,
    accuracy,
    correctness,
    evaluate_models,
    paired_ttest,
    predictions,
)
