"""Curriculum masked-prediction pretraining for state-action sequences."""

from .data import (
    EnvModel,
    NormStats,
    Trajectory,
    Window,
    env_step,
    generate_dataset,
    make_env,
    normalize_window,
    denormalize_window,
    read_dataset,
    sample_window,
    write_dataset,
)
from .evaluation import (
    GoalPlanResult,
    PromptEpisodeResult,
    ReplayOracle,
    goal_planning_eval,
    rollout_closed_loop,
    skill_prompting_eval,
)
from .learner import (
    MaskedPredictionLearner,
    MaskedPredictionNet,
    NetConfig,
    NumericsError,
    SyntheticLearner,
)
from .masking import (
    DEFAULT_BLOCKS,
    DEFAULT_RATIOS,
    MaskScheme,
    MaskingPool,
    block_mask,
    goal_mask,
    prompt_mask,
    random_autoregressive_mask,
    random_mask,
)
from .scheduler import (
    MetricsRecord,
    ProgressSnapshot,
    SchedulerState,
    baseline_next_scheme,
    compute_target_loss,
    curriculum_step,
    init_scheduler,
    sampling_distribution,
    scale_reward,
    update_weights,
)

__version__ = "0.1.0"
