"""Style-agnostic reinforcement learning: numpy-facing core bindings."""

from ._core import (
    Env,
    __version__,
    adain,
    analyze,
    channel_stats,
    default_config,
    eval_run,
    gae,
    gridworld_optimal_return,
    instance_norm,
    style_mix,
    style_perturb,
    style_pool_ids,
    train,
)

__all__ = [
    "Env",
    "__version__",
    "adain",
    "analyze",
    "channel_stats",
    "default_config",
    "eval_run",
    "gae",
    "gridworld_optimal_return",
    "instance_norm",
    "style_mix",
    "style_perturb",
    "style_pool_ids",
    "train",
]
