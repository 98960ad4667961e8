"""Unified-action-space multi-agent RL toolkit (python surface).

The heavy lifting lives in the compiled extension ``uasrl._core``; this
package re-exports its public names.
"""

from uasrl._core import (  # noqa: F401
    ConfigError,
    ContractError,
    GroupSpec,
    Layout,
    NumericalError,
    PropositionGame,
    Skirmish,
    UnifiedActionSpace,
    analytic_shared_optimum,
    brute_force_shared_optimum,
    build_uas,
    compute_gae,
    dynamic_mask,
    epsilon_schedule,
    evaluate_checkpoint,
    export_plots,
    mask_policy,
    mask_q_argmax,
    run_training,
    run_training_from_string,
    uas_deterministic_optimum,
    verify,
)
from uasrl._core import __version__  # noqa: F401
