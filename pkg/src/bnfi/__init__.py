"""Data-free structured filter pruning driven by batch-normalization
statistics, with a built-in inference/training engine for evaluating the
pruning quality end to end."""

from .activations import ActivationFn, eval_activation, identity, leaky_relu, make_activation, relu, swish
from .criteria import CriterionId, ImportanceVector, LayerContext, geometric_median, parse_criterion, rank_channels, score_unit
from .importance import (
    GaussianChannel,
    QuadratureConfig,
    expected_abs_activation,
    folded_normal_mean,
    monte_carlo_importance,
    nonzero_expected_abs_activation,
    relu_importance_closed_form,
    zero_measure,
)
from .ir import (
    Activation,
    BatchNorm,
    Conv2d,
    Flatten,
    GlobalAvgPool,
    InvalidNetworkError,
    Linear,
    NetworkIR,
    Pool,
    PrunableUnit,
    ResidualBlockBegin,
    ResidualBlockEnd,
    count_conv_flops,
    count_conv_params,
    count_flops,
    count_params,
    infer_shapes,
    prunable_units,
    validate,
)
from .models import toy_cnn
from .pruning import PlanEntry, PruningPlan, apply_plan, layer_context, make_plan, uniform_plan
from .search import SearchCfg, SweepReport, SweepRow, bisect_pruning_ratio, search_all_ratios, search_layer_ratio, sweep

__version__ = "0.1.0"
