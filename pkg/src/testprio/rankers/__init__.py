"""Six prioritization strategies behind one interface."""

from .base import (
    AnnParams,
    ConstantPayload,
    GbdtParams,
    GbdtPayload,
    GbdtTree,
    LrnParams,
    MlpPayload,
    Model,
    ORDERING_KEY,
    RandomParams,
    RankedSuite,
    RankedTest,
    RankerKind,
    RankerParams,
    RocketParams,
    SvmParams,
    SvmPayload,
    PARAM_TYPES,
    apply_tree,
    constant_model,
    default_params,
    deserialize_model,
    params_from_config,
    rank_cycle,
    rank_with_tie_break,
    random_rank,
    rocket_priorities,
    rocket_rank,
    score,
    score_matrix,
    serialize_model,
    with_seed,
)
from .gbdt import fit_gbdt
from .nets import (
    ann_loss_and_grads,
    fit_ann,
    fit_lambdarank,
    lambdarank_cost_and_grads,
)
from .svm import fit_svm

FITTERS = {
    RankerKind.SVM: fit_svm,
    RankerKind.ANN: fit_ann,
    RankerKind.GBDT: fit_gbdt,
    RankerKind.LRN: fit_lambdarank,
}

__all__ = [
    "AnnParams",
    "ConstantPayload",
    "FITTERS",
    "GbdtParams",
    "GbdtPayload",
    "GbdtTree",
    "LrnParams",
    "MlpPayload",
    "Model",
    "ORDERING_KEY",
    "PARAM_TYPES",
    "RandomParams",
    "RankedSuite",
    "RankedTest",
    "RankerKind",
    "RankerParams",
    "RocketParams",
    "SvmParams",
    "SvmPayload",
    "ann_loss_and_grads",
    "apply_tree",
    "constant_model",
    "default_params",
    "deserialize_model",
    "fit_ann",
    "fit_gbdt",
    "fit_lambdarank",
    "fit_svm",
    "lambdarank_cost_and_grads",
    "params_from_config",
    "rank_cycle",
    "rank_with_tie_break",
    "random_rank",
    "rocket_priorities",
    "rocket_rank",
    "score",
    "score_matrix",
    "serialize_model",
    "with_seed",
]
