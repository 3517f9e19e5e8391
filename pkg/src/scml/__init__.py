"""Metric learning as sparse nonnegative combinations of locally
discriminative rank-one basis elements: global, multi-task, and local
(metric tensor) variants with stochastic proximal solvers and k-NN
evaluation."""

from .basisgen import BasisGenConfig, generate_basis, kmeans, local_fda
from .core import (
    BasisSet,
    Dataset,
    Triplet,
    TripletFeatures,
    basis_projections,
    compose_metric,
    dist_global,
    hinge_triplet_loss,
    triplet_features,
)
from .embed import (
    KpcaModel,
    PcaModel,
    kpca_fit,
    kpca_transform,
    median_bandwidth,
    pca_fit,
    pca_transform,
)
from .evaluate import cross_distances, error_rate, knn_predict, select_beta, split
from .models import (
    GlobalModel,
    LocalModel,
    MultiTaskModel,
    dist_local,
    fit_mt_scml,
    fit_scml_global,
    fit_scml_local,
    local_weights,
    model_from_dict,
    model_to_dict,
    robustness_bound,
)
from .optim import (
    RdaState,
    TrainConfig,
    TrainingTrace,
    fobos_solve,
    global_objective,
    local_objective,
    multitask_objective,
    prox_fobos_l21,
    rda_solve,
    rda_step_l1_nonneg,
    rda_step_l21_nonneg,
    subgrad_global,
    subgrad_local,
)
from .triplets import generate_triplets, triplets_to_csv

__version__ = "0.1.0"
