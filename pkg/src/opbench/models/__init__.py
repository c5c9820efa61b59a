"""Model zoo: eleven architectures behind one configure/build/predict
contract."""

from .base import (
    COORD_FREE_FAMILIES,
    FAMILIES,
    MESH_INVARIANT_FAMILIES,
    ModelSpec,
    ModelState,
    build_model,
    count_params,
    load_checkpoint,
    param_hash,
    predict,
    save_checkpoint,
    uses_coordinates,
)
from .cgan import cgan_train_step
from .deeponet import compute_pod_basis, pick_mode_count
from .layers import linear_attention, softmax_attention

__all__ = [
    "COORD_FREE_FAMILIES",
    "FAMILIES",
    "MESH_INVARIANT_FAMILIES",
    "ModelSpec",
    "ModelState",
    "build_model",
    "cgan_train_step",
    "compute_pod_basis",
    "count_params",
    "linear_attention",
    "load_checkpoint",
    "param_hash",
    "pick_mode_count",
    "predict",
    "save_checkpoint",
    "softmax_attention",
    "uses_coordinates",
]
