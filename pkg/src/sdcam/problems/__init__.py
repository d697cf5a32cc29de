"""Built-in problem families: box-constrained QCQP with an lp penalty, MIMO
signal detection, and an MLP fitting problem with an lp sample loss."""

from .qcqp import (
    QcqpInstance,
    qcqp_generate,
    qcqp_problem,
    qcqp_initial_point,
    relative_feasibility,
)
from .mimo import MimoInstance, mimo_generate, mimo_problem, mimo_initial_point
from .mlp import (
    MlpInstance,
    mlp_generate,
    mlp_problem,
    mlp_initial_point,
    mlp_sup_abs_fg,
)
from .mnist_idx import read_idx, IdxData
from .io import save_instance, load_instance

__all__ = [
    "QcqpInstance",
    "qcqp_generate",
    "qcqp_problem",
    "qcqp_initial_point",
    "relative_feasibility",
    "MimoInstance",
    "mimo_generate",
    "mimo_problem",
    "mimo_initial_point",
    "MlpInstance",
    "mlp_generate",
    "mlp_problem",
    "mlp_initial_point",
    "mlp_sup_abs_fg",
    "read_idx",
    "IdxData",
    "save_instance",
    "load_instance",
]
