from .average import AvgParams, avg_forward, avg_vjp
from .base import fd_vjp, forward, forward_ctx, softmax, vjp
from .factory import METHODS, init_params, random_params
from .head import dynamic_head, dynamic_head_vjp, head_matrix, head_matrix_vjp, rms_norm
from .orthostochastic import (
    GoParams, UnitaryGoParams, cayley, go_forward, go_vjp, phi_project, skew_embed,
    skew_from_square, unitary_go_forward,
)
from .permutations import (
    KromParams, LiteParams, default_factor_sizes, krom_forward, krom_vjp, lite_forward, lite_vjp,
)
from .sinkhorn import LINEAR_EPS, SkParams, sk_forward, sk_vjp

__all__ = [
    "AvgParams", "GoParams", "KromParams", "LINEAR_EPS", "LiteParams", "METHODS", "SkParams",
    "UnitaryGoParams", "avg_forward", "avg_vjp", "cayley", "default_factor_sizes",
    "dynamic_head", "dynamic_head_vjp", "fd_vjp", "forward", "forward_ctx", "go_forward",
    "go_vjp", "head_matrix", "head_matrix_vjp", "init_params", "krom_forward", "krom_vjp",
    "lite_forward", "lite_vjp", "phi_project", "random_params", "rms_norm", "sk_forward",
    "sk_vjp", "skew_embed", "skew_from_square", "softmax", "unitary_go_forward", "vjp",
]
