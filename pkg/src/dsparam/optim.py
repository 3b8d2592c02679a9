"""SGD and Adam on flat parameter vectors, a deterministic full-batch training
loop, and the epochs-to-convergence metric."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLoss, ShapeMismatch
from .params import forward_ctx, vjp
from .sampling import make_rng


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 1000
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


@dataclass
class TrainTrace:
    loss: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    params: object = None

    @property
    def final_loss(self):
        return self.loss[-1]


def _match(params, grad):
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape:
        raise ShapeMismatch(f"params {params.shape} vs grad {grad.shape}")
    return params, grad


def sgd_step(params, grad, lr):
    params, grad = _match(params, grad)
    return params - lr * grad


def adam_step(state, params, grad, config):
    params, grad = _match(params, grad)
    t = state.t + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grad
    v = config.beta2 * state.v + (1.0 - config.beta2) * grad * grad
    m_hat = m / (1.0 - config.beta1 ** t)
    v_hat = v / (1.0 - config.beta2 ** t)
    step = config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
    return AdamState(m, v, t), params - step


def default_objective(task, p):
    B, ctx = forward_ctx(p)
    loss, G = task.loss_grad(B)
    return loss, vjp(p, G, ctx)


def train(task, init, config):
    """Full-batch optimization of ``task`` starting from ``init``.

    ``init`` is a parameter object or a callable taking a numpy Generator
    seeded from ``config.seed``.  Tasks that need more than a mixing matrix
    (for example a learned read-out) provide their own ``objective(p)``;
    otherwise ``task.loss_grad(B)`` is pulled back through the method's vjp.
    The loss and gradient norm are recorded before each update.
    """
    p = init(make_rng(config.seed, 0)) if callable(init) else init
    objective = getattr(task, "objective", None) or (lambda q: default_objective(task, q))
    x = p.flat
    state = AdamState.zeros(x.size)
    trace = TrainTrace()
    for epoch in range(config.epochs):
        loss, g = objective(p)
        if not math.isfinite(loss) or not np.all(np.isfinite(g)):
            raise NonFiniteLoss(f"non-finite loss or gradient at epoch {epoch}")
        trace.loss.append(float(loss))
        trace.grad_norm.append(float(np.linalg.norm(g)))
        if config.optimizer == "adam":
            state, x = adam_step(state, x, g, config)
        else:
            x = sgd_step(x, g, config.lr)
        p = p.replace_flat(x)
    trace.params = p
    return trace


def tail_window(n):
    """Number of trailing epochs averaged into the converged loss."""
    return max(1, math.ceil(0.05 * n), min(10, n // 2))


def epochs_to_convergence(trace, rel=0.05):
    loss = np.asarray(trace.loss if isinstance(trace, TrainTrace) else trace, dtype=np.float64)
    if loss.size == 0:
        raise ValueError("empty trace")
    final = loss[-tail_window(loss.size):].mean()
    return int(np.argmax(loss <= (1.0 + rel) * final))
