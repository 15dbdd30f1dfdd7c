"""Minimal neural-network core: tensors with reverse-mode autodiff,
dense layers, optimizers, and seeded random streams."""

from .layers import Dense, Embedding, Parameter, dense_forward
from .optim import Adam, NAdam, RMSprop, make_optimizer
from .rng import Rng
from .tensor import (
    Tensor,
    activation,
    add,
    as_tensor,
    concat,
    default_dtype,
    elu,
    grad_enabled,
    logsumexp,
    matmul,
    mul,
    no_grad,
    pick,
    power,
    relu,
    softplus,
    sqrt,
    take,
    tmean,
    tsum,
    use_dtype,
)

__all__ = [
    "Adam",
    "Dense",
    "Embedding",
    "NAdam",
    "Parameter",
    "RMSprop",
    "Rng",
    "Tensor",
    "activation",
    "add",
    "as_tensor",
    "concat",
    "default_dtype",
    "dense_forward",
    "elu",
    "grad_enabled",
    "logsumexp",
    "make_optimizer",
    "matmul",
    "mul",
    "no_grad",
    "pick",
    "power",
    "relu",
    "softplus",
    "sqrt",
    "take",
    "tmean",
    "tsum",
    "use_dtype",
]
