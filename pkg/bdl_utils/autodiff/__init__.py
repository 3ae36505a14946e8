from .tensor import (  # noqa: F401
    Tensor, Tape, TapeNode, ShapeError, DomainError, NumericError,
    as_tensor, elementwise, matmul, backward, finite_diff_check,
)
