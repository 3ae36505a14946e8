"""
Dense float64 tensors with define-by-run reverse-mode differentiation.

Every operation in this module computes its value eagerly with numpy. When one of
its inputs was created under an active :class:`Tape`, the operation is also
recorded on that tape together with a closure that maps the gradient of the output
to the gradients of the inputs (a vector-Jacobian product). :func:`backward` then
walks the tape in reverse creation order.
"""
import math
import logging
import numpy as np
from scipy.special import expit

logger = logging.getLogger(__name__)

ELEMENTWISE_TAGS = ('add', 'sub', 'mul', 'div', 'exp', 'ln', 'tanh', 'square', 'softplus')
BINARY_TAGS = ('add', 'sub', 'mul', 'div')


class ShapeError(ValueError):
    """Error raised when operand shapes do not conform."""


class DomainError(ValueError):
    """Error raised when an operation is evaluated outside of its domain."""


class NumericError(ArithmeticError):
    """Error raised when finite inputs produce a non-finite result."""


class TapeNode:
    """
    One recorded operation.

    Parameters
    ----------
    op : str
        The operation tag, e.g. ``'matmul'`` or ``'leaf'``.
    inputs : tuple
        Indices of the input nodes on the same tape (``None`` for untracked constants).
        Inputs always precede the node, so the tape is acyclic by construction.
    value : np.ndarray
        The cached forward value.
    vjp : callable or None
        Maps the output gradient to a tuple of input gradients. ``None`` for leaves.
    """
    __slots__ = ('op', 'inputs', 'value', 'vjp')

    def __init__(self, op, inputs, value, vjp):
        self.op = op
        self.inputs = inputs
        self.value = value
        self.vjp = vjp

    def __repr__(self):
        return f"TapeNode(op={self.op!r}, inputs={self.inputs}, shape={self.value.shape})"


class Tape:
    """
    A gradient tape. Operations are recorded only while the tape is entered as a context manager.

    Example
    -------
    >>> with Tape() as tape:
    ...     x = tape.watch(3.0)
    ...     y = x * x
    >>> tape.gradient(y, [x])[0].item()
    6.0
    """

    def __init__(self):
        self.nodes = []
        self.leaves = []
        self.active = False

    def __enter__(self):
        self.active = True
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.active = False

    def __len__(self):
        return len(self.nodes)

    def _record(self, op, inputs, value, vjp):
        self.nodes.append(TapeNode(op, inputs, value, vjp))
        return len(self.nodes) - 1

    def watch(self, value):
        """
        Registers a new leaf tensor on this tape.

        Parameters
        ----------
        value : array_like or Tensor
            The value of the leaf. It is copied.

        Returns
        -------
        leaf : Tensor
            A tracked tensor whose gradient is reported by :func:`backward`.
        """
        leaf = Tensor(value.data if isinstance(value, Tensor) else value)
        leaf._tape = self
        leaf._node = self._record('leaf', (), leaf._data, None)
        self.leaves.append(leaf)
        return leaf

    def gradient(self, root, sources):
        """
        Returns the gradients of a scalar root with respect to the given leaves, in order.
        """
        grads = backward(root)
        return [grads[leaf] for leaf in sources]


class Tensor:
    """
    An immutable dense array of 64-bit reals.

    Parameters
    ----------
    data : array_like
        Values to copy. Scalars give a tensor of shape ``()``.
    """
    __slots__ = ('_data', '_tape', '_node')
    __array_ufunc__ = None  # numpy operands on the left defer to our reflected operators

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        arr.setflags(write=False)
        self._data = arr
        self._tape = None
        self._node = None

    @classmethod
    def _wrap(cls, arr):
        out = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.float64)
        arr.setflags(write=False)
        out._data = arr
        out._tape = None
        out._node = None
        return out

    @property
    def data(self):
        return self._data

    @property
    def shape(self):
        return self._data.shape

    @property
    def ndim(self):
        return self._data.ndim

    @property
    def size(self):
        return self._data.size

    @property
    def tracked(self):
        return self._tape is not None and self._tape.active

    def numpy(self):
        return self._data.copy()

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def item(self):
        return float(self._data.reshape(-1)[0]) if self._data.size == 1 else self._data.item()

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        flag = ', tracked' if self._tape is not None else ''
        return f"Tensor({np.array2string(self._data, precision=6)}, shape={self.shape}{flag})"

    def __add__(self, other):
        return elementwise('add', self, other)

    def __radd__(self, other):
        return elementwise('add', other, self)

    def __sub__(self, other):
        return elementwise('sub', self, other)

    def __rsub__(self, other):
        return elementwise('sub', other, self)

    def __mul__(self, other):
        return elementwise('mul', self, other)

    def __rmul__(self, other):
        return elementwise('mul', other, self)

    def __truediv__(self, other):
        return elementwise('div', self, other)

    def __rtruediv__(self, other):
        return elementwise('div', other, self)

    def __neg__(self):
        return elementwise('mul', self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def sum(self, axis=None):
        return reduce_sum(self, axis=axis)

    def reshape(self, shape):
        return reshape(self, shape)


def as_tensor(value):
    """Returns ``value`` unchanged if it is a :class:`Tensor`, otherwise a constant tensor copy."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _apply(op, inputs, value, vjp):
    """Wraps a forward value and records it on the first active tape found among ``inputs``."""
    if not np.all(np.isfinite(value)) and all(np.all(np.isfinite(t._data)) for t in inputs):
        raise NumericError(f"{op}: finite inputs produced a non-finite result (numeric overflow)")
    out = Tensor._wrap(value)
    tape = next((t._tape for t in inputs if t.tracked), None)
    if tape is not None:
        node_inputs = tuple(t._node if t._tape is tape else None for t in inputs)
        out._tape = tape
        out._node = tape._record(op, node_inputs, out._data, vjp)
    return out


def _unbroadcast(grad, shape):
    # Only scalar-with-tensor broadcasting is supported, so a mismatch means a size-1 operand.
    if grad.shape == shape:
        return grad
    return np.full(shape, grad.sum())


def _check_binary(tag, a, b):
    if a.shape == b.shape or a.size == 1 or b.size == 1:
        return
    raise ShapeError(f"{tag}: shapes {a.shape} and {b.shape} are not equal and neither operand is a scalar")


def elementwise(tag, a, b=None):
    """
    Applies an elementwise operation.

    Parameters
    ----------
    tag : str
        One of ``add, sub, mul, div`` (binary) or ``exp, ln, tanh, square, softplus`` (unary).
    a : Tensor or array_like
        First operand.
    b : Tensor or array_like, Optional
        Second operand for binary tags. Shapes must be equal or one operand must be a scalar.

    Returns
    -------
    out : Tensor
        The result, recorded on the active tape if any input is tracked.
    """
    if tag not in ELEMENTWISE_TAGS:
        raise ValueError(f"Unknown elementwise operation {tag!r}. Supported: {', '.join(ELEMENTWISE_TAGS)}.")
    a = as_tensor(a)
    if tag in BINARY_TAGS:
        if b is None:
            raise ValueError(f"{tag} needs two operands")
        b = as_tensor(b)
        _check_binary(tag, a, b)
        x, y = a._data, b._data
        with np.errstate(all='ignore'):
            if tag == 'add':
                value = x + y

                def vjp(g):
                    return _unbroadcast(g, x.shape), _unbroadcast(g, y.shape)
            elif tag == 'sub':
                value = x - y

                def vjp(g):
                    return _unbroadcast(g, x.shape), _unbroadcast(-g, y.shape)
            elif tag == 'mul':
                value = x * y

                def vjp(g):
                    return _unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)
            else:
                if np.any(y == 0):
                    raise DomainError("div: division by zero")
                value = x / y

                def vjp(g):
                    return _unbroadcast(g / y, x.shape), _unbroadcast(-g * x / (y * y), y.shape)
        return _apply(tag, (a, b), value, vjp)

    if b is not None:
        raise ValueError(f"{tag} takes a single operand")
    x = a._data
    with np.errstate(all='ignore'):
        if tag == 'exp':
            value = np.exp(x)

            def vjp(g):
                return (g * value,)
        elif tag == 'ln':
            if np.any(x <= 0):
                raise DomainError(f"ln: input must be positive, got minimum {x.min()!r}")
            value = np.log(x)

            def vjp(g):
                return (g / x,)
        elif tag == 'tanh':
            value = np.tanh(x)

            def vjp(g):
                return (g * (1.0 - value * value),)
        elif tag == 'square':
            value = x * x

            def vjp(g):
                return (2.0 * g * x,)
        else:
            value = np.logaddexp(0.0, x)

            def vjp(g):
                return (g * expit(x),)
    return _apply(tag, (a,), value, vjp)


def add(a, b):
    return elementwise('add', a, b)


def sub(a, b):
    return elementwise('sub', a, b)


def mul(a, b):
    return elementwise('mul', a, b)


def div(a, b):
    return elementwise('div', a, b)


def exp(a):
    return elementwise('exp', a)


def ln(a):
    return elementwise('ln', a)


def tanh(a):
    return elementwise('tanh', a)


def square(a):
    return elementwise('square', a)


def softplus(a):
    return elementwise('softplus', a)


def matmul(a, b):
    """
    Matrix product of an ``m x k`` and a ``k x n`` tensor.

    Parameters
    ----------
    a : Tensor or array_like
        Left operand, 2-D.
    b : Tensor or array_like
        Right operand, 2-D.

    Returns
    -------
    out : Tensor
        The ``m x n`` product.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    x, y = a._data, b._data
    with np.errstate(all='ignore'):
        value = x @ y

    def vjp(g):
        return g @ y.T, x.T @ g

    return _apply('matmul', (a, b), value, vjp)


def reduce_sum(a, axis=None):
    """Sums all entries (``axis=None``) or along one axis."""
    a = as_tensor(a)
    x = a._data
    value = x.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.full(x.shape, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _apply('sum', (a,), value, vjp)


def fsum(a):
    """
    Sums all entries with :func:`math.fsum`. The result is correctly rounded and therefore
    independent of the order of the entries.
    """
    a = as_tensor(a)
    x = a._data
    value = np.array(math.fsum(x.ravel()))

    def vjp(g):
        return (np.full(x.shape, float(g)),)

    return _apply('fsum', (a,), value, vjp)


def reshape(a, shape):
    a = as_tensor(a)
    x = a._data
    try:
        value = x.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} into {tuple(shape)}") from None

    def vjp(g):
        return (g.reshape(x.shape),)

    return _apply('reshape', (a,), value, vjp)


def block(a, start, stop, shape):
    """
    Takes ``a.flat[start:stop]`` and reshapes it to ``shape``.

    Used to slice per-layer weight blocks out of a flat parameter vector.
    """
    a = as_tensor(a)
    x = a._data.reshape(-1)
    if not 0 <= start <= stop <= x.size:
        raise ShapeError(f"block: slice [{start}:{stop}] is out of range for {x.size} entries")
    if int(np.prod(shape)) != stop - start:
        raise ShapeError(f"block: slice of length {stop - start} cannot be reshaped into {tuple(shape)}")
    value = x[start:stop].reshape(shape)
    full_shape = a.shape

    def vjp(g):
        grad = np.zeros(x.size)
        grad[start:stop] = g.reshape(-1)
        return (grad.reshape(full_shape),)

    return _apply('block', (a,), value, vjp)


def prepend_ones(a):
    """Adds a leading column of ones to a 2-D tensor (the ``x_0 = 1`` bias convention)."""
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"prepend_ones: expected a 2-D tensor, got shape {a.shape}")
    x = a._data
    value = np.hstack([np.ones((x.shape[0], 1)), x])

    def vjp(g):
        return (g[:, 1:],)

    return _apply('prepend_ones', (a,), value, vjp)


def softmax_rows(a):
    """
    Row-wise softmax with max-shift, so every row sums to one and large logits do not overflow.
    """
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"softmax_rows: expected a 2-D tensor, got shape {a.shape}")
    x = a._data
    shifted = np.exp(x - x.max(axis=1, keepdims=True))
    value = shifted / shifted.sum(axis=1, keepdims=True)

    def vjp(g):
        return (value * (g - (g * value).sum(axis=1, keepdims=True)),)

    return _apply('softmax', (a,), value, vjp)


def log_softmax_rows(a):
    """Row-wise log-softmax, computed as ``x - logsumexp(x)`` per row."""
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"log_softmax_rows: expected a 2-D tensor, got shape {a.shape}")
    x = a._data
    m = x.max(axis=1, keepdims=True)
    value = x - m - np.log(np.exp(x - m).sum(axis=1, keepdims=True))
    probs = np.exp(value)

    def vjp(g):
        return (g - probs * g.sum(axis=1, keepdims=True),)

    return _apply('log_softmax', (a,), value, vjp)


def take_rows(a, columns):
    """
    Picks one entry per row: ``out[i] = a[i, columns[i]]``.

    Parameters
    ----------
    a : Tensor
        A 2-D tensor.
    columns : array_like of int
        One column index per row.
    """
    a = as_tensor(a)
    columns = np.asarray(columns, dtype=int)
    if a.ndim != 2 or columns.shape != (a.shape[0],):
        raise ShapeError(f"take_rows: {columns.shape} indices do not match a tensor of shape {a.shape}")
    if np.any(columns < 0) or np.any(columns >= a.shape[1]):
        raise IndexError(f"take_rows: column index out of range [0, {a.shape[1]})")
    x = a._data
    rows = np.arange(x.shape[0])
    value = x[rows, columns]

    def vjp(g):
        grad = np.zeros(x.shape)
        grad[rows, columns] = g
        return (grad,)

    return _apply('take_rows', (a,), value, vjp)


def apply_unary(a, fn, dfn, tag='custom'):
    """
    Applies a user-supplied elementwise function with a known derivative.

    Parameters
    ----------
    a : Tensor or array_like
        The input.
    fn : callable
        Maps an ndarray to an ndarray of the same shape.
    dfn : callable
        The elementwise derivative of ``fn``.
    tag : str, Optional
        The operation tag recorded on the tape.
    """
    a = as_tensor(a)
    x = a._data
    value = np.asarray(fn(x), dtype=np.float64)

    def vjp(g):
        return (g * dfn(x),)

    return _apply(tag, (a,), value, vjp)


def backward(root):
    """
    Reverse-mode differentiation of a scalar tensor.

    Parameters
    ----------
    root : Tensor
        A tracked tensor holding a single value.

    Returns
    -------
    grads : dict
        Maps every leaf watched on the root's tape to its gradient (a :class:`Tensor` of the
        leaf's shape). Leaves the root does not depend on map to zeros.
    """
    tape = root._tape
    if tape is None:
        raise ValueError("backward: the root was not recorded on a tape")
    if root.size != 1:
        raise ShapeError(f"backward: the root must be a scalar, got shape {root.shape}")

    pending = {root._node: np.ones(root.shape)}
    leaf_grads = {}
    for idx in range(root._node, -1, -1):
        g = pending.pop(idx, None)
        if g is None:
            continue
        node = tape.nodes[idx]
        if node.vjp is None:
            leaf_grads[idx] = g
            continue
        for inp, inp_grad in zip(node.inputs, node.vjp(g)):
            if inp is None or inp_grad is None:
                continue
            # A value used several times sums its contributions (multivariate chain rule).
            pending[inp] = pending[inp] + inp_grad if inp in pending else inp_grad

    return {
        leaf: Tensor._wrap(leaf_grads[leaf._node]) if leaf._node in leaf_grads else Tensor._wrap(np.zeros(leaf.shape))
        for leaf in tape.leaves
    }


def finite_diff_check(f, x, h=1e-5):
    """
    Compares :func:`backward` against central finite differences.

    Parameters
    ----------
    f : callable
        Maps a :class:`Tensor` to a scalar :class:`Tensor` using the operations of this module.
    x : array_like or Tensor
        The evaluation point.
    h : float, Optional
        The finite-difference step. The default is 1e-5.

    Returns
    -------
    max_err : float
        The maximum over coordinates of ``|a - n| / max(1, |a|, |n|)``.
    """
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    with Tape() as tape:
        xw = tape.watch(x0)
        y = f(xw)
    if isinstance(y, Tensor) and y._tape is tape:
        analytic = backward(y)[xw].data.reshape(-1)
    else:
        analytic = np.zeros(x0.size)

    numeric = np.empty(x0.size)
    for i in range(x0.size):
        xp, xm = x0.copy().reshape(-1), x0.copy().reshape(-1)
        xp[i] += h
        xm[i] -= h
        fp = as_tensor(f(Tensor(xp.reshape(x0.shape)))).item()
        fm = as_tensor(f(Tensor(xm.reshape(x0.shape)))).item()
        numeric[i] = (fp - fm) / (2.0 * h)

    if x0.size == 0:
        return 0.0
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))
