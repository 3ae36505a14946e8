"""
Feedforward networks over a flat parameter vector.

Each layer ``i`` owns a ``(d_{i-1} + 1) x d_i`` block of the flat vector. Row 0 of the block
holds the bias, which multiplies the constant input ``x_0 = 1``; rows ``1..d_{i-1}`` hold the
weights. Priors therefore act on weights and biases alike.
"""
from dataclasses import dataclass

import numpy as np

from bdl_utils.autodiff import tensor as ops
from bdl_utils.autodiff.tensor import Tensor, ShapeError, as_tensor


def _identity(z):
    return z


# Activation catalog. New tags only need an entry here.
ACTIVATIONS = {
    'tanh': ops.tanh,
    'identity': _identity,
    'softmax': ops.softmax_rows,
}


@dataclass(frozen=True)
class NetworkSpec:
    """
    Architecture of a feedforward network.

    Parameters
    ----------
    widths : tuple of int
        Layer widths ``(d_0, d_1, ..., d_K)``; ``d_0`` is the input and ``d_K`` the output dimension.
    activations : tuple of str
        One activation tag per layer (``K`` entries). ``softmax`` is only allowed on the last layer.
    """
    widths: tuple
    activations: tuple

    def __post_init__(self):
        object.__setattr__(self, 'widths', tuple(int(w) for w in self.widths))
        object.__setattr__(self, 'activations', tuple(str(a) for a in self.activations))
        if len(self.widths) < 2:
            raise ValueError(f"A network needs at least one layer, got widths {list(self.widths)}")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"All layer widths must be at least 1, got {list(self.widths)}")
        if len(self.activations) != self.n_layers:
            raise ValueError(
                f"Expected {self.n_layers} activations for widths {list(self.widths)}, got {len(self.activations)}"
            )
        for i, act in enumerate(self.activations):
            if act not in ACTIVATIONS:
                raise ValueError(f"Unknown activation {act!r}. Supported: {', '.join(ACTIVATIONS)}.")
            if act == 'softmax' and i != self.n_layers - 1:
                raise ValueError("softmax is only permitted on the final layer")

    @classmethod
    def build(cls, widths, hidden='tanh', output='identity'):
        """Convenience constructor: one activation for all hidden layers, one for the output layer."""
        widths = tuple(widths)
        return cls(widths, (hidden,) * (len(widths) - 2) + (output,))

    @property
    def n_layers(self):
        return len(self.widths) - 1

    @property
    def n_inputs(self):
        return self.widths[0]

    @property
    def n_outputs(self):
        return self.widths[-1]

    def layer_shapes(self):
        """Shapes ``(d_{i-1} + 1, d_i)`` of the per-layer blocks."""
        return [(d_in + 1, d_out) for d_in, d_out in zip(self.widths[:-1], self.widths[1:])]

    def layer_slices(self):
        """Non-overlapping ``(start, stop)`` offsets of each layer block in the flat vector."""
        slices, start = [], 0
        for rows, cols in self.layer_shapes():
            slices.append((start, start + rows * cols))
            start += rows * cols
        return slices

    def fan_in(self):
        """Per-parameter fan-in ``d_{i-1}`` of the layer each flat entry belongs to."""
        return np.concatenate([np.full(r * c, r - 1, dtype=float) for r, c in self.layer_shapes()])


def param_count(spec):
    """
    Number of parameters of a network, biases included.

    Parameters
    ----------
    spec : NetworkSpec
        The architecture.

    Returns
    -------
    count : int
        ``sum_i (d_{i-1} + 1) * d_i``.
    """
    return sum(rows * cols for rows, cols in spec.layer_shapes())


@dataclass(frozen=True)
class FlatParams:
    """
    A flat parameter vector tied to its architecture.

    Parameters
    ----------
    spec : NetworkSpec
        The architecture.
    flat : Tensor
        All parameters, layer blocks laid out consecutively in row-major order.
    """
    spec: NetworkSpec
    flat: Tensor

    def __post_init__(self):
        flat = as_tensor(self.flat)
        if flat.ndim != 1 or flat.size != param_count(self.spec):
            raise ShapeError(
                f"Expected a flat vector of {param_count(self.spec)} parameters, got shape {flat.shape}"
            )
        object.__setattr__(self, 'flat', flat)

    @classmethod
    def zeros(cls, spec):
        return cls(spec, Tensor(np.zeros(param_count(spec))))

    def layer(self, i):
        """The ``(d_{i-1} + 1) x d_i`` block of layer ``i`` (0-based), bias in row 0."""
        start, stop = self.spec.layer_slices()[i]
        return ops.block(self.flat, start, stop, self.spec.layer_shapes()[i])

    def weights(self, i):
        return self.layer(i).data[1:]

    def biases(self, i):
        return self.layer(i).data[0]


def init_params(spec, rng):
    """
    Draws initial parameters from a zero-mean Gaussian with standard deviation ``1/sqrt(fan_in)``.

    Returns
    -------
    flat : np.ndarray
        A vector of length :func:`param_count`.
    """
    return rng.standard_normal(param_count(spec)) / np.sqrt(spec.fan_in())


def forward(spec, params, x, return_logits=False):
    """
    Evaluates the network.

    Parameters
    ----------
    spec : NetworkSpec
        The architecture.
    params : FlatParams, Tensor or array_like
        The flat parameter vector. Tracked tensors keep the computation differentiable.
    x : Tensor or array_like
        Inputs of shape ``(batch, d_0)``.
    return_logits : bool, Optional
        If True, a final softmax layer is skipped and its logits are returned. The default is False.

    Returns
    -------
    out : Tensor
        Outputs of shape ``(batch, d_K)``.
    """
    flat = params.flat if isinstance(params, FlatParams) else as_tensor(params)
    if flat.ndim != 1 or flat.size != param_count(spec):
        raise ShapeError(f"Expected {param_count(spec)} parameters for widths {list(spec.widths)}, got {flat.shape}")
    h = as_tensor(x)
    if h.ndim != 2 or h.shape[1] != spec.n_inputs:
        raise ShapeError(f"Expected inputs of shape (batch, {spec.n_inputs}), got {h.shape}")

    last = spec.n_layers - 1
    for i, ((start, stop), shape) in enumerate(zip(spec.layer_slices(), spec.layer_shapes())):
        z = ops.matmul(ops.prepend_ones(h), ops.block(flat, start, stop, shape))
        act = spec.activations[i]
        h = z if (i == last and act == 'softmax' and return_logits) else ACTIVATIONS[act](z)
    return h


def softmax_rows(z):
    """Max-shifted row softmax; see :func:`bdl_utils.autodiff.tensor.softmax_rows`."""
    return ops.softmax_rows(z)
