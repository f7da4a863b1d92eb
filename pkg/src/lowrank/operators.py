"""Linear measurement maps ``A: R^{n1 x n2} -> R^m`` and their adjoints.

Two concrete maps are provided:

* :class:`SamplingOperator` reads the entries of a matrix at an index set
  (matrix completion); its adjoint scatters values back into a zero matrix.
* :class:`DenseOperator` applies an explicit ``m x (n1*n2)`` matrix to the
  row-major vectorisation of its input.

All indices are zero-based.
"""
import numpy as np

from .errors import ParameterError, ShapeError
from .linalg import as_matrix

__all__ = [
    "ObservationSet",
    "AffineMap",
    "SamplingOperator",
    "DenseOperator",
    "make_sampling_operator",
    "make_dense_operator",
    "apply",
    "adjoint",
    "as_measurements",
]


class ObservationSet:
    """An ordered set of distinct ``(row, col)`` positions inside ``dims``.

    Parameters
    ----------
    dims : (int, int)
        Matrix dimensions ``(n1, n2)``.
    rows, cols : array_like of int
        Zero-based coordinates. Order is preserved; it fixes the order of
        the measurement vector produced by the sampling operator.
    """

    def __init__(self, dims, rows, cols):
        n1, n2 = (int(d) for d in dims)
        if n1 < 1 or n2 < 1:
            raise ParameterError(f"dims must be positive, got {dims}")
        rows = np.array(rows, dtype=np.int64).ravel()
        cols = np.array(cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise ShapeError("rows and cols must have the same length")
        if rows.size < 1 or rows.size > n1 * n2:
            raise ParameterError(
                f"observation count must be in [1, {n1 * n2}], got {rows.size}"
            )
        if rows.min() < 0 or rows.max() >= n1 or cols.min() < 0 or cols.max() >= n2:
            raise ParameterError(f"index out of range for a {n1}x{n2} matrix")
        flat = rows * n2 + cols
        if np.unique(flat).size != flat.size:
            raise ParameterError("duplicate index pairs in observation set")
        self.dims = (n1, n2)
        self.rows = rows
        self.cols = cols
        self.rows.setflags(write=False)
        self.cols.setflags(write=False)

    @classmethod
    def from_pairs(cls, dims, pairs):
        pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        return cls(dims, pairs[:, 0], pairs[:, 1])

    @classmethod
    def full(cls, dims):
        """Every entry, in row-major order."""
        n1, n2 = dims
        rr, cc = np.divmod(np.arange(n1 * n2), n2)
        return cls(dims, rr, cc)

    @property
    def flat_indices(self):
        return self.rows * self.dims[1] + self.cols

    @property
    def fraction(self):
        return len(self) / (self.dims[0] * self.dims[1])

    def mask(self):
        """Boolean ``n1 x n2`` indicator of the observed entries."""
        out = np.zeros(self.dims, dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def pairs(self):
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    def __len__(self):
        return int(self.rows.size)

    def __eq__(self, other):
        if not isinstance(other, ObservationSet):
            return NotImplemented
        return (
            self.dims == other.dims
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
        )

    def __repr__(self):
        return f"ObservationSet(dims={self.dims}, count={len(self)})"


class AffineMap:
    """Abstract linear map from ``input_dims`` matrices to length-``output_dim`` vectors.

    Subclasses implement ``_forward`` and ``_adjoint``; the public methods
    validate shapes.
    """

    input_dims = (0, 0)
    output_dim = 0

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.input_dims:
            raise ShapeError(f"expected input of shape {self.input_dims}, got {x.shape}")
        return self._forward(x)

    def adjoint(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.output_dim,):
            raise ShapeError(f"expected vector of length {self.output_dim}, got {y.shape}")
        return self._adjoint(y)

    def __call__(self, x):
        return self.apply(x)

    def _forward(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError


class SamplingOperator(AffineMap):
    """Entry-sampling map ``X -> (X[i, j] for (i, j) in obs)``.

    ``adjoint(apply(X))`` is the orthogonal projection onto the observed
    entries.
    """

    def __init__(self, obs):
        self.obs = obs
        self.input_dims = obs.dims
        self.output_dim = len(obs)
        self._flat = obs.flat_indices

    def _forward(self, x):
        return x.ravel()[self._flat].copy()

    def _adjoint(self, y):
        out = np.zeros(self.input_dims[0] * self.input_dims[1])
        out[self._flat] = y
        return out.reshape(self.input_dims)

    def __repr__(self):
        return f"SamplingOperator({self.obs!r})"


class DenseOperator(AffineMap):
    """Explicit map ``X -> a @ vec(X)`` with row-major ``vec``."""

    def __init__(self, a, dims):
        a = as_matrix(a, "operator matrix").copy()
        n1, n2 = (int(d) for d in dims)
        if a.shape[1] != n1 * n2:
            raise ShapeError(
                f"operator matrix needs {n1 * n2} columns for {n1}x{n2} inputs, "
                f"got {a.shape[1]}"
            )
        self.matrix = a
        self.matrix.setflags(write=False)
        self.input_dims = (n1, n2)
        self.output_dim = a.shape[0]

    def _forward(self, x):
        return self.matrix @ x.ravel()

    def _adjoint(self, y):
        return (self.matrix.T @ y).reshape(self.input_dims)

    def __repr__(self):
        return f"DenseOperator(m={self.output_dim}, dims={self.input_dims})"


def make_sampling_operator(obs):
    return SamplingOperator(obs)


def make_dense_operator(a, dims):
    return DenseOperator(a, dims)


def apply(op, x):
    return op.apply(x)


def adjoint(op, y):
    return op.adjoint(y)


def as_measurements(b, op=None):
    """Validate a measurement vector (1-D, finite, matching ``op.output_dim``)."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1:
        raise ShapeError(f"measurements must be 1-D, got shape {b.shape}")
    if op is not None and b.shape[0] != op.output_dim:
        raise ShapeError(
            f"operator produces {op.output_dim} measurements, got {b.shape[0]}"
        )
    if not np.all(np.isfinite(b)):
        raise ValueError("measurements contain non-finite values")
    return b
