"""Matrix-free linear operators with adjoints and spectral bounds.

Operators expose forward and adjoint products on vectors or on matrices
(applied column by column), plus bounds on the spectrum of A^T A that the
solvers use to pick provably convergent step sizes and penalties.

Available kinds: explicit dense matrices, the identity, the orthonormal
type-II DCT and its inverse (1-D and separable 2-D), and random
row-orthonormal matrices obtained by orthonormalizing Gaussian rows.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft

__all__ = (
    "LinearOperator",
    "DenseOperator",
    "IdentityOperator",
    "DctOperator",
    "IdctOperator",
    "Idct2dOperator",
    "OperatorBounds",
    "dense",
    "identity",
    "dct",
    "idct",
    "idct2d",
    "gaussian_orthonormal",
    "spectral_bounds",
)

_POWER_ITERS = 1000
_POWER_TOL = 1e-9


@dataclass(frozen=True)
class OperatorBounds:
    """Extreme eigenvalues of A^T A."""

    lambda_max: float
    lambda_min: float

    def __post_init__(self):
        if not 0.0 <= self.lambda_min <= self.lambda_max:
            raise ValueError(
                f"require 0 <= lambda_min <= lambda_max, got "
                f"({self.lambda_max}, {self.lambda_min})"
            )


class LinearOperator:
    """Base class: an m-by-n linear map with forward/adjoint products.

    Subclasses implement ``_matvec``/``_rmatvec`` on 1-D arrays or 2-D
    arrays (column-wise). Operators are immutable after construction and
    safe to share across concurrent solves.
    """

    kind = "abstract"
    # True when the rows are orthonormal (A A^T = I); enables closed-form
    # spectral bounds and the inversion-free ADMM x-update.
    row_orthonormal = False

    def __init__(self, rows, cols):
        if rows <= 0 or cols <= 0:
            raise ValueError("operator dimensions must be positive")
        self.rows = int(rows)
        self.cols = int(cols)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def apply(self, x):
        """Forward product A @ x for x of length ``cols`` (or (cols, L))."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.cols:
            raise ValueError(f"operator is {self.shape}, input has leading dim {x.shape[0]}")
        return self._matvec(x)

    def apply_adjoint(self, y):
        """Adjoint product A.T @ y for y of length ``rows`` (or (rows, L))."""
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.rows:
            raise ValueError(f"operator is {self.shape}, input has leading dim {y.shape[0]}")
        return self._rmatvec(y)

    def gram_matrix(self):
        """Dense A^T A; only used for factorizing small non-orthonormal ops."""
        a = self.apply(np.eye(self.cols))
        return a.T @ a

    def _matvec(self, x):
        raise NotImplementedError

    def _rmatvec(self, y):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.rows}x{self.cols} kind={self.kind}>"


class DenseOperator(LinearOperator):
    """Operator backed by an explicit matrix."""

    kind = "dense"

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("dense operator requires a 2-D matrix")
        super().__init__(*matrix.shape)
        self.matrix = matrix

    def _matvec(self, x):
        return self.matrix @ x

    def _rmatvec(self, y):
        return self.matrix.T @ y


class _GaussianOrthonormalOperator(DenseOperator):
    kind = "gaussian-orthonormal"
    row_orthonormal = True


class IdentityOperator(LinearOperator):
    kind = "identity"
    row_orthonormal = True

    def __init__(self, n):
        super().__init__(n, n)

    def _matvec(self, x):
        return x.copy()

    def _rmatvec(self, y):
        return y.copy()


class DctOperator(LinearOperator):
    """Orthonormal type-II DCT along the leading axis; A A^T = I."""

    kind = "dct"
    row_orthonormal = True

    def __init__(self, n):
        super().__init__(n, n)

    def _matvec(self, x):
        return scipy.fft.dct(x, type=2, axis=0, norm="ortho")

    def _rmatvec(self, y):
        return scipy.fft.idct(y, type=2, axis=0, norm="ortho")


class IdctOperator(LinearOperator):
    """Inverse orthonormal type-II DCT (the transpose of ``DctOperator``)."""

    kind = "idct"
    row_orthonormal = True

    def __init__(self, n):
        super().__init__(n, n)

    def _matvec(self, x):
        return scipy.fft.idct(x, type=2, axis=0, norm="ortho")

    def _rmatvec(self, y):
        return scipy.fft.dct(y, type=2, axis=0, norm="ortho")


class Idct2dOperator(LinearOperator):
    """Separable 2-D inverse DCT over an image grid, on vectorized inputs.

    Maps coefficient vectors of length height*width to pixel vectors of the
    same length; columns of a 2-D input are transformed independently.
    """

    kind = "idct2d"
    row_orthonormal = True

    def __init__(self, height, width):
        super().__init__(height * width, height * width)
        self.grid = (int(height), int(width))

    def _as_grid(self, x):
        if x.ndim == 1:
            return x.reshape(self.grid), (self.rows,)
        return x.reshape(self.grid + (x.shape[1],)), (self.rows, x.shape[1])

    def _matvec(self, x):
        g, out_shape = self._as_grid(x)
        return scipy.fft.idctn(g, type=2, axes=(0, 1), norm="ortho").reshape(out_shape)

    def _rmatvec(self, y):
        g, out_shape = self._as_grid(y)
        return scipy.fft.dctn(g, type=2, axes=(0, 1), norm="ortho").reshape(out_shape)


def dense(matrix):
    return DenseOperator(matrix)


def identity(n):
    return IdentityOperator(n)


def dct(n):
    return DctOperator(n)


def idct(n):
    return IdctOperator(n)


def idct2d(height, width):
    return Idct2dOperator(height, width)


def gaussian_orthonormal(rows, cols, seed):
    """Random operator whose rows orthonormally span a random subspace.

    Draws i.i.d. standard-normal rows and orthonormalizes them by modified
    Gram-Schmidt; deterministic for a fixed seed. Requires rows <= cols.
    """
    if rows > cols:
        raise ValueError(f"rows ({rows}) must not exceed cols ({cols})")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((rows, cols))
    for i in range(rows):
        for j in range(i):
            g[i] -= (g[j] @ g[i]) * g[j]
        norm = np.linalg.norm(g[i])
        if norm == 0.0:  # unreachable for Gaussian draws
            raise RuntimeError("degenerate row during orthonormalization")
        g[i] /= norm
    return _GaussianOrthonormalOperator(g)


def _lanczos_extremes(matvec, n):
    """Extreme eigenvalues of a symmetric PSD map by Lanczos iteration.

    Builds a Krylov tridiagonalization with full reorthogonalization and
    stops once the Ritz residuals of both extreme pairs fall below the
    relative tolerance (or the Krylov space saturates, which makes the
    estimates exact). Matrix-free: only matvec products are used.
    """
    import scipy.linalg

    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    basis = [v]
    alphas, betas = [], []
    steps = min(n, _POWER_ITERS)
    for j in range(steps):
        w = matvec(basis[j])
        alphas.append(float(basis[j] @ w))
        for u in basis:  # full reorthogonalization, run twice for safety
            w -= (u @ w) * u
        for u in basis:
            w -= (u @ w) * u
        beta = np.linalg.norm(w)
        evals, evecs = scipy.linalg.eigh_tridiagonal(alphas, betas)
        scale = max(abs(evals[-1]), 1e-30)
        resid = beta * max(abs(evecs[-1, 0]), abs(evecs[-1, -1]))
        if resid <= _POWER_TOL * scale or beta <= 1e-14 * scale or j == n - 1:
            return float(evals[-1]), float(evals[0])
        betas.append(beta)
        basis.append(w / beta)
    raise RuntimeError("eigenvalue iteration did not converge within its budget")


def spectral_bounds(op):
    """Bounds (lambda_max, lambda_min) of A^T A for an operator.

    Row-orthonormal kinds use closed forms: (1, 1) when square, (1, 0)
    when strictly wide (A^T A is then a rank-deficient projection). Other
    kinds are handled matrix-free by Krylov iteration on A^T A.
    """
    if op.row_orthonormal or op.kind == "identity":
        return OperatorBounds(1.0, 1.0 if op.rows == op.cols else 0.0)
    gram = lambda v: op.apply_adjoint(op.apply(v))
    lam_max, lam_min = _lanczos_extremes(gram, op.cols)
    lam_max = max(lam_max, 0.0)
    lam_min = min(max(lam_min, 0.0), lam_max)
    if op.rows < op.cols:
        lam_min = 0.0
    return OperatorBounds(lam_max, lam_min)
