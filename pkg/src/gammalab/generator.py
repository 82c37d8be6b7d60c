"""Finite-volume generator ``L = Δ + ∇V·∇`` and its heat semigroup."""

from __future__ import annotations

import threading
from functools import cached_property

import numpy as np
from scipy import linalg

from .core import Grid, NodeSet, WeightedMeasure, check_field, normalize_potential


class Generator:
    """Discretely self-adjoint generator on a grid.

    The operator is stored through its symmetrization: with ``d = sqrt(w)``
    (``w`` the normalized cell weights of ``mu``) the matrix of ``L`` is
    ``D^{-1} S D`` for the symmetric ``S``.  Eigenpairs of ``S`` are computed
    once, on first use.

    Attributes
    ----------
    nodes : NodeSet
        The unknowns (all nodes, or the interior of a Dirichlet interval).
    V : ndarray
        Normalized potential on the unknowns, ``e^{V} vol`` summing to one.
    mu : WeightedMeasure
    sym : ndarray
        The symmetric matrix ``S``.
    bc : str
        Boundary tag, equal to the grid kind.
    preserves_constants : bool
        Whether ``L1 = 0``; false for the plain Dirichlet restriction.
    """

    def __init__(self, nodes: NodeSet, V, mu: WeightedMeasure, sym, bc: str, eig=None, preserves_constants=True):
        self.nodes = nodes
        self.V = np.asarray(V, dtype=float)
        self.mu = mu
        self.sym = np.asarray(sym, dtype=float)
        self.bc = bc
        self.preserves_constants = preserves_constants
        self._lock = threading.Lock()
        self._eig = eig

    @property
    def grid(self) -> Grid:
        return self.nodes.grid

    @property
    def shape(self):
        return self.nodes.shape

    @property
    def sqrt_w(self) -> np.ndarray:
        return np.sqrt(self.mu.weights.ravel())

    @cached_property
    def matrix(self) -> np.ndarray:
        d = self.sqrt_w
        return self.sym * (d[None, :] / d[:, None])

    @property
    def eig(self):
        """``(lam, U)`` with ``S = U diag(lam) U^T``, ``lam`` ascending."""
        if self._eig is None:
            with self._lock:
                if self._eig is None:
                    self._eig = linalg.eigh(self.sym)
        return self._eig

    def apply(self, f) -> np.ndarray:
        """``Lf`` for a field on the unknowns."""
        f = np.asarray(f, dtype=float)
        return (self.matrix @ f.ravel()).reshape(self.shape)

    def evolve(self, f, times) -> np.ndarray:
        """``P_t f`` for each ``t`` in ``times``; result has a leading time axis."""
        f = check_field(f, self.shape, "f")
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if np.any(times < 0):
            raise ValueError("semigroup times must be nonnegative")
        if self.preserves_constants and np.all(f == f.flat[0]):
            # L annihilates constants; skip the roundoff of the spectral round trip
            return np.broadcast_to(f, (len(times), *self.shape)).copy()
        lam, U = self.eig
        d = self.sqrt_w
        coef = U.T @ (d * f.ravel())
        out = np.empty((len(times), *self.shape))
        for k, t in enumerate(times):
            if t == 0:
                out[k] = f
            else:
                out[k] = ((U @ (np.exp(t * lam) * coef)) / d).reshape(self.shape)
        return out

    def __repr__(self):
        return f"Generator(bc={self.bc!r}, shape={self.shape})"


def build_generator(grid: Grid, V) -> Generator:
    """Assemble the finite-volume generator for potential ``V`` on ``grid``.

    ``(Lf)_i = (1/w_i) sum_j a_ij (f_j - f_i)`` with face conductances
    ``a_ij = e^{(V_i+V_j)/2} * face_area / h``.  Periodic faces wrap, Neumann
    interval ends carry no flux, and on ``interval_dirichlet`` grids the
    operator is restricted to interior nodes with ``f = 0`` on the boundary.
    """
    V = check_field(V, grid.shape, "V")
    if grid.kind == "interval_dirichlet":
        return _build_dirichlet(grid, V)

    nodes = NodeSet.full(grid)
    Vn, mu = normalize_potential(V, grid)
    size = grid.size
    idx = np.arange(size).reshape(grid.shape)
    A = np.zeros((size, size))
    vol = float(np.prod(grid.spacings)) if grid.periodic else None
    for axis, dx in enumerate(grid.spacings):
        if grid.periodic:
            left = idx.ravel()
            right = np.roll(idx, -1, axis=axis).ravel()
            # face area over distance, per unit cell volume
            coeff = vol / dx**2
        else:
            left, right = idx[:-1], idx[1:]
            coeff = 1.0 / dx
        Vf = Vn.ravel()
        a = np.exp(0.5 * (Vf[left] + Vf[right])) * coeff
        np.add.at(A, (left, right), a)
        np.add.at(A, (right, left), a)
    A[np.diag_indices(size)] = -A.sum(axis=1)
    # normalized weights carry the same shift as Vn, so a_ij / w_i is unchanged
    return _from_graph(nodes, Vn, mu, A, grid.kind)


def _build_dirichlet(grid: Grid, V) -> Generator:
    nodes = NodeSet.interior(grid)
    Vn, mu = normalize_potential(V[1:-1], grid, volumes=nodes.volumes)
    Vb = V - (V[1] - Vn[0])  # same shift, boundary values kept for the end faces
    a = np.exp(0.5 * (Vb[:-1] + Vb[1:])) / grid.h  # face between nodes k, k+1
    m = grid.n - 2
    A = np.zeros((m, m))
    i = np.arange(m - 1)
    A[i, i + 1] = A[i + 1, i] = a[1:-1]
    A[np.arange(m), np.arange(m)] = -(a[:-1] + a[1:])
    return _from_graph(nodes, Vn, mu, A, grid.kind, preserves_constants=False)


def _from_graph(nodes, Vn, mu, A, bc, preserves_constants=True) -> Generator:
    d = np.sqrt(mu.weights.ravel())
    S = A / np.outer(d, d)
    S = 0.5 * (S + S.T)
    gen = Generator(nodes, Vn, mu, S, bc, preserves_constants=preserves_constants)
    # keep the direct finite-volume form; it has exact zero row sums
    gen.__dict__["matrix"] = A / mu.weights.ravel()[:, None]
    return gen


def apply_semigroup(gen: Generator, f, t: float) -> np.ndarray:
    """``P_t f = D^{-1} U e^{t Λ} U^T D f`` from the symmetric eigendecomposition."""
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"time must be finite and nonnegative, got {t}")
    return gen.evolve(f, [t])[0]


def symmetry_residual(gen: Generator, f, g) -> float:
    """``|∫ f Lg dμ - ∫ g Lf dμ|``."""
    f = check_field(f, gen.shape, "f")
    g = check_field(g, gen.shape, "g")
    w = gen.mu.weights
    return abs(float(np.sum(w * f * gen.apply(g)) - np.sum(w * g * gen.apply(f))))
