"""Dirichlet Schrödinger spectra, the ground-state generator, and gap/decay checks.

The ground-state generator ``L = Δ + 2∇log φ₀·∇`` is never discretized
directly: its drift blows up at the boundary.  Instead the Dirichlet
matrix ``H`` of ``-Δ + U`` is conjugated by ``φ₀``, giving the symmetric
form ``S = -H + λ₀ I`` of ``L`` with respect to the weights ``φ₀² h``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import NodeSet, WeightedMeasure, derivative, make_grid
from .entropy import DecayReport, check_decay
from .gamma import GammaContext
from .generator import Generator
from .phi import PhiFunction

MIN_NODES = 256
GROUND_STATE_FLOOR = 1e-12


def _sample(U, x):
    if callable(U):
        out = np.asarray(U(x), dtype=float)
        return np.broadcast_to(out, x.shape).astype(float)
    arr = np.asarray(U, dtype=float)
    if arr.ndim == 0:
        return np.full_like(x, float(arr))
    if arr.shape != x.shape:
        raise ValueError(f"U has shape {arr.shape}, expected {x.shape}")
    return arr


@dataclass(frozen=True)
class Spectrum:
    """Lowest Dirichlet eigenpairs of ``-Δ + U``.

    ``vectors[i]`` is ``φ_i`` on the interior nodes ``x``, with
    ``Σ φ_i² h = 1`` and ``φ₀ > 0``.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    x: np.ndarray
    h: float

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    def to_json(self) -> str:
        return json.dumps({"eigenvalues": [float(v) for v in self.eigenvalues]})


def _dirichlet_tridiagonal(U, domain, n):
    a, b = map(float, domain)
    if not b > a:
        raise ValueError("domain must satisfy a < b")
    grid = make_grid("interval_dirichlet", n, (a, b))
    x = grid.x[1:-1]
    h = grid.h
    diag = 2.0 / h**2 + _sample(U, x)
    off = np.full(len(x) - 1, -1.0 / h**2)
    return grid, x, h, diag, off


def dirichlet_eigs(U, domain=(0.0, 1.0), k: int = 2, n: int = 2048, richardson: bool = False) -> Spectrum:
    """First ``k`` eigenpairs of the 3-point Dirichlet discretization of ``-Δ + U``.

    ``U`` is a callable, a constant, or an array on the interior nodes.  With
    ``richardson=True`` (callable or constant ``U`` only) the eigenvalues are
    extrapolated from this grid and one with half as many cells,
    ``(r²λ_h - λ_H)/(r² - 1)``; eigenvectors always come from the fine grid.
    """
    if n < MIN_NODES:
        raise ValueError(f"n must be at least {MIN_NODES}")
    if not 1 <= k <= n - 2:
        raise ValueError(f"k must be between 1 and n - 2 = {n - 2}")
    grid, x, h, diag, off = _dirichlet_tridiagonal(U, domain, n)
    lam, vec = linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1))
    vec = vec.T / math.sqrt(h)
    # φ₀ positive; higher modes rise off the left boundary
    if vec[0].sum() < 0:
        vec[0] *= -1
    for v in vec[1:]:
        if v[0] < 0:
            v *= -1
    if richardson:
        if not (callable(U) or np.ndim(U) == 0):
            raise ValueError("Richardson extrapolation needs U as a callable or constant")
        nc = (n + 1) // 2
        _, _, hc, dc, oc = _dirichlet_tridiagonal(U, domain, nc)
        lam_c = linalg.eigh_tridiagonal(dc, oc, eigvals_only=True, select="i", select_range=(0, k - 1))
        r2 = (hc / h) ** 2
        lam = (r2 * lam - lam_c) / (r2 - 1)
    if k > 1 and not lam[1] - lam[0] > 0:
        raise ValueError("ground state energy is not simple")
    return Spectrum(np.asarray(lam), vec, x, h)


@dataclass
class GroundStateSystem:
    """Ground state ``(λ₀, φ₀)`` and the generator of ``Δ + 2∇log φ₀·∇`` on ``φ₀² dx``."""

    spectrum: Spectrum
    gen: Generator
    ctx: GammaContext
    diam: float

    @property
    def lambda0(self) -> float:
        return float(self.spectrum.eigenvalues[0])

    @property
    def phi0(self) -> np.ndarray:
        return self.spectrum.vectors[0]

    @property
    def mu(self) -> WeightedMeasure:
        return self.gen.mu


def ground_state_system(U, domain=(0.0, 1.0), n: int = 513) -> GroundStateSystem:
    """Build the intertwined ground-state generator.

    ``P_t f = φ₀⁻¹ e^{-t(H-λ₀)}(φ₀ f)`` is realized by the symmetric matrix
    ``S = -H + λ₀ I`` with weights ``φ₀² h``, whose full eigendecomposition
    is shared with ``H``.  The Γ₂ context carries ``∇V = 2φ₀'/φ₀`` and
    ``V'' = 2(log φ₀)''`` from stencils on the interior nodes.
    """
    if n < MIN_NODES:
        raise ValueError(f"n must be at least {MIN_NODES}")
    grid, x, h, diag, off = _dirichlet_tridiagonal(U, domain, n)
    lam, vec = linalg.eigh_tridiagonal(diag, off)
    if not lam[1] - lam[0] > 0:
        raise ValueError("ground state energy is not simple")
    phi0 = vec[:, 0] / math.sqrt(h)
    if phi0.sum() < 0:
        phi0 = -phi0
        vec[:, 0] *= -1
    if phi0.min() < GROUND_STATE_FLOOR or min(phi0[0], phi0[-1]) < GROUND_STATE_FLOOR:
        raise ValueError(
            f"ground state drops to {phi0.min():.2e} at interior nodes; refine the grid or damp U"
        )
    spectrum = Spectrum(lam[:2].copy(), np.stack([phi0, vec[:, 1] / math.sqrt(h)]), x, h)
    nodes = NodeSet.interior(grid)
    w = phi0**2 * h
    w = w / w.sum()
    mu = WeightedMeasure(grid, w.reshape(nodes.shape))
    V = np.log(w / h)
    S = -np.diag(diag) - np.diag(off, 1) - np.diag(off, -1) + lam[0] * np.eye(len(x))
    gen = Generator(nodes, V, mu, S, grid.kind, eig=(lam[0] - lam, vec))
    log_phi = np.log(phi0)
    ctx = GammaContext(
        gen,
        dV=2 * derivative(log_phi, nodes, 1),
        d2V=2 * derivative(log_phi, nodes, 2),
    )
    return GroundStateSystem(spectrum, gen, ctx, float(domain[1] - domain[0]))


def _check_convex(U, domain, n, tol=1e-10):
    a, b = map(float, domain)
    x = np.linspace(a, b, n)
    u = _sample(U, x)
    second = u[:-2] - 2 * u[1:-1] + u[2:]
    if second.min() < -tol * max(1.0, np.abs(u).max()):
        raise ValueError("U is not convex (negative second difference)")


def fundamental_gap_margin(U, domain=(0.0, 1.0), n: int = 2048, richardson: bool | None = None) -> float:
    """``(λ₁ - λ₀) - 3π²/diam²`` for convex ``U``.

    Richardson extrapolation is on by default whenever ``U`` is callable or
    constant; the raw 3-point gap is low by ``O(h²)``.
    """
    _check_convex(U, domain, n)
    if richardson is None:
        richardson = callable(U) or np.ndim(U) == 0
    spec = dirichlet_eigs(U, domain, 2, n, richardson=richardson)
    diam = float(domain[1] - domain[0])
    return spec.gap - 3 * math.pi**2 / diam**2


def _check_even(Ut, diam, n, tol=1e-12):
    x = np.linspace(0, diam / 2, n)
    lhs, rhs = _sample(Ut, x), _sample(Ut, -x)
    if np.abs(lhs - rhs).max() > tol * max(1.0, np.abs(lhs).max()):
        raise ValueError("modulus Ũ must be even")


def modulus_decay_rate(Utilde, diam: float, n: int = 2048, richardson: bool | None = None) -> float:
    """``4(λ̃₀ - Ũ(0))`` with ``λ̃₀`` the Dirichlet ground energy of ``Ũ`` on ``[-diam/2, diam/2]``."""
    if diam <= 0:
        raise ValueError("diam must be positive")
    _check_even(Utilde, diam, n)
    if richardson is None:
        richardson = callable(Utilde) or np.ndim(Utilde) == 0
    lam0 = dirichlet_eigs(Utilde, (-diam / 2, diam / 2), 1, n, richardson=richardson).eigenvalues[0]
    U0 = float(_sample(Utilde, np.zeros(1))[0])
    return 4 * (float(lam0) - U0)


def log_ground_state_curvature_excess(U, Utilde, domain=(0.0, 1.0), n: int = 513, depth: int = 2) -> float:
    """``max (log φ₀)'' - (Ũ(0) - λ̃₀)`` over interior nodes at least ``depth`` cells from the boundary.

    Both eigenproblems use the same mesh width, so the comparison is between
    like discretizations; a modulus of convexity makes this ``<= O(h²)``.
    """
    gs = ground_state_system(U, domain, n)
    a, b = map(float, domain)
    lam_t = dirichlet_eigs(Utilde, (-(b - a) / 2, (b - a) / 2), 1, n).eigenvalues[0]
    U0 = float(_sample(Utilde, np.zeros(1))[0])
    curv = derivative(np.log(gs.phi0), gs.gen.nodes, 2)
    # node index 0 is one cell from the boundary
    inner = curv[depth - 1 : len(curv) - depth + 1]
    return float(inner.max() - (U0 - lam_t))


def check_schrodinger_decay(
    U, Utilde, phi: PhiFunction, f, times, n: int = 513, domain=(0.0, 1.0)
) -> DecayReport:
    """Measured ``q_Φ(P_t f)`` under the ground-state semigroup against ``e^{-t·rate} q_Φ(f)``.

    ``rate = modulus_decay_rate(Ũ, diam)``; ``f`` is a callable or an array on
    the interior nodes.
    """
    gs = ground_state_system(U, domain, n)
    if callable(f):
        f = f(gs.spectrum.x)
    rate = modulus_decay_rate(Utilde, gs.diam, n)
    return check_decay(gs.ctx, phi, np.asarray(f, dtype=float), rate / 2, math.inf, times)
