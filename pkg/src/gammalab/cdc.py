"""Curvature-dimension checks, the optimal variance constant, and worked examples."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg, optimize

from .core import check_field, derivative, integrate, make_grid
from .entropy import entropy_functionals
from .gamma import GammaContext, as_context, gamma, gamma2, grad, hessian
from .generator import build_generator
from .phi import PhiFunction, phi_suite

TAIL_TOL = 1e-12


@dataclass(frozen=True)
class CdcReport:
    lhs: float
    rhs: float
    margin: float
    boundary_term: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def integral_cdc_margin(ctx, phi: PhiFunction, f, K: float, m: float) -> CdcReport:
    """Integral curvature-dimension condition evaluated at one test function.

    ``lhs = ∫[2Γ₂(Φ'(f))/Φ''(f) - (1/Φ'')''(f)(Φ''(f)Γ(f))²]dμ + boundary term``
    and ``rhs = 2K q_Φ(f) + 2 q_Φ(f)² / (m C_Φ(f))``.  The boundary term (the
    second fundamental form integral) vanishes on every implemented geometry:
    there is no boundary on the circle and torus, and a point boundary has
    zero second fundamental form.
    """
    ctx = as_context(ctx)
    f = check_field(f, ctx.shape, "f")
    vals = entropy_functionals(ctx, phi, f)
    assert vals.C > 0, "C_Φ(f) must be positive for admissible f"
    d2 = phi.d2(f)
    G = gamma(ctx, f)
    integrand = 2 * gamma2(ctx, phi.d1(f), route="geometric") / d2 - phi.inv_d2_dd(f) * (d2 * G) ** 2
    boundary = 0.0
    lhs = integrate(integrand, ctx.mu) + boundary
    rhs = 2 * K * vals.q
    if not math.isinf(m):
        rhs += 2 * vals.q**2 / (m * vals.C)
    return CdcReport(lhs, rhs, lhs - rhs, boundary)


def pointwise_cd_margin(ctx, K: float, m: float) -> float:
    """Smallest eigenvalue over nodes of ``(m-n)(-Hess V - K) - ∇V⊗∇V``.

    For ``m = inf`` this is ``min(-Hess V) - K``.  The grid is flat, so the
    Ricci term is zero.  Nonnegative iff CD(K, m) holds on the grid.
    """
    ctx = as_context(ctx)
    dim = ctx.nodes.ndim
    if m < dim:
        raise ValueError(f"m = {m} is below the dimension {dim}")
    HV = ctx.hess_V()
    dV = ctx.grad_V()
    if dim == 1:
        hess = HV[0][0][:, None, None]
        g = dV[0][:, None, None]
    else:
        hess = np.stack([np.stack([HV[a][b].ravel() for b in range(2)], -1) for a in range(2)], -2)
        g = np.stack([c.ravel() for c in dV], -1)[:, :, None]
    eye = np.eye(dim)
    if math.isinf(m):
        mat = -hess - K * eye
    else:
        mat = (m - dim) * (-hess - K * eye) - g * np.swapaxes(g, -1, -2)
    return float(np.linalg.eigvalsh(mat)[:, 0].min())


def _axis_modes(m: int, length: float, periodic: bool):
    """Orthonormal 1-D mode basis (constant first) and the squared frequencies."""
    j = np.arange(m)
    if periodic:
        cols, freq = [np.ones(m)], [0.0]
        for k in range(1, (m - 1) // 2 + 1):
            w = 2 * math.pi * k / length
            cols += [np.cos(w * j * length / m), np.sin(w * j * length / m)]
            freq += [w, w]
        if m % 2 == 0:
            cols.append(np.cos(math.pi * j))
            freq.append(math.pi * m / length)
    else:
        # cosine modes through both end nodes; these are the DCT-I basis
        cols = [np.cos(math.pi * k * j / (m - 1)) for k in range(m)]
        freq = [math.pi * k / length for k in range(m)]
    P = np.stack(cols, axis=1)
    P /= np.linalg.norm(P, axis=0)
    return P, np.asarray(freq) ** 2


def _mode_basis(nodes):
    """Columns spanning grid functions modulo constants, damped by ``1/(1 + |k|²)``."""
    pieces = []
    for a, m in enumerate(nodes.shape):
        span = (m if nodes.periodic else m - 1) * nodes.spacings[a]
        pieces.append(_axis_modes(m, span, nodes.periodic))
    P, k2 = pieces[0]
    for Pa, ka in pieces[1:]:
        P = np.kron(P, Pa)
        k2 = (k2[:, None] + ka[None, :]).ravel()
    return P[:, 1:] / (1.0 + k2[1:]), k2[1:]


def variance_pencil(ctx):
    """Quadratic forms of ``∫Γ₂(f)dμ`` and ``∫Γ(f)dμ`` modulo constants.

    Returns ``(A, B, F)``: ``f = F z`` runs over grid functions modulo
    constants and ``A, B`` are the forms in the ``z`` coordinates.

    Forming ``DᵀD`` from a dense derivative matrix squares its norm, and at
    fine meshes the roundoff ``eps·|D|²`` swamps an O(1) eigenvalue.  Instead
    the basis is damped mode by mode, ``y = Σ z_k φ_k/(1 + |k|²)`` in the
    symmetrized coordinates ``y = sqrt(w) f``, and every derivative is taken
    of a damped mode, so all entries of ``A`` and ``B`` stay O(1).
    Constants lie in the kernel of both forms, so leaving out the constant
    mode loses nothing.
    """
    ctx = as_context(ctx)
    nodes = ctx.nodes
    dim = nodes.ndim
    s = np.sqrt(ctx.mu.weights.ravel())
    Y, _ = _mode_basis(nodes)
    F = Y / s[:, None]
    cols = F.reshape((*nodes.shape, F.shape[1]))
    flat = lambda arr: s[:, None] * arr.reshape(F.shape)  # noqa: E731
    d1 = [derivative(cols, nodes, 1, a) for a in range(dim)]
    G = [flat(d) for d in d1]
    B = sum(g.T @ g for g in G)
    HV = ctx.hess_V()
    A = np.zeros_like(B)
    for a in range(dim):
        for b in range(dim):
            H = flat(derivative(cols, nodes, 2, a) if a == b else derivative(d1[b], nodes, 1, a))
            A += H.T @ H
            A -= G[a].T @ (HV[a][b].ravel()[:, None] * G[b])
    return 0.5 * (A + A.T), 0.5 * (B + B.T), F


def optimal_variance_K(ctx, return_vector: bool = False):
    """Best constant in ``∫Γ₂(f)dμ >= K ∫Γ(f)dμ`` over grid functions.

    With ``c >= 0`` chosen so that ``A + cB`` is positive definite, the
    largest eigenvalue ``σ`` of ``B z = σ (A + cB) z`` gives
    ``K = 1/σ - c``.  A singular ``B`` (the Nyquist mode of a Fourier
    gradient) is harmless in this form.
    """
    A, B, F = variance_pencil(ctx)
    n = A.shape[0]
    scale = max(np.abs(np.diag(A)).max(), 1e-300) / max(np.abs(np.diag(B)).max(), 1e-300)
    for c in [0.0] + [scale * 10.0**k for k in range(-6, 7)]:
        try:
            sig, vec = linalg.eigh(B, A + c * B, subset_by_index=[n - 1, n - 1])
        except linalg.LinAlgError:
            continue
        if sig[0] > 0:
            break
    else:
        raise linalg.LinAlgError("no shift makes the Γ₂-form definite; check the discretization")
    K = 1.0 / sig[0] - c
    if not return_vector:
        return float(K)
    return float(K), (F @ vec[:, 0]).reshape(as_context(ctx).shape)


# -- concave potential with a flat core -------------------------------------


class ConcaveRampPotential:
    """Even concave ``V`` with ``V'' = -ramp(|x|)``.

    ``ramp`` is 0 on [0, 1], a cubic smoothstep from 0 to 1 on [1, 2], and 1
    beyond, so ``V'' = 0`` on the core and ``V'' = -1`` for ``|x| >= 2``.
    ``V(0) = V'(0) = 0``.
    """

    name = "cubic-smoothstep"

    @staticmethod
    def ramp(x):
        t = np.clip(np.abs(np.asarray(x, dtype=float)) - 1.0, 0.0, 1.0)
        return 3 * t**2 - 2 * t**3

    def d2V(self, x):
        return -self.ramp(x)

    def dV(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        t = np.clip(ax - 1.0, 0.0, 1.0)
        inner = t**3 - t**4 / 2
        outer = np.maximum(ax - 2.0, 0.0)
        return -np.sign(x) * (inner + outer)

    def V(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        t = np.clip(ax - 1.0, 0.0, 1.0)
        inner = t**4 / 4 - t**5 / 10
        u = np.maximum(ax - 2.0, 0.0)
        return -(inner + 0.5 * u + 0.5 * u**2)

    __call__ = V


@dataclass(frozen=True)
class Example14Certificate:
    delta: float
    osc: float
    K_lower: float
    K_numeric: float
    R: float
    n: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def concave_context(R: float, n: int, family=None) -> GammaContext:
    family = family or ConcaveRampPotential()
    grid = make_grid("interval_neumann", n, (-R, R))
    gen = build_generator(grid, family.V(grid.x))
    return GammaContext(gen, dV=family.dV(grid.x), d2V=family.d2V(grid.x))


def example14_certificate(family=None, R: float = 8.0, n: int = 1024) -> Example14Certificate:
    """Lower-bound certificate and eigensolve for the concave flat-core potential.

    ``delta`` is the width of the band inside ``|x| <= 2`` where ``-V'' >= 1/2``;
    ``K_lower = e^{-osc} min(delta/16, 1/64)`` with ``osc`` the oscillation of
    ``V`` on [-2, 2]; ``K_numeric`` is :func:`optimal_variance_K` on [-R, R].
    """
    family = family or ConcaveRampPotential()
    if R < 6:
        raise ValueError(f"R = {R} truncates too aggressively (e^V tail above 1e-10); need R >= 6")
    x_half = optimize.brentq(lambda x: family.ramp(x) - 0.5, 1.0, 2.0, xtol=1e-14)
    delta = 2.0 - x_half
    xs = np.linspace(-2.0, 2.0, 4001)
    Vs = family.V(xs)
    vmax = -optimize.minimize_scalar(lambda x: -family.V(x), bounds=(-2, 2), method="bounded").fun
    osc = float(max(vmax, Vs.max()) - Vs.min())
    K_lower = math.exp(-osc) * min(delta / 16, 1 / 64)
    K_numeric = optimal_variance_K(concave_context(R, n, family))
    return Example14Certificate(float(delta), osc, K_lower, K_numeric, float(R), int(n))


# -- the relative-entropy counterexample ------------------------------------


def ane_tail(alpha: float, R: float) -> float:
    """``e^{V+f}`` at ``|x| = R`` for ``V = -α(x⁴-2x²)``, ``f = -3αx²``."""
    return math.exp(-alpha * (R**4 + R**2))


def ane_radius(alpha: float, minimum: float = 4.0) -> float:
    """Smallest half-integer ``R >= minimum`` meeting the tail criterion."""
    R = max(minimum, (-math.log(TAIL_TOL) / alpha) ** 0.25)
    return math.ceil(2 * R) / 2


def ane_counterexample(alpha: float, R: float = 4.0, n: int = 4096, half_line: bool = False) -> float:
    """``∫ e^f Γ₂(f) e^V dx`` over [-R, R] for ``V = -α(x⁴-2x²)``, ``f = -3αx²``.

    The measure is left unnormalized; only the sign matters.  Γ₂ is the
    geometric form ``(f'')² - V''(f')²`` with stencil derivatives of ``f`` and
    the analytic ``V''``, summed with trapezoid cell volumes.  ``half_line`` integrates over
    [0, R] and doubles.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if n < 2048:
        raise ValueError("n must be at least 2048")
    if ane_tail(alpha, R) >= TAIL_TOL:
        raise ValueError(f"tail e^(V+f)(R) = {ane_tail(alpha, R):.2e} is not below {TAIL_TOL:g}; increase R")
    grid = make_grid("interval_neumann", n, (0.0, R) if half_line else (-R, R))
    x = grid.x
    V = -alpha * (x**4 - 2 * x**2)
    d2V = -alpha * (12 * x**2 - 4)
    f = -3 * alpha * x**2
    # e^{V+f} underflows harmlessly in the tails, so no normalization is attempted
    df = derivative(f, grid, 1)
    g2 = derivative(f, grid, 2) ** 2 - d2V * df**2
    value = float(np.sum(grid.volumes * np.exp(V + f) * g2))
    return 2 * value if half_line else value


def ane_sign_change(lo: float = 0.1, hi: float = 10.0, n: int = 4096, xtol: float = 1e-6) -> float:
    """Bisection for the α where the counterexample integral changes sign."""
    fn = lambda a: ane_counterexample(a, ane_radius(a), n)  # noqa: E731
    if not fn(lo) > 0 > fn(hi):
        raise ValueError("no sign change bracketed")
    return float(optimize.bisect(fn, lo, hi, xtol=xtol))


# -- necessity check and form equivalences ----------------------------------


_FORWARD_D1 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


def derivative_at_zero_check(ctx, phi: PhiFunction, f, dt: float = 1e-3) -> float:
    """``|d/dt q_Φ(P_t f)|_{t=0} + lhs|`` with the integral-CDC left side.

    The time derivative is the fourth-order one-sided difference on
    ``q(0), q(dt), ..., q(4dt)``; backward heat flow is never evaluated.
    """
    ctx = as_context(ctx)
    us = ctx.gen.evolve(f, dt * np.arange(5))
    q = np.array([entropy_functionals(ctx, phi, u).q for u in us])
    dq = float(np.dot(_FORWARD_D1, q)) / dt
    lhs = integral_cdc_margin(ctx, phi, f, 0.0, math.inf).lhs
    return abs(dq + lhs)


def _log_derivatives(nodes, f):
    """Gradient and Hessian of ``log f`` through the chain rule on ``f``'s stencils."""
    df = grad(nodes, f)
    Hf = hessian(nodes, f)
    dim = nodes.ndim
    dlog = [d / f for d in df]
    Hlog = [[Hf[a][b] / f - df[a] * df[b] / f**2 for b in range(dim)] for a in range(dim)]
    return dlog, Hlog


def relative_entropy_forms(ctx, f, K: float, m: float):
    """Margins of the relative-entropy condition in two independent forms.

    The first is written in ``f``: ``∫ f Γ₂(log f) - K ∫ f Γ(log f) - (∫ f Γ(log f))²/(m μ(f))``
    with ``log f`` differentiated through the chain rule on ``f``'s stencils.
    The second is written in ``g = log f`` with ``e^g`` weights and stencils
    applied to ``g`` directly.  They agree up to discretization error.
    """
    ctx = as_context(ctx)
    f = check_field(f, ctx.shape, "f")
    phi_suite("xlogx").check_domain(f)
    nodes, mu = ctx.nodes, ctx.mu
    dim = nodes.ndim
    HV = ctx.hess_V()

    dlog, Hlog = _log_derivatives(nodes, f)
    g2 = sum(Hlog[a][b] ** 2 for a in range(dim) for b in range(dim))
    g2 -= sum(HV[a][b] * dlog[a] * dlog[b] for a in range(dim) for b in range(dim))
    g1 = sum(d**2 for d in dlog)
    first = _margin(integrate(f * g2, mu), integrate(f * g1, mu), integrate(f, mu), K, m)

    g = np.log(f)
    eg = np.exp(g)
    second = _margin(
        integrate(eg * gamma2(ctx, g, route="geometric"), mu),
        integrate(eg * gamma(ctx, g), mu),
        integrate(eg, mu),
        K,
        m,
    )
    return first, second


def power_forms(ctx, p: float, f, K: float, m: float):
    """Integral-CDC margin for Φ = power(p) in the general and the expanded form.

    Returns ``(general, expanded)`` where ``general`` is
    :func:`integral_cdc_margin` and ``expanded`` is twice the margin of
    ``∫ f^{2-p}Γ₂(f^{p-1})/(p-1)² + (2-p)(p-1)/2 ∫ f^p Γ(log f)²
    >= K∫f^pΓ(log f) + (∫f^pΓ(log f))²/(m μ(f^p))``.
    """
    ctx = as_context(ctx)
    phi = phi_suite("power", p)
    general = integral_cdc_margin(ctx, phi, f, K, m).margin
    mu = ctx.mu
    glog = gamma(ctx, np.log(f))
    lhs = integrate(f ** (2 - p) * gamma2(ctx, f ** (p - 1), route="geometric"), mu) / (p - 1) ** 2
    lhs += (2 - p) * (p - 1) / 2 * integrate(f**p * glog**2, mu)
    expanded = 2 * _margin(lhs, integrate(f**p * glog, mu), integrate(f**p, mu), K, m)
    return general, expanded


def _margin(lhs, q, mass, K, m):
    rhs = K * q
    if not math.isinf(m):
        rhs += q**2 / (m * mass)
    return lhs - rhs
