"""Carré du champ Γ, iterated Γ₂, and the Lemma-type identity residual.

Both operators come in two routes.  The algebraic/iterated route is written
purely in terms of the discrete generator; the geometric route uses
derivative stencils (Fourier on periodic axes, second-order differences on
intervals) and the closed forms ``∇f·∇g`` and
``<Hess f, Hess g> - Hess V(∇f, ∇g)`` (flat metric, so no Ricci term).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import check_field, derivative
from .generator import Generator
from .phi import PhiFunction


@dataclass(frozen=True)
class GammaContext:
    """A generator plus optional analytic derivatives of its potential.

    ``d2V`` is ``V''`` in 1-D, or ``(Vxx, Vxy, Vyy)`` on the torus; ``dV`` is
    ``V'`` or ``(Vx, Vy)``.  Missing entries are produced by the same stencils
    as the geometric route.
    """

    gen: Generator
    dV: object = None
    d2V: object = None

    @property
    def nodes(self):
        return self.gen.nodes

    @property
    def shape(self):
        return self.gen.shape

    @property
    def mu(self):
        return self.gen.mu

    def grad_V(self):
        if self.dV is not None:
            return _as_components(self.dV, self.shape)
        return grad(self.nodes, self.gen.V)

    def hess_V(self):
        if self.d2V is None:
            return hessian(self.nodes, self.gen.V)
        if self.nodes.ndim == 1:
            return [[check_field(self.d2V, self.shape, "V''")]]
        vxx, vxy, vyy = (check_field(c, self.shape, "Hess V") for c in self.d2V)
        return [[vxx, vxy], [vxy, vyy]]


def as_context(obj) -> GammaContext:
    return obj if isinstance(obj, GammaContext) else GammaContext(obj)


def _as_components(value, shape):
    if len(shape) == 1:
        return [check_field(value, shape, "V'")]
    return [check_field(c, shape, "grad V") for c in value]


def grad(nodes, f):
    return [derivative(f, nodes, 1, axis) for axis in range(nodes.ndim)]


def hessian(nodes, f):
    if nodes.ndim == 1:
        return [[derivative(f, nodes, 2, 0)]]
    fxx = derivative(f, nodes, 2, 0)
    fyy = derivative(f, nodes, 2, 1)
    fxy = derivative(derivative(f, nodes, 1, 0), nodes, 1, 1)
    return [[fxx, fxy], [fxy, fyy]]


def gamma(ctx, f, g=None, route="stencil"):
    """Γ(f, g) nodewise.

    ``route="stencil"`` gives ``∇f·∇g``; ``route="algebraic"`` gives
    ``½(L(fg) - f Lg - g Lf)`` with the discrete generator.
    """
    ctx = as_context(ctx)
    f = check_field(f, ctx.shape, "f")
    g = f if g is None else check_field(g, ctx.shape, "g")
    if route == "algebraic":
        L = ctx.gen.apply
        return 0.5 * (L(f * g) - f * L(g) - g * L(f))
    if route != "stencil":
        raise ValueError(f"unknown Γ route {route!r}")
    gf = grad(ctx.nodes, f)
    gg = gf if g is f else grad(ctx.nodes, g)
    return sum(a * b for a, b in zip(gf, gg))


def gamma2(ctx, f, g=None, route="iterated"):
    """Γ₂(f, g) nodewise.

    ``route="iterated"``: ``½[LΓ(f,g) - Γ(Lf,g) - Γ(f,Lg)]`` with the
    algebraic Γ.  ``route="geometric"``: ``<Hess f, Hess g>_HS - Hess V(∇f, ∇g)``.
    """
    ctx = as_context(ctx)
    f = check_field(f, ctx.shape, "f")
    g = f if g is None else check_field(g, ctx.shape, "g")
    if route == "iterated":
        L = ctx.gen.apply
        G = lambda a, b: gamma(ctx, a, b, route="algebraic")  # noqa: E731
        return 0.5 * (L(G(f, g)) - G(L(f), g) - G(f, L(g)))
    if route != "geometric":
        raise ValueError(f"unknown Γ₂ route {route!r}")
    nodes = ctx.nodes
    Hf = hessian(nodes, f)
    Hg = Hf if g is f else hessian(nodes, g)
    df = grad(nodes, f)
    dg = df if g is f else grad(nodes, g)
    HV = ctx.hess_V()
    dim = nodes.ndim
    hs = sum(Hf[a][b] * Hg[a][b] for a in range(dim) for b in range(dim))
    bakry = sum(HV[a][b] * df[a] * dg[b] for a in range(dim) for b in range(dim))
    return hs - bakry


def interior_mask(nodes, depth=2):
    """Nodes at least ``depth`` cells from an interval boundary (all nodes if periodic)."""
    mask = np.ones(nodes.shape, dtype=bool)
    if not nodes.periodic:
        mask[:depth] = False
        mask[-depth:] = False
    return mask


def lemma_sides(ctx, phi: PhiFunction, f, t):
    """Both sides of ``(L - ∂_t)[Φ''(u)Γ(u)] = 2Γ₂(Φ'(u))/Φ''(u) - (1/Φ'')''(u)[Φ''(u)Γ(u)]²``.

    ``u = P_t f``.  The left side uses the discrete generator, with the time
    derivative taken through the chain rule and ``∂_t u = Lu``; the right side
    uses the geometric Γ₂.
    """
    ctx = as_context(ctx)
    gen = ctx.gen
    u = gen.evolve(f, [t])[0]
    phi.check_domain(u)
    Lu = gen.apply(u)
    G = gamma(ctx, u)
    d2 = phi.d2(u)
    dt_term = phi.d3(u) * Lu * G + 2 * d2 * gamma(ctx, u, Lu)
    lhs = gen.apply(d2 * G) - dt_term
    rhs = 2 * gamma2(ctx, phi.d1(u), route="geometric") / d2 - phi.inv_d2_dd(u) * (d2 * G) ** 2
    return lhs, rhs


def lemma21_residual(ctx, phi: PhiFunction, f, t: float, depth: int = 2) -> float:
    """Max-norm of LHS - RHS of the Φ''Γ evolution identity along ``P_t f``.

    On intervals the ``depth`` cells next to each boundary are excluded.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    ctx = as_context(ctx)
    phi.check_domain(f)
    lhs, rhs = lemma_sides(ctx, phi, f, t)
    mask = interior_mask(ctx.nodes, depth)
    return float(np.max(np.abs(lhs - rhs)[mask]))
