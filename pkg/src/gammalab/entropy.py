"""Φ-entropies, the decay bound for q_Φ(P_t f), and Φ-Sobolev margins."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import check_field, integrate
from .gamma import as_context, gamma
from .phi import DomainError, PhiFunction, phi_suite

__all__ = [
    "DecayReport",
    "DomainError",
    "EntropyValues",
    "PhiFunction",
    "check_decay",
    "decay_bound",
    "entropy_functionals",
    "phi_sobolev_margin",
    "phi_suite",
]

K_ZERO = 1e-12


class EntropyValues(NamedTuple):
    ent: float
    q: float
    C: float


def entropy_functionals(ctx, phi: PhiFunction, f) -> EntropyValues:
    """``Ent = -∫Φ(f)dμ``, ``q = ∫Φ''(f)Γ(f)dμ``, ``C = ∫f²Φ''(f)dμ``.

    Γ is the stencil route.
    """
    ctx = as_context(ctx)
    f = check_field(f, ctx.shape, "f")
    phi.check_domain(f)
    mu = ctx.mu
    d2 = phi.d2(f)
    return EntropyValues(
        ent=-integrate(phi(f), mu),
        q=integrate(d2 * gamma(ctx, f), mu),
        C=integrate(f**2 * d2, mu),
    )


def decay_bound(K: float, m: float, t: float, q0: float, C0: float) -> float:
    """Right-hand side of the q_Φ decay estimate.

    ``e^{-2Kt} [1/q0 + (1 - e^{-2Kt})/(m K C0)]^{-1}``, with the ``K -> 0``
    limit ``[1/q0 + 2t/(m C0)]^{-1}`` for ``|K| < 1e-12`` and
    ``e^{-2Kt} q0`` for ``m = inf``.  Returns 0 when ``q0 = 0``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if q0 == 0:
        return 0.0
    if math.isinf(m):
        return math.exp(-2 * K * t) * q0
    if abs(K) < K_ZERO:
        return 1.0 / (1.0 / q0 + 2 * t / (m * C0))
    # (1 - e^{-2Kt}) / K, written to stay accurate for small |K|t
    ratio = -math.expm1(-2 * K * t) / K
    return math.exp(-2 * K * t) / (1.0 / q0 + ratio / (m * C0))


@dataclass
class DecayReport:
    times: np.ndarray
    measured: np.ndarray
    bound: np.ndarray
    K: float
    m: float
    q0: float
    C0: float
    margin: np.ndarray = field(init=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.measured = np.asarray(self.measured, dtype=float)
        self.bound = np.asarray(self.bound, dtype=float)
        self.margin = self.bound - self.measured

    @property
    def min_margin(self) -> float:
        return float(self.margin.min())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "q_measured", "bound", "margin"])
        for row in zip(self.times, self.measured, self.bound, self.margin):
            writer.writerow([f"{v:.12g}" for v in row])
        return buf.getvalue()

    def rows(self):
        return [
            {"t": float(t), "q_measured": float(q), "bound": float(b), "margin": float(mg)}
            for t, q, b, mg in zip(self.times, self.measured, self.bound, self.margin)
        ]


def check_decay(gen, phi: PhiFunction, f, K: float, m: float, times) -> DecayReport:
    """Compare ``q_Φ(P_t f)`` with the decay bound at each time.

    ``gen`` may be a :class:`~gammalab.generator.Generator` or a
    :class:`~gammalab.gamma.GammaContext`.
    """
    ctx = as_context(gen)
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted and nonnegative")
    start = entropy_functionals(ctx, phi, f)
    measured = []
    for u in ctx.gen.evolve(f, times):
        # the maximum principle keeps u inside the domain; checked anyway
        measured.append(entropy_functionals(ctx, phi, u).q)
    bound = [decay_bound(K, m, t, start.q, start.C) for t in times]
    return DecayReport(times, measured, bound, K, m, start.q, start.C)


def phi_sobolev_margin(ctx, phi: PhiFunction, f, K: float) -> float:
    """``(1/2K) q_Φ(f) - [∫Φ(f)dμ - Φ(∫f dμ)]``; nonnegative when the inequality holds."""
    if K <= 0:
        raise ValueError("the Φ-Sobolev margin needs K > 0")
    ctx = as_context(ctx)
    vals = entropy_functionals(ctx, phi, f)
    mean = integrate(f, ctx.mu)
    return vals.q / (2 * K) - (-vals.ent - float(phi(mean)))
