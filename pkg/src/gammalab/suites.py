"""Seeded random potentials and test functions for property suites."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import make_grid
from .gamma import GammaContext
from .generator import build_generator


@dataclass(frozen=True)
class TrigPotential:
    """``V(x) = Σ_k a_k cos(kx) + b_k sin(kx)`` for ``k = 1..len(a)``."""

    a: tuple
    b: tuple

    def _terms(self, x, order):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, (ak, bk) in enumerate(zip(self.a, self.b), start=1):
            c, s = np.cos(k * x), np.sin(k * x)
            # d/dx (a cos + b sin) cycles through (-a sin + b cos), (-a cos - b sin), ...
            pair = [(ak * c + bk * s), (-ak * s + bk * c), (-ak * c - bk * s), (ak * s - bk * c)]
            out += k**order * pair[order % 4]
        return out

    def __call__(self, x):
        return self._terms(x, 0)

    def d1(self, x):
        return self._terms(x, 1)

    def d2(self, x):
        return self._terms(x, 2)


def random_trig_potential(rng, modes: int = 2, amplitude: float = 0.3) -> TrigPotential:
    a = amplitude * rng.standard_normal(modes) / np.arange(1, modes + 1)
    b = amplitude * rng.standard_normal(modes) / np.arange(1, modes + 1)
    return TrigPotential(tuple(a), tuple(b))


def band_limited(rng, x, modes: int = 2, period: float = 2 * np.pi, decay: float = 0.2) -> np.ndarray:
    """Random zero-mean trigonometric polynomial with sup-norm 1 on the samples.

    Mode ``k`` has a uniform random phase and amplitude ``decay**(k-1)``
    times a uniform factor in [0.5, 1], so the spectrum decays geometrically
    for every draw.
    """
    w = 2 * np.pi / period
    f = np.zeros_like(np.asarray(x, dtype=float))
    for k in range(1, modes + 1):
        amp = decay ** (k - 1) * rng.uniform(0.5, 1.0)
        f += amp * np.sin(k * w * x + rng.uniform(0, 2 * np.pi))
    return f / np.abs(f).max()


def admissible(rng, x, modes: int = 2, center: float = 1.0, amplitude: float = 0.5, period: float = 2 * np.pi, decay: float = 0.2):
    """``center + amplitude * band_limited``; at least 0.5 away from 0 by default."""
    return center + amplitude * band_limited(rng, x, modes, period, decay)


def circle_suite(seed: int = 0, potentials: int = 5, functions: int = 20, n: int = 512, modes: int = 2, decay: float = 0.2):
    """Yield ``(ctx, fs)`` pairs on the 2π circle with analytic ``V'``, ``V''``."""
    rng = np.random.default_rng(seed)
    grid = make_grid("circle", n, 2 * np.pi)
    for _ in range(potentials):
        pot = random_trig_potential(rng)
        x = grid.x
        ctx = GammaContext(build_generator(grid, pot(x)), dV=pot.d1(x), d2V=pot.d2(x))
        fs = [admissible(rng, x, modes, decay=decay) for _ in range(functions)]
        yield ctx, fs


@dataclass(frozen=True)
class ConvexPotential:
    """``U(x) = c0 + c1 x + Σ_j κ_j max(x - s_j, 0)²`` with ``κ_j >= 0``."""

    c0: float
    c1: float
    kinks: tuple
    curvatures: tuple

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.c0 + self.c1 * x
        for s, k in zip(self.kinks, self.curvatures):
            out = out + k * np.maximum(x - s, 0.0) ** 2
        return out


def random_convex_potential(rng, domain=(0.0, 1.0), pieces: int = 3, scale: float = 20.0) -> ConvexPotential:
    a, b = domain
    kinks = np.sort(rng.uniform(a, b, pieces))
    curv = rng.uniform(0.0, scale, pieces)
    c0, c1 = rng.uniform(-scale, scale, 2)
    return ConvexPotential(float(c0), float(c1), tuple(kinks), tuple(curv))
