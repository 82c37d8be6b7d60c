"""The convex functions Φ driving the entropies, with their derivative stacks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ADMISSIBILITY_MARGIN = 1e-8


class DomainError(ValueError):
    """Field values leave (or come too close to the edge of) the domain of Φ."""


@dataclass(frozen=True)
class PhiFunction:
    """Φ on the open interval ``(lower, inf)``.

    ``name`` is ``xlogx``, ``square`` or ``power``; ``p`` is used only by
    ``power``, where ``Φ(x) = (x^p - x) / (p(p-1))``.
    """

    name: str
    p: float | None = None

    @property
    def lower(self) -> float:
        return -np.inf if self.name == "square" else 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "xlogx":
            return x * np.log(x)
        if self.name == "square":
            return x**2
        p = self.p
        return (x**p - x) / (p * (p - 1))

    def d1(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "xlogx":
            return np.log(x) + 1
        if self.name == "square":
            return 2 * x
        p = self.p
        return (p * x ** (p - 1) - 1) / (p * (p - 1))

    def d2(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "xlogx":
            return 1 / x
        if self.name == "square":
            return np.full_like(x, 2.0)
        return x ** (self.p - 2)

    def d3(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "xlogx":
            return -1 / x**2
        if self.name == "square":
            return np.zeros_like(x)
        p = self.p
        return (p - 2) * x ** (p - 3)

    def d4(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "xlogx":
            return 2 / x**3
        if self.name == "square":
            return np.zeros_like(x)
        p = self.p
        return (p - 2) * (p - 3) * x ** (p - 4)

    def inv_d2_dd(self, x):
        """``(1/Φ'')''``; nonpositive on the domain for every built-in Φ."""
        x = np.asarray(x, dtype=float)
        if self.name in ("xlogx", "square"):
            return np.zeros_like(x)
        p = self.p
        return (2 - p) * (1 - p) * x ** (-p)

    def check_domain(self, values, margin=ADMISSIBILITY_MARGIN):
        values = np.asarray(values, dtype=float)
        if np.isfinite(self.lower) and values.min() < self.lower + margin:
            raise DomainError(
                f"values reach {values.min():.3g}, outside the domain of Φ={self.label} "
                f"(need > {self.lower} + {margin:g})"
            )
        return values

    @property
    def label(self) -> str:
        return f"power({self.p:g})" if self.name == "power" else self.name


def phi_suite(name: str, p: float | None = None) -> PhiFunction:
    """Look up a built-in Φ: ``xlogx``, ``square`` or ``power`` with ``p`` in (1, 2]."""
    if name == "power":
        if p is None or not 1 < p <= 2:
            raise ValueError(f"power Φ needs p in (1, 2], got {p}")
        return PhiFunction("power", float(p))
    if name in ("xlogx", "square"):
        return PhiFunction(name)
    raise ValueError(f"unknown Φ {name!r}")
