"""Grids, weighted measures, quadrature and derivative stencils."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

KINDS = ("circle", "interval_neumann", "interval_dirichlet", "torus2d")
MIN_NODES = 8


@dataclass(frozen=True)
class Grid:
    """Uniform grid on one of the model geometries.

    ``domain`` is ``(a, b)`` for every 1-D kind (the circle is ``(0, length)``)
    and ``((0, lx), (0, ly))`` for the torus.  Periodic axes carry ``n`` nodes
    at ``a + i*h`` with ``h = length/n``; interval axes include both endpoints
    so ``h = length/(n-1)``.
    """

    kind: str
    n: int
    domain: tuple
    ny: int | None = None

    @property
    def ndim(self) -> int:
        return 2 if self.kind == "torus2d" else 1

    @property
    def periodic(self) -> bool:
        return self.kind in ("circle", "torus2d")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n, self.ny) if self.ndim == 2 else (self.n,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return self.domain if self.ndim == 2 else (self.domain,)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in self.bounds)

    @property
    def spacings(self) -> tuple[float, ...]:
        if self.periodic:
            return tuple(length / m for length, m in zip(self.lengths, self.shape))
        return (self.lengths[0] / (self.n - 1),)

    @property
    def h(self) -> float:
        """Mesh width of the first axis (the only axis in 1-D)."""
        return self.spacings[0]

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        out = []
        for (a, _), m, dx in zip(self.bounds, self.shape, self.spacings):
            out.append(a + dx * np.arange(m))
        if not self.periodic:
            out[0][-1] = self.bounds[0][1]
        return tuple(out)

    @property
    def x(self) -> np.ndarray:
        """Node coordinates (1-D) or the ``x`` mesh (torus, ``ij`` indexing)."""
        if self.ndim == 1:
            return self.axes[0]
        return np.meshgrid(*self.axes, indexing="ij")[0]

    @property
    def y(self) -> np.ndarray:
        if self.ndim == 1:
            raise AttributeError("1-D grid has no y coordinate")
        return np.meshgrid(*self.axes, indexing="ij")[1]

    @cached_property
    def volumes(self) -> np.ndarray:
        """Cell volumes: trapezoid half cells at interval ends, uniform otherwise."""
        if self.periodic:
            return np.full(self.shape, float(np.prod(self.spacings)))
        vol = np.full(self.n, self.h)
        vol[0] = vol[-1] = self.h / 2
        return vol

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x)`` (or ``func(x, y)`` on the torus) on the nodes."""
        args = (self.x,) if self.ndim == 1 else (self.x, self.y)
        return np.broadcast_to(np.asarray(func(*args), dtype=float), self.shape).copy()


def make_grid(kind: str, n, domain) -> Grid:
    """Build a grid.

    Parameters
    ----------
    kind
        One of ``circle``, ``interval_neumann``, ``interval_dirichlet``, ``torus2d``.
    n
        Node count; ``(nx, ny)`` or a single int for the torus.
    domain
        Circle: its length (or ``(0, length)``).  Intervals: ``(a, b)``.
        Torus: side lengths ``(lx, ly)`` (or a single length for a square torus).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown grid kind {kind!r}; expected one of {KINDS}")
    if kind == "torus2d":
        nx, ny = (n, n) if np.isscalar(n) else tuple(n)
        nx, ny = int(nx), int(ny)
        if np.isscalar(domain):
            domain = (domain, domain)
        lx, ly = (float(d) for d in domain)
        if min(nx, ny) < MIN_NODES:
            raise ValueError(f"torus needs at least {MIN_NODES} nodes per axis, got {nx}x{ny}")
        if lx <= 0 or ly <= 0:
            raise ValueError("torus side lengths must be positive")
        return Grid(kind, nx, ((0.0, lx), (0.0, ly)), ny)

    n = int(n)
    if n < MIN_NODES:
        raise ValueError(f"grid needs at least {MIN_NODES} nodes, got {n}")
    if kind == "circle":
        if np.isscalar(domain):
            a, b = 0.0, float(domain)
        else:
            a, b = (float(d) for d in domain)
    else:
        a, b = (float(d) for d in domain)
    if not b > a:
        raise ValueError(f"domain length must be positive, got [{a}, {b}]")
    return Grid(kind, n, (a, b))


@dataclass(frozen=True)
class WeightedMeasure:
    """Per-node weights ``e^{V_i} * vol_i``; sums to one when ``normalized``."""

    grid: Grid
    weights: np.ndarray
    normalized: bool = True
    log_shift: float = field(default=0.0, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if not np.all(w > 0):
            raise ValueError("measure weights must be positive")
        if self.normalized and abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"normalized measure has total mass {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def shape(self):
        return self.weights.shape

    def mean(self, f) -> float:
        return integrate(f, self)


def check_field(values, shape, name="field") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite values")
    return arr


def integrate(f, mu: WeightedMeasure) -> float:
    """Quadrature ``sum_i f_i w_i`` against the measure's cell weights."""
    f = np.asarray(f, dtype=float)
    if f.shape != mu.weights.shape:
        raise ValueError(f"field shape {f.shape} does not match measure shape {mu.weights.shape}")
    return float(np.sum(f * mu.weights))


def normalize_potential(V, grid: Grid, volumes=None):
    """Shift ``V`` so that ``e^V dx`` is a probability measure on the grid.

    Returns ``(V_shifted, mu)``.  ``volumes`` overrides the grid's cell volumes
    (used for the interior nodes of a Dirichlet grid).
    """
    vol = grid.volumes if volumes is None else np.asarray(volumes, dtype=float)
    V = check_field(V, vol.shape, "potential")
    shift = float(logsumexp(V, b=vol))
    V_shifted = V - shift
    w = np.exp(V_shifted) * vol
    w = w / w.sum()
    return V_shifted, WeightedMeasure(grid, w, True, -shift)


@dataclass(frozen=True)
class NodeSet:
    """The unknowns a generator acts on: all grid nodes, or a Dirichlet interior."""

    grid: Grid
    axes: tuple
    volumes: np.ndarray

    @classmethod
    def full(cls, grid: Grid) -> "NodeSet":
        return cls(grid, grid.axes, grid.volumes)

    @classmethod
    def interior(cls, grid: Grid) -> "NodeSet":
        if grid.ndim != 1:
            raise ValueError("interior node sets are 1-D only")
        return cls(grid, (grid.x[1:-1],), np.full(grid.n - 2, grid.h))

    @property
    def periodic(self) -> bool:
        return self.grid.periodic

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacings(self):
        return self.grid.spacings

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def lengths(self):
        return self.grid.lengths

    @property
    def x(self) -> np.ndarray:
        return self.axes[0] if self.ndim == 1 else np.meshgrid(*self.axes, indexing="ij")[0]

    @property
    def y(self) -> np.ndarray:
        return np.meshgrid(*self.axes, indexing="ij")[1]

    def sample(self, func) -> np.ndarray:
        args = (self.x,) if self.ndim == 1 else (self.x, self.y)
        return np.broadcast_to(np.asarray(func(*args), dtype=float), self.shape).copy()


# -- derivative stencils -----------------------------------------------------

def _spectral_derivative(f, length, order, axis):
    m = f.shape[axis]
    k = 2 * np.pi * np.fft.rfftfreq(m, d=length / m)
    mult = (1j * k) ** order
    if m % 2 == 0 and order % 2 == 1:
        mult[-1] = 0.0
    shape = [1] * f.ndim
    shape[axis] = -1
    return np.fft.irfft(np.fft.rfft(f, axis=axis) * mult.reshape(shape), n=m, axis=axis)


def _fd_first(f, h, axis):
    return np.gradient(f, h, axis=axis, edge_order=2)


def _fd_second(f, h, axis):
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
    out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def derivative(f, grid_like, order=1, axis=0):
    """First or second derivative along ``axis``.

    Periodic axes use Fourier differentiation (Nyquist mode dropped for odd
    orders); interval axes use second-order central differences with
    second-order one-sided stencils at the two ends.
    """
    f = np.asarray(f, dtype=float)
    periodic, lengths, spacings = grid_like.periodic, grid_like.lengths, grid_like.spacings
    if periodic:
        return _spectral_derivative(f, lengths[axis], order, axis)
    if order == 1:
        return _fd_first(f, spacings[axis], axis)
    if order == 2:
        return _fd_second(f, spacings[axis], axis)
    raise ValueError("only first and second derivatives are supported")


def derivative_matrix(grid_like, order=1, axis=0) -> np.ndarray:
    """Dense matrix of :func:`derivative` acting on raveled fields."""
    shape = grid_like.shape
    size = int(np.prod(shape))
    # batch index last so ``axis`` still addresses the field axes
    batch = np.moveaxis(np.eye(size).reshape((size, *shape)), 0, -1)
    cols = derivative(batch, grid_like, order, axis)
    return np.moveaxis(cols, -1, 0).reshape(size, size).T


# -- CSV serialization -------------------------------------------------------

def field_to_csv(grid: Grid, values, coords=None) -> str:
    """Serialize a 1-D field as ``x,value`` rows (``x,y,value`` on the torus)."""
    values = np.asarray(values, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if grid.ndim == 1:
        xs = grid.x if coords is None else coords
        writer.writerow(["x", "value"])
        for xi, vi in zip(xs, values):
            writer.writerow([f"{xi:.12g}", f"{vi:.12g}"])
    else:
        writer.writerow(["x", "y", "value"])
        for xi, yi, vi in zip(grid.x.ravel(), grid.y.ravel(), values.ravel()):
            writer.writerow([f"{xi:.12g}", f"{yi:.12g}", f"{vi:.12g}"])
    return buf.getvalue()


def field_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array([[float(c) for c in row] for row in rows[1:]])
    return data[:, :-1].squeeze(), data[:, -1]
