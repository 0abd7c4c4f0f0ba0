"""Parameter layout and realization of one-hidden-layer rectifier networks on [0, 1].

A parameter vector is a flat array of length 3H+1 laid out as
(w_1..w_H, b_1..b_H, v_1..v_H, c): hidden weights, hidden biases, output
weights, output bias.  The realized function

    N(x) = c + sum_j v_j * max(w_j x + b_j, 0)

is piecewise affine on [0, 1]; its kinks sit at -b_j/w_j.  This module also
holds the target-function types (constant or continuous piecewise polynomial)
that the risk integrates against.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .mollifier import sigma_r

# Interior kinks closer than this are merged; segments this thin contribute
# nothing an exact integral can distinguish from zero width.
MIN_SEGMENT_WIDTH = 1e-15


class LayoutError(ValueError):
    """Parameter data does not fit the (w, b, v, c) layout of length 3H+1."""


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Flat parameter vector for a width-H network, immutable after construction."""

    data: np.ndarray
    H: int | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 1:
            raise LayoutError(f"parameter data must be one-dimensional, got shape {data.shape}")
        H = self.H
        if H is None:
            H, rem = divmod(data.size - 1, 3)
            if rem != 0 or H < 1:
                raise LayoutError(f"data length {data.size} is not of the form 3H+1")
        if H < 1 or data.size != 3 * H + 1:
            raise LayoutError(f"data length {data.size} does not match 3H+1 for H={H}")
        if not np.all(np.isfinite(data)):
            raise ValueError("parameter entries must be finite")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "H", int(H))

    @classmethod
    def from_parts(cls, w, b, v, c: float) -> "ParamVector":
        w = np.atleast_1d(np.asarray(w, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if not (w.size == b.size == v.size):
            raise LayoutError("w, b, v must have equal length")
        return cls(np.concatenate([w, b, v, [float(c)]]), H=w.size)

    @property
    def w(self) -> np.ndarray:
        return self.data[: self.H]

    @property
    def b(self) -> np.ndarray:
        return self.data[self.H : 2 * self.H]

    @property
    def v(self) -> np.ndarray:
        return self.data[2 * self.H : 3 * self.H]

    @property
    def c(self) -> float:
        return float(self.data[3 * self.H])

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def norm_sq(self) -> float:
        return float(self.data @ self.data)

    def __len__(self) -> int:
        return self.data.size


def unpack(phi: ParamVector):
    """Split a parameter vector into (w, b, v, c) following the fixed index map."""
    return phi.w, phi.b, phi.v, phi.c


def realize(phi: ParamVector, x):
    """Evaluate the rectified realization c + sum_j v_j max(w_j x + b_j, 0).

    Accepts a scalar or an ndarray of evaluation points.
    """
    xs = np.asarray(x, dtype=float)
    pre = np.multiply.outer(xs, phi.w) + phi.b
    out = np.maximum(pre, 0.0) @ phi.v + phi.c
    if np.isscalar(x) or xs.ndim == 0:
        return float(out)
    return out


def realize_mollified(phi: ParamVector, r: float, x):
    """Evaluate the smoothed realization with activation sigma_r in place of the rectifier."""
    if r < 1.0:
        raise ValueError(f"smoothing parameter r must be >= 1, got {r}")
    xs = np.asarray(x, dtype=float)
    pre = np.multiply.outer(xs, phi.w) + phi.b
    out = sigma_r(r, pre) @ phi.v + phi.c
    if np.isscalar(x) or xs.ndim == 0:
        return float(out)
    return out


class IntervalKind(enum.Enum):
    """Shape of {x in [0,1] : w x + b > 0}."""

    EMPTY = "empty"
    FULL = "full"
    ABOVE = "above"  # (t, 1]
    BELOW = "below"  # [0, t)


@dataclass(frozen=True)
class ActiveInterval:
    """The active set of one neuron intersected with [0, 1].

    The strict-inequality boundary point has measure zero, so integration only
    ever uses `bounds()`; the kind records the half-open orientation.
    """

    kind: IntervalKind
    t: float | None = None

    def __post_init__(self):
        carries_t = self.kind in (IntervalKind.ABOVE, IntervalKind.BELOW)
        if carries_t and not (self.t is not None and 0.0 < self.t < 1.0):
            raise ValueError(f"threshold t={self.t} must lie in (0, 1) for kind {self.kind}")
        if not carries_t and self.t is not None:
            raise ValueError(f"kind {self.kind} carries no threshold")

    def bounds(self) -> tuple[float, float] | None:
        """Integration bounds of the active set, or None when it has measure zero."""
        if self.kind is IntervalKind.EMPTY:
            return None
        if self.kind is IntervalKind.FULL:
            return (0.0, 1.0)
        if self.kind is IntervalKind.ABOVE:
            return (self.t, 1.0)
        return (0.0, self.t)

    def is_empty(self) -> bool:
        return self.kind is IntervalKind.EMPTY


def active_interval(w: float, b: float) -> ActiveInterval:
    """Describe {x in [0,1] : w x + b > 0} exactly.

    Sets touching [0, 1] only at a single boundary point are classified as
    empty (or full, for the complement) since the distinction never affects
    an integral.
    """
    if w == 0.0:
        return ActiveInterval(IntervalKind.FULL if b > 0.0 else IntervalKind.EMPTY)
    t = -b / w
    if w > 0.0:
        if t <= 0.0:
            return ActiveInterval(IntervalKind.FULL)
        if t >= 1.0:
            return ActiveInterval(IntervalKind.EMPTY)
        return ActiveInterval(IntervalKind.ABOVE, t)
    if t >= 1.0:
        return ActiveInterval(IntervalKind.FULL)
    if t <= 0.0:
        return ActiveInterval(IntervalKind.EMPTY)
    return ActiveInterval(IntervalKind.BELOW, t)


def interior_kinks(w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sorted, deduplicated kink locations -b_j/w_j that fall strictly inside (0, 1).

    Exact duplicates collapse; kinks within MIN_SEGMENT_WIDTH of an endpoint or
    of each other are merged so no degenerate segment survives.
    """
    nz = w != 0.0
    with np.errstate(over="ignore"):
        t = -b[nz] / w[nz]
    t = t[(t >= MIN_SEGMENT_WIDTH) & (t <= 1.0 - MIN_SEGMENT_WIDTH)]
    if t.size == 0:
        return t
    t = np.unique(t)
    keep = np.concatenate(([True], np.diff(t) >= MIN_SEGMENT_WIDTH))
    return t[keep]


@dataclass(frozen=True, eq=False)
class PiecewiseAffineForm:
    """Exact piecewise-affine representation of a rectified realization on [0, 1].

    `segments` has one row (left, right, slope, intercept) per affine piece;
    pieces tile [0, 1] and adjacent pieces share endpoints.
    """

    segments: np.ndarray
    breakpoints: np.ndarray

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float)
        seg.flags.writeable = False
        bp = np.asarray(self.breakpoints, dtype=float)
        bp.flags.writeable = False
        object.__setattr__(self, "segments", seg)
        object.__setattr__(self, "breakpoints", bp)

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        edges = self.segments[:, 0]
        idx = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, len(self.segments) - 1)
        out = self.segments[idx, 2] * xs + self.segments[idx, 3]
        if np.isscalar(x) or xs.ndim == 0:
            return float(out)
        return out


def piecewise_form(phi: ParamVector) -> PiecewiseAffineForm:
    """Decompose the realization into its exact affine segments on [0, 1]."""
    w, b, v, c = unpack(phi)
    kinks = interior_kinks(w, b)
    pts = np.concatenate(([0.0], kinks, [1.0]))
    left, right = pts[:-1], pts[1:]
    mid = 0.5 * (left + right)
    active = np.outer(mid, w) + b > 0.0
    slope = active @ (v * w)
    intercept = c + active @ (v * b)
    segments = np.column_stack([left, right, slope, intercept])
    return PiecewiseAffineForm(segments=segments, breakpoints=kinks)


@dataclass(frozen=True, eq=False)
class ConstantTarget:
    """Target function identically equal to alpha on [0, 1]."""

    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        object.__setattr__(self, "alpha", float(self.alpha))

    def value(self, x):
        xs = np.asarray(x, dtype=float)
        out = np.full_like(xs, self.alpha)
        if np.isscalar(x) or xs.ndim == 0:
            return self.alpha
        return out

    def square_integral(self) -> float:
        """Exact value of the integral of the squared target over [0, 1]."""
        return self.alpha * self.alpha


# Interior target breakpoints must join continuously up to this absolute gap.
CONTINUITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PiecewisePolynomialTarget:
    """Continuous piecewise-polynomial target on [0, 1].

    `breakpoints` is the strictly increasing knot sequence starting at 0 and
    ending at 1; `coefficients[i]` are the ascending-power coefficients of the
    polynomial on [breakpoints[i], breakpoints[i+1]], in global coordinates.
    """

    breakpoints: np.ndarray
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        rows = [np.atleast_1d(np.asarray(row, dtype=float)) for row in self.coefficients]
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("breakpoints must list at least [0, 1]")
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(bp) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(bp)):
            raise ValueError("breakpoints must be finite")
        if len(rows) != bp.size - 1:
            raise ValueError(f"expected {bp.size - 1} coefficient rows, got {len(rows)}")
        width = max(row.size for row in rows)
        coefs = np.zeros((len(rows), width))
        for i, row in enumerate(rows):
            if not np.all(np.isfinite(row)):
                raise ValueError("coefficients must be finite")
            coefs[i, : row.size] = row
        powers = np.arange(width)
        for i in range(len(rows) - 1):
            x = bp[i + 1]
            gap = abs((coefs[i] @ x**powers) - (coefs[i + 1] @ x**powers))
            if gap > CONTINUITY_TOL:
                raise ValueError(f"target discontinuous at breakpoint {x}: gap {gap:.3e}")
        bp.flags.writeable = False
        coefs.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "coefficients", coefs)

    @property
    def degree(self) -> int:
        return self.coefficients.shape[1] - 1

    def value(self, x):
        xs = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, xs, side="right") - 1, 0,
                      self.coefficients.shape[0] - 1)
        powers = np.arange(self.coefficients.shape[1])
        out = np.sum(self.coefficients[idx] * np.power.outer(xs, powers), axis=-1)
        if np.isscalar(x) or xs.ndim == 0:
            return float(out)
        return out

    def square_integral(self) -> float:
        """Exact integral of the squared target over [0, 1], piece by piece."""
        total = 0.0
        deg1 = self.coefficients.shape[1]
        exps = np.arange(1, 2 * deg1)
        for i in range(self.coefficients.shape[0]):
            lo, hi = self.breakpoints[i], self.breakpoints[i + 1]
            moments = (hi**exps - lo**exps) / exps
            c = self.coefficients[i]
            total += float(np.einsum("i,j,ij->", c, c, moments[np.add.outer(
                np.arange(deg1), np.arange(deg1))]))
        return total


Target = ConstantTarget | PiecewisePolynomialTarget
