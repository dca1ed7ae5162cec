"""Per-region oscillation of a field against one-directional profiles.

For a region (ball or square) and a rigid motion psi, the field is
compared with the best piecewise-constant profile of the single
coordinate psi^1(x): slabs orthogonal to the direction are averaged, and
the mean L1 deviation from the slab profile measures how far the field is
from being one-directional there.  Sweeping directions and regions gives
an empirical estimate of the smallness parameter gamma: for every sampled
ball, integral of |a - profile(psi^1)| <= gamma * |ball|.

The closing piece verifies, square by square, the oscillation bound of
the oscillating example field: the prescribed axis profile obeys
M <= (integral of |f|) * (mean oscillation of zeta) + tail overlap area,
with the tail controlled exactly by interval arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import (
    MatrixField,
    ScalarField,
    dyadic_oscillation_sup,
    grid_centers,
    source_profile,
    term_support,
    zeta_bump,
)

__all__ = [
    "DirectionMap",
    "OneDProfile",
    "Rect",
    "BallRegion",
    "OscillationReport",
    "slab_average_profile",
    "oscillation",
    "best_direction",
    "circle_direction_grid",
    "gamma_profile",
    "standard_ball_sample",
    "tau_index",
    "intersection_area",
    "tail_sum_exact",
    "verify_example_bound",
    "ExampleBoundReport",
]


@dataclass(frozen=True)
class DirectionMap:
    """Rigid motion psi(x) = R x + shift with orthonormal rows of R."""

    rotation: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).copy()
        s = np.asarray(self.shift, dtype=float).copy()
        if r.ndim != 2 or r.shape[0] != r.shape[1] or s.shape != (r.shape[0],):
            raise ValueError("rotation must be d x d and shift length d")
        if np.abs(r @ r.T - np.eye(r.shape[0])).max() > 1e-12:
            raise ValueError("rotation rows must be orthonormal to 1e-12")
        r.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "shift", s)

    @property
    def d(self) -> int:
        return self.rotation.shape[0]

    @property
    def direction(self) -> np.ndarray:
        """Unit vector e with psi^1(x) = e . x + shift[0]."""
        return self.rotation[0]

    def psi1(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation[0] + self.shift[0]

    def inverse_point(self, y: np.ndarray) -> np.ndarray:
        return (y - self.shift) @ self.rotation

    @staticmethod
    def identity(d: int = 2) -> "DirectionMap":
        return DirectionMap(np.eye(d), np.zeros(d))

    @staticmethod
    def from_angle(theta: float, shift=(0.0, 0.0)) -> "DirectionMap":
        c, s = math.cos(theta), math.sin(theta)
        return DirectionMap(np.array([[c, s], [-s, c]]), np.asarray(shift, float))

    @staticmethod
    def from_direction(e) -> "DirectionMap":
        e = np.asarray(e, dtype=float)
        e = e / np.linalg.norm(e)
        perp = np.array([-e[1], e[0]])
        return DirectionMap(np.stack([e, perp]), np.zeros(2))


@dataclass(frozen=True)
class OneDProfile:
    """Piecewise-constant values on uniform bins of the slab coordinate."""

    edges: np.ndarray
    values: np.ndarray
    filled: np.ndarray

    def lookup(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.edges, t, side="right") - 1
        if np.any(idx < 0) or np.any(idx >= self.values.shape[0]):
            raise ValueError("profile bins do not cover the queried range")
        if not np.all(self.filled[idx]):
            raise ValueError("query hits a bin with no data (coverage gap)")
        return self.values[idx]

    @property
    def bin_count(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned half-open rectangle (x0, x1) x (y0, y1)."""

    x0: float
    x1: float
    y0: float
    y1: float

    def mask(self, n: int) -> np.ndarray:
        c = grid_centers(n)
        mx = (c >= self.x0) & (c < self.x1)
        my = (c >= self.y0) & (c < self.y1)
        return mx[:, None] & my[None, :]

    @property
    def area(self) -> float:
        return max(self.x1 - self.x0, 0.0) * max(self.y1 - self.y0, 0.0)

    @property
    def center(self):
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    @property
    def radius(self) -> float:
        # inscribed-ball proxy radius
        return 0.5 * min(self.x1 - self.x0, self.y1 - self.y0)


@dataclass(frozen=True)
class BallRegion:
    cx: float
    cy: float
    radius: float

    def mask(self, n: int) -> np.ndarray:
        c = grid_centers(n)
        dx = c[:, None] - self.cx
        dy = c[None, :] - self.cy
        return dx * dx + dy * dy < self.radius * self.radius

    @property
    def center(self):
        return (self.cx, self.cy)


@dataclass(frozen=True)
class OscillationReport:
    """Mean L1 deviation of the field from profile(psi^1) over a region."""

    value: float                 # oscillation per unit region measure
    total: float                 # raw integral of the deviation
    region_measure: float        # discrete measure of the sampled region
    direction: DirectionMap
    region: object
    profile: OneDProfile
    value_maxnorm: float = 0.0   # same, with the max-entry matrix norm

    @property
    def gamma_bound(self) -> float:
        return self.value


def _field_samples(field):
    """(values, n, is_matrix) for scalar or matrix fields."""
    if isinstance(field, ScalarField):
        return field.values, field.resolution, False
    if isinstance(field, MatrixField):
        return field.values, field.resolution, True
    arr = np.asarray(field, dtype=float)
    return arr, arr.shape[0], arr.ndim > 2


def _region_cells(region, n: int):
    mask = region.mask(n)
    if not mask.any():
        raise ValueError("region contains no grid cells")
    ii, jj = np.nonzero(mask)
    return ii, jj


def slab_average_profile(field, region, direction: DirectionMap,
                         bin_width: float | None = None) -> OneDProfile:
    """Average the field over slabs {x in region: psi^1(x) in bin}.

    Bins are uniform with width the grid spacing projected on the
    direction (h times the l1 norm of e) unless overridden; narrower bins
    are rejected since a cell's projection would straddle them.
    """
    values, n, is_matrix = _field_samples(field)
    h = 1.0 / n
    ii, jj = _region_cells(region, n)
    c = grid_centers(n)
    pts = np.stack([c[ii], c[jj]], axis=1)
    t = direction.psi1(pts)
    min_width = h * np.abs(direction.direction).sum()
    if bin_width is None:
        bin_width = min_width
    elif bin_width < min_width * (1 - 1e-12):
        raise ValueError("bin width below the projected grid spacing")
    t0 = float(t.min())
    nb = int(np.floor((float(t.max()) - t0) / bin_width)) + 1
    edges = t0 + bin_width * np.arange(nb + 1)
    idx = np.minimum(((t - t0) / bin_width).astype(int), nb - 1)
    counts = np.bincount(idx, minlength=nb).astype(float)
    filled = counts > 0
    if is_matrix:
        d = values.shape[-1]
        sums = np.zeros((nb, d, d))
        samples = values[ii, jj]
        for a in range(d):
            for b in range(d):
                sums[:, a, b] = np.bincount(idx, weights=samples[:, a, b],
                                            minlength=nb)
        avg = np.zeros_like(sums)
        np.divide(sums, counts[:, None, None], out=avg,
                  where=counts[:, None, None] > 0)
    else:
        sums = np.bincount(idx, weights=values[ii, jj], minlength=nb)
        avg = np.zeros_like(sums)
        np.divide(sums, counts, out=avg, where=counts > 0)
    return OneDProfile(edges, avg, filled)


def oscillation(field, region, direction: DirectionMap,
                profile: OneDProfile) -> OscillationReport:
    """Mean L1 deviation (Frobenius norm for matrix fields) of the field
    from profile(psi^1) over the region, normalized by the region's
    discrete measure."""
    values, n, is_matrix = _field_samples(field)
    h = 1.0 / n
    ii, jj = _region_cells(region, n)
    c = grid_centers(n)
    pts = np.stack([c[ii], c[jj]], axis=1)
    ref = profile.lookup(direction.psi1(pts))
    samples = values[ii, jj]
    if is_matrix:
        diff = samples - ref
        dev = np.sqrt((diff * diff).sum(axis=(-1, -2)))
        dev_max = np.abs(diff).max(axis=(-1, -2))
    else:
        dev = np.abs(samples - ref)
        dev_max = dev
    measure = ii.size * h * h
    total = float(dev.sum()) * h * h
    total_max = float(dev_max.sum()) * h * h
    return OscillationReport(total / measure, total, measure,
                             direction, region, profile,
                             value_maxnorm=total_max / measure)


def circle_direction_grid(count: int) -> list:
    """Unit vectors sampling directions (theta in [0, pi)), returned in
    lexicographic order so ties resolve deterministically."""
    if count < 1:
        raise ValueError("need at least one direction")
    thetas = np.pi * np.arange(count) / count
    vecs = [np.array([math.cos(t), math.sin(t)]) for t in thetas]
    return sorted(vecs, key=lambda v: (v[0], v[1]))


def best_direction(field, region, direction_grid):
    """Minimize the slab-profile oscillation over sampled directions.

    Directions are scanned in lexicographic order and only strict
    improvements replace the incumbent, so ties pick the
    lexicographically smallest direction.
    """
    candidates = sorted((np.asarray(e, dtype=float) for e in direction_grid),
                        key=lambda v: tuple(v))
    if not candidates:
        raise ValueError("direction grid is empty")
    best = None
    for e in candidates:
        dm = DirectionMap.from_direction(e)
        prof = slab_average_profile(field, region, dm)
        rep = oscillation(field, region, dm, prof)
        if best is None or rep.value < best[1].value:
            best = (dm, rep)
    return best


def standard_ball_sample(resolution: int, r0: float, seed: int = 0,
                         balls_per_decade: int = 1000,
                         min_cells: int = 8) -> list:
    """Dyadic squares (inscribed-ball proxies) with radius below r0, plus
    seeded random balls, balls_per_decade per factor-of-two radius band."""
    h = 1.0 / resolution
    regions: list = []
    side = min_cells * h
    while side <= 1.0:
        if side / 2.0 < r0:
            k = int(round(1.0 / side))
            for i in range(k):
                for j in range(k):
                    regions.append(Rect(i * side, (i + 1) * side,
                                        j * side, (j + 1) * side))
        side *= 2.0
    rng = np.random.default_rng(seed)
    r_hi = min(r0, 0.5)
    r_lo = max(2 * min_cells * h, r_hi / 2 ** 10)
    r = r_hi
    while r > r_lo:
        for _ in range(balls_per_decade):
            radius = rng.uniform(r / 2.0, r)
            cx = rng.uniform(radius, 1.0 - radius)
            cy = rng.uniform(radius, 1.0 - radius)
            regions.append(BallRegion(cx, cy, radius))
        r /= 2.0
    return regions


def gamma_profile(field, r0: float, ball_sample, direction_grid) -> float:
    """Sup over sampled regions of the best-direction oscillation: an
    empirical lower estimate of the one-directional smallness parameter."""
    worst = 0.0
    for region in ball_sample:
        radius = getattr(region, "radius", None)
        if radius is not None and radius >= r0:
            continue
        _, rep = best_direction(field, region, direction_grid)
        worst = max(worst, rep.value)
    return worst


def tau_index(region, kappa: float):
    """Least k >= 0 whose support square (kappa^-k/2, kappa^-k)^2 overlaps
    the region with positive measure, or None."""
    if kappa < 4:
        raise ValueError("kappa must be at least 4")
    if isinstance(region, Rect):
        x0, x1, y0, y1 = region.x0, region.x1, region.y0, region.y1
    else:
        x0 = region.cx - region.radius
        x1 = region.cx + region.radius
        y0 = region.cy - region.radius
        y1 = region.cy + region.radius
    k = 0
    while True:
        lo, hi = term_support(kappa, k)
        if hi <= max(x0, y0) and max(x0, y0) > 0:
            return None
        if (max(x0, lo) < min(x1, hi)) and (max(y0, lo) < min(y1, hi)):
            return k
        if hi <= x0 or hi <= y0:
            return None
        k += 1
        if k > 4096:  # degenerate region straddling zero width
            return None


def _interval_overlap(a0, a1, b0, b1) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def intersection_area(region: Rect, kappa: float, k: int) -> float:
    """Exact area of region ^ (kappa^-k/2, kappa^-k)^2."""
    lo, hi = term_support(kappa, k)
    return (_interval_overlap(region.x0, region.x1, lo, hi)
            * _interval_overlap(region.y0, region.y1, lo, hi))


def tail_sum_exact(region: Rect, kappa: float, tau: int) -> float:
    """Sum over i > tau of the exact overlap areas |Q ^ Q_i|.

    Terminates once the support squares drop below the region; a region
    whose corner touches the origin collects the remaining geometric tail
    in closed form.
    """
    total = 0.0
    i = tau + 1
    while True:
        lo, hi = term_support(kappa, i)
        if hi <= region.x0 or hi <= region.y0:
            return total
        if hi <= min(region.x1, region.y1) and region.x0 <= 0 and region.y0 <= 0:
            # every further square sits inside the region
            area_i = (hi - lo) * (hi - lo)
            return total + area_i / (1.0 - kappa ** -2)
        total += intersection_area(region, kappa, i)
        i += 1


@dataclass
class ExampleBoundReport:
    """Per-square verification of the example field's oscillation bound."""

    kappa: float
    epsilon: float
    resolution: int
    zeta_bmo: float
    squares: list = dc_field(default_factory=list)
    max_ratio: float = 0.0        # max over squares of M / |Q|
    bound_failures: int = 0       # M <= term1 + tail_grid violations
    tail_failures: int = 0        # exact tail-sum geometry violations
    ratio_failures: int = 0       # M/|Q| <= zeta_bmo + 4/(k^2-1) violations

    @property
    def ratio_threshold(self) -> float:
        return self.zeta_bmo + 4.0 / (self.kappa ** 2 - 1.0)

    @property
    def all_pass(self) -> bool:
        return not (self.bound_failures or self.tail_failures
                    or self.ratio_failures)


def _block_sums(arr2d: np.ndarray, s: int) -> np.ndarray:
    n = arr2d.shape[0]
    nb = n // s
    return arr2d.reshape(nb, s, nb, s).sum(axis=(1, 3))


def verify_example_bound(epsilon: float, kappa: float, resolution: int,
                         n_terms: int = 6, min_cells: int = 8,
                         profile: str = "indicator", profile_seed: int = 0,
                         ratio_tolerance: float = 0.05,
                         collect_squares: bool = False) -> ExampleBoundReport:
    """Check the oscillation bound on every dyadic square of side >=
    min_cells grid cells.

    Per square: tau is the least k whose support square meets it.  With
    the prescribed axis direction and profile (the x-axis profile
    f(kappa^tau x) times the mean of zeta(kappa^tau y), axes swapped for
    odd tau), three inequalities are checked: the grid-quadrature bound
    M <= term1 + tail (same quadrature on both sides, so it holds to
    float roundoff), the exact tail-sum geometry
    sum |Q ^ Q_i| <= 4 (kappa^2-1)^-1 |Q|, and the normalized consequence
    M/|Q| <= zeta_bmo + 4/(kappa^2-1) within ratio_tolerance.
    """
    if kappa < 4:
        raise ValueError("kappa must be at least 4")
    n = resolution
    if n & (n - 1):
        raise ValueError("resolution must be a power of two")
    from .fields import example_field  # local import to keep module load light

    field = example_field(epsilon, kappa, n_terms, n,
                          profile=profile, profile_seed=profile_seed)
    a = field.values
    h = 1.0 / n
    centers = grid_centers(n)
    f_fn = source_profile(profile, seed=profile_seed)
    zeta_bmo = dyadic_oscillation_sup(zeta_bump(centers, epsilon), min_cells=4)
    report = ExampleBoundReport(kappa, epsilon, n, zeta_bmo)
    ratio_cap = report.ratio_threshold * (1.0 + ratio_tolerance)
    tail_cap_factor = 4.0 / (kappa ** 2 - 1.0)

    abs_a = np.abs(a)
    s = min_cells
    while s <= n:
        nb = n // s
        side = s * h
        area = side * side
        x0 = np.arange(nb) * side
        # geometric tau per square: exact interval overlaps on the edges.
        # Once the support square drops below one grid square only the
        # origin-corner square can still be hit, and it always is.
        taus = np.full((nb, nb), -1, dtype=int)
        remaining = np.ones((nb, nb), dtype=bool)
        k = 0
        while remaining.any():
            lo, hi = term_support(kappa, k)
            ox = np.clip(np.minimum(x0 + side, hi) - np.maximum(x0, lo),
                         0.0, None)
            hit = (ox[:, None] > 0) & (ox[None, :] > 0)
            newly = remaining & hit
            taus[newly] = k
            remaining &= ~hit
            if hi <= side and not remaining[0, 0]:
                break
            k += 1
        if taus.max() >= n_terms:
            raise ValueError(
                f"n_terms={n_terms} omits the leading term of tau={taus.max()}"
                " squares; raise the term budget")
        # squares meeting no support square: the field must vanish there
        empty = taus == -1
        block_abs = _block_sums(abs_a, s)
        report.bound_failures += int(np.count_nonzero(block_abs[empty]))
        for kval in np.unique(taus[taus >= 0]):
            sel = taus == kval
            scaled = centers * kappa ** float(kval)
            f_line = f_fn(scaled)
            z_line = zeta_bump(scaled, epsilon)
            zbar = z_line.reshape(nb, s).mean(axis=1)
            f_absint = np.abs(f_line).reshape(nb, s).sum(axis=1) * h
            zdev = np.abs(z_line.reshape(nb, s) - zbar[:, None]).sum(axis=1) * h
            zbar_rep = np.repeat(zbar, s)
            if kval % 2 == 0:
                dev = np.abs(a - f_line[:, None] * zbar_rep[None, :])
                term1_all = f_absint[:, None] * zdev[None, :]
            else:
                dev = np.abs(a - zbar_rep[:, None] * f_line[None, :])
                term1_all = zdev[:, None] * f_absint[None, :]
            m_all = _block_sums(dev, s) * h * h
            # tails: grid-measured (same quadrature as M) and exact areas
            tail_grid = np.zeros((nb, nb))
            tail_exact = np.zeros((nb, nb))
            i = int(kval) + 1
            while True:
                lo, hi = term_support(kappa, i)
                if hi <= h / 2:
                    # below the first grid center; every further support
                    # square sits inside the origin-corner region
                    tail_exact[0, 0] += (hi - lo) ** 2 / (1.0 - kappa ** -2)
                    break
                inside = ((centers > lo) & (centers < hi)).reshape(nb, s)
                cnt = inside.sum(axis=1).astype(float)
                ox = np.clip(np.minimum(x0 + side, hi) - np.maximum(x0, lo),
                             0.0, None)
                tail_grid += np.outer(cnt, cnt) * h * h
                tail_exact += np.outer(ox, ox)
                i += 1
            m_sel = m_all[sel]
            rhs_sel = term1_all[sel] + tail_grid[sel]
            bound_bad = m_sel > rhs_sel + 1e-12 * np.maximum(1.0, rhs_sel)
            tail_bad = tail_exact[sel] > tail_cap_factor * area * (1 + 1e-12)
            ratio_bad = m_sel / area > ratio_cap
            report.bound_failures += int(bound_bad.sum())
            report.tail_failures += int(tail_bad.sum())
            report.ratio_failures += int(ratio_bad.sum())
            report.max_ratio = max(report.max_ratio,
                                   float((m_sel / area).max(initial=0.0)))
            if collect_squares:
                bi, bj = np.nonzero(sel)
                for b in range(bi.size):
                    report.squares.append({
                        "x0": x0[bi[b]], "y0": x0[bj[b]], "side": side,
                        "tau": int(kval), "m": float(m_all[bi[b], bj[b]]),
                        "term1": float(term1_all[bi[b], bj[b]]),
                        "tail_grid": float(tail_grid[bi[b], bj[b]]),
                        "tail_exact": float(tail_exact[bi[b], bj[b]]),
                        "ratio": float(m_all[bi[b], bj[b]] / area),
                    })
        s *= 2
    return report
