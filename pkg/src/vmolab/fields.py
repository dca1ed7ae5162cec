"""Coefficient fields on periodic grids.

The centerpiece is a scalar field built from a double sum of rescaled
products f(k^r x) * zeta(k^r y) whose r-th term lives on the square
(k^-r/2, k^-r)^2; the factor zeta is a sine of a scaled logarithm, so its
mean oscillation can be made arbitrarily small while the field itself
stays rough.  Scalar fields embed into uniformly elliptic matrix fields,
and a few reference matrix fields (constant, one-directional, rotated)
round out the catalogue.

Grids sample the half-open unit square/cube at cell centers (i + 1/2) h,
which keeps every logarithmic singularity strictly between nodes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ScalarField",
    "MatrixField",
    "logarithm_bmo_seed",
    "zeta_bump",
    "example_field",
    "term_support",
    "bmo_seminorm",
    "dyadic_oscillation_sup",
    "dyadic_windows",
    "embed_as_matrix",
    "reference_fields",
    "checkerboard_profile",
    "source_profile",
    "grid_centers",
    "save_field",
    "load_field",
]

#: Smallest positive normal double; floors log arguments so the value at a
#: logarithmic singularity is finite and deterministic.
_LOG_FLOOR = float.fromhex("0x1p-1022")


def grid_centers(n: int) -> np.ndarray:
    """Cell centers (i + 1/2)/n of the n-cell uniform grid on [0, 1)."""
    return (np.arange(n) + 0.5) / n


def logarithm_bmo_seed(x):
    """ln(|x| clipped to [floor, 1]); the classical unbounded function of
    bounded mean oscillation, regularized only at |x| below the smallest
    normal double."""
    ax = np.clip(np.abs(np.asarray(x, dtype=float)), _LOG_FLOOR, 1.0)
    out = np.log(ax)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def zeta_bump(x, epsilon: float):
    """sin(epsilon * ln(|4x-3| ^ 1)); supported in (1/2, 1), bounded by 1.

    The logarithmic singularity sits at x = 3/4; half-offset grids never
    sample it, and the floored logarithm keeps the value finite there.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return np.sin(epsilon * logarithm_bmo_seed(4.0 * np.asarray(x, dtype=float) - 3.0))


def source_profile(name: str = "indicator", seed: int = 0,
                   cycles: int = 16, steps: int = 32):
    """Bounded profiles supported in (1/2, 1) for the field's f factor.

    indicator: 1 on (1/2, 1).  square_wave: sign-alternating at ``cycles``
    cycles across the support.  random_step: seeded piecewise-constant
    values in [-1, 1] on ``steps`` equal subintervals.
    """
    if name == "indicator":
        def f(t):
            t = np.asarray(t, dtype=float)
            return ((t > 0.5) & (t < 1.0)).astype(float)
        return f
    if name == "square_wave":
        def f(t):
            t = np.asarray(t, dtype=float)
            inside = (t > 0.5) & (t < 1.0)
            phase = np.floor((t - 0.5) * 2.0 * cycles)
            return np.where(inside, 1.0 - 2.0 * (phase % 2), 0.0)
        return f
    if name == "random_step":
        rng = np.random.default_rng(seed)
        table = rng.uniform(-1.0, 1.0, steps)

        def f(t):
            t = np.asarray(t, dtype=float)
            inside = (t > 0.5) & (t < 1.0)
            idx = np.clip(((t - 0.5) * 2.0 * steps).astype(int), 0, steps - 1)
            return np.where(inside, table[idx], 0.0)
        return f
    raise ValueError(f"unknown profile {name!r}")


@dataclass(frozen=True)
class ScalarField:
    """Grid samples on the periodic unit square/cube, cell-center raster."""

    values: np.ndarray
    params: dict | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.ndim not in (1, 2, 3) or len(set(v.shape)) != 1:
            raise ValueError("values must be a cube-shaped array")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.resolution


def term_support(kappa: float, r: int):
    """Open interval (kappa^-r / 2, kappa^-r) carrying the r-th term along
    each axis."""
    return kappa ** (-r) / 2.0, kappa ** (-r)


def example_field(epsilon: float, kappa: float, n_terms: int, resolution: int,
                  profile: str = "indicator", profile_seed: int = 0) -> ScalarField:
    """Truncated double sum of rescaled f x zeta products on the unit square.

    Terms r = 0..n_terms-1; even r contributes f(kappa^r x) zeta(kappa^r y),
    odd r the same with axes swapped.  Term r is supported in the square
    (kappa^-r/2, kappa^-r)^2, and those squares are pairwise disjoint for
    kappa >= 4, so at most one term is nonzero at any sample.
    """
    if kappa < 4:
        raise ValueError("kappa must be at least 4")
    if n_terms < 0 or resolution < 2:
        raise ValueError("need n_terms >= 0 and resolution >= 2")
    f = source_profile(profile, seed=profile_seed)
    centers = grid_centers(resolution)
    values = np.zeros((resolution, resolution))
    for r in range(n_terms):
        lo, hi = term_support(kappa, r)
        sel = np.nonzero((centers > lo) & (centers < hi))[0]
        if sel.size == 0:
            continue
        window = centers[sel] * kappa ** r
        fw = f(window)
        zw = zeta_bump(window, epsilon)
        if r % 2 == 0:
            values[np.ix_(sel, sel)] += np.outer(fw, zw)
        else:
            values[np.ix_(sel, sel)] += np.outer(zw, fw)
    return ScalarField(values, params={
        "epsilon": epsilon, "kappa": kappa, "n_terms": n_terms,
        "profile": profile, "profile_seed": profile_seed})


def _window_oscillation(block: np.ndarray) -> float:
    mean = block.mean()
    return float(np.abs(block - mean).mean())


def bmo_seminorm(field, windows) -> float:
    """Sup over the given square windows of the mean oscillation.

    Windows are index tuples: (start, size) on 1-d fields, or
    (row, col, size) on 2-d fields; every window must hold at least
    4 grid cells and lie inside the grid.
    """
    values = field.values if isinstance(field, ScalarField) else np.asarray(field)
    n = values.shape[0]
    best = 0.0
    got_any = False
    for w in windows:
        got_any = True
        if values.ndim == 1:
            start, size = w
            if size < 4:
                raise ValueError("window must contain at least 4 grid cells")
            if start < 0 or start + size > n:
                raise ValueError("window outside grid")
            block = values[start:start + size]
        else:
            row, col, size = w
            if size * size < 4:
                raise ValueError("window must contain at least 4 grid cells")
            if min(row, col) < 0 or max(row, col) + size > n:
                raise ValueError("window outside grid")
            block = values[row:row + size, col:col + size]
        best = max(best, _window_oscillation(block))
    if not got_any:
        raise ValueError("windows family is empty")
    return best


def dyadic_windows(shape, min_cells: int = 4):
    """All dyadic-aligned square windows with power-of-two side, side at
    least min_cells (1-d) or enough to hold min_cells cells (2-d)."""
    n = shape[0] if isinstance(shape, tuple) else int(shape)
    ndim = len(shape) if isinstance(shape, tuple) else 1
    side = 1
    while side < n:
        side <<= 1
        if ndim == 1 and side < min_cells:
            continue
        if ndim == 2 and side * side < min_cells:
            continue
        if side > n:
            break
        for i in range(0, n, side):
            if ndim == 1:
                yield (i, side)
            else:
                for j in range(0, n, side):
                    yield (i, j, side)


def dyadic_oscillation_sup(values: np.ndarray, min_cells: int = 4) -> float:
    """Fast sup of mean oscillation over the complete dyadic tilings;
    equals bmo_seminorm over dyadic_windows when n is a power of two."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    best = 0.0
    side = 1
    while side < n:
        side <<= 1
        if side > n or n % side:
            break
        nb = n // side
        if values.ndim == 1:
            if side < min_cells:
                continue
            blocks = values.reshape(nb, side)
            means = blocks.mean(axis=1, keepdims=True)
            osc = np.abs(blocks - means).mean(axis=1)
        else:
            if side * side < min_cells:
                continue
            blocks = values.reshape(nb, side, nb, side)
            means = blocks.mean(axis=(1, 3), keepdims=True)
            osc = np.abs(blocks - means).mean(axis=(1, 3))
        best = max(best, float(osc.max()))
    return best


@dataclass(frozen=True)
class MatrixField:
    """Symmetric matrix samples a(x) with spectrum in [delta, 1/delta];
    optional drift b and zeroth-order c bounded by K."""

    values: np.ndarray
    delta: float
    b: np.ndarray | None = None
    c: np.ndarray | None = None
    bound_k: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.ndim < 3 or v.shape[-1] != v.shape[-2]:
            raise ValueError("values must be (*grid, d, d) matrix samples")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not np.allclose(v, np.swapaxes(v, -1, -2), atol=1e-12):
            raise ValueError("matrix samples must be symmetric")
        v = 0.5 * (v + np.swapaxes(v, -1, -2))
        eigs = np.linalg.eigvalsh(v)
        lo, hi = float(eigs.min()), float(eigs.max())
        tol = 1e-10
        if lo < self.delta - tol or hi > 1.0 / self.delta + tol:
            raise ValueError(
                f"eigenvalues [{lo}, {hi}] escape [{self.delta}, {1 / self.delta}]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "measured_eig_range", (lo, hi))
        if self.b is not None:
            b = np.asarray(self.b, dtype=float).copy()
            if b.shape != v.shape[:-1]:
                raise ValueError("b must be (*grid, d)")
            b.setflags(write=False)
            object.__setattr__(self, "b", b)
        if self.c is not None:
            c = np.asarray(self.c, dtype=float).copy()
            if c.shape != v.shape[:-2]:
                raise ValueError("c must be (*grid,)")
            c.setflags(write=False)
            object.__setattr__(self, "c", c)
        if self.bound_k is not None:
            k = self.bound_k
            if self.b is not None and np.abs(self.b).max() > k + 1e-12:
                raise ValueError("|b| exceeds the stated bound")
            if self.c is not None and np.abs(self.c).max() > k + 1e-12:
                raise ValueError("|c| exceeds the stated bound")

    @property
    def d(self) -> int:
        return self.values.shape[-1]

    @property
    def grid_shape(self):
        return self.values.shape[:-2]

    @property
    def resolution(self) -> int:
        return self.grid_shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.resolution


def embed_as_matrix(field: ScalarField, delta: float,
                    margin_frac: float = 0.05) -> MatrixField:
    """Affinely rescale a scalar field into [delta+m, 1/delta-m] and place
    it on the diagonal: a(x) = m(x) * I.

    A constant scalar field maps to the midpoint (delta + 1/delta)/2.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    span = 1.0 / delta - delta
    lo = delta + margin_frac * span
    hi = 1.0 / delta - margin_frac * span
    v = field.values
    vmin, vmax = float(v.min()), float(v.max())
    if vmax > vmin:
        scaled = lo + (v - vmin) / (vmax - vmin) * (hi - lo)
    else:
        scaled = np.full_like(v, 0.5 * (lo + hi))
    d = field.d
    eye = np.eye(d)
    values = scaled[..., None, None] * eye
    return MatrixField(values, delta)


def checkerboard_profile(delta: float, period: float = 1.0 / 8.0):
    """One-variable matrix profile alternating between delta*I and
    (1/delta)*I on consecutive intervals of the given period."""
    def profile(t):
        t = np.asarray(t, dtype=float)
        phase = np.floor(t / period).astype(int) % 2
        lam = np.where(phase == 0, delta, 1.0 / delta)
        return lam[..., None, None] * np.eye(2)
    return profile


def reference_fields(kind: str, *, resolution: int, delta: float,
                     matrix=None, profile=None, direction=None) -> MatrixField:
    """Constant, one-directional, or rotated one-directional matrix fields.

    constant: a(x) = matrix.  one_directional: a(x) = profile(x1).
    rotated_one_directional: a(x) = profile(e . x) for a unit vector e.
    Profiles violating the [delta, 1/delta] spectral window are rejected
    by the MatrixField constructor.
    """
    centers = grid_centers(resolution)
    if kind == "constant":
        if matrix is None:
            matrix = np.eye(2)
        matrix = np.asarray(matrix, dtype=float)
        d = matrix.shape[0]
        values = np.broadcast_to(
            matrix, (resolution,) * d + (d, d)).copy()
        return MatrixField(values, delta)
    if kind == "one_directional":
        if profile is None:
            raise ValueError("one_directional needs a profile")
        t = centers
        mats = profile(t)
        values = np.broadcast_to(
            mats[:, None, :, :], (resolution, resolution, 2, 2)).copy()
        return MatrixField(values, delta)
    if kind == "rotated_one_directional":
        if profile is None or direction is None:
            raise ValueError("rotated_one_directional needs profile and direction")
        e = np.asarray(direction, dtype=float)
        e = e / np.linalg.norm(e)
        xx, yy = np.meshgrid(centers, centers, indexing="ij")
        t = e[0] * xx + e[1] * yy
        values = profile(t.ravel()).reshape(resolution, resolution, 2, 2)
        return MatrixField(values, delta)
    raise ValueError(f"unknown reference kind {kind!r}")


def save_field(field: ScalarField, path) -> None:
    """Row-major float64 binary plus a JSON sidecar {d, n, h, delta, params}."""
    path = Path(path)
    field.values.astype("<f8").tofile(path)
    params = dict(field.params or {})
    sidecar = {
        "d": field.d,
        "n": field.resolution,
        "h": field.h,
        "delta": params.pop("delta", None),
        "params": params,
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar))


def load_field(path) -> ScalarField:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    n, d = sidecar["n"], sidecar["d"]
    raw = np.fromfile(path, dtype="<f8")
    values = raw.reshape((n,) * d)
    params = dict(sidecar.get("params") or {})
    if sidecar.get("delta") is not None:
        params["delta"] = sidecar["delta"]
    return ScalarField(values, params=params)
