"""Distribution and norm bounds driven by cell-oscillation premises.

Given a triple (u, v, g) on a filtration, two alternative per-cell
premises are checked: a monotone one (the positive part of u minus the
cell average of v integrates below g) and a sharp-function one (the
smaller of two mean-oscillation integrals is dominated by g, allowing a
per-cell majorant between |u| and v).  Either premise yields a weak-type
distribution inequality driven by the maximal function of v, and from it
an L_p bound with an explicit constant tracked through the proof chain
(Chebyshev, layer cake, Hoelder, maximal inequality).

All evaluations are exact finite sums; the only caveat is the finite
truncation of the level range, which restricts the distribution bound to
thresholds above :func:`truncation_threshold`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyadic import (
    PartitionFiltration,
    WeightedFunction,
    _cell_averages,
    _safe_divide,
    conditional_average,
    dyadic_maximal,
)

__all__ = [
    "AlphaConstant",
    "FsTriple",
    "MajorantFamily",
    "PremiseReport",
    "check_premise_monotone",
    "check_premise_sharp",
    "distribution_bound",
    "truncation_threshold",
    "sharp_function",
    "fs_norm_bound",
    "norm_bound_constant",
    "layer_cake_pth_power",
    "minimal_monotone_g",
    "minimal_sharp_g",
    "random_monotone_triple",
    "random_sharp_triple",
]

_PREMISE_RTOL = 1e-12


@dataclass(frozen=True)
class AlphaConstant:
    """Maximal-function threshold factor alpha = 1/(2 N0)."""

    alpha: float
    regularity: float

    @staticmethod
    def from_regularity(n0: float) -> "AlphaConstant":
        if n0 <= 1:
            raise ValueError("regularity constant must exceed 1")
        return AlphaConstant(1.0 / (2.0 * n0), float(n0))


@dataclass(frozen=True)
class FsTriple:
    """Functions u, v, g on one filtration, with g >= 0.

    mode "monotone" requires 0 <= u <= v pointwise; mode "sharp"
    requires |u| <= v.
    """

    filtration: PartitionFiltration
    u: WeightedFunction
    v: WeightedFunction
    g: WeightedFunction
    mode: str = "monotone"

    def __post_init__(self):
        space = self.filtration.space
        for f in (self.u, self.v, self.g):
            if f.space is not space and f.space.atom_count != space.atom_count:
                raise ValueError("triple functions must share the filtration's space")
        if np.any(self.g.values < 0):
            raise ValueError("g must be nonnegative")
        if self.mode == "monotone":
            if np.any(self.u.values < 0) or np.any(self.u.values > self.v.values):
                raise ValueError("monotone mode needs 0 <= u <= v pointwise")
        elif self.mode == "sharp":
            if np.any(np.abs(self.u.values) > self.v.values):
                raise ValueError("sharp mode needs |u| <= v pointwise")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def alpha(self) -> AlphaConstant:
        return AlphaConstant.from_regularity(self.filtration.regularity)


@dataclass(frozen=True)
class MajorantFamily:
    """Per-cell majorants u^C with |u| <= u^C <= v on each cell C.

    The common case is one global function restricted to every cell;
    individual cells may override it via ``overrides`` keyed by
    (level, cell index).
    """

    global_values: np.ndarray
    overrides: dict | None = None

    @staticmethod
    def from_global(values) -> "MajorantFamily":
        return MajorantFamily(np.asarray(values, dtype=float))

    def on_level(self, filtration: PartitionFiltration, n: int) -> np.ndarray:
        """Values of u^C per atom, for the cells of level n."""
        vals = np.array(self.global_values, dtype=float)
        if self.overrides:
            idx = filtration.atom_to_cell[n - filtration.n_min]
            for (lev, cell), cell_vals in self.overrides.items():
                if lev == n:
                    vals[idx == cell] = cell_vals
        return vals

    def validate(self, t: FsTriple) -> None:
        for n in t.filtration.levels:
            w = self.on_level(t.filtration, n)
            if np.any(np.abs(t.u.values) > w * (1 + _PREMISE_RTOL) + 1e-300):
                raise ValueError("majorant violates |u| <= u^C")
            if np.any(w > t.v.values * (1 + _PREMISE_RTOL) + 1e-300):
                raise ValueError("majorant violates u^C <= v")


@dataclass(frozen=True)
class PremiseReport:
    """Outcome of a per-cell premise sweep; truthy iff every cell passed."""

    ok: bool
    worst_level: int | None
    worst_cell: int | None
    violation: float

    def __bool__(self) -> bool:
        return self.ok


def _scan_levels(filtration, required_by_level, g: WeightedFunction) -> PremiseReport:
    """Compare per-cell requirements against cell integrals of g."""
    w = filtration.space.weights
    worst = (0.0, None, None)
    scale = 1e-300
    for k, required in enumerate(required_by_level):
        idx = filtration.atom_to_cell[k]
        g_cells = np.bincount(idx, weights=g.values * w, minlength=required.size)
        scale = max(scale, float(np.abs(required).max(initial=0.0)),
                    float(g_cells.max(initial=0.0)))
        gap = required - g_cells
        c = int(np.argmax(gap))
        if gap[c] > worst[0]:
            worst = (float(gap[c]), filtration.n_min + k, c)
    ok = worst[0] <= _PREMISE_RTOL * max(scale, 1.0)
    return PremiseReport(ok, worst[1], worst[2], worst[0])


def _monotone_requirements(t: FsTriple) -> list:
    """Per level: cell integrals of (u - v_C)_+."""
    filt, w = t.filtration, t.filtration.space.weights
    out = []
    for k in range(filt.level_count):
        idx = filt.atom_to_cell[k]
        v_c = _cell_averages(filt, t.v.values, k)[idx]
        pos = np.clip(t.u.values - v_c, 0.0, None) * w
        out.append(np.bincount(idx, weights=pos,
                               minlength=filt.cell_measures[k].size))
    return out


def check_premise_monotone(t: FsTriple) -> PremiseReport:
    """True iff the integral of (u - v_C)_+ over C stays below that of g,
    for every cell C of every level; reports the worst cell otherwise."""
    if t.mode != "monotone":
        raise ValueError("triple is not in monotone mode")
    return _scan_levels(t.filtration, _monotone_requirements(t), t.g)


def _oscillation_integrals(filtration, values: np.ndarray, k: int) -> np.ndarray:
    """Per cell at level index k: integral of |values - cell average|."""
    idx = filtration.atom_to_cell[k]
    avg = _cell_averages(filtration, values, k)[idx]
    dev = np.abs(values - avg) * filtration.space.weights
    return np.bincount(idx, weights=dev, minlength=filtration.cell_measures[k].size)


def _sharp_requirements(t: FsTriple, m: MajorantFamily) -> list:
    filt = t.filtration
    out = []
    for k in range(filt.level_count):
        osc_u = _oscillation_integrals(filt, t.u.values, k)
        osc_m = _oscillation_integrals(
            filt, m.on_level(filt, filt.n_min + k), k)
        out.append(np.minimum(osc_u, osc_m))
    return out


def check_premise_sharp(t: FsTriple, m: MajorantFamily) -> PremiseReport:
    """True iff, per cell, the smaller of the two mean-oscillation
    integrals (of u, and of the majorant u^C) is dominated by that of g."""
    if t.mode != "sharp":
        raise ValueError("triple is not in sharp mode")
    m.validate(t)
    return _scan_levels(t.filtration, _sharp_requirements(t, m), t.g)


def sharp_function(filtration: PartitionFiltration,
                   u: WeightedFunction) -> WeightedFunction:
    """Pointwise supremum over levels of the mean oscillation of u over
    the containing cell."""
    best = np.zeros(filtration.space.atom_count)
    for k in range(filtration.level_count):
        idx = filtration.atom_to_cell[k]
        osc = _safe_divide(_oscillation_integrals(filtration, u.values, k),
                           filtration.cell_measures[k])
        np.maximum(best, osc[idx], out=best)
    return u.with_values(best)


def truncation_threshold(t: FsTriple) -> float:
    """Smallest lam for which the distribution bound's proof survives the
    finite truncation: coarsest-level averages of v must not exceed
    alpha * lam, so the first-exceedance time always has a parent level."""
    coarse = t.filtration.coarsest_cell_averages(t.v)
    return float(coarse.max(initial=0.0) / t.alpha.alpha)


def distribution_bound(t: FsTriple, lam: float,
                       maximal_v: WeightedFunction | None = None):
    """Level-set measure of u against the g-mass where the maximal
    function of v is large.

    Returns (lhs, rhs) with lhs the measure of {u >= lam} (monotone mode)
    or {|u| >= lam} (sharp mode), and
    rhs = coeff/lam * integral of g over {Mv > alpha*lam}.  The
    coefficient is 2, improved to 1 in sharp mode when u >= 0.  The
    contract lhs <= rhs is guaranteed for lam >= truncation_threshold(t)
    whenever the matching premise holds.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    mv = (maximal_v or dyadic_maximal(t.filtration, t.v)).values
    alpha = t.alpha.alpha
    if t.mode == "monotone":
        coeff, lhs = 2.0, t.u.level_set_measure(lam)
    else:
        coeff = 1.0 if np.all(t.u.values >= 0) else 2.0
        lhs = t.u.level_set_measure(lam, absolute=True)
    w = t.filtration.space.weights
    rhs = coeff / lam * float(np.dot(t.g.values * (mv > alpha * lam), w))
    return lhs, rhs


def norm_bound_constant(p: float, n0: float) -> float:
    """Explicit constant 2 * q^p * alpha^(1-p), q = p/(p-1), alpha = 1/(2 N0)."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    q = p / (p - 1.0)
    alpha = AlphaConstant.from_regularity(n0).alpha
    return 2.0 * q ** p * alpha ** (1.0 - p)


def fs_norm_bound(t: FsTriple, p: float):
    """L_p bound ||u||_p^p <= N ||g||_p ||v||_p^(p-1) with the explicit
    proof-tracked constant N = 2 q^p alpha^(1-p).

    Returns (lhs, rhs, N).  Promised for triples satisfying one of the
    two premises on a space padded enough that the truncation threshold
    is negligible.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    n = norm_bound_constant(p, t.filtration.regularity)
    lhs = t.u.norm(p) ** p
    rhs = n * t.g.norm(p) * t.v.norm(p) ** (p - 1.0)
    return lhs, rhs, n


def layer_cake_pth_power(f: WeightedFunction, p: float) -> float:
    """||f||_p^p as the exact finite layer-cake sum over the sorted
    distinct values of |f|^p.

    Thresholds are taken at the values of |f| themselves so that the
    level-set measures need no p-th-root round trip.
    """
    levels = np.sort(np.unique(np.abs(f.values)))
    total, prev = 0.0, 0.0
    for s in levels:
        if s == 0.0:
            continue
        total += (s ** p - prev) * f.level_set_measure(s, absolute=True)
        prev = s ** p
    return total


def _minimal_g_from_requirements(filtration, required_by_level) -> np.ndarray:
    """Smallest per-atom g whose cell integrals dominate the requirements:
    per atom the max over containing cells of requirement / cell measure."""
    g = np.zeros(filtration.space.atom_count)
    for k, required in enumerate(required_by_level):
        idx = filtration.atom_to_cell[k]
        dens = _safe_divide(required, filtration.cell_measures[k])
        np.maximum(g, dens[idx], out=g)
    return g


def minimal_monotone_g(filtration, u: WeightedFunction,
                       v: WeightedFunction) -> WeightedFunction:
    t = FsTriple(filtration, u, v, u.with_values(np.zeros(u.values.size)),
                 mode="monotone")
    return u.with_values(_minimal_g_from_requirements(
        filtration, _monotone_requirements(t)))


def minimal_sharp_g(filtration, u: WeightedFunction, v: WeightedFunction,
                    m: MajorantFamily) -> WeightedFunction:
    t = FsTriple(filtration, u, v, u.with_values(np.zeros(u.values.size)),
                 mode="sharp")
    return u.with_values(_minimal_g_from_requirements(
        filtration, _sharp_requirements(t, m)))


def random_monotone_triple(filtration: PartitionFiltration, rng,
                           base_atoms: int | None = None) -> FsTriple:
    """Seeded premise-satisfying triple: v >= 0 random, u = a*v with
    a in [0,1] per atom, g minimal admissible inflated by a factor >= 1.

    ``base_atoms`` restricts the support (zero elsewhere), matching
    functions that were zero-extended onto a padded space.
    """
    m = filtration.space.atom_count
    support = m if base_atoms is None else base_atoms
    v = np.zeros(m)
    v[:support] = rng.uniform(0.0, 1.0, support) ** 2 * rng.uniform(0.5, 4.0)
    u = v * rng.uniform(0.0, 1.0, m)
    vf = filtration.function(v)
    uf = filtration.function(u)
    g0 = minimal_monotone_g(filtration, uf, vf).values
    g = g0 * rng.uniform(1.0, 2.0, m)
    return FsTriple(filtration, uf, vf, filtration.function(g), mode="monotone")


def random_sharp_triple(filtration: PartitionFiltration, rng,
                        base_atoms: int | None = None,
                        nonnegative: bool = False):
    """Seeded sharp-mode triple plus its majorant family: |u| <= v with
    random signs (unless nonnegative), majorant |u|, minimal admissible g
    inflated by a factor >= 1."""
    m = filtration.space.atom_count
    support = m if base_atoms is None else base_atoms
    v = np.zeros(m)
    v[:support] = rng.uniform(0.0, 1.0, support) ** 2 * rng.uniform(0.5, 4.0)
    signs = np.ones(m) if nonnegative else rng.choice([-1.0, 1.0], m)
    u = v * rng.uniform(0.0, 1.0, m) * signs
    vf, uf = filtration.function(v), filtration.function(u)
    majorant = MajorantFamily.from_global(np.abs(u))
    g0 = minimal_sharp_g(filtration, uf, vf, majorant).values
    g = g0 * rng.uniform(1.0, 2.0, m)
    return FsTriple(filtration, uf, vf, filtration.function(g),
                    mode="sharp"), majorant
