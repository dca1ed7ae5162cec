"""Finite weighted atom spaces with nested partition filtrations.

Atoms carry positive weights (the measure), partitions refine from a
coarsest level down to singleton cells, and a regularity constant bounds
how much measure a parent cell may add over any of its children.  On top
of that structure live conditional averages per level, first-exceedance
stopping times, and the level-wise maximal operator.

Everything here is immutable after construction and all operations are
pure functions, so concurrent evaluation over disjoint inputs is safe.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "INFINITY",
    "FiltrationError",
    "AtomSpace",
    "WeightedFunction",
    "PartitionFiltration",
    "StoppingTimeMap",
    "build_dyadic_filtration",
    "conditional_average",
    "stopping_time_first_exceed",
    "evaluate_given_tau",
    "dyadic_maximal",
    "pad_with_zero_levels",
    "extend_by_zero",
    "filtration_to_json",
    "filtration_from_json",
]

#: Sentinel for "the stopping time never fires".
INFINITY: int = np.iinfo(np.int64).max

#: Default cap on the number of atoms a constructor may produce.
DEFAULT_ATOM_CAP: int = 1 << 20


class FiltrationError(ValueError):
    """Partition data violate the filtration structure."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype).copy()
    arr.setflags(write=False)
    return arr


def _safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Elementwise num/den with the 0/0 := 0 convention."""
    out = np.zeros_like(num, dtype=float)
    np.divide(num, den, out=out, where=den != 0)
    return out


@dataclass(frozen=True)
class AtomSpace:
    """A finite set of atoms with positive weights (the measure)."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen_array(self.weights)
        if w.ndim != 1 or w.size == 0:
            raise FiltrationError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise FiltrationError("every atom weight must be positive and finite")
        object.__setattr__(self, "weights", w)

    @property
    def atom_count(self) -> int:
        return self.weights.size

    @property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    def measure(self, atom_indices) -> float:
        return float(self.weights[np.asarray(atom_indices, dtype=int)].sum())


@dataclass(frozen=True)
class WeightedFunction:
    """Real values per atom of an :class:`AtomSpace`."""

    values: np.ndarray
    space: AtomSpace

    def __post_init__(self):
        v = _frozen_array(self.values)
        if v.ndim != 1 or v.size != self.space.atom_count:
            raise FiltrationError("value count must match the atom count")
        if not np.all(np.isfinite(v)):
            raise FiltrationError("function values must be finite")
        object.__setattr__(self, "values", v)

    def integral(self) -> float:
        return float(np.dot(self.values, self.space.weights))

    def norm(self, p: float) -> float:
        """L_p norm with respect to the atom weights."""
        if p < 1:
            raise ValueError("p must be >= 1")
        return float(np.dot(np.abs(self.values) ** p, self.space.weights) ** (1.0 / p))

    def level_set_measure(self, lam: float, absolute: bool = False) -> float:
        """Measure of {f >= lam} (or {|f| >= lam})."""
        v = np.abs(self.values) if absolute else self.values
        return float(self.space.weights[v >= lam].sum())

    def with_values(self, values) -> "WeightedFunction":
        return WeightedFunction(values, self.space)


def _cells_to_atom_map(cells: Sequence[Sequence[int]], atom_count: int) -> np.ndarray:
    atom_to_cell = np.full(atom_count, -1, dtype=np.int64)
    for ci, cell in enumerate(cells):
        idx = np.asarray(cell, dtype=np.int64)
        if idx.size == 0:
            raise FiltrationError("empty cell in partition")
        if np.any(idx < 0) or np.any(idx >= atom_count):
            raise FiltrationError("cell atom index out of range")
        if np.any(atom_to_cell[idx] != -1):
            raise FiltrationError("partition cells overlap")
        atom_to_cell[idx] = ci
    if np.any(atom_to_cell == -1):
        raise FiltrationError("partition does not cover all atoms")
    return atom_to_cell


@dataclass(frozen=True)
class PartitionFiltration:
    """Nested partitions of an atom space, coarsest level first.

    ``atom_to_cell[k]`` maps each atom to its cell index at level
    ``n_min + k``; ``cell_measures[k]`` holds the corresponding cell
    measures.  Each cell is contained in exactly one cell of the previous
    (coarser) level, parent measure never exceeds ``regularity`` times the
    child measure, and the finest level consists of singletons.
    """

    space: AtomSpace
    n_min: int
    regularity: float
    atom_to_cell: tuple
    cell_measures: tuple

    @property
    def n_max(self) -> int:
        return self.n_min + len(self.atom_to_cell) - 1

    @property
    def level_count(self) -> int:
        return len(self.atom_to_cell)

    @property
    def levels(self) -> range:
        return range(self.n_min, self.n_max + 1)

    def _index(self, n: int) -> int:
        if not (self.n_min <= n <= self.n_max):
            raise FiltrationError(f"level {n} outside [{self.n_min}, {self.n_max}]")
        return n - self.n_min

    def cell_count(self, n: int) -> int:
        return self.cell_measures[self._index(n)].size

    def cells_at(self, n: int) -> list:
        """Atom-index arrays of all cells at level n (derived view)."""
        idx = self.atom_to_cell[self._index(n)]
        order = np.argsort(idx, kind="stable")
        bounds = np.searchsorted(idx[order], np.arange(self.cell_count(n) + 1))
        return [order[bounds[c]:bounds[c + 1]] for c in range(self.cell_count(n))]

    def function(self, values) -> WeightedFunction:
        return WeightedFunction(values, self.space)

    def coarsest_cell_averages(self, f: WeightedFunction) -> np.ndarray:
        """Cell averages of f at the coarsest level."""
        return _cell_averages(self, f.values, 0)

    @staticmethod
    def from_cells(weights, levels: Sequence[Sequence[Sequence[int]]],
                   n_min: int = 0, regularity: float | None = None,
                   ) -> "PartitionFiltration":
        """Build and validate a filtration from explicit cell lists.

        ``levels`` is ordered coarsest first; each level is a list of
        cells, each cell a list of atom indices.
        """
        space = AtomSpace(weights)
        m = space.atom_count
        if not levels:
            raise FiltrationError("at least one level is required")
        maps, measures = [], []
        for cells in levels:
            a2c = _cells_to_atom_map(cells, m)
            k = int(a2c.max()) + 1
            maps.append(a2c)
            measures.append(np.bincount(a2c, weights=space.weights, minlength=k))
        # nestedness: atoms sharing a fine cell share the coarse cell
        for lev in range(1, len(maps)):
            fine, coarse = maps[lev], maps[lev - 1]
            parent_of_cell = np.full(int(fine.max()) + 1, -1, dtype=np.int64)
            for atom in range(m):
                c = fine[atom]
                if parent_of_cell[c] == -1:
                    parent_of_cell[c] = coarse[atom]
                elif parent_of_cell[c] != coarse[atom]:
                    raise FiltrationError(
                        f"level {lev} cell {c} straddles two parents")
        if np.bincount(maps[-1]).max() != 1:
            raise FiltrationError("finest level must consist of singleton cells")
        measured_n0 = 1.0
        for lev in range(1, len(maps)):
            parent_measure = measures[lev - 1][maps[lev - 1]]
            child_measure = measures[lev][maps[lev]]
            measured_n0 = max(measured_n0, float((parent_measure / child_measure).max()))
        if regularity is None:
            regularity = measured_n0
        elif measured_n0 > regularity * (1 + 1e-12):
            raise FiltrationError(
                f"parent/child measure ratio {measured_n0} exceeds N0={regularity}")
        maps = tuple(_frozen_array(a, np.int64) for a in maps)
        measures = tuple(_frozen_array(c) for c in measures)
        return PartitionFiltration(space, n_min, float(regularity), maps, measures)


@dataclass(frozen=True)
class StoppingTimeMap:
    """Per-atom level at which a stopping rule fires, or INFINITY."""

    level_or_infinity: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "level_or_infinity",
            _frozen_array(self.level_or_infinity, np.int64))

    @property
    def finite_mask(self) -> np.ndarray:
        return self.level_or_infinity != INFINITY

    def validate(self, filtration: PartitionFiltration) -> None:
        """Check that each level set {tau = n} is a union of whole cells."""
        tau = self.level_or_infinity
        if tau.size != filtration.space.atom_count:
            raise FiltrationError("stopping time length mismatch")
        finite = tau[tau != INFINITY]
        if finite.size and (finite.min() < filtration.n_min or finite.max() > filtration.n_max):
            raise FiltrationError("stopping time level outside filtration range")
        for n in filtration.levels:
            mask = tau == n
            if not mask.any():
                continue
            idx = filtration.atom_to_cell[n - filtration.n_min]
            touched = np.unique(idx[mask])
            if not np.array_equal(mask, np.isin(idx, touched)):
                raise FiltrationError(
                    f"{{tau = {n}}} is not a union of whole level-{n} cells")


def build_dyadic_filtration(d: int, depth: int,
                            atom_cap: int = DEFAULT_ATOM_CAP) -> PartitionFiltration:
    """Halving partitions of the unit d-cube down to 2^(d*depth) equal atoms.

    Level n (0..depth) has 2^(d*n) cells; every parent holds 2^d children
    of equal measure, so the regularity constant is exactly 2^d.
    """
    if d < 1 or depth < 1:
        raise FiltrationError("need d >= 1 and depth >= 1")
    atoms = 1 << (d * depth)
    if atoms > atom_cap:
        raise FiltrationError(f"{atoms} atoms exceed the cap {atom_cap}")
    weights = np.full(atoms, 2.0 ** (-d * depth))
    space = AtomSpace(weights)
    coords = np.unravel_index(np.arange(atoms), (1 << depth,) * d)
    maps, measures = [], []
    for n in range(depth + 1):
        shift = depth - n
        cell_coords = tuple(c >> shift for c in coords)
        a2c = np.ravel_multi_index(cell_coords, (1 << n,) * d).astype(np.int64)
        maps.append(_frozen_array(a2c, np.int64))
        measures.append(_frozen_array(
            np.bincount(a2c, weights=weights, minlength=1 << (d * n))))
    return PartitionFiltration(space, 0, float(1 << d), tuple(maps), tuple(measures))


def _cell_averages(filtration: PartitionFiltration, values: np.ndarray,
                   level_idx: int) -> np.ndarray:
    idx = filtration.atom_to_cell[level_idx]
    sums = np.bincount(idx, weights=values * filtration.space.weights,
                       minlength=filtration.cell_measures[level_idx].size)
    return _safe_divide(sums, filtration.cell_measures[level_idx])


def conditional_average(filtration: PartitionFiltration, f: WeightedFunction,
                        n: int) -> WeightedFunction:
    """Replace f by its measure-weighted average over each level-n cell."""
    k = filtration._index(n)
    avg = _cell_averages(filtration, f.values, k)
    return f.with_values(avg[filtration.atom_to_cell[k]])


def stopping_time_first_exceed(filtration: PartitionFiltration,
                               g: WeightedFunction, lam: float) -> StoppingTimeMap:
    """First level n at which the cell average of g exceeds lam.

    Scans coarse to fine; atoms whose averages never exceed lam get the
    INFINITY sentinel.  The level sets are unions of whole cells by
    construction (a cell average is constant on the cell, and so are the
    averages over every containing coarser cell).
    """
    tau = np.full(filtration.space.atom_count, INFINITY, dtype=np.int64)
    for n in filtration.levels:
        k = n - filtration.n_min
        avg = _cell_averages(filtration, g.values, k)[filtration.atom_to_cell[k]]
        fresh = (avg > lam) & (tau == INFINITY)
        tau[fresh] = n
    return StoppingTimeMap(tau)


def evaluate_given_tau(filtration: PartitionFiltration, f: WeightedFunction,
                       tau: StoppingTimeMap) -> WeightedFunction:
    """Per atom: the level-tau(x) average of f where tau is finite, else f."""
    out = f.values.copy()
    levels = tau.level_or_infinity
    for n in np.unique(levels[levels != INFINITY]):
        k = filtration._index(int(n))
        avg = _cell_averages(filtration, f.values, k)[filtration.atom_to_cell[k]]
        mask = levels == n
        out[mask] = avg[mask]
    return f.with_values(out)


def dyadic_maximal(filtration: PartitionFiltration,
                   f: WeightedFunction) -> WeightedFunction:
    """Pointwise supremum over all levels of the cell averages of |f|."""
    absf = np.abs(f.values)
    best = np.zeros_like(absf)
    for k in range(filtration.level_count):
        avg = _cell_averages(filtration, absf, k)[filtration.atom_to_cell[k]]
        np.maximum(best, avg, out=best)
    return f.with_values(best)


def pad_with_zero_levels(filtration: PartitionFiltration, k: int,
                         atom_cap: int = DEFAULT_ATOM_CAP) -> PartitionFiltration:
    """Prepend k coarser levels by adjoining zero blocks of matching measure.

    Each round pairs every coarsest cell with a fresh block atom of equal
    measure, so total measure doubles per round and coarse averages of
    zero-extended functions halve per round.  Block atoms are singleton
    cells at every finer level; all new parent/child ratios equal 2.
    """
    if k < 0:
        raise FiltrationError("k must be >= 0")
    if k == 0:
        return filtration
    if filtration.regularity < 2:
        raise FiltrationError("padding needs regularity N0 >= 2")
    m = filtration.space.atom_count
    coarse_map = filtration.atom_to_cell[0]
    r = filtration.cell_measures[0].size
    total_atoms = m + k * r
    if total_atoms > atom_cap:
        raise FiltrationError(f"{total_atoms} atoms exceed the cap {atom_cap}")

    base_cell_measures = filtration.cell_measures[0]
    pad_weights = np.concatenate(
        [base_cell_measures * (2.0 ** (j - 1)) for j in range(1, k + 1)])
    weights = np.concatenate([filtration.space.weights, pad_weights])
    space = AtomSpace(weights)

    def pad_atom(j: int, i: int) -> int:
        # block atom adjoined to lineage i in round j (1-based)
        return m + (j - 1) * r + i

    maps, measures = [], []
    # new coarser levels, coarsest (round k) first
    for rho in range(k, 0, -1):
        a2c = np.empty(total_atoms, dtype=np.int64)
        a2c[:m] = coarse_map
        for j in range(1, rho + 1):          # blocks merged into lineage cells
            for i in range(r):
                a2c[pad_atom(j, i)] = i
        nxt = r
        for j in range(rho + 1, k + 1):      # younger blocks stay singletons
            for i in range(r):
                a2c[pad_atom(j, i)] = nxt
                nxt += 1
        maps.append(a2c)
        measures.append(np.bincount(a2c, weights=weights, minlength=nxt))
    # original levels, extended with all block atoms as singleton cells
    for lev in range(filtration.level_count):
        old = filtration.atom_to_cell[lev]
        base = int(old.max()) + 1
        a2c = np.empty(total_atoms, dtype=np.int64)
        a2c[:m] = old
        a2c[m:] = base + np.arange(k * r)
        maps.append(a2c)
        measures.append(np.bincount(a2c, weights=weights, minlength=base + k * r))
    maps = tuple(_frozen_array(a, np.int64) for a in maps)
    measures = tuple(_frozen_array(c) for c in measures)
    return PartitionFiltration(space, filtration.n_min - k,
                               filtration.regularity, maps, measures)


def extend_by_zero(f: WeightedFunction,
                   padded: PartitionFiltration) -> WeightedFunction:
    """Zero-extend a function from a base space onto a padded filtration."""
    m = f.space.atom_count
    if padded.space.atom_count < m:
        raise FiltrationError("target space is smaller than the source")
    if not np.array_equal(padded.space.weights[:m], f.space.weights):
        raise FiltrationError("padded space does not extend the source space")
    out = np.zeros(padded.space.atom_count)
    out[:m] = f.values
    return WeightedFunction(out, padded.space)


def filtration_to_json(filtration: PartitionFiltration) -> str:
    """Serialize as {"weights": [...], "levels": [[cell atom lists]...]}."""
    levels = [[sorted(int(a) for a in cell) for cell in filtration.cells_at(n)]
              for n in filtration.levels]
    return json.dumps({"weights": filtration.space.weights.tolist(),
                       "levels": levels})


def filtration_from_json(text: str) -> PartitionFiltration:
    data = json.loads(text)
    return PartitionFiltration.from_cells(data["weights"], data["levels"])
