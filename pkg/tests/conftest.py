"""Shared fixtures and loop-based oracles, kept independent of the
vectorized implementation paths they check."""
import numpy as np
import pytest

from vmolab import dyadic as dy


def oracle_cell_average(weights, cell, values):
    """Plain-Python measure-weighted average over one cell."""
    num = sum(values[a] * weights[a] for a in cell)
    den = sum(weights[a] for a in cell)
    return num / den if den else 0.0


def oracle_conditional_average(filt, values, n):
    """Loop over explicit cells, no bincount."""
    out = np.empty(filt.space.atom_count)
    for cell in filt.cells_at(n):
        avg = oracle_cell_average(filt.space.weights, list(cell), values)
        for a in cell:
            out[a] = avg
    return out


def oracle_maximal(filt, values):
    out = np.zeros(filt.space.atom_count)
    absv = np.abs(values)
    for n in filt.levels:
        out = np.maximum(out, oracle_conditional_average(filt, absv, n))
    return out


def oracle_sharp(filt, values):
    out = np.zeros(filt.space.atom_count)
    for n in filt.levels:
        for cell in filt.cells_at(n):
            avg = oracle_cell_average(filt.space.weights, list(cell), values)
            osc = oracle_cell_average(filt.space.weights, list(cell),
                                      np.abs(values - avg))
            for a in cell:
                out[a] = max(out[a], osc)
    return out


def weighted_lp(filt, values, p):
    return float(np.dot(np.abs(values) ** p, filt.space.weights) ** (1 / p))


@pytest.fixture(scope="session")
def small_1d():
    return dy.build_dyadic_filtration(1, 3)


@pytest.fixture(scope="session")
def small_2d():
    return dy.build_dyadic_filtration(2, 2)


@pytest.fixture(scope="session")
def padded_1d(small_1d):
    return dy.pad_with_zero_levels(small_1d, 8)


@pytest.fixture(scope="session")
def padded_2d(small_2d):
    return dy.pad_with_zero_levels(small_2d, 6)


@pytest.fixture(scope="session")
def uneven_filtration():
    """Non-uniform weights, regularity above the dyadic 2^d."""
    weights = [1.0, 3.0, 0.5, 0.5, 2.0, 1.0, 1.0, 1.0]
    levels = [
        [[0, 1, 2, 3, 4, 5, 6, 7]],
        [[0, 1, 2, 3], [4, 5, 6, 7]],
        [[0, 1], [2, 3], [4, 5], [6, 7]],
        [[0], [1], [2], [3], [4], [5], [6], [7]],
    ]
    return dy.PartitionFiltration.from_cells(weights, levels)
