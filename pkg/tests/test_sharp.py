import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmolab import dyadic as dy
from vmolab import sharp as sh

from conftest import oracle_cell_average, oracle_sharp


def oracle_monotone_premise(filt, u, v, g):
    """Loop-based check of the per-cell positive-part inequality."""
    w = filt.space.weights
    for n in filt.levels:
        for cell in filt.cells_at(n):
            cell = list(cell)
            v_c = oracle_cell_average(w, cell, v)
            lhs = sum(max(u[a] - v_c, 0.0) * w[a] for a in cell)
            rhs = sum(g[a] * w[a] for a in cell)
            if lhs > rhs + 1e-12 * max(1.0, rhs):
                return False
    return True


def oracle_distribution_rhs(filt, g, mv, lam, coeff):
    w = filt.space.weights
    total = sum(g[a] * w[a] for a in range(filt.space.atom_count)
                if mv[a] > lam / (2 * filt.regularity))
    return coeff / lam * total


class TestPremiseMonotone:
    def test_constant_triple_passes(self, small_1d):
        c = small_1d.function(np.full(8, 2.0))
        zero = small_1d.function(np.zeros(8))
        t = sh.FsTriple(small_1d, c, c, zero)
        assert sh.check_premise_monotone(t)

    def test_sharp_half_of_v_suffices_when_u_equals_v(self, padded_1d):
        rng = np.random.default_rng(1)
        v = np.abs(rng.normal(size=padded_1d.space.atom_count))
        vf = padded_1d.function(v)
        g = sh.sharp_function(padded_1d, vf).with_values(
            0.5 * sh.sharp_function(padded_1d, vf).values)
        t = sh.FsTriple(padded_1d, vf, vf, g)
        assert sh.check_premise_monotone(t)

    def test_matches_oracle(self, uneven_filtration):
        rng = np.random.default_rng(2)
        m = uneven_filtration.space.atom_count
        for _ in range(20):
            v = np.abs(rng.normal(size=m))
            u = v * rng.uniform(0, 1, m)
            g = np.abs(rng.normal(size=m)) * 0.2
            t = sh.FsTriple(uneven_filtration,
                            uneven_filtration.function(u),
                            uneven_filtration.function(v),
                            uneven_filtration.function(g))
            got = bool(sh.check_premise_monotone(t))
            want = oracle_monotone_premise(uneven_filtration, u, v, g)
            assert got == want

    def test_worst_cell_reported(self, small_1d):
        u = small_1d.function(np.array([4.0, 0, 0, 0, 0, 0, 0, 0]))
        v = u
        g = small_1d.function(np.zeros(8))
        rep = sh.check_premise_monotone(sh.FsTriple(small_1d, u, v, g))
        assert not rep.ok
        assert rep.violation > 0
        assert rep.worst_level is not None

    def test_scaling_closure(self, padded_2d):
        rng = np.random.default_rng(3)
        for _ in range(30):
            t = sh.random_monotone_triple(padded_2d, rng, base_atoms=16)
            assert sh.check_premise_monotone(t)
            a = rng.uniform(1.0, 2.0, padded_2d.space.atom_count)
            scaled = sh.FsTriple(
                padded_2d,
                t.u.with_values(a * t.u.values),
                t.v.with_values(2.0 * t.v.values),
                t.g.with_values(2.0 * t.g.values))
            assert sh.check_premise_monotone(scaled)

    def test_mode_mismatch_rejected(self, small_1d):
        zero = small_1d.function(np.zeros(8))
        t = sh.FsTriple(small_1d, zero, zero, zero, mode="sharp")
        with pytest.raises(ValueError):
            sh.check_premise_monotone(t)


class TestPremiseSharp:
    def test_constant_u_passes_any_g(self, small_2d):
        u = small_2d.function(np.full(16, 1.5))
        v = small_2d.function(np.full(16, 1.5))
        g = small_2d.function(np.zeros(16))
        t = sh.FsTriple(small_2d, u, v, g, mode="sharp")
        m = sh.MajorantFamily.from_global(u.values)
        assert sh.check_premise_sharp(t, m)

    def test_sharp_function_as_g(self, padded_1d):
        # u^C = u, v = |u|, g = the sharp function itself
        rng = np.random.default_rng(4)
        u = np.abs(rng.normal(size=padded_1d.space.atom_count))
        uf = padded_1d.function(u)
        vf = padded_1d.function(np.abs(u))
        g = sh.sharp_function(padded_1d, uf)
        t = sh.FsTriple(padded_1d, uf, vf, g, mode="sharp")
        assert sh.check_premise_sharp(t, sh.MajorantFamily.from_global(u))

    def test_minimal_g_construction(self, padded_2d):
        rng = np.random.default_rng(5)
        for _ in range(20):
            t, m = sh.random_sharp_triple(padded_2d, rng, base_atoms=16)
            assert sh.check_premise_sharp(t, m)

    def test_majorant_validation(self, small_1d):
        u = small_1d.function(np.ones(8))
        v = small_1d.function(np.ones(8) * 2)
        g = small_1d.function(np.ones(8))
        t = sh.FsTriple(small_1d, u, v, g, mode="sharp")
        bad = sh.MajorantFamily.from_global(np.full(8, 0.5))  # below |u|
        with pytest.raises(ValueError):
            sh.check_premise_sharp(t, bad)


class TestSharpFunction:
    def test_constant_is_zero(self, small_2d):
        u = small_2d.function(np.full(16, 7.0))
        assert np.allclose(sh.sharp_function(small_2d, u).values, 0.0)

    def test_two_point_example(self):
        filt = dy.PartitionFiltration.from_cells(
            [0.5, 0.5], [[[0, 1]], [[0], [1]]])
        u = filt.function([1.0, -1.0])
        assert np.allclose(sh.sharp_function(filt, u).values, [1.0, 1.0])

    def test_matches_oracle(self, uneven_filtration):
        rng = np.random.default_rng(6)
        values = rng.normal(size=8)
        got = sh.sharp_function(
            uneven_filtration, uneven_filtration.function(values)).values
        assert np.allclose(got, oracle_sharp(uneven_filtration, values))

    def test_abs_oscillation_doubling(self, uneven_filtration):
        # mean oscillation of |u| over a cell is at most twice the mean
        # deviation of u from any constant, in particular from u_C
        rng = np.random.default_rng(7)
        w = uneven_filtration.space.weights
        for _ in range(20):
            u = rng.normal(size=8)
            for n in uneven_filtration.levels:
                for cell in uneven_filtration.cells_at(n):
                    cell = list(cell)
                    u_c = oracle_cell_average(w, cell, u)
                    absu_c = oracle_cell_average(w, cell, np.abs(u))
                    lhs = oracle_cell_average(
                        w, cell, np.abs(np.abs(u) - absu_c))
                    rhs = 2 * oracle_cell_average(w, cell, np.abs(u - u_c))
                    assert lhs <= rhs + 1e-12

    def test_dominated_by_shifted_maximal(self, padded_1d):
        rng = np.random.default_rng(8)
        u = rng.normal(size=padded_1d.space.atom_count)
        uf = padded_1d.function(u)
        usharp = sh.sharp_function(padded_1d, uf).values
        for c in (-1.0, 0.0, 0.3, 2.0):
            shifted = padded_1d.function(u - c)
            mv = dy.dyadic_maximal(padded_1d, shifted).values
            assert np.all(usharp <= 2 * mv + 1e-12)


class TestDistributionBound:
    def test_empty_level_set(self, padded_1d):
        rng = np.random.default_rng(9)
        t = sh.random_monotone_triple(padded_1d, rng, base_atoms=8)
        lam = float(t.u.values.max()) + 1.0
        lhs, rhs = sh.distribution_bound(t, lam)
        assert lhs == 0.0
        assert rhs >= 0.0

    def test_rejects_nonpositive_lambda(self, padded_1d):
        rng = np.random.default_rng(10)
        t = sh.random_monotone_triple(padded_1d, rng, base_atoms=8)
        with pytest.raises(ValueError):
            sh.distribution_bound(t, 0.0)

    @pytest.mark.parametrize("seed", range(4))
    def test_monotone_bound_above_threshold(self, padded_2d, seed):
        rng = np.random.default_rng(100 + seed)
        for _ in range(25):
            t = sh.random_monotone_triple(padded_2d, rng, base_atoms=16)
            vmax = float(t.v.values.max())
            if vmax == 0:
                continue
            lam_t = sh.truncation_threshold(t)
            mv = dy.dyadic_maximal(padded_2d, t.v)
            for lam in np.geomspace(max(lam_t, 1e-9), lam_t + 1.1 * vmax, 20):
                lhs, rhs = sh.distribution_bound(t, lam, mv)
                assert lhs <= rhs + 1e-12

    def test_sharp_mode_coefficient_one_for_nonnegative(self, padded_1d):
        rng = np.random.default_rng(11)
        for _ in range(25):
            t, m = sh.random_sharp_triple(
                padded_1d, rng, base_atoms=8, nonnegative=True)
            assert sh.check_premise_sharp(t, m)
            vmax = float(t.v.values.max())
            if vmax == 0:
                continue
            lam_t = sh.truncation_threshold(t)
            mv = dy.dyadic_maximal(padded_1d, t.v)
            for lam in np.geomspace(max(lam_t, 1e-9), lam_t + 1.1 * vmax, 10):
                lhs, rhs = sh.distribution_bound(t, lam, mv)
                assert lhs <= rhs + 1e-12
                # coefficient is 1, not 2: rhs equals the oracle with coeff 1
                want = oracle_distribution_rhs(
                    padded_1d, t.g.values, mv.values, lam, 1.0)
                assert rhs == pytest.approx(want, rel=1e-12, abs=1e-300)

    def test_rhs_matches_oracle(self, padded_1d):
        rng = np.random.default_rng(12)
        t = sh.random_monotone_triple(padded_1d, rng, base_atoms=8)
        mv = dy.dyadic_maximal(padded_1d, t.v)
        lam = sh.truncation_threshold(t) + 0.1
        _, rhs = sh.distribution_bound(t, lam, mv)
        want = oracle_distribution_rhs(
            padded_1d, t.g.values, mv.values, lam, 2.0)
        assert rhs == pytest.approx(want, rel=1e-12)


class TestNormBound:
    def test_constant_value(self):
        assert sh.norm_bound_constant(2.0, 2.0) == pytest.approx(32.0)

    def test_zero_u(self, padded_1d):
        zero = padded_1d.function(np.zeros(padded_1d.space.atom_count))
        t = sh.FsTriple(padded_1d, zero, zero, zero)
        lhs, rhs, _ = sh.fs_norm_bound(t, 3.0)
        assert lhs == 0.0 and rhs == 0.0

    def test_rejects_small_p(self, padded_1d):
        zero = padded_1d.function(np.zeros(padded_1d.space.atom_count))
        t = sh.FsTriple(padded_1d, zero, zero, zero)
        with pytest.raises(ValueError):
            sh.fs_norm_bound(t, 1.0)

    @pytest.mark.parametrize("p", [2.5, 4.0])
    def test_random_monotone_corpus(self, padded_2d, p):
        rng = np.random.default_rng(int(10 * p))
        for _ in range(50):
            t = sh.random_monotone_triple(padded_2d, rng, base_atoms=16)
            lhs, rhs, _ = sh.fs_norm_bound(t, p)
            assert lhs <= rhs * (1 + 1e-12)

    @pytest.mark.parametrize("p", [2.5, 4.0])
    def test_random_sharp_corpus(self, padded_1d, p):
        rng = np.random.default_rng(int(100 * p))
        for _ in range(50):
            t, m = sh.random_sharp_triple(padded_1d, rng, base_atoms=8)
            assert sh.check_premise_sharp(t, m)
            lhs, rhs, _ = sh.fs_norm_bound(t, p)
            assert lhs <= rhs * (1 + 1e-12)


class TestLayerCake:
    @pytest.mark.parametrize("p", [1.5, 2.0, 2.5, 4.0])
    def test_matches_direct_norm(self, padded_1d, p):
        rng = np.random.default_rng(int(7 * p))
        values = rng.normal(size=padded_1d.space.atom_count)
        values[rng.uniform(size=values.size) < 0.3] = 0.0
        f = padded_1d.function(values)
        assert sh.layer_cake_pth_power(f, p) == pytest.approx(
            f.norm(p) ** p, abs=1e-12, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_property_generated_triples_satisfy_premise(seed):
    filt = dy.pad_with_zero_levels(dy.build_dyadic_filtration(1, 2), 4)
    rng = np.random.default_rng(seed)
    t = sh.random_monotone_triple(filt, rng, base_atoms=4)
    assert sh.check_premise_monotone(t)
    t2, m2 = sh.random_sharp_triple(filt, rng, base_atoms=4)
    assert sh.check_premise_sharp(t2, m2)
