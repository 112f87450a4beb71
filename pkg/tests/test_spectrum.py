import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import quasispec as q
from quasispec import spectrum as S
from quasispec.cocycle import lyapunov_profile
from quasispec.output import read_csv
from quasispec.subshifts import CapExceeded
from quasispec.words import Alphabet, PotentialMap

A1 = Alphabet(("a",))
ZERO = PotentialMap(A1, (0.0,))
SQ5 = math.sqrt(5)


def _oracle_eigs(vals):
    L = len(vals)
    H = np.diag(np.asarray(vals, float)) + np.eye(L, k=1) + np.eye(L, k=-1)
    return np.linalg.eigvalsh(H)


# ---------------------------------------------------------------- finite sections


def test_section_one_and_two_sites():
    assert S.finite_section_spectrum(A1.word("a"), PotentialMap(A1, (0.7,)))[0] == pytest.approx(0.7, abs=1e-9)
    assert np.allclose(S.finite_section_spectrum(A1.word("aa"), ZERO), [-1, 1], atol=1e-12)


def test_section_free_closed_form():
    L = 50
    exact = np.sort(2 * np.cos(np.arange(1, L + 1) * np.pi / (L + 1)))
    assert np.allclose(S.finite_section_spectrum(A1.word("a" * L), ZERO), exact, atol=1e-9)


@pytest.mark.parametrize("label", q.catalog())
def test_section_against_dense_solver(label):
    sy = q.builtin(label)
    x = sy.window(300)[17:]
    got = S.finite_section_spectrum(x, sy.potential)
    assert np.allclose(got, _oracle_eigs(sy.potential.sample(x)), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(q.catalog()), st.integers(0, 500), st.integers(2, 200))
def test_section_gershgorin_and_interlacing(label, start, L):
    sy = q.builtin(label)
    x = sy.window(start + L)[start:]
    vals = sy.potential.sample(x)
    big = S.finite_section_spectrum(x, sy.potential)
    small = S.finite_section_spectrum(x[:-1], sy.potential)
    assert big.size == L and np.all(np.diff(big) >= 0)
    assert big.min() >= vals.min() - 2 - 1e-12 and big.max() <= vals.max() + 2 + 1e-12
    assert np.all(big[:-1] <= small + 1e-9) and np.all(small <= big[1:] + 1e-9)


def test_section_cap(fib):
    with pytest.raises(CapExceeded, match="finite section"):
        S.finite_section_spectrum(fib.window(5000), fib.potential)
    with pytest.raises(ValueError):
        S.finite_section_spectrum(A1.word(""), ZERO)


def test_interior_filter_drops_edge_states(fib):
    x = fib.window(800)
    all_eigs = S.finite_section_spectrum(x, fib.potential)
    kept = S.finite_section_spectrum(x, fib.potential, interior_filter=True)
    assert 0.9 * all_eigs.size < kept.size <= all_eigs.size
    assert np.all(np.isin(kept, all_eigs))


def test_section_estimate_marks_nearest_points():
    grid = S.EnergyGrid(-1.0, 1.0, 21)
    est = S.section_estimate([0.0, 0.52, 3.0], grid)
    assert np.flatnonzero(est.mask).tolist() == [10, 15]


# ---------------------------------------------------------------- periodic approximants


def test_trace_free_band():
    grid = S.EnergyGrid(-5, 5, 4001)
    est = S.trace_spectrum(A1.word("a"), ZERO, grid)
    assert est.measure == pytest.approx(4.0, abs=2 * grid.h)
    assert est.bands == [(pytest.approx(-2.0, abs=grid.h), pytest.approx(2.0, abs=grid.h))]


def test_trace_periodic_two_bands(periodic02):
    grid = S.EnergyGrid.around(periodic02.potential)
    est = S.trace_spectrum(periodic02.approximant(1), periodic02.potential, grid)
    exact = [(1 - SQ5, 0.0), (2.0, 1 + SQ5)]
    assert len(est.bands) == 2
    for (lo, hi), (elo, ehi) in zip(est.bands, exact):
        assert abs(lo - elo) <= 2 * grid.h and abs(hi - ehi) <= 2 * grid.h
    assert len(est.gaps) == 1


def test_trace_doubled_period_same_set(periodic02, fib):
    grid = S.EnergyGrid(-4, 6, 2001)
    for sy, p in ((periodic02, periodic02.approximant(1)), (fib, fib.approximant(6))):
        one = S.trace_spectrum(p, sy.potential, grid).mask
        two = S.trace_spectrum(p + p, sy.potential, grid).mask
        # |tr M^2| = |tr(M)^2 - 2| <= 2 exactly when |tr M| <= 2, so the masks
        # may disagree only at band edges where |tr| = 2 up to roundoff
        edges = 2 * len(S._runs(one, True))
        assert np.count_nonzero(one & ~two) <= edges
        assert np.count_nonzero(one ^ two) <= edges


def test_fibonacci_approximant_measure_shrinks(fib):
    grid = S.EnergyGrid(-3, 4, 20001)
    m = [S.approximant_spectrum(fib, k, grid).measure for k in range(4, 13)]
    assert m[-1] < 0.5 * m[0]
    assert all(b <= a + 2 * grid.h for a, b in zip(m[2:], m[4:]))


def test_trace_thread_determinism(fib):
    grid = S.EnergyGrid(-3, 4, 3001)
    a = S.approximant_spectrum(fib, 10, grid, threads=1)
    b = S.approximant_spectrum(fib, 10, grid, threads=3)
    assert np.array_equal(a.mask, b.mask)


# ---------------------------------------------------------------- Lyapunov zero set


def test_epsilon_rule():
    assert S.epsilon_rule(10) == pytest.approx(4 * math.log(10) / 10)
    assert S.epsilon_rule(10**6) == 0.02


def test_zero_set_free(free):
    prof = lyapunov_profile(free, np.linspace(-5, 5, 1001), 10_000)
    est = S.lyapunov_zero_set(prof, 0.02)
    assert abs(est.measure - 4.0) < 0.1
    assert S.lyapunov_zero_set(prof, 1e9).mask.all()


def test_zero_set_epsilon_monotone(fib):
    prof = lyapunov_profile(fib, np.linspace(-3, 4, 701), 2000)
    masks = [S.lyapunov_zero_set(prof, e).mask for e in (0.01, 0.05, 0.2, 1.0)]
    for small, big in zip(masks, masks[1:]):
        assert np.all(big[small])
    with pytest.raises(ValueError):
        S.lyapunov_zero_set(prof, 0.0)


def test_zero_set_needs_uniform_grid(fib):
    prof = lyapunov_profile(fib, [0.0, 0.1, 0.5], 50)
    with pytest.raises(ValueError, match="uniform"):
        S.lyapunov_zero_set(prof, 0.1)


# ---------------------------------------------------------------- comparisons


def test_compare_identical(fib):
    est = S.approximant_spectrum(fib, 8, S.EnergyGrid(-3, 4, 701))
    rep = S.compare_spectra(est, est)
    assert rep["symmetric_difference"] == 0 and rep["distance_a_to_b"] == 0 == rep["distance_b_to_a"]


def test_compare_free_section_to_band():
    grid = S.EnergyGrid(-3, 3, 601)
    band = S.trace_spectrum(A1.word("a"), ZERO, grid)
    sec = S.section_estimate(S.finite_section_spectrum(A1.word("a" * 200), ZERO), grid)
    rep = S.compare_spectra(sec, band)
    assert rep["distance_a_to_b"] <= 3 * grid.h
    assert rep["distance_b_to_a"] <= 3 * grid.h


def test_compare_grid_mismatch(fib):
    a = S.approximant_spectrum(fib, 5, S.EnergyGrid(-3, 4, 101))
    b = S.approximant_spectrum(fib, 5, S.EnergyGrid(-3, 4, 102))
    with pytest.raises(ValueError, match="grid mismatch"):
        S.compare_spectra(a, b)


def test_section_independent_of_window_position(fib):
    grid = S.EnergyGrid(-3, 4, 2801)
    L = 1500
    a = S.window_section(fib, 0, L)
    b = S.window_section(fib, 3333, L)
    # each box sees the same hull spectrum up to O(1/L) plus grid resolution
    tol = 20.0 / L + 2 * grid.h
    assert S.points_to_set_distance(a, S.section_estimate(b, grid)) <= tol
    assert S.points_to_set_distance(b, S.section_estimate(a, grid)) <= tol


# ---------------------------------------------------------------- Cantor diagnostic


def test_cantor_free_and_periodic(periodic02):
    grid = S.EnergyGrid(-5, 5, 2001)
    d = S.cantor_diagnostic(S.trace_spectrum(A1.word("a"), ZERO, grid))
    assert d["gap_count"] == 0 and d["largest_gap"] == 0
    d = S.cantor_diagnostic(S.trace_spectrum(periodic02.approximant(1), periodic02.potential, grid))
    assert d["gap_count"] == 1
    assert d["largest_gap"] == pytest.approx(2.0, abs=3 * grid.h)


def test_cantor_refinement_trace(fib):
    grid = S.EnergyGrid(-3, 4, 4001)
    hist = [S.approximant_spectrum(fib, k, grid) for k in (5, 7, 9, 11)]
    d = S.cantor_diagnostic(hist[-1], hist[:-1])
    assert [t["params"]["depth"] for t in d["refinement_trace"]] == [7, 9, 11]
    assert d["measure_decreasing"] and d["gaps_increasing"]


def test_gaps_exclude_window_edges():
    grid = S.EnergyGrid(0, 1, 6)
    est = S.SpectrumEstimate(grid, [0, 1, 0, 0, 1, 0], "trace")
    assert est.gaps == [(pytest.approx(0.2), pytest.approx(0.8))]


# ---------------------------------------------------------------- serialisation


def test_json_roundtrip(fib):
    est = S.approximant_spectrum(fib, 7, S.EnergyGrid(-3, 4, 301))
    back = S.SpectrumEstimate.from_dict(json.loads(est.to_json()))
    assert np.array_equal(back.mask, est.mask) and back.grid == est.grid and back.method == "trace"
    assert back.to_json() == est.to_json()


def test_csv_layout(tmp_path, fib):
    prof = lyapunov_profile(fib, np.linspace(-3, 4, 11), 200)
    est = S.lyapunov_zero_set(prof, 0.1)
    path = tmp_path / "z.csv"
    path.write_text(est.to_csv())
    meta, header, rows = read_csv(path)
    assert meta["method"] == "lyapunov_zero" and header == ["E", "mask", "gamma"]
    assert len(rows) == 11


def test_grid_validation():
    with pytest.raises(ValueError):
        S.EnergyGrid(1, 0)
    with pytest.raises(ValueError):
        S.EnergyGrid(0, 1, 1)
    g = S.EnergyGrid.around(PotentialMap(Alphabet(("a", "b")), (0.0, 1.0)))
    assert (g.e_min, g.e_max, g.points) == (-3.0, 4.0, 4001)
