import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import quasispec as q
from quasispec import cocycle as C
from quasispec.words import Alphabet, PotentialMap

A1 = Alphabet(("a",))
ZERO = PotentialMap(A1, (0.0,))


def _dense_product(E, vals):
    """Independent oracle: plain float product, fine for short words."""
    m = np.eye(2)
    for v in vals:
        m = np.array([[E - v, -1.0], [1.0, 0.0]]) @ m
    return m


def test_transfer_matrix():
    assert C.transfer_matrix(0, 0) == C.Mat2(0, -1, 1, 0)
    assert C.transfer_matrix(2, 1) == C.Mat2(1, -1, 1, 0)
    for E, v in [(0.3, -2.0), (17.0, 4.5), (-3.2, 0.1)]:
        assert C.transfer_matrix(E, v).det == 1.0
    with pytest.raises(ValueError):
        C.transfer_matrix(math.inf, 0)


def test_cocycle_product_small_cases():
    P = C.cocycle_product(1.0, A1.word(""), ZERO)
    assert P.mat == C.Mat2.identity() and P.log_scale == 0
    P = C.cocycle_product(0.0, A1.word("a"), ZERO)
    assert np.allclose(P.dense().as_array(), [[0, -1], [1, 0]])
    assert abs(P.log_scale) < 1e-15
    P = C.cocycle_product(0.0, A1.word("aa"), ZERO)
    assert np.allclose(P.dense().as_array(), [[-1, 0], [0, -1]])


def test_product_order_last_letter_leftmost(fib):
    x = fib.window(7)
    vals = fib.potential.sample(x)
    P = C.cocycle_product(0.37, x, fib.potential)
    assert np.allclose(P.dense().as_array(), _dense_product(0.37, vals), rtol=1e-12)


def test_scaled_matrix_invariants(fib):
    P = C.product_values(3.0, fib.potential.sample(fib.window(5000)))
    assert 0.5 <= P.mat.norm <= 2.0
    assert P.det_residual <= 1e-8 * 5000
    assert P.log_scale > 100  # far outside any double-precision dense product


def test_determinant_residual_is_measured_not_assumed():
    # factors of determinant 2: the frame must report log|det| = n log 2
    P = C.matrix_product([np.diag([2.0, 1.0])] * 10)
    assert P.det_residual == pytest.approx(10 * math.log(2), rel=1e-14)
    assert P.dense().det == pytest.approx(2.0**10)


def test_apply_overflow_is_inf_not_nan(fib):
    P = C.product_values(40.0, fib.potential.sample(fib.window(400)))
    img = P.apply([1.0, 0.0])
    assert np.all(np.isinf(img))
    assert np.all(np.isfinite(P.apply_scaled([1.0, 0.0])))


def test_carried_determinant_matches_entries_when_well_conditioned(fib):
    P = C.product_values(0.5, fib.potential.sample(fib.window(30)))
    assert P.log_det == pytest.approx(math.log(abs(P.mat.det)), abs=1e-9)


def test_f_energy_examples(fib):
    assert C.f_energy(1.0, A1.word(""), ZERO) == 0.0
    sigma = math.sqrt((11 + math.sqrt(117)) / 2)
    assert sigma == pytest.approx(3.30278, abs=1e-5)
    assert C.f_energy(3.0, A1.word("a"), ZERO) == pytest.approx(math.log(sigma), rel=1e-14)
    w = fib.alphabet.word
    lhs = C.f_energy(0.5, w("abaab"), fib.potential)
    rhs = C.f_energy(0.5, w("ab"), fib.potential) + C.f_energy(0.5, w("aab"), fib.potential)
    assert lhs <= rhs


def test_f_energy_matches_svd_oracle(fib):
    x = fib.window(40)
    for E in (-2.5, 0.1, 1.7):
        dense = _dense_product(E, fib.potential.sample(x))
        assert C.f_energy(E, x, fib.potential) == pytest.approx(math.log(np.linalg.norm(dense, 2)), rel=1e-11)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(q.catalog()), st.floats(-6, 6), st.integers(0, 3000), st.integers(1, 200), st.integers(1, 200))
def test_subadditivity_and_nonnegativity(label, E, start, nx, ny):
    sy = q.builtin(label)
    w = sy.window(start + nx + ny)
    x, y = w[start : start + nx], w[start + nx :]
    fx, fy = C.f_energy(E, x, sy.potential), C.f_energy(E, y, sy.potential)
    fxy = C.f_energy(E, x + y, sy.potential)
    assert fxy <= fx + fy + 1e-9 * (nx + ny)
    assert min(fx, fy, fxy) >= -1e-9


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(q.catalog()), st.floats(-6, 6), st.integers(1, 3000))
def test_inverse_branch_consistency(label, E, n):
    sy = q.builtin(label)
    x = sy.window(n)
    forward = C.cocycle_product(E, x, sy.potential)
    backward = C.inverse_cocycle_product(E, x, sy.potential)
    assert backward.log_norm == pytest.approx(forward.log_norm, rel=1e-6, abs=1e-9)
    assert backward.det_residual <= 1e-8 * n


def test_inverse_branch_is_the_inverse(fib):
    x = fib.window(12)
    fwd = C.cocycle_product(0.8, x, fib.potential).dense().as_array()
    inv = C.inverse_cocycle_product(0.8, x, fib.potential).dense().as_array()
    assert np.allclose(inv @ fwd, np.eye(2), atol=1e-10)


def test_signed_cocycle_three_cases():
    st_sys = q.builtin("sturmian_golden")
    assert C.signed_cocycle(0.4, st_sys, 0).mat == C.Mat2.identity()
    pos = C.signed_cocycle(0.4, st_sys, 9).dense().as_array()
    vals = st_sys.potential.sample(q.sturmian_window(st_sys.source, 1, 9))
    assert np.allclose(pos, _dense_product(0.4, vals))
    neg = C.signed_cocycle(0.4, st_sys, -9).dense().as_array()
    left = st_sys.potential.sample(q.sturmian_window(st_sys.source, -8, 9))
    # M(n, w) for n < 0 inverts the forward product over omega(n+1..0)
    assert np.allclose(neg, np.linalg.inv(_dense_product(0.4, left)))
    # two-sided growth rates agree at large |n| (off spectrum)
    g_pos = C.signed_cocycle(4.0, st_sys, 20000).log_norm / 20000
    g_neg = C.signed_cocycle(4.0, st_sys, -20000).log_norm / 20000
    assert g_neg == pytest.approx(g_pos, rel=1e-3)


# ---------------------------------------------------------------- Lyapunov


def free_gamma(E):
    E = abs(E)
    return math.log((E + math.sqrt(E * E - 4)) / 2) if E > 2 else 0.0


def test_lyapunov_free_hyperbolic(free):
    assert free_gamma(5.0) == pytest.approx(1.5668, abs=1e-4)
    errs = [abs(C.lyapunov_estimate(free, 5.0, N) - free_gamma(5.0)) for N in (100, 1000, 10000)]
    assert errs[-1] < 1e-4 and errs[0] > errs[1] > errs[2]


def test_lyapunov_free_elliptic(free):
    for N in (100, 1000, 10000):
        assert C.lyapunov_estimate(free, 1.0, N) < 3 / N * math.log(N)


@pytest.mark.parametrize("label", q.catalog())
def test_lyapunov_far_outside_lower_bound(label):
    sy = q.builtin(label)
    vmax = float(np.abs(sy.potential.array).max())
    for E in (2 + vmax + 1.5, -(2 + vmax + 2.5), 3 * vmax + 9):
        assert C.lyapunov_estimate(sy, E, 2000) >= math.log(abs(E) - vmax - 2) > 0


def test_lyapunov_clamp_keeps_raw(free):
    raw = C.lyapunov_estimate_raw(free, 0.3, 7)
    assert C.lyapunov_estimate(free, 0.3, 7) == max(0.0, raw)
    prof = C.lyapunov_profile(free, np.linspace(-1, 1, 5), 7)
    assert np.all(prof.gamma >= 0) and np.array_equal(prof.gamma, np.maximum(prof.gamma_raw, 0))


@pytest.mark.parametrize("label", ["fibonacci", "thue_morse", "period_doubling", "rudin_shapiro"])
def test_lyapunov_stabilizes(label):
    sy = q.builtin(label)
    for E in (-2.7, 0.35, 1.9, 3.6):
        g = [C.lyapunov_estimate(sy, E, 1000 * 2**k) for k in range(4)]
        d = [abs(b - a) for a, b in zip(g, g[1:])]
        assert d[-1] <= d[0] + 1e-12
        assert d[-1] < 0.01


def test_gamma_continuity_under_grid_refinement(fib):
    N = 4096
    jumps = []
    for pts in (401, 1601, 6401):
        prof = C.lyapunov_profile(fib, np.linspace(-3, 4, pts), N)
        jumps.append(np.abs(np.diff(prof.gamma)).max())
    assert jumps[0] > jumps[1] > jumps[2]


# ---------------------------------------------------------------- uniformity


def test_spread_periodic_period_multiples(periodic02):
    per_f = C.f_energy(0.7, periodic02.approximant(1), periodic02.potential)
    for n in (64, 256, 1024):
        s = C.uniformity_spread(periodic02, 0.7, n)
        assert s <= 2 * max(per_f, 1.0) / n


def test_spread_degenerate_constant_window(free):
    r = C.spread_report(free, 0.3, 16)
    assert r.degenerate and r.spread == 0.0


def test_spread_matches_direct_factor_scan(fib):
    n, W = 37, 300
    f = C.window_f(fib, 0.61, n, W)
    w = fib.window(W)
    direct = [C.f_energy(0.61, w[i : i + n], fib.potential) for i in range(W - n + 1)]
    assert np.allclose(f, direct, rtol=1e-10, atol=1e-12)


def test_spread_decreasing_in_spectrum_region(fib):
    s = [C.uniformity_spread(fib, 0.5, 2**k) for k in range(6, 13, 2)]
    assert s[-1] < s[0] and s[-1] <= s[-2]


def test_spread_far_outside(fib):
    s = [C.uniformity_spread(fib, 10.0, n) for n in (64, 256, 1024)]
    assert s[0] > s[1] > s[2] and s[2] < 1e-3
    assert C.lyapunov_estimate(fib, 10.0, 1024) > 2


# ---------------------------------------------------------------- solutions


def test_solution_zero():
    assert not np.any(C.solution_sequence(0.3, A1.word("aaaa"), ZERO, 0.0, 0.0))


def test_solution_chebyshev():
    theta = 0.731
    u = C.solution_sequence(2 * math.cos(theta), A1.word("a" * 200), ZERO, 0.0, math.sin(theta))
    n = np.arange(u.size)
    assert np.allclose(u, np.sin(n * theta), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(q.catalog()), st.floats(-4, 5), st.floats(-1, 1), st.floats(-1, 1), st.integers(1, 300))
def test_solution_cocycle_identity(label, E, u0, u1, n):
    sy = q.builtin(label)
    x = sy.window(n)
    u = C.solution_sequence(E, x, sy.potential, u0, u1)
    P = C.cocycle_product(E, x, sy.potential)
    img = P.apply([u1, u0])
    scale = max(np.linalg.norm(img), np.linalg.norm([u1, u0]), 1e-300)
    assert np.linalg.norm(img - [u[n + 1], u[n]]) <= 1e-9 * scale


def test_solution_overflow(fib):
    with pytest.raises(C.NumericFailure, match="cocycle"):
        C.solution_sequence(40.0, fib.window(2000), fib.potential, 0.0, 1.0)


# ---------------------------------------------------------------- stable direction


def test_stable_direction_free():
    free = q.builtin("free")
    lam = (5 - math.sqrt(21)) / 2
    eig = np.array([lam, 1.0]) / math.hypot(lam, 1.0)
    sd = C.stable_direction(free, 5.0, 200)
    assert C.line_angle(sd.vector, eig) < 1e-10
    assert sd.rate == pytest.approx(math.log((5 + math.sqrt(21)) / 2), rel=1e-2)


def test_stable_direction_fibonacci(fib):
    a = C.stable_direction(fib, 10.0, 500)
    b = C.stable_direction(fib, 10.0, 1000)
    assert C.line_angle(a.vector, b.vector) < C.ANGLE_TOL
    assert a.rate == pytest.approx(C.lyapunov_estimate(fib, 10.0, 500), rel=0.05)


def test_stable_direction_raises_in_spectrum(fib):
    with pytest.raises(C.NoDichotomy, match="no exponential dichotomy"):
        C.stable_direction(fib, 0.598, 1024)


@given(st.sampled_from(q.catalog()), st.floats(-6, 6), st.integers(1, 400))
@settings(max_examples=40, deadline=None)
def test_singular_values_multiply_to_one(label, E, n):
    sy = q.builtin(label)
    P = C.cocycle_product(E, sy.window(n), sy.potential)
    assert P.log_norm + P.log_sigma_min == pytest.approx(0.0, abs=1e-8 * n + 1e-12)


# ---------------------------------------------------------------- profiles and checkpoints


def test_profile_thread_determinism(fib):
    E = np.linspace(-3, 4, 301)
    a = C.lyapunov_profile(fib, E, 3000, spread_n=64, threads=1)
    b = C.lyapunov_profile(fib, E, 3000, spread_n=64, threads=4)
    assert a.to_csv() == b.to_csv()
    assert np.all(a.spread >= 0)


def test_profile_serialisation(fib):
    prof = C.lyapunov_profile(fib, np.linspace(-1, 1, 3), 100)
    lines = prof.to_csv().splitlines()
    assert lines[0].startswith("# ") and lines[1] == "E,gamma,gamma_raw,spread,N"
    assert len(lines) == 5
    assert '"gamma"' in prof.to_json()


def test_profile_rejects_unsorted(fib):
    with pytest.raises(ValueError):
        C.lyapunov_profile(fib, [0.5, 0.1], 10)


def test_checkpoint_resume(tmp_path, fib):
    vals = fib.potential.sample(fib.window(5000))
    path = tmp_path / "ck.bin"
    full = C.write_checkpoints(path, 0.9, vals)
    E, recs = C.read_checkpoints(path)
    assert E == 0.9 and [r[0] for r in recs] == list(range(13))
    resumed, skipped = C.resume_product(path, 0.9, vals)
    assert skipped == 4096
    assert resumed.mat == full.mat and resumed.log_scale == full.log_scale
    other = vals.copy()
    other[100] = 5.0
    _, skipped = C.resume_product(path, 0.9, other)
    assert skipped == 64
