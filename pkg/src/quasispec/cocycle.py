"""Transfer-matrix cocycles, the word function ``F^E`` and Lyapunov exponents.

Conventions:

* the one-step matrix at energy ``E`` over a site with potential ``v`` is
  ``[[E - v, -1], [1, 0]]``;
* ``cocycle_product(E, x)`` is ``M(x_n) ... M(x_1)``, the *last* letter on the
  left, so that ``(u(n+1), u(n)) = cocycle_product(E, x[:n]) @ (u(1), u(0))``;
* norms are spectral norms (largest singular value) and logs are natural.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import _kernels as K
from .output import csv_text, to_json, versions
from .pool import map_chunks
from .subshifts import SubshiftSystem
from .words import PotentialMap, Word

GAMMA_MIN = 0.05
ANGLE_TOL = 1e-3


class NumericFailure(ArithmeticError):
    pass


class NoDichotomy(ValueError):
    """The Lyapunov estimate is too small to separate stable and unstable directions."""


def _finite(*xs: float) -> None:
    for x in xs:
        if not math.isfinite(x):
            raise ValueError(f"non-finite input {x!r}")


@dataclass(frozen=True)
class Mat2:
    m11: float
    m12: float
    m21: float
    m22: float

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, arr) -> "Mat2":
        a = np.asarray(arr, dtype=float)
        return cls(float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    @property
    def norm(self) -> float:
        return K.spectral_norm(self.m11, self.m12, self.m21, self.m22)

    def singular_values(self) -> tuple[float, float]:
        a, b, c, d = self.m11, self.m12, self.m21, self.m22
        p, q = math.hypot(a + d, b - c), math.hypot(a - d, b + c)
        return 0.5 * (p + q), 0.5 * abs(p - q)

    def is_unimodular(self, tol: float = 1e-10) -> bool:
        return abs(self.det - 1.0) <= tol

    def inverse(self) -> "Mat2":
        det = self.det
        return Mat2(self.m22 / det, -self.m12 / det, -self.m21 / det, self.m11 / det)

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2.from_array(self.as_array() @ other.as_array())

    def scaled(self, s: float) -> "Mat2":
        return Mat2(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)


_IDENTITY_FRAME = (1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)


def _frame_from_dense(mat: Mat2, log_scale: float) -> tuple:
    """QR frame of ``exp(log_scale) * mat`` (only for matrices whose
    determinant can be read off the entries)."""
    a, c = mat.m11, mat.m21
    rho = math.hypot(a, c)
    if rho == 0.0:
        raise NumericFailure("singular matrix has no QR frame")
    q1, q2 = a / rho, c / rho
    r12 = q1 * mat.m12 + q2 * mat.m22
    w = q1 * mat.m22 - q2 * mat.m12
    if w == 0.0:
        raise NumericFailure("singular matrix has no QR frame")
    return (q1, q2, 1.0 if w > 0 else -1.0, log_scale + math.log(rho), log_scale + math.log(abs(w)),
            r12 / rho, abs(w) / rho)


@dataclass(frozen=True)
class ScaledMatrix:
    """``exp(log_scale) * mat`` with ``mat`` of spectral norm in ``[1/2, 2]``.

    ``log_det`` is ``log|det mat|``.  Once a long product is close to rank one
    that number is far below double precision and cannot be read back from the
    entries, so products also carry their QR frame ``M = exp(l1) Q [[1, u],
    [0, exp(l2 - l1)]]`` and ``log_det`` comes from the accumulated diagonal
    ``l1 + l2`` of the triangular factor.
    """

    mat: Mat2
    log_scale: float = 0.0
    log_det: float = 0.0
    factors: int = 0
    frame: tuple | None = field(default=None, repr=False, compare=False)

    @classmethod
    def identity(cls) -> "ScaledMatrix":
        return cls(Mat2.identity(), 0.0, 0.0, 0, _IDENTITY_FRAME)

    @property
    def log_norm(self) -> float:
        return self.log_scale + math.log(self.mat.norm)

    @property
    def log_sigma_min(self) -> float:
        return self.log_scale + self.log_det - math.log(self.mat.norm)

    @property
    def det_residual(self) -> float:
        """``|2 log_scale + log|det mat||``; zero for exactly unimodular products."""
        return abs(2.0 * self.log_scale + self.log_det)

    @property
    def log_abs_trace(self) -> float:
        tr = abs(self.mat.trace)
        return self.log_scale + math.log(tr) if tr > 0 else -math.inf

    def dense(self) -> Mat2:
        """The represented matrix; raises if it does not fit in a double."""
        if self.log_scale > 700:
            raise NumericFailure("represented matrix overflows double precision")
        return self.mat.scaled(math.exp(self.log_scale))

    def apply(self, vec) -> np.ndarray:
        y = self.mat.as_array() @ np.asarray(vec, dtype=float)
        # scale in log form so that an overflowing component becomes inf, never inf * 0
        with np.errstate(divide="ignore", over="ignore"):
            return np.sign(y) * np.exp(self.log_scale + np.log(np.abs(y)))

    def apply_scaled(self, vec) -> np.ndarray:
        """``exp(-log_scale) * M @ vec``: the image without the common scale."""
        return self.mat.as_array() @ np.asarray(vec, dtype=float)

    def _state(self) -> tuple:
        return self.frame if self.frame is not None else _frame_from_dense(self.mat, self.log_scale)


def transfer_matrix(E: float, v: float) -> Mat2:
    _finite(E, v)
    return Mat2(E - v, -1.0, 1.0, 0.0)


def _from_state(state, factors: int) -> ScaledMatrix:
    q1, q2, sg, l1, l2, u, e = state
    if not (math.isfinite(l1) and math.isfinite(l2) and math.isfinite(u)):
        raise NumericFailure("cocycle frame left double range")
    kn = K.spectral_norm(1.0, u, 0.0, e)
    r = 1.0 / kn
    mat = Mat2(q1 * r, (q1 * u - sg * q2 * e) * r, q2 * r, (q2 * u + sg * q1 * e) * r)
    log_kn = math.log(kn)
    return ScaledMatrix(mat, l1 + log_kn, (l2 - l1) - 2.0 * log_kn, factors, tuple(state))


def product_values(E: float, vals: np.ndarray, start: ScaledMatrix | None = None) -> ScaledMatrix:
    """Cocycle product over an explicit array of potential values."""
    _finite(E)
    start = start or ScaledMatrix.identity()
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    return _from_state(K.transfer_product(vals, float(E), *start._state()), start.factors + vals.size)


def cocycle_product(E: float, x: Word, potential: PotentialMap) -> ScaledMatrix:
    return product_values(E, potential.sample(x))


def inverse_cocycle_product(E: float, x: Word, potential: PotentialMap) -> ScaledMatrix:
    """``M(x_1)^-1 M(x_2)^-1 ... M(x_n)^-1``: the negative-time branch of the
    cocycle, built factor by factor from inverse matrices."""
    _finite(E)
    vals = potential.sample(x)[::-1]
    mats = np.empty((vals.size, 2, 2))
    mats[:, 0, 0] = 0.0
    mats[:, 0, 1] = 1.0
    mats[:, 1, 0] = -1.0
    mats[:, 1, 1] = E - vals
    return _from_state(K.general_product(mats, *_IDENTITY_FRAME), vals.size)


def matrix_product(mats) -> ScaledMatrix:
    """Scaled product ``mats[-1] @ ... @ mats[0]`` of arbitrary invertible matrices."""
    arr = np.ascontiguousarray([m.as_array() if isinstance(m, Mat2) else m for m in mats], dtype=np.float64)
    if arr.size == 0:
        return ScaledMatrix.identity()
    return _from_state(K.general_product(arr.reshape(-1, 2, 2), *_IDENTITY_FRAME), arr.shape[0])


def signed_cocycle(E: float, system: SubshiftSystem, n: int) -> ScaledMatrix:
    """The cocycle ``M^E(n, omega)`` for a two-sided element ``omega``.

    ``n > 0`` multiplies ``M`` over ``omega(1..n)``; ``n < 0`` multiplies the
    inverses over ``omega(n+1..0)`` in reverse order; ``n = 0`` is the
    identity.  For substitution and periodic systems ``omega`` is the centre
    of a canonical window of length ``2|n|``; Sturmian systems use the true
    negative indices of the rotation.
    """
    from .subshifts import SturmianSpec, sturmian_window

    if n == 0:
        return ScaledMatrix.identity()
    m = abs(n)
    if isinstance(system.source, SturmianSpec):
        left = sturmian_window(system.source, -m + 1, m)
        right = sturmian_window(system.source, 1, m)
    else:
        w = system.window(2 * m)
        left, right = w[:m], w[m:]
    if n > 0:
        return cocycle_product(E, right, system.potential)
    # A^-1(T^n w) ... A^-1(T^-1 w): rightmost factor is the site omega(0)
    vals = system.potential.sample(left)
    mats = np.empty((m, 2, 2))
    mats[:, 0, 0] = 0.0
    mats[:, 0, 1] = 1.0
    mats[:, 1, 0] = -1.0
    mats[:, 1, 1] = E - vals[::-1]
    return _from_state(K.general_product(mats, *_IDENTITY_FRAME), m)


def f_energy(E: float, x: Word, potential: PotentialMap) -> float:
    """``F^E(x) = log ||M^E(|x|, omega)||`` for any omega starting with ``x``."""
    return cocycle_product(E, x, potential).log_norm


def canonical_values(system: SubshiftSystem, N: int) -> np.ndarray:
    if N < 1:
        raise ValueError("word length must be positive")
    return system.potential.sample(system.window(N))


def lyapunov_estimate_raw(system: SubshiftSystem, E: float, N: int) -> float:
    vals = canonical_values(system, N)
    return product_values(E, vals).log_norm / N


def lyapunov_estimate(system: SubshiftSystem, E: float, N: int) -> float:
    """``gamma_N(E) = F^E(w) / |w|`` over the canonical window, clamped at 0."""
    return max(0.0, lyapunov_estimate_raw(system, E, N))


def lyapunov_values(vals: np.ndarray, energies, threads: int = 1) -> np.ndarray:
    """Raw ``F^E(w)/|w|`` for each energy over a fixed value array."""
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    return map_chunks(partial(K.log_norms, vals), np.asarray(energies, dtype=float), threads) / vals.size


# ---------------------------------------------------------------- uniformity


@dataclass(frozen=True)
class SpreadResult:
    spread: float
    lo: float
    hi: float
    n: int
    window_length: int
    degenerate: bool  # fewer than two distinct factors


def spread_report(system: SubshiftSystem, E: float, n: int, sample_budget: int = 8) -> SpreadResult:
    """Spread ``max - min`` of ``F^E(x)/n`` over all length-``n`` factors of a
    canonical window of length ``min(cap, sample_budget * n)``."""
    if n < 1:
        raise ValueError("factor length must be positive")
    _finite(E)
    W = min(system.cap, max(sample_budget * n, n))
    w = system.window(W)
    ids = w.ids()
    if W == n or np.all(ids == ids[0]):
        return SpreadResult(0.0, math.nan, math.nan, n, W, True)
    vals = system.potential.sample(w)
    f = K.window_log_norms(vals, float(E), n) / n
    return SpreadResult(float(f.max() - f.min()), float(f.min()), float(f.max()), n, W, False)


def uniformity_spread(system: SubshiftSystem, E: float, n: int, sample_budget: int = 8) -> float:
    return spread_report(system, E, n, sample_budget).spread


def window_f(system: SubshiftSystem, E: float, n: int, window_length: int) -> np.ndarray:
    """``F^E`` of every length-``n`` factor of the canonical window."""
    vals = system.potential.sample(system.window(window_length))
    return K.window_log_norms(vals, float(E), n)


# ---------------------------------------------------------------- solutions


def solution_sequence(E: float, x: Word, potential: PotentialMap, u0: float, u1: float) -> np.ndarray:
    """``u(0) ... u(|x|+1)`` from ``u(n+1) = (E - v(x_n)) u(n) - u(n-1)``."""
    _finite(E, u0, u1)
    u = K.solution_recursion(potential.sample(x), float(E), float(u0), float(u1))
    if not np.all(np.isfinite(u)):
        raise NumericFailure("solution overflowed; use cocycle_product (log-scaled) for long words")
    return u


@dataclass(frozen=True)
class StableDirection:
    vector: np.ndarray
    rate: float
    n: int
    gamma: float


def _unit_line(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    k = 0 if abs(v[0]) >= abs(v[1]) else 1
    return v if v[k] > 0 else -v


def stable_direction(system: SubshiftSystem, E: float, n: int, gamma_min: float = GAMMA_MIN) -> StableDirection:
    """Most contracted right singular direction of ``M^E(n, omega)``.

    Its contraction rate ``-log sigma_min / n`` tends to ``gamma(E)``; only
    defined when the Lyapunov estimate clears ``gamma_min``.
    """
    vals = canonical_values(system, n)
    P = product_values(E, vals)
    gamma = P.log_norm / n
    if gamma < gamma_min:
        raise NoDichotomy(f"no exponential dichotomy at this resolution: gamma_{n}({E}) = {gamma:.3g} < {gamma_min}")
    # right singular vectors of the normalised matrix; the dominant one is
    # well conditioned, the contracted one is its orthogonal complement
    _, _, vt = np.linalg.svd(P.mat.as_array())
    top = vt[0]
    contracted = _unit_line(np.array([-top[1], top[0]]))
    return StableDirection(contracted, -P.log_sigma_min / n, n, gamma)


def line_angle(u: np.ndarray, v: np.ndarray) -> float:
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, c))


# ---------------------------------------------------------------- profiles


@dataclass
class LyapunovProfile:
    energies: np.ndarray
    gamma: np.ndarray
    gamma_raw: np.ndarray
    N: int
    spread: np.ndarray
    label: str = ""
    spread_n: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.energies) <= 0):
            raise ValueError("profile energies must be strictly increasing")

    def columns(self):
        return ["E", "gamma", "gamma_raw", "spread", "N"]

    def rows(self):
        for e, g, r, s in zip(self.energies, self.gamma, self.gamma_raw, self.spread):
            yield (e, g, r, s, self.N)

    def metadata(self) -> dict:
        return {"kind": "lyapunov_profile", "system": self.label, "N": self.N, "spread_n": self.spread_n,
                "versions": versions(), **self.meta}

    def to_csv(self) -> str:
        return csv_text(self.metadata(), self.columns(), self.rows())

    def to_json(self) -> str:
        return to_json({"metadata": self.metadata(), "E": self.energies, "gamma": self.gamma,
                        "gamma_raw": self.gamma_raw, "spread": self.spread, "N": self.N}) + "\n"


def lyapunov_profile(system: SubshiftSystem, energies, N: int, spread_n: int | None = None,
                     sample_budget: int = 8, threads: int = 1, meta: dict | None = None) -> LyapunovProfile:
    """``gamma_N`` (and optionally the uniformity spread at factor length
    ``spread_n``) on an energy grid."""
    energies = np.asarray(energies, dtype=float)
    vals = canonical_values(system, N)
    raw = lyapunov_values(vals, energies, threads)
    if spread_n:
        W = min(system.cap, max(sample_budget * spread_n, spread_n))
        wv = canonical_values(system, W)

        def chunk_spread(es):
            out = np.empty(es.size)
            for i, e in enumerate(es):
                f = K.window_log_norms(wv, float(e), spread_n)
                out[i] = (f.max() - f.min()) / spread_n
            return out

        spread = map_chunks(chunk_spread, energies, threads)
    else:
        spread = np.full(energies.size, np.nan)
    return LyapunovProfile(energies, np.maximum(raw, 0.0), raw, N, spread, system.label, spread_n, dict(meta or {}))


# ---------------------------------------------------------------- checkpoints

_CK_MAGIC = b"QSCK1\n"
_CK_HEAD = struct.Struct("<dQ")
_CK_REC = struct.Struct("<i6d7d32s")


def _prefix_hash(vals: np.ndarray) -> bytes:
    return hashlib.sha256(np.ascontiguousarray(vals, dtype=np.float64).tobytes()).digest()


def write_checkpoints(path: str | Path, E: float, vals: np.ndarray) -> ScaledMatrix:
    """Run the product over ``vals`` and store the state after every
    ``2**k`` letters (fields: k, matrix entries, log_scale, log_det, QR frame,
    sha256 of the prefix values)."""
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    records = []
    state = ScaledMatrix.identity()
    done = 0
    k = 0
    while (1 << k) <= vals.size:
        upto = 1 << k
        state = product_values(E, vals[done:upto], state)
        done = upto
        m = state.mat
        records.append(_CK_REC.pack(k, m.m11, m.m12, m.m21, m.m22, state.log_scale, state.log_det,
                                    *state._state(), _prefix_hash(vals[:upto])))
        k += 1
    state = product_values(E, vals[done:], state)
    with open(path, "wb") as fh:
        fh.write(_CK_MAGIC)
        fh.write(_CK_HEAD.pack(float(E), len(records)))
        fh.writelines(records)
    return state


def read_checkpoints(path: str | Path) -> tuple[float, list[tuple[int, ScaledMatrix, bytes]]]:
    raw = Path(path).read_bytes()
    if not raw.startswith(_CK_MAGIC):
        raise ValueError(f"{path} is not a checkpoint file")
    off = len(_CK_MAGIC)
    E, count = _CK_HEAD.unpack_from(raw, off)
    off += _CK_HEAD.size
    out = []
    for _ in range(count):
        k, a, b, c, d, ls, ld, *frame, h = _CK_REC.unpack_from(raw, off)
        off += _CK_REC.size
        out.append((k, ScaledMatrix(Mat2(a, b, c, d), ls, ld, 1 << k, tuple(frame)), h))
    return E, out


def resume_product(path: str | Path, E: float, vals: np.ndarray) -> tuple[ScaledMatrix, int]:
    """Product over ``vals`` restarted from the deepest matching checkpoint.

    Returns the product and the number of letters that were skipped.
    """
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    ck_E, records = read_checkpoints(path)
    start, skipped = ScaledMatrix.identity(), 0
    if ck_E == E:
        for k, state, h in reversed(records):
            if (1 << k) <= vals.size and _prefix_hash(vals[: 1 << k]) == h:
                start, skipped = state, 1 << k
                break
    return product_values(E, vals[skipped:], start), skipped
