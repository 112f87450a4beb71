"""Substitution, Sturmian and periodic word generators plus (LR)/(PW) diagnostics.

A :class:`SubshiftSystem` never materialises an infinite sequence.  It hands
out finite windows of a canonical element of the subshift:

* substitution: the prefix of ``iterate(seed, k)`` for the smallest ``k``
  long enough,
* Sturmian: the mechanical word ``w_i``, ``i = 1, 2, ...``,
* periodic: the repeated period word.

Everything that talks about "the language" of the subshift works from these
windows and is therefore an under-approximation, exact once the window is
longer than the repetitivity bound of the factor length in question.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence, Union

import numba
import numpy as np

from .words import Alphabet, AlphabetMismatch, PotentialMap, Word, factor_keys, occurrence_indicator

DEFAULT_WINDOW_CAP = 10_000_000


class CapExceeded(RuntimeError):
    """A requested word would be longer than the configured cap."""

    def __init__(self, requested: int, cap: int, what: str = "window"):
        super().__init__(f"{what} length {requested} exceeds cap {cap}")
        self.requested = requested
        self.cap = cap


# --------------------------------------------------------------------------
# substitutions


@dataclass(frozen=True)
class Substitution:
    alphabet: Alphabet
    rules: tuple[Word, ...]

    def __post_init__(self):
        if len(self.rules) != len(self.alphabet):
            raise ValueError("need exactly one rule per letter")
        for r in self.rules:
            if len(r) == 0:
                raise ValueError("substitution images must be nonempty")
            if r.alphabet != self.alphabet:
                raise AlphabetMismatch("rule image over a different alphabet")

    @classmethod
    def from_strings(cls, symbols: Sequence[str], rules: dict[str, str]) -> "Substitution":
        alpha = Alphabet(tuple(symbols))
        return cls(alpha, tuple(alpha.word(rules[s]) for s in alpha.symbols))

    @property
    def matrix(self) -> np.ndarray:
        """Abelianization: ``matrix[i, j]`` = occurrences of letter ``j`` in ``rule(i)``."""
        k = len(self.alphabet)
        m = np.zeros((k, k), dtype=np.int64)
        for i, r in enumerate(self.rules):
            m[i] = np.bincount(r.ids(), minlength=k)
        return m

    def __str__(self) -> str:
        return ", ".join(f"{s}->{r}" for s, r in zip(self.alphabet.symbols, self.rules))


def apply(sub: Substitution, x: Word) -> Word:
    if x.alphabet != sub.alphabet:
        raise AlphabetMismatch("word and substitution use different alphabets")
    return Word(sub.alphabet, b"".join(sub.rules[i].data for i in x.data))


def _iterate_lengths(sub: Substitution, seed: int, k: int) -> int:
    counts = [0] * len(sub.alphabet)
    counts[seed] = 1
    m = sub.matrix.tolist()
    for _ in range(k):
        counts = [sum(counts[i] * m[i][j] for i in range(len(counts))) for j in range(len(counts))]
    return sum(counts)


def iterate(sub: Substitution, seed: Union[int, str], k: int, cap: int = DEFAULT_WINDOW_CAP) -> Word:
    """``sub`` applied ``k`` times to the one-letter word ``seed``."""
    if k < 0:
        raise ValueError("iteration count must be non-negative")
    if isinstance(seed, str):
        seed = sub.alphabet.index(seed)
    n = _iterate_lengths(sub, seed, k)
    if n > cap:
        raise CapExceeded(n, cap, what=f"iterate({sub.alphabet.symbols[seed]}, {k})")
    w = Word(sub.alphabet, bytes([seed]))
    for _ in range(k):
        w = apply(sub, w)
    return w


def is_primitive(sub: Substitution) -> bool:
    k = len(sub.alphabet)
    base = (sub.matrix > 0).astype(np.int64)
    power = base.copy()
    for _ in range((k - 1) ** 2 + 1):
        if power.min() > 0:
            return True
        power = np.minimum(power @ base, 1)
    return bool(power.min() > 0)


# --------------------------------------------------------------------------
# Sturmian rotation words


def convergents(cf: Sequence[int]) -> list[tuple[int, int]]:
    """Convergents ``p_k/q_k`` of ``[0; a_1, a_2, ...]``."""
    out = []
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    for a in cf:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        out.append((p, q))
    return out


def continued_fraction(x: float, max_denominator: int = 10**8) -> tuple[int, ...]:
    """Continued-fraction digits of ``x`` in (0, 1), stopped before the
    convergent denominator exceeds ``max_denominator`` (double precision
    cannot vouch for later digits)."""
    if not 0.0 < x < 1.0:
        raise ValueError("rotation number must lie in (0, 1)")
    frac = Fraction(x)
    digits: list[int] = []
    rest = frac
    while rest != 0:
        inv = 1 / rest
        a = math.floor(inv)
        trial = digits + [a]
        if convergents(trial)[-1][1] > max_denominator:
            break
        digits = trial
        rest = inv - a
    return tuple(digits)


@numba.njit(cache=True, nogil=True)
def _rotation_letters(r0, p, q, length):
    out = np.empty(length, dtype=np.uint8)
    r = r0
    thresh = q - p
    for i in range(length):
        out[i] = 1 if r >= thresh else 0
        r += p
        if r >= q:
            r -= q
    return out


@dataclass(frozen=True)
class SturmianSpec:
    """Rotation by ``alpha = [0; cf...]`` with phase ``theta``.

    The word is evaluated with the deepest stored convergent ``p/q`` in exact
    integer arithmetic, which reproduces the irrational rotation for indices
    ``|i| < q``.
    """

    cf: tuple[int, ...]
    theta: Union[float, Fraction] = 0.0

    def __post_init__(self):
        if len(self.cf) < 1:
            raise ValueError("continued fraction needs depth >= 1")
        if any(int(a) != a or a < 1 for a in self.cf):
            raise ValueError("continued-fraction digits must be positive integers")
        if self.cf == (1,):
            raise ValueError("[0; 1] = 1 is not in (0, 1)")
        if not 0 <= self.theta < 1:
            raise ValueError("phase must lie in [0, 1)")

    @classmethod
    def from_alpha(cls, alpha: float, theta: float = 0.0, max_denominator: int = 10**8) -> "SturmianSpec":
        return cls(continued_fraction(alpha, max_denominator), theta)

    @property
    def depth(self) -> int:
        return len(self.cf)

    @property
    def convergents(self) -> list[tuple[int, int]]:
        return convergents(self.cf)

    @property
    def rational(self) -> Fraction:
        p, q = self.convergents[-1]
        return Fraction(p, q)

    @property
    def alpha(self) -> float:
        return float(self.rational)

    @property
    def precision_limit(self) -> int:
        """Indices ``i`` with ``|i|`` below this are evaluated faithfully."""
        return self.convergents[-1][1]


def sturmian_window(spec: SturmianSpec, start: int, length: int) -> Word:
    """Letters ``w_i`` for ``i = start .. start+length-1``; ``w_i = b`` iff
    ``(i*alpha + theta) mod 1`` lies in ``[1 - alpha, 1)``."""
    if length < 1:
        raise ValueError("window length must be positive")
    p, q = spec.convergents[-1]
    last = max(abs(start), abs(start + length - 1))
    if last >= q:
        raise CapExceeded(last, q - 1, what="Sturmian index (precision guarantee of stored continued fraction)")
    shift = math.floor(Fraction(spec.theta) * q)
    r0 = (start * p + shift) % q
    ids = _rotation_letters(r0, p, q, length)
    return Word(STURMIAN_ALPHABET, ids.tobytes())


STURMIAN_ALPHABET = Alphabet(("a", "b"))


# --------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class SubstitutionSource:
    substitution: Substitution
    seed: int = 0

    def __post_init__(self):
        if not is_primitive(self.substitution):
            raise ValueError(f"substitution {self.substitution} is not primitive")


@dataclass(frozen=True)
class PeriodicSource:
    period: Word

    def __post_init__(self):
        if len(self.period) == 0:
            raise ValueError("period word must be nonempty")


Source = Union[SubstitutionSource, SturmianSpec, PeriodicSource]


@dataclass(frozen=True)
class SubshiftSystem:
    source: Source
    potential: PotentialMap
    label: str = "custom"
    aperiodic: Union[bool, None] = None
    cap: int = DEFAULT_WINDOW_CAP
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.potential.alphabet != self.alphabet:
            raise AlphabetMismatch("potential map and source use different alphabets")

    @property
    def alphabet(self) -> Alphabet:
        src = self.source
        if isinstance(src, SubstitutionSource):
            return src.substitution.alphabet
        if isinstance(src, SturmianSpec):
            return STURMIAN_ALPHABET
        return src.period.alphabet

    @property
    def kind(self) -> str:
        return {SubstitutionSource: "substitution", SturmianSpec: "sturmian", PeriodicSource: "periodic"}[type(self.source)]

    def window(self, length: int) -> Word:
        """Canonical window of exactly ``length`` letters (``omega(1) ... omega(length)``)."""
        if length < 0:
            raise ValueError("length must be non-negative")
        if length > self.cap:
            raise CapExceeded(length, self.cap)
        if length == 0:
            return Word(self.alphabet)
        src = self.source
        if isinstance(src, SturmianSpec):
            return sturmian_window(src, 1, length)
        if isinstance(src, PeriodicSource):
            reps = -(-length // len(src.period))
            return Word(self.alphabet, (src.period.data * reps)[:length])
        cached = self._cache.get("fixed")
        if cached is None or len(cached) < length:
            k = 0
            while _iterate_lengths(src.substitution, src.seed, k) < length:
                k += 1
            cached = iterate(src.substitution, src.seed, k, cap=max(self.cap, length))
            self._cache["fixed"] = cached
        return cached[:length]

    def approximant(self, k: int) -> Word:
        """Period word of the ``k``-th periodic approximant."""
        src = self.source
        if isinstance(src, SubstitutionSource):
            return iterate(src.substitution, src.seed, k, cap=self.cap)
        if isinstance(src, SturmianSpec):
            conv = src.convergents
            if not 1 <= k <= len(conv):
                raise ValueError(f"approximant depth must be in [1, {len(conv)}]")
            return sturmian_window(src, 1, conv[k - 1][1])
        return src.period

    def describe(self) -> dict:
        src = self.source
        meta: dict = {"label": self.label, "kind": self.kind, "alphabet": list(self.alphabet.symbols),
                      "potential": list(self.potential.values), "aperiodic": self.aperiodic}
        if isinstance(src, SubstitutionSource):
            meta["rules"] = {s: str(r) for s, r in zip(self.alphabet.symbols, src.substitution.rules)}
            meta["seed"] = self.alphabet.symbols[src.seed]
        elif isinstance(src, SturmianSpec):
            meta["alpha_cf"] = list(src.cf)
            meta["theta"] = float(src.theta)
        else:
            meta["period"] = str(src.period)
        if not self.potential.injective:
            meta["potential_injective"] = False
        return meta


def substitution_system(symbols: Sequence[str], rules: dict[str, str], potential: dict[str, float],
                        seed: str | None = None, label: str = "custom", aperiodic: bool | None = None,
                        cap: int = DEFAULT_WINDOW_CAP) -> SubshiftSystem:
    sub = Substitution.from_strings(symbols, rules)
    seed_id = sub.alphabet.index(seed) if seed is not None else 0
    return SubshiftSystem(SubstitutionSource(sub, seed_id), PotentialMap.from_mapping(sub.alphabet, potential),
                          label, aperiodic, cap)


def periodic_system(period: str, potential: dict[str, float], label: str = "periodic",
                    symbols: Sequence[str] | None = None, cap: int = DEFAULT_WINDOW_CAP) -> SubshiftSystem:
    if symbols is None:
        symbols = sorted(potential)
    alpha = Alphabet(tuple(symbols))
    return SubshiftSystem(PeriodicSource(alpha.word(period)), PotentialMap.from_mapping(alpha, potential),
                          label, False, cap)


def sturmian_system(cf: Sequence[int], potential: dict[str, float], theta: float = 0.0,
                    label: str = "sturmian", cap: int = DEFAULT_WINDOW_CAP) -> SubshiftSystem:
    spec = SturmianSpec(tuple(int(a) for a in cf), theta)
    return SubshiftSystem(spec, PotentialMap.from_mapping(STURMIAN_ALPHABET, potential), label, True, cap)


_CATALOG = {
    "fibonacci": lambda: substitution_system("ab", {"a": "ab", "b": "a"}, {"a": 0.0, "b": 1.0}, "a", "fibonacci", True),
    "thue_morse": lambda: substitution_system("ab", {"a": "ab", "b": "ba"}, {"a": 0.0, "b": 1.0}, "a", "thue_morse", True),
    "period_doubling": lambda: substitution_system("ab", {"a": "ab", "b": "aa"}, {"a": 0.0, "b": 1.0}, "a",
                                                   "period_doubling", True),
    "rudin_shapiro": lambda: substitution_system("abcd", {"a": "ab", "b": "ac", "c": "db", "d": "dc"},
                                                 {"a": 1.0, "b": 0.5, "c": -0.5, "d": -1.0}, "a", "rudin_shapiro", True),
    "binary_non_pisot": lambda: substitution_system("ab", {"a": "ab", "b": "aaa"}, {"a": 0.0, "b": 1.0}, "a",
                                                    "binary_non_pisot", True),
    "sturmian_golden": lambda: sturmian_system((1,) * 50, {"a": 0.0, "b": 1.0}, 0.0, "sturmian_golden"),
    "free": lambda: periodic_system("a", {"a": 0.0}, "free"),
    "periodic_02": lambda: periodic_system("ab", {"a": 0.0, "b": 2.0}, "periodic_02"),
}

SUBSTITUTION_CATALOG = ("fibonacci", "thue_morse", "period_doubling", "rudin_shapiro", "binary_non_pisot")


def catalog() -> list[str]:
    return list(_CATALOG)


def builtin(label: str) -> SubshiftSystem:
    try:
        return _CATALOG[label]()
    except KeyError:
        raise KeyError(f"unknown system {label!r}; catalog: {', '.join(_CATALOG)}") from None


def system_from_config(obj: dict, cap: int = DEFAULT_WINDOW_CAP) -> SubshiftSystem:
    """Build a system from a parsed JSON config (substitution, Sturmian or periodic)."""
    label = obj.get("label", "custom")
    if "rules" in obj:
        symbols = obj.get("alphabet") or list(obj["rules"])
        return substitution_system(symbols, obj["rules"], obj["potential"], obj.get("seed"), label,
                                   obj.get("aperiodic"), cap)
    if "alpha_cf" in obj or "alpha" in obj:
        cf = obj.get("alpha_cf") or continued_fraction(float(obj["alpha"]))
        return sturmian_system(cf, obj["potential"], float(obj.get("theta", 0.0)), label, cap)
    if "period" in obj:
        return periodic_system(obj["period"], obj["potential"], label, obj.get("alphabet"), cap)
    raise ValueError("config must contain 'rules' (substitution), 'alpha_cf' (Sturmian) or 'period'")


def load_system(path: str | Path, cap: int = DEFAULT_WINDOW_CAP) -> SubshiftSystem:
    return system_from_config(json.loads(Path(path).read_text()), cap)


# --------------------------------------------------------------------------
# language and diagnostics


def legal_words(system: SubshiftSystem, n: int, budget: int = 32) -> set[Word]:
    """Length-``n`` factors of a canonical window of length ``budget * n``
    (at least ``n + 1``)."""
    if n < 1:
        raise ValueError("factor length must be positive")
    w = system.window(max(budget * n, n + 1))
    keys = np.unique(factor_keys(w.ids(), n))
    return {Word(w.alphabet, k.tobytes()) for k in keys}


@numba.njit(cache=True)
def _return_bound(ids, nwords, n):
    # backward scan: for every start i, the shortest window beginning at i
    # that contains every factor id
    nxt = np.full(nwords, -1, dtype=np.int64)
    missing = nwords
    best = 0
    valid = 0
    for i in range(ids.size - 1, -1, -1):
        if nxt[ids[i]] < 0:
            missing -= 1
        nxt[ids[i]] = i
        if missing == 0:
            need = nxt.max() + n - i
            if need > best:
                best = need
            valid += 1
    return best, valid


@dataclass
class RepetitivityEntry:
    n: int
    R: int | None
    ratio: float | None
    resolved: bool


@dataclass
class RepetitivityReport:
    label: str
    window_length: int
    entries: list[RepetitivityEntry]

    @property
    def kappa_estimate(self) -> float:
        ratios = [e.ratio for e in self.entries if e.resolved]
        return max(ratios) if ratios else float("nan")

    def to_dict(self) -> dict:
        return {"label": self.label, "window_length": self.window_length, "kappa_estimate": self.kappa_estimate,
                "entries": [e.__dict__ for e in self.entries]}


def repetitivity_report(system: SubshiftSystem, n_max: int, window_length: int | None = None) -> RepetitivityReport:
    """Empirical (LR) table: ``R(n)`` is the least ``L`` such that every
    length-``L`` factor of the window contains every length-``n`` factor.

    An entry is flagged unresolved when fewer than ``R(n)`` start positions
    of the window could be examined.
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    if window_length is None:
        window_length = min(system.cap, max(4096, 256 * n_max))
    w = system.window(window_length)
    ids = w.ids()
    entries = []
    for n in range(1, n_max + 1):
        keys = factor_keys(ids, n)
        _, inverse = np.unique(keys, return_inverse=True)
        inverse = inverse.astype(np.int64).ravel()
        nwords = int(inverse.max()) + 1
        R, valid = _return_bound(inverse, nwords, n)
        if valid == 0 or valid < R:
            entries.append(RepetitivityEntry(n, None, None, False))
        else:
            entries.append(RepetitivityEntry(n, int(R), R / n, True))
    return RepetitivityReport(system.label, window_length, entries)


@dataclass
class PWReport:
    label: str
    window_length: int
    lengths: list[int]
    words: list[str]
    table: np.ndarray  # (words, lengths): min weighted frequency over factors of that length
    running_inf: np.ndarray
    tail_inf: np.ndarray

    @property
    def C_estimate(self) -> float:
        return float(self.tail_inf.min()) if self.tail_inf.size else float("nan")

    def to_dict(self) -> dict:
        return {"label": self.label, "window_length": self.window_length, "lengths": self.lengths,
                "C_estimate": self.C_estimate,
                "rows": [{"word": v, "values": self.table[i].tolist(), "running_inf": self.running_inf[i].tolist(),
                          "tail_inf": float(self.tail_inf[i])} for i, v in enumerate(self.words)]}


def pw_report(system: SubshiftSystem, test_words, lengths: Sequence[int],
              window_length: int | None = None) -> PWReport:
    """Empirical (PW) table.

    ``table[v, j]`` is the minimum of ``weighted_frequency(v, x)`` over all
    factors ``x`` of length ``lengths[j]`` of the window.  The tail infimum of
    a row is its minimum over the upper half of the requested lengths.
    """
    lengths = [int(n) for n in lengths]
    if not lengths or any(b <= a for a, b in zip(lengths, lengths[1:])) or lengths[0] < 1:
        raise ValueError("lengths must be a nonempty increasing list of positive integers")
    if window_length is None:
        window_length = min(system.cap, 8 * lengths[-1])
    if window_length < lengths[-1]:
        raise ValueError("window shorter than the longest requested factor length")
    w = system.window(window_length)
    words = sorted((v if isinstance(v, Word) else system.alphabet.word(v) for v in test_words),
                   key=lambda v: (len(v), v.data))
    table = np.empty((len(words), len(lengths)))
    for i, v in enumerate(words):
        hit = occurrence_indicator(v, w)
        if not hit.any():
            raise ValueError(f"test word {v} does not occur in the generated window (illegal or window too short)")
        cs = np.concatenate(([0], np.cumsum(hit, dtype=np.int64)))
        m = len(v)
        for j, ell in enumerate(lengths):
            if ell < m:
                table[i, j] = 0.0
                continue
            starts = np.arange(window_length - ell + 1)
            counts = cs[starts + ell - m + 1] - cs[starts]
            table[i, j] = counts.min() * m / ell
    running = np.minimum.accumulate(table, axis=1) if table.size else table
    half = len(lengths) // 2
    tail = table[:, half:].min(axis=1) if table.size else np.zeros(0)
    return PWReport(system.label, window_length, lengths, [str(v) for v in words], table, running, tail)
