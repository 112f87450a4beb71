"""Finite words over a finite alphabet.

A :class:`Word` stores its letters as ``bytes`` (one byte per letter id), so
alphabets are limited to 256 letters.  Words are immutable and hashable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_ALPHABET = 256


class AlphabetMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        if not 1 <= len(self.symbols) <= MAX_ALPHABET:
            raise ValueError(f"alphabet size must be in [1, {MAX_ALPHABET}], got {len(self.symbols)}")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError(f"duplicate symbols in alphabet {self.symbols}")
        if any(len(s) != 1 for s in self.symbols):
            raise ValueError("alphabet symbols must be single characters")

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValueError(f"symbol {symbol!r} not in alphabet {self.symbols}") from None

    def word(self, text: str) -> "Word":
        """Parse ``text`` (one character per letter) into a word."""
        table = {s: i for i, s in enumerate(self.symbols)}
        try:
            data = bytes(table[ch] for ch in text)
        except KeyError as exc:
            raise ValueError(f"symbol {exc.args[0]!r} not in alphabet {self.symbols}") from None
        return Word(self, data)


@dataclass(frozen=True)
class Word:
    alphabet: Alphabet
    data: bytes = b""

    def __post_init__(self):
        if self.data and max(self.data) >= len(self.alphabet):
            raise ValueError("letter id out of range for alphabet")

    @classmethod
    def from_ids(cls, alphabet: Alphabet, ids: Iterable[int] | np.ndarray) -> "Word":
        if isinstance(ids, np.ndarray):
            return cls(alphabet, ids.astype(np.uint8).tobytes())
        return cls(alphabet, bytes(ids))

    def __len__(self) -> int:
        return len(self.data)

    def __str__(self) -> str:
        sym = self.alphabet.symbols
        return "".join(sym[i] for i in self.data)

    def __repr__(self) -> str:
        s = str(self)
        if len(s) > 40:
            s = s[:37] + "..."
        return f"Word({s!r})"

    def __getitem__(self, item) -> "Word":
        if isinstance(item, slice):
            return Word(self.alphabet, self.data[item])
        return Word(self.alphabet, self.data[item : item + 1 or None])

    def __add__(self, other: "Word") -> "Word":
        return concat(self, other)

    def ids(self) -> np.ndarray:
        """Read-only uint8 view of the letter ids."""
        return np.frombuffer(self.data, dtype=np.uint8)


def _check_same(x: Word, y: Word) -> None:
    if x.alphabet != y.alphabet:
        raise AlphabetMismatch(f"words over different alphabets: {x.alphabet.symbols} vs {y.alphabet.symbols}")


def concat(x: Word, y: Word) -> Word:
    _check_same(x, y)
    return Word(x.alphabet, x.data + y.data)


def count_occurrences(v: Word, x: Word) -> int:
    """Number of (possibly overlapping) occurrences of ``v`` in ``x``."""
    if len(v) == 0:
        raise ValueError("occurrence count of the empty word is undefined")
    _check_same(v, x)
    count = 0
    i = x.data.find(v.data)
    while i != -1:
        count += 1
        i = x.data.find(v.data, i + 1)
    return count


def occurrence_indicator(v: Word, x: Word) -> np.ndarray:
    """Boolean array ``hit`` with ``hit[i]`` true iff ``v`` occurs at position ``i`` of ``x``."""
    if len(v) == 0:
        raise ValueError("occurrence count of the empty word is undefined")
    _check_same(v, x)
    n, m = len(x), len(v)
    if m > n:
        return np.zeros(0, dtype=bool)
    xs = x.ids()
    hit = np.ones(n - m + 1, dtype=bool)
    for k, letter in enumerate(v.data):
        hit &= xs[k : n - m + 1 + k] == letter
    return hit


def factor_keys(ids: np.ndarray, n: int) -> np.ndarray:
    """One opaque, hashable key per length-``n`` factor (position-aligned)."""
    rows = np.lib.stride_tricks.sliding_window_view(np.ascontiguousarray(ids, dtype=np.uint8), n)
    return np.ascontiguousarray(rows).view(np.dtype((np.void, n))).ravel()


def distinct_subwords(x: Word, n: int) -> set[Word]:
    if n < 1:
        raise ValueError("factor length must be positive")
    if n > len(x):
        raise ValueError(f"factor length {n} exceeds word length {len(x)}")
    keys = np.unique(factor_keys(x.ids(), n))
    return {Word(x.alphabet, k.tobytes()) for k in keys}


def weighted_frequency(v: Word, x: Word) -> float:
    """``count_occurrences(v, x) * |v| / |x|``."""
    if len(x) < len(v):
        raise ValueError("host word shorter than pattern")
    return count_occurrences(v, x) * len(v) / len(x)


@dataclass(frozen=True)
class PotentialMap:
    """Real sample value of the potential for each letter."""

    alphabet: Alphabet
    values: tuple[float, ...]
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.values) != len(self.alphabet):
            raise ValueError("need exactly one potential value per letter")
        arr = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("potential values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "_array", arr)

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def injective(self) -> bool:
        return len(set(self.values)) == len(self.values)

    def sample(self, x: Word) -> np.ndarray:
        """Potential values along ``x`` as a float64 array."""
        _check_same(Word(self.alphabet), x)
        return self._array[x.ids()]

    def to_json(self) -> str:
        return json.dumps({"letters": list(self.alphabet.symbols), "potential": list(self.values)})

    @classmethod
    def from_json(cls, text: str) -> "PotentialMap":
        obj = json.loads(text)
        return cls(Alphabet(tuple(obj["letters"])), tuple(float(v) for v in obj["potential"]))

    @classmethod
    def from_mapping(cls, alphabet: Alphabet, mapping: dict[str, float]) -> "PotentialMap":
        missing = set(alphabet.symbols) - set(mapping)
        if missing:
            raise ValueError(f"potential missing for letters {sorted(missing)}")
        return cls(alphabet, tuple(float(mapping[s]) for s in alphabet.symbols))


def alphabet_of(symbols: Sequence[str] | str) -> Alphabet:
    return Alphabet(tuple(symbols))
