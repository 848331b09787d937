"""Threshold functions of up to five inputs.

Truth tables are stored as Python ints: bit ``m`` holds the value of minterm
``m``.  Variable ``x_1`` is the most significant bit of the minterm index, so
for arity ``n`` variable ``i`` (0-based) is ``(m >> (n - 1 - i)) & 1``.

Canonical forms use the lexicographic order of the bit-string written from
minterm 0 upwards.  Under that order the positive form of a threshold
function lists its heaviest variable first, e.g. ``[4,3,2,2,1;7]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

MAX_ARITY = 5
WEIGHT_BOUND = 8
PERCEPTRON_CAP = 50_000


def minterm_bits(m: int, n: int) -> tuple[int, ...]:
    return tuple((m >> (n - 1 - i)) & 1 for i in range(n))


def bits_to_minterm(bits: Sequence[int]) -> int:
    m = 0
    for b in bits:
        m = (m << 1) | (1 if b else 0)
    return m


@lru_cache(maxsize=None)
def minterm_matrix(n: int) -> np.ndarray:
    """(2^n, n) 0/1 matrix, row m = input vector of minterm m."""
    m = np.arange(1 << n)
    return ((m[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(np.int64)


@lru_cache(maxsize=None)
def _lex_weights(n: int) -> np.ndarray:
    # minterm 0 is the most significant position of the lexicographic key
    size = 1 << n
    return (np.uint64(1) << np.arange(size - 1, -1, -1, dtype=np.uint64)).astype(np.uint64)


def lex_key(bits: int, n: int) -> int:
    """Integer whose ordering is the lexicographic order of the bit-string m0 m1 m2 ..."""
    size = 1 << n
    key = 0
    for m in range(size):
        key = (key << 1) | ((bits >> m) & 1)
    return key


@dataclass(frozen=True)
class TruthTable:
    arity: int
    bits: int

    def __post_init__(self):
        if not 1 <= self.arity <= MAX_ARITY:
            raise ValueError(f"arity must be in 1..{MAX_ARITY}, got {self.arity}")
        if not 0 <= self.bits < (1 << (1 << self.arity)):
            raise ValueError(f"truth table does not fit {1 << self.arity} rows")

    @classmethod
    def from_values(cls, values: Sequence[int]) -> "TruthTable":
        size = len(values)
        n = size.bit_length() - 1
        if size < 2 or (1 << n) != size:
            raise ValueError(f"truth table length must be a power of two >= 2, got {size}")
        bits = 0
        for m, v in enumerate(values):
            if v:
                bits |= 1 << m
        return cls(n, bits)

    @classmethod
    def from_function(cls, n: int, fn: Callable[..., object]) -> "TruthTable":
        bits = 0
        for m in range(1 << n):
            if fn(*minterm_bits(m, n)):
                bits |= 1 << m
        return cls(n, bits)

    @classmethod
    def from_hex(cls, n: int, text: str) -> "TruthTable":
        return cls(n, int(text, 16))

    @property
    def size(self) -> int:
        return 1 << self.arity

    def __getitem__(self, m: int) -> int:
        if not 0 <= m < self.size:
            raise IndexError(m)
        return (self.bits >> m) & 1

    def __call__(self, *xs: int) -> int:
        if len(xs) != self.arity:
            raise ValueError(f"expected {self.arity} inputs, got {len(xs)}")
        return self[bits_to_minterm(xs)]

    def values(self) -> list[int]:
        return [(self.bits >> m) & 1 for m in range(self.size)]

    def array(self) -> np.ndarray:
        return np.array(self.values(), dtype=np.int8)

    def hex(self) -> str:
        width = max(1, self.size // 4)
        return format(self.bits, f"0{width}x")

    def bitstring(self) -> str:
        """Minterm 0 first."""
        return "".join(str(v) for v in self.values())

    def lex_key(self) -> int:
        return lex_key(self.bits, self.arity)

    def onset(self) -> list[int]:
        return [m for m in range(self.size) if (self.bits >> m) & 1]

    def is_constant(self) -> bool:
        return self.bits == 0 or self.bits == (1 << self.size) - 1

    def complement(self) -> "TruthTable":
        return TruthTable(self.arity, ((1 << self.size) - 1) ^ self.bits)

    def _pairs(self, i: int):
        stride = 1 << (self.arity - 1 - i)
        for m in range(self.size):
            if not m & stride:
                yield (self.bits >> m) & 1, (self.bits >> (m | stride)) & 1

    def depends_on(self, i: int) -> bool:
        return any(a != b for a, b in self._pairs(i))

    def support(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.arity) if self.depends_on(i))

    def is_positive_unate(self, i: int) -> bool:
        return all(a <= b for a, b in self._pairs(i))

    def is_negative_unate(self, i: int) -> bool:
        return all(a >= b for a, b in self._pairs(i))

    def is_positive(self) -> bool:
        return all(self.is_positive_unate(i) for i in range(self.arity))

    def transform(self, t: "NpnTransform") -> "TruthTable":
        """Apply ``t``: g(y) = out ^ f(x) with x_i = y_{perm[i]} ^ neg_i."""
        if t.arity != self.arity:
            raise ValueError("transform arity mismatch")
        n = self.arity
        bits = 0
        for y in range(self.size):
            x = 0
            for i in range(n):
                b = ((y >> (n - 1 - t.permutation[i])) & 1) ^ ((t.polarity >> i) & 1)
                x = (x << 1) | b
            if ((self.bits >> x) & 1) ^ t.output_negated:
                bits |= 1 << y
        return TruthTable(n, bits)

    def permute(self, perm: Sequence[int]) -> "TruthTable":
        return self.transform(NpnTransform(tuple(perm), 0, 0))

    def negate_inputs(self, mask: int) -> "TruthTable":
        return self.transform(NpnTransform(tuple(range(self.arity)), mask, 0))

    def restrict(self, keep: Sequence[int]) -> "TruthTable":
        """Table over the variables ``keep`` (others must be non-essential)."""
        keep = tuple(keep)
        for i in range(self.arity):
            if i not in keep and self.depends_on(i):
                raise ValueError(f"variable {i} is essential and cannot be dropped")
        k = len(keep)
        bits = 0
        for y in range(1 << k):
            x = 0
            for pos, i in enumerate(keep):
                if (y >> (k - 1 - pos)) & 1:
                    x |= 1 << (self.arity - 1 - i)
            if (self.bits >> x) & 1:
                bits |= 1 << y
        return TruthTable(k, bits)

    def __str__(self) -> str:
        return f"TT{self.arity}:{self.bitstring()}"


@dataclass(frozen=True)
class NpnTransform:
    """Input i of the source drives position ``permutation[i]`` of the target,
    inverted when bit i of ``polarity`` is set; the output is inverted when
    ``output_negated`` is 1."""

    permutation: tuple[int, ...]
    polarity: int = 0
    output_negated: int = 0

    def __post_init__(self):
        n = len(self.permutation)
        if sorted(self.permutation) != list(range(n)):
            raise ValueError(f"not a permutation: {self.permutation}")
        if not 0 <= self.polarity < (1 << n):
            raise ValueError("polarity mask wider than arity")
        if self.output_negated not in (0, 1):
            raise ValueError("output_negated must be 0 or 1")

    @property
    def arity(self) -> int:
        return len(self.permutation)

    @classmethod
    def identity(cls, n: int) -> "NpnTransform":
        return cls(tuple(range(n)), 0, 0)

    def inverse(self) -> "NpnTransform":
        n = self.arity
        inv = [0] * n
        for i, j in enumerate(self.permutation):
            inv[j] = i
        pol = 0
        for j in range(n):
            if (self.polarity >> inv[j]) & 1:
                pol |= 1 << j
        return NpnTransform(tuple(inv), pol, self.output_negated)

    def negated_inputs(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.arity) if (self.polarity >> i) & 1)

    def inverter_count(self) -> int:
        return bin(self.polarity).count("1") + self.output_negated


@dataclass(frozen=True)
class ThresholdFunction:
    weights: tuple[int, ...]
    threshold: int

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        if not 1 <= len(self.weights) <= MAX_ARITY:
            raise ValueError(f"arity must be in 1..{MAX_ARITY}")
        if any(w < 0 for w in self.weights):
            raise ValueError(f"weights must be non-negative: {self.weights}")
        if self.threshold < 1:
            raise ValueError(f"threshold must be a positive integer: {self.threshold}")

    @classmethod
    def parse(cls, text: str) -> "ThresholdFunction":
        """Parse ``[4,3,2,2,1;7]`` (brackets optional)."""
        body = text.strip().strip("[]()")
        ws, t = body.split(";")
        return cls(tuple(int(w) for w in ws.split(",")), int(t))

    @property
    def arity(self) -> int:
        return len(self.weights)

    def __call__(self, m) -> int:
        return evaluate(self, m)

    def truth_table(self) -> TruthTable:
        sums = minterm_matrix(self.arity) @ np.array(self.weights, dtype=np.int64)
        bits = 0
        for m in np.flatnonzero(sums >= self.threshold):
            bits |= 1 << int(m)
        return TruthTable(self.arity, bits)

    def weight_sum(self) -> int:
        return sum(self.weights) + self.threshold

    def dual(self) -> "ThresholdFunction":
        """NOT f(NOT x), also a positive threshold function."""
        return ThresholdFunction(self.weights, sum(self.weights) - self.threshold + 1)

    def __str__(self) -> str:
        return "[" + ",".join(map(str, self.weights)) + f";{self.threshold}]"


def evaluate(tf: ThresholdFunction, m) -> int:
    """1 iff sum(w_i * m_i) >= T.  ``m`` is a bit sequence or a minterm index."""
    if isinstance(m, (int, np.integer)):
        if not 0 <= m < (1 << tf.arity):
            raise ValueError(f"minterm {m} out of range for arity {tf.arity}")
        m = minterm_bits(int(m), tf.arity)
    if len(m) != tf.arity:
        raise ValueError(f"minterm has {len(m)} bits, function arity is {tf.arity}")
    return int(sum(w * int(b) for w, b in zip(tf.weights, m)) >= tf.threshold)


def chow_signature(tt: TruthTable) -> tuple[int, tuple[int, ...]]:
    """(|onset|, per-variable onset counts sorted in decreasing order)."""
    n = tt.arity
    onset = tt.onset()
    counts = [sum((m >> (n - 1 - i)) & 1 for m in onset) for i in range(n)]
    return len(onset), tuple(sorted(counts, reverse=True))


def chow_counts(tt: TruthTable) -> tuple[int, ...]:
    n = tt.arity
    onset = tt.onset()
    return tuple(sum((m >> (n - 1 - i)) & 1 for m in onset) for i in range(n))


# --- exhaustive realization tables ----------------------------------------


@lru_cache(maxsize=None)
def _realization_table(n: int) -> dict[int, tuple[tuple[int, ...], int]]:
    """tt bits -> minimal (weights, T) over nonincreasing weights in [0..8].

    Restricting to nonincreasing weights loses nothing: swapping the weights of
    two variables ordered by dominance keeps the realization valid.
    """
    mat = minterm_matrix(n)
    pow2 = np.array([1 << m for m in range(1 << n)], dtype=object)
    best: dict[int, tuple[tuple[int, ...], int]] = {}
    combos = list(itertools.combinations_with_replacement(range(WEIGHT_BOUND, -1, -1), n))
    W = np.array(combos, dtype=np.int64)
    sums = mat @ W.T  # (2^n, ncombo)
    for c, w in enumerate(combos):
        total = sum(w)
        col = sums[:, c]
        for t in range(1, total + 1):
            mask = col >= t
            bits = int(np.dot(mask.astype(object), pow2))
            cand = (w, t)
            prev = best.get(bits)
            if prev is None or _realization_order(cand) < _realization_order(prev):
                best[bits] = cand
    return best


def _realization_order(r: tuple[tuple[int, ...], int]):
    w, t = r
    # smallest sum first, then smallest threshold, then smallest leading weights
    return (sum(w) + t, t, w)


def _dominance_order(tt: TruthTable) -> list[int]:
    counts = chow_counts(tt)
    return sorted(range(tt.arity), key=lambda i: (-counts[i], i))


def _lookup_minimal(tt: TruthTable) -> Optional[ThresholdFunction]:
    order = _dominance_order(tt)
    # variable order[j] moves to position j
    perm = [0] * tt.arity
    for j, i in enumerate(order):
        perm[i] = j
    sorted_tt = tt.permute(perm)
    hit = _realization_table(tt.arity).get(sorted_tt.bits)
    if hit is None:
        return None
    w_sorted, t = hit
    weights = [0] * tt.arity
    for j, i in enumerate(order):
        weights[i] = w_sorted[j]
    tf = ThresholdFunction(tuple(weights), t)
    assert tf.truth_table() == tt
    return tf


def _perceptron(tt: TruthTable, cap: int = PERCEPTRON_CAP) -> Optional[tuple[list[int], int]]:
    n = tt.arity
    rows = [minterm_bits(m, n) for m in range(tt.size)]
    target = tt.values()
    w = [0] * n
    t = 1
    updates = 0
    while updates < cap:
        clean = True
        for m, x in enumerate(rows):
            s = sum(wi * xi for wi, xi in zip(w, x))
            if target[m] and s < t:
                w = [wi + xi for wi, xi in zip(w, x)]
                t -= 1
            elif not target[m] and s >= t:
                w = [wi - xi for wi, xi in zip(w, x)]
                t += 1
            else:
                continue
            clean = False
            updates += 1
            if updates >= cap:
                return None
        if clean:
            return w, t
    return None


def detect_threshold(tt: TruthTable) -> Optional[ThresholdFunction]:
    """Positive-form realization of ``tt`` with minimal weights, or None.

    Constants are never reported as threshold functions.
    """
    if tt.is_constant() or not tt.is_positive():
        return None
    found = _perceptron(tt)
    if found is not None:
        w, t = found
        # negative weights can only sit on non-essential variables of a positive function
        w = [max(0, wi) for wi in w]
        if t < 1 or t > sum(w):
            return None
        tf = ThresholdFunction(tuple(w), t)
        if tf.truth_table() != tt:
            return None
        return minimize_weights(tf)
    return _lookup_minimal(tt)


def minimize_weights(tf: ThresholdFunction) -> ThresholdFunction:
    """Realization of the same function with minimum sum(w) + T."""
    best = _lookup_minimal(tf.truth_table())
    if best is None:
        raise ValueError(f"{tf} has no realization within the weight bound {WEIGHT_BOUND}")
    return best


# --- canonical forms ---------------------------------------------------------


@lru_cache(maxsize=None)
def _perm_maps(n: int) -> tuple[tuple[tuple[int, ...], ...], np.ndarray]:
    """All permutations and, per permutation, the source minterm of each target minterm."""
    perms = tuple(itertools.permutations(range(n)))
    maps = np.zeros((len(perms), 1 << n), dtype=np.int64)
    for k, p in enumerate(perms):
        for y in range(1 << n):
            x = 0
            for i in range(n):
                x = (x << 1) | ((y >> (n - 1 - p[i])) & 1)
            maps[k, y] = x
    return perms, maps


@lru_cache(maxsize=None)
def _npn_maps(n: int) -> tuple[list[tuple[tuple[int, ...], int]], np.ndarray]:
    perms, pmaps = _perm_maps(n)
    keys = []
    rows = []
    for k, p in enumerate(perms):
        for pol in range(1 << n):
            # flipping source variable i flips bit (n-1-i) of the source minterm
            flip = 0
            for i in range(n):
                if (pol >> i) & 1:
                    flip |= 1 << (n - 1 - i)
            keys.append((p, pol))
            rows.append(pmaps[k] ^ flip)
    return keys, np.array(rows, dtype=np.int64)


def _lex_min(values: np.ndarray, n: int) -> tuple[int, int]:
    """Row index and lex key of the lexicographically smallest 0/1 row."""
    keys = values.astype(np.uint64) @ _lex_weights(n)
    k = int(np.argmin(keys))
    return k, int(keys[k])


def _from_lex_key(key: int, n: int) -> TruthTable:
    size = 1 << n
    bits = 0
    for m in range(size):
        if (key >> (size - 1 - m)) & 1:
            bits |= 1 << m
    return TruthTable(n, bits)


def perm_canonical(tt: TruthTable) -> tuple[TruthTable, NpnTransform]:
    """Lexicographically smallest table over input permutations."""
    perms, maps = _perm_maps(tt.arity)
    vals = tt.array()[maps]
    k, key = _lex_min(vals, tt.arity)
    t = NpnTransform(perms[k], 0, 0)
    canon = _from_lex_key(key, tt.arity)
    assert tt.transform(t) == canon
    return canon, t


def npn_canonical(tt: TruthTable) -> tuple[TruthTable, NpnTransform]:
    """Lexicographically smallest table over the full NPN orbit."""
    keys, maps = _npn_maps(tt.arity)
    base = tt.array()[maps]
    both = np.concatenate([base, 1 - base])
    k, key = _lex_min(both, tt.arity)
    out = int(k >= len(keys))
    p, pol = keys[k % len(keys)]
    t = NpnTransform(p, pol, out)
    canon = _from_lex_key(key, tt.arity)
    assert tt.transform(t) == canon
    return canon, t


# --- library -----------------------------------------------------------------


@dataclass(frozen=True)
class CanonicalClass:
    """One library class: permutation-canonical positive form plus its minimal weights.

    ``class_index`` is None for functions that are not library members.
    """

    canonical_tt: TruthTable
    class_index: Optional[int]
    chow: tuple[int, tuple[int, ...]]
    function: Optional[ThresholdFunction] = None
    npn_key: Optional[TruthTable] = field(default=None, compare=False)

    @property
    def arity(self) -> int:
        return self.canonical_tt.arity

    def label(self) -> str:
        return f"f{self.class_index}" if self.class_index is not None else "unmatched"


class Library:
    """Indexed collection of canonical classes with lookup by canonical table."""

    def __init__(self, classes: Sequence[CanonicalClass]):
        self.classes = list(classes)
        self._by_tt = {(c.canonical_tt.arity, c.canonical_tt.bits): c for c in self.classes}

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def __getitem__(self, index: int) -> CanonicalClass:
        return self.classes[index]

    def lookup(self, canonical_tt: TruthTable) -> Optional[CanonicalClass]:
        return self._by_tt.get((canonical_tt.arity, canonical_tt.bits))

    def find(self, tf: ThresholdFunction) -> Optional[CanonicalClass]:
        """Class realized by ``tf`` (any variable order), by its full-support form."""
        tt = tf.truth_table()
        sup = tt.support()
        if not sup:
            return None
        canon, _ = perm_canonical(tt.restrict(sup))
        return self.lookup(canon)

    @property
    def max_arity(self) -> int:
        return max(c.arity for c in self.classes)


def enumerate_library(max_arity: int = MAX_ARITY) -> Library:
    """All positive-form threshold functions of 1..max_arity essential variables,
    one per permutation class, indexed in (arity, canonical table) order."""
    if not 1 <= max_arity <= MAX_ARITY:
        raise ValueError(f"max_arity must be in 1..{MAX_ARITY}, got {max_arity}")
    found: dict[tuple[int, int], TruthTable] = {}
    for k in range(1, max_arity + 1):
        seen: set[int] = set()
        for bits in _realization_table(k):
            tt = TruthTable(k, bits)
            if tt.is_constant() or len(tt.support()) != k:
                continue
            canon, _ = perm_canonical(tt)
            if canon.bits in seen:
                continue
            seen.add(canon.bits)
            found[(k, canon.lex_key())] = canon
    classes = []
    for idx, key in enumerate(sorted(found)):
        canon = found[key]
        tf = _lookup_minimal(canon)
        classes.append(CanonicalClass(canon, idx, chow_signature(canon), tf))
    return Library(classes)


@dataclass(frozen=True)
class Match:
    """How a function maps onto a library cell.

    ``support`` lists the essential variables of the source function; the
    transform acts on that reduced function.
    """

    cls: CanonicalClass
    transform: NpnTransform
    support: tuple[int, ...]

    @property
    def inverters(self) -> int:
        return self.transform.inverter_count()


def match_library(tt: TruthTable, library: Library) -> Optional[Match]:
    """Cheapest NPN mapping of ``tt`` onto a library class.

    Ranking: fewest inverters, then no output inversion, then lowest index.
    """
    sup = tt.support()
    if not sup:
        return None
    f = tt.restrict(sup)
    k = f.arity
    pos = neg = 0
    for i in range(k):
        if f.is_positive_unate(i):
            pos |= 1 << i
        elif f.is_negative_unate(i):
            neg |= 1 << i
        else:
            return None
    best = None
    for out, pol in ((0, neg), (1, pos)):
        g = f.transform(NpnTransform(tuple(range(k)), pol, out))
        canon, pt = perm_canonical(g)
        cls = library.lookup(canon)
        if cls is None:
            continue
        t = NpnTransform(pt.permutation, pol, out)
        rank = (t.inverter_count(), out, cls.class_index)
        if best is None or rank < best[0]:
            best = (rank, Match(cls, t, sup))
    return None if best is None else best[1]


def npn_canonicalize(
    tt: TruthTable, library: Optional[Library] = None
) -> tuple[CanonicalClass, NpnTransform]:
    """Class of ``tt`` and the transform that carries ``tt`` onto it.

    With a library, the class is the library positive form reached by the
    cheapest inverter assignment and the transform acts on the support of
    ``tt``.  Without one (or when ``tt`` is not a library member) the class is
    the NPN-orbit minimum with no index.  ``npn_key`` is always the orbit
    minimum, which is invariant under every NPN transform.
    """
    key, key_t = npn_canonical(tt)
    if library is not None:
        m = match_library(tt, library)
        if m is not None:
            c = m.cls
            return CanonicalClass(c.canonical_tt, c.class_index, c.chow, c.function, key), m.transform
    return CanonicalClass(key, None, chow_signature(key), None, key), key_t


def write_library(library: Library, path) -> None:
    from .io import atomic_write

    lines = []
    for c in library:
        w = ",".join(str(x) for x in c.function.weights)
        lines.append(f"{c.class_index}\t{c.arity}\t{w}\t{c.function.threshold}\t{c.canonical_tt.hex()}")
    atomic_write(path, "\n".join(lines) + "\n")


def read_library(path) -> Library:
    classes = []
    with open(path) as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            idx, n, ws, t, hx = line.rstrip("\n").split("\t")
            n = int(n)
            tf = ThresholdFunction(tuple(int(x) for x in ws.split(",")), int(t))
            tt = TruthTable.from_hex(n, hx)
            if tf.truth_table() != tt:
                raise ValueError(f"library line {idx}: weights do not realize {hx}")
            classes.append(CanonicalClass(tt, int(idx), chow_signature(tt), tf))
    return Library(classes)


def all_positive_threshold_tables(n: int) -> Iterable[TruthTable]:
    """Every positive threshold table of arity n reachable with weights in [0..8]."""
    perms, maps = _perm_maps(n)
    out = set()
    for bits in _realization_table(n):
        arr = TruthTable(n, bits).array()[maps]
        for row in arr:
            out.add(int(sum(int(v) << m for m, v in enumerate(row))))
    return [TruthTable(n, b) for b in sorted(out)]
