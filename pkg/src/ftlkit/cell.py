"""Behavioral surrogate of a flash threshold logic cell.

Each side of the cell is a set of n+1 parallel branches.  Branch 0 is always
on; branch i conducts when input x_i is 1.  A branch conducts
``width * beta_factor * beta * max(0, V_G - (vt + vt_offset))`` and the cell
outputs 1 iff the left total exceeds the right total.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np

from .threshold import TruthTable, minterm_matrix

Side = Literal["left", "right"]


class MetastableError(ValueError):
    """Raised when G_L and G_R cannot be told apart."""


class Output(enum.IntEnum):
    ZERO = 0
    ONE = 1
    METASTABLE = 2


@dataclass(frozen=True)
class CellParams:
    arity: int
    vdd: float = 0.9
    gate_drive: float = 0.9
    beta: float = 1.0
    vt_floor: float = 0.02
    pulse_step: float = 0.020
    delay_d0: float = 1.0
    delay_k: float = 1.0
    # width of the always-on branch relative to an input branch
    bias_width: float = 2.0
    # |G_L - G_R| at or below this is reported as metastable
    tie_tolerance: float = 1e-9

    def __post_init__(self):
        if not 1 <= self.arity <= 5:
            raise ValueError(f"arity must be in 1..5, got {self.arity}")
        if not 0 < self.vt_floor < self.vdd:
            raise ValueError("vt_floor must lie in (0, vdd)")
        if self.pulse_step <= 0:
            raise ValueError("pulse_step must be positive")
        if self.gate_drive > self.vdd:
            raise ValueError("gate_drive cannot exceed vdd")
        if self.beta <= 0 or self.bias_width <= 0:
            raise ValueError("beta and bias_width must be positive")

    @property
    def vt_min(self) -> float:
        return self.vt_floor

    @property
    def vt_max(self) -> float:
        return self.vdd - self.vt_floor

    @property
    def transistor_count(self) -> int:
        return 2 * self.arity + 2

    def widths(self) -> np.ndarray:
        w = np.ones(self.arity + 1)
        w[0] = self.bias_width
        return w

    def with_arity(self, n: int) -> "CellParams":
        from dataclasses import replace

        return replace(self, arity=n)


@dataclass(frozen=True)
class VtAssignment:
    """Threshold voltages; position 0 on each side is the always-on branch.

    Flat transistor numbering is left 0..n followed by right 0..n.
    """

    left: tuple[float, ...]
    right: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(float(v) for v in self.left))
        object.__setattr__(self, "right", tuple(float(v) for v in self.right))
        if len(self.left) != len(self.right) or len(self.left) < 2:
            raise ValueError("left and right need the same length n+1 >= 2")

    @classmethod
    def uniform(cls, n: int, value: float) -> "VtAssignment":
        return cls((value,) * (n + 1), (value,) * (n + 1))

    @classmethod
    def from_vector(cls, values: Sequence[float]) -> "VtAssignment":
        if len(values) % 2:
            raise ValueError("vector length must be even (2n+2)")
        half = len(values) // 2
        return cls(tuple(values[:half]), tuple(values[half:]))

    @property
    def arity(self) -> int:
        return len(self.left) - 1

    def vector(self) -> tuple[float, ...]:
        return self.left + self.right

    def in_range(self, params: CellParams, tol: float = 1e-12) -> bool:
        return all(params.vt_min - tol <= v <= params.vt_max + tol for v in self.vector())

    def norm_sq(self) -> float:
        return sum(v * v for v in self.vector())


@dataclass(frozen=True, eq=False)
class CellInstance:
    params: CellParams
    vt_offsets: tuple[float, ...]
    beta_factors: tuple[float, ...]
    seed: int = 0
    sigma_vt: float = 0.0
    sigma_beta: float = 0.0

    def __post_init__(self):
        k = self.params.transistor_count
        if len(self.vt_offsets) != k or len(self.beta_factors) != k:
            raise ValueError(f"need {k} offsets and beta factors")
        if any(b <= 0 for b in self.beta_factors):
            raise ValueError("beta factors must be positive")

    @property
    def arity(self) -> int:
        return self.params.arity

    @cached_property
    def _gain(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-branch slope (width * beta_factor * beta) for left and right."""
        n1 = self.arity + 1
        bf = np.asarray(self.beta_factors)
        w = self.params.widths() * self.params.beta
        return w * bf[:n1], w * bf[n1:]

    @cached_property
    def _offset(self) -> tuple[np.ndarray, np.ndarray]:
        n1 = self.arity + 1
        off = np.asarray(self.vt_offsets)
        return off[:n1], off[n1:]

    def gains(self) -> tuple[list[float], list[float]]:
        gl, gr = self._gain
        return gl.tolist(), gr.tolist()

    def overdrive_limits(self) -> tuple[list[float], list[float]]:
        """V_G - offset per branch: conductance is gain * max(0, limit - vt)."""
        ol, orr = self._offset
        vg = self.params.gate_drive
        return (vg - ol).tolist(), (vg - orr).tolist()

    def same_draws(self, other: "CellInstance") -> bool:
        return (
            self.params == other.params
            and self.vt_offsets == other.vt_offsets
            and self.beta_factors == other.beta_factors
        )


def nominal_instance(params: CellParams) -> CellInstance:
    k = params.transistor_count
    return CellInstance(params, (0.0,) * k, (1.0,) * k, 0, 0.0, 0.0)


def sample_instance(params: CellParams, sigma_vt: float, sigma_beta: float, seed: int) -> CellInstance:
    """Independent Gaussian draws per transistor, reproducible from ``seed``."""
    if sigma_vt < 0 or sigma_beta < 0:
        raise ValueError("standard deviations must be non-negative")
    rng = np.random.default_rng(seed)
    k = params.transistor_count
    offsets = rng.normal(0.0, sigma_vt, k) if sigma_vt > 0 else np.zeros(k)
    factors = rng.normal(1.0, sigma_beta, k) if sigma_beta > 0 else np.ones(k)
    factors = np.maximum(factors, 1e-6)
    return CellInstance(params, tuple(offsets.tolist()), tuple(factors.tolist()), int(seed), sigma_vt, sigma_beta)


def instance_seeds(seed: int, count: int) -> list[int]:
    """Per-instance 64-bit seeds derived from one population seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)]


def sample_population(params: CellParams, sigma_vt: float, sigma_beta: float, seed: int, count: int) -> list[CellInstance]:
    return [sample_instance(params, sigma_vt, sigma_beta, s) for s in instance_seeds(seed, count)]


def branch_conductance(inst: CellInstance, side: Side, index: int, active: int, vt: float) -> float:
    n = inst.arity
    if not 0 <= index <= n:
        raise IndexError(f"branch index {index} out of range 0..{n}")
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if index == 0:
        active = 1
    if not active:
        return 0.0
    k = index if side == "left" else n + 1 + index
    width = inst.params.bias_width if index == 0 else 1.0
    overdrive = inst.params.gate_drive - (vt + inst.vt_offsets[k])
    return width * inst.beta_factors[k] * inst.params.beta * max(0.0, overdrive)


@lru_cache(maxsize=None)
def activity_matrix(n: int) -> np.ndarray:
    """(2^n, n+1) matrix of active branches per minterm; column 0 is always 1."""
    a = np.ones(((1 << n), n + 1))
    a[:, 1:] = minterm_matrix(n)
    return a


def side_conductances(inst: CellInstance, vt: VtAssignment) -> tuple[np.ndarray, np.ndarray]:
    """Per-branch conductances of both sides when active."""
    if vt.arity != inst.arity:
        raise ValueError("assignment arity does not match instance")
    gl, gr = inst._gain
    ol, orr = inst._offset
    vg = inst.params.gate_drive
    cl = gl * np.maximum(0.0, vg - (np.asarray(vt.left) + ol))
    cr = gr * np.maximum(0.0, vg - (np.asarray(vt.right) + orr))
    return cl, cr


def _check_minterm(inst: CellInstance, m) -> int:
    n = inst.arity
    if isinstance(m, (int, np.integer)):
        if not 0 <= m < (1 << n):
            raise ValueError(f"minterm {m} out of range")
        return int(m)
    if len(m) != n:
        raise ValueError(f"minterm has {len(m)} bits, cell arity is {n}")
    out = 0
    for b in m:
        out = (out << 1) | (1 if b else 0)
    return out


def conductance_pair(inst: CellInstance, vt: VtAssignment, m) -> tuple[float, float]:
    m = _check_minterm(inst, m)
    cl, cr = side_conductances(inst, vt)
    act = activity_matrix(inst.arity)[m]
    return float(act @ cl), float(act @ cr)


def _classify(diff: float, tol: float) -> Output:
    if diff > tol:
        return Output.ONE
    if diff < -tol:
        return Output.ZERO
    return Output.METASTABLE


def evaluate_cell(inst: CellInstance, vt: VtAssignment, m) -> Output:
    g_left, g_right = conductance_pair(inst, vt, m)
    return _classify(g_left - g_right, inst.params.tie_tolerance)


def truth_table_of(inst: CellInstance, vt: VtAssignment) -> TruthTable:
    cl, cr = side_conductances(inst, vt)
    diff = activity_matrix(inst.arity) @ (cl - cr)
    tol = inst.params.tie_tolerance
    if np.any(np.abs(diff) <= tol):
        bad = int(np.flatnonzero(np.abs(diff) <= tol)[0])
        raise MetastableError(f"minterm {bad} is metastable")
    bits = 0
    for m in np.flatnonzero(diff > tol):
        bits |= 1 << int(m)
    return TruthTable(inst.arity, bits)


@dataclass(frozen=True)
class MarginReport:
    g_left: tuple[float, ...]
    g_right: tuple[float, ...]
    margin: tuple[float, ...]
    min_onset_margin: float
    min_offset_margin: float

    @property
    def separation(self) -> float:
        """Gap between the closest onset and offset points."""
        return self.min_onset_margin + self.min_offset_margin

    @property
    def worst_margin(self) -> float:
        return min(self.min_onset_margin, self.min_offset_margin)


def margins(inst: CellInstance, vt: VtAssignment, tt: TruthTable) -> MarginReport:
    if tt.arity != inst.arity:
        raise ValueError("truth table arity does not match instance")
    cl, cr = side_conductances(inst, vt)
    act = activity_matrix(inst.arity)
    gl = act @ cl
    gr = act @ cr
    diff = gl - gr
    on = [diff[m] for m in range(tt.size) if tt[m]]
    off = [-diff[m] for m in range(tt.size) if not tt[m]]
    return MarginReport(
        tuple(gl.tolist()),
        tuple(gr.tolist()),
        tuple(diff.tolist()),
        float(min(on)) if on else float("inf"),
        float(min(off)) if off else float("inf"),
    )


def apply_drift(vt: VtAssignment, drift_mv: float) -> VtAssignment:
    """Lower every stored VT by ``drift_mv`` millivolts, never below 0 V."""
    if drift_mv < 0:
        raise ValueError("drift must be non-negative")
    d = drift_mv / 1000.0
    return VtAssignment(
        tuple(max(0.0, v - d) for v in vt.left),
        tuple(max(0.0, v - d) for v in vt.right),
    )


def delay_from_margin(params: CellParams, margin: float) -> float:
    if abs(margin) <= params.tie_tolerance:
        raise MetastableError("delay undefined for a metastable evaluation")
    return params.delay_d0 + params.delay_k / abs(margin)


def delay_estimate(inst: CellInstance, vt: VtAssignment, m) -> float:
    g_left, g_right = conductance_pair(inst, vt, m)
    return delay_from_margin(inst.params, g_left - g_right)


def critical_minterm(inst: CellInstance, vt: VtAssignment) -> int:
    """Minterm with the smallest |G_L - G_R|, i.e. the slowest evaluation."""
    cl, cr = side_conductances(inst, vt)
    diff = activity_matrix(inst.arity) @ (cl - cr)
    return int(np.argmin(np.abs(diff)))


def critical_delay(inst: CellInstance, vt: VtAssignment) -> float:
    return delay_estimate(inst, vt, critical_minterm(inst, vt))


def realized_bits(instances: Sequence[CellInstance], vt: VtAssignment) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized evaluation of one assignment across many instances.

    Returns (truth-table ints, metastable flags), one per instance.
    """
    if not instances:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=bool)
    p = instances[0].params
    n = p.arity
    n1 = n + 1
    off = np.array([i.vt_offsets for i in instances])
    bf = np.array([i.beta_factors for i in instances])
    width = np.concatenate([p.widths(), p.widths()]) * p.beta
    v = np.asarray(vt.vector())
    cond = width * bf * np.maximum(0.0, p.gate_drive - (v + off))
    diff = (cond[:, :n1] - cond[:, n1:]) @ activity_matrix(n).T
    meta = np.any(np.abs(diff) <= p.tie_tolerance, axis=1)
    ones = diff > p.tie_tolerance
    weights = (1 << np.arange(1 << n, dtype=np.int64))
    return ones.astype(np.int64) @ weights, meta
