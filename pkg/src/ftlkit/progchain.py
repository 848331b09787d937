"""Chip-level programming: select-register scan chain, transistor decoder,
high-voltage pulse planning and execution under mode-signal rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Mapping, Optional, Sequence

from .cell import CellParams, VtAssignment

Polarity = Literal["program", "erase"]


class ProtocolViolation(RuntimeError):
    """A pulse was attempted under an illegal mode-signal combination."""


@dataclass(frozen=True)
class ChainState:
    """Select register Q_0..Q_N; cell i is selected when Q_{i-1} = Q_i = 0."""

    bits: tuple[int, ...]
    pclk_count: int = 0

    @property
    def cell_count(self) -> int:
        return len(self.bits) - 1

    def selected_cells(self) -> list[int]:
        # cell i sits between Q_i and Q_{i+1} in 0-based cell numbering
        return [i for i in range(self.cell_count) if self.bits[i] == 0 and self.bits[i + 1] == 0]

    def selected(self) -> Optional[int]:
        sel = self.selected_cells()
        if len(sel) > 1:
            raise AssertionError(f"multiple cells selected: {sel}")
        return sel[0] if sel else None

    def clock(self, data_in: int) -> "ChainState":
        """One PCLK edge: shift ``data_in`` into Q_0."""
        return ChainState((data_in,) + self.bits[:-1], self.pclk_count + 1)


def init_chain(n_cells: int) -> ChainState:
    if n_cells < 1:
        raise ValueError("chain needs at least one cell")
    return ChainState((1,) * (n_cells + 1), 0)


def select_cell(chain: ChainState, i: int) -> ChainState:
    """Shift the two-zero token until it sits on cell ``i``.

    A token already upstream of ``i`` is reused; otherwise the register is
    flushed with ones and a fresh token is shifted in.
    """
    if not 0 <= i < chain.cell_count:
        raise IndexError(f"cell {i} out of range 0..{chain.cell_count - 1}")
    current = chain.selected()
    if current is None or current > i:
        # flush any partial token, then shift in 0,0
        state = chain
        while any(b == 0 for b in state.bits):
            state = state.clock(1)
        state = state.clock(0).clock(0)
        current = 0
    else:
        state = chain
    while current < i:
        state = state.clock(1)
        current += 1
    assert state.selected() == i
    return state


def address_width(n: int) -> int:
    return max(1, math.ceil(math.log2(2 * n + 2)))


def decode(address: int, n: int) -> tuple[int, ...]:
    """One-hot select line among the 2n+2 transistors of a cell."""
    lines = 2 * n + 2
    if not 0 <= address < lines:
        raise ValueError(f"address {address} out of range for {lines} lines")
    return tuple(int(k == address) for k in range(lines))


def decode_bits(bits: Sequence[int], n: int) -> tuple[int, ...]:
    if len(bits) != address_width(n):
        raise ValueError(f"expected {address_width(n)} address bits")
    address = 0
    for b in bits:
        address = (address << 1) | (1 if b else 0)
    return decode(address, n)


@dataclass(frozen=True)
class ModeSignals:
    prog: int
    erase: int
    clk: int
    te: int
    hiv: float

    def mode(self) -> str:
        for name, tpl in LEGAL_MODES.items():
            if tpl == self:
                return name
        raise ProtocolViolation(f"illegal mode tuple {self}: {self._offender()}")

    def _offender(self) -> str:
        # report the first signal that differs from the closest legal tuple
        best = None
        for name, tpl in LEGAL_MODES.items():
            diffs = [f for f in ("prog", "erase", "clk", "te", "hiv") if getattr(self, f) != getattr(tpl, f)]
            if best is None or len(diffs) < len(best[1]):
                best = (name, diffs)
        name, diffs = best
        sig = diffs[0].upper()
        return f"signal {sig}={getattr(self, diffs[0])} is not allowed in {name} mode"


LEGAL_MODES: dict[str, ModeSignals] = {
    "regular": ModeSignals(prog=0, erase=0, clk=1, te=0, hiv=0.0),
    "program": ModeSignals(prog=1, erase=0, clk=0, te=0, hiv=20.0),
    "erase": ModeSignals(prog=0, erase=1, clk=0, te=0, hiv=-20.0),
    "scan_test": ModeSignals(prog=0, erase=0, clk=1, te=1, hiv=0.0),
}


def check_mode(signals: ModeSignals) -> str:
    return signals.mode()


@dataclass(frozen=True)
class PulseCommand:
    cell_index: int
    transistor_index: int
    polarity: Polarity
    count: int
    arity: int = 5

    def __post_init__(self):
        if not 0 <= self.transistor_index < 2 * self.arity + 2:
            raise ValueError(f"transistor {self.transistor_index} out of range for arity {self.arity}")
        if self.count < 1:
            raise ValueError("pulse count must be >= 1")
        if self.polarity not in ("program", "erase"):
            raise ValueError(f"unknown polarity {self.polarity!r}")


def pulses_for(target: float, current: float, step: float, tol: float = 1e-9) -> tuple[Polarity, int]:
    """Pulses needed to move ``current`` to ``target``: ceil(|delta| / step)."""
    if step <= 0:
        raise ValueError("step must be positive")
    delta = target - current
    # absorb float noise so that exact multiples do not round up
    count = max(0, math.ceil(abs(delta) / step - tol))
    return ("program" if delta >= 0 else "erase"), count


@dataclass(frozen=True)
class ProgramPlan:
    commands: tuple[PulseCommand, ...]
    pulse_duration_us: float = 1.0
    erase_cells: tuple[int, ...] = ()

    @property
    def total_pulses(self) -> int:
        return sum(c.count for c in self.commands)

    @property
    def estimated_time_us(self) -> float:
        return self.total_pulses * self.pulse_duration_us

    def to_csv(self, config_hash: Optional[str] = None) -> str:
        from .io import header_line

        lines = [header_line(config_hash) + "cell,transistor,polarity,count"]
        for c in self.commands:
            lines.append(f"{c.cell_index},{c.transistor_index},{c.polarity},{c.count}")
        lines.append("total_pulses,total_time_us")
        lines.append(f"{self.total_pulses},{self.estimated_time_us:g}")
        return "\n".join(lines) + "\n"


def plan_program(
    chain: ChainState,
    assignments: Mapping[int, VtAssignment],
    current: Mapping[int, VtAssignment],
    params: CellParams,
    pulse_duration_us: float = 1.0,
    bidirectional: bool = True,
) -> ProgramPlan:
    """Single chain-order pass emitting pulses per transistor.

    With ``bidirectional`` false, a cell needing any downward move is erased
    to the baseline first and then programmed upward only.
    """
    missing = set(assignments) ^ set(current)
    if missing:
        raise ValueError(f"cells missing from one of the maps: {sorted(missing)}")
    commands: list[PulseCommand] = []
    erased: list[int] = []
    for cell in sorted(assignments):
        if not 0 <= cell < chain.cell_count:
            raise IndexError(f"cell {cell} not on the chain")
        target = assignments[cell].vector()
        now = list(current[cell].vector())
        n = assignments[cell].arity
        if not bidirectional and any(t < c - 1e-9 for t, c in zip(target, now)):
            erased.append(cell)
            now = [params.vt_min] * len(now)
        for k, (t, c) in enumerate(zip(target, now)):
            pol, count = pulses_for(t, c, params.pulse_step)
            if count:
                commands.append(PulseCommand(cell, k, pol, count, n))
    return ProgramPlan(tuple(commands), pulse_duration_us, tuple(erased))


def mode_trace_for(plan: ProgramPlan) -> list[ModeSignals]:
    """Legal signal sequence that carries out ``plan``: one entry per erase and per pulse."""
    trace = [LEGAL_MODES["erase"] for _ in plan.erase_cells]
    for c in plan.commands:
        mode = LEGAL_MODES["program"] if c.polarity == "program" else LEGAL_MODES["erase"]
        trace.extend([mode] * c.count)
    return trace


def execute_plan(
    plan: ProgramPlan,
    cells: Mapping[int, VtAssignment],
    mode_trace: Sequence[ModeSignals],
    params: CellParams,
    chain: Optional[ChainState] = None,
) -> tuple[dict[int, VtAssignment], ChainState]:
    """Apply the plan; each entry of ``mode_trace`` drives one erase or pulse.

    Erase pulses under the erase tuple lower one transistor by a step when
    issued per transistor, and whole-cell erases reset a cell to the baseline.
    """
    vecs = {c: list(v.vector()) for c, v in cells.items()}
    if chain is None:
        chain = init_chain(max(cells) + 1 if cells else 1)
    trace = iter(mode_trace)

    def next_mode(expected: str) -> None:
        try:
            sig = next(trace)
        except StopIteration:
            raise ProtocolViolation("mode trace ended before the plan finished") from None
        got = sig.mode()
        if got != expected:
            raise ProtocolViolation(f"expected {expected} mode, got {got} (HiV={sig.hiv})")

    for cell in plan.erase_cells:
        chain = select_cell(chain, cell)
        next_mode("erase")
        vecs[cell] = [params.vt_min] * len(vecs[cell])
    for cmd in plan.commands:
        if chain.selected() != cmd.cell_index:
            chain = select_cell(chain, cmd.cell_index)
        decode(cmd.transistor_index, cmd.arity)
        v = vecs[cmd.cell_index]
        for _ in range(cmd.count):
            if cmd.polarity == "program":
                next_mode("program")
                v[cmd.transistor_index] = min(params.vt_max, v[cmd.transistor_index] + params.pulse_step)
            else:
                next_mode("erase")
                v[cmd.transistor_index] = max(params.vt_min, v[cmd.transistor_index] - params.pulse_step)
    return {c: VtAssignment.from_vector(v) for c, v in vecs.items()}, chain
