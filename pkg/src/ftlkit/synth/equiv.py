"""Cycle-accurate co-simulation of two netlists with the same ports."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .netlist import Netlist

EXHAUSTIVE_PI_LIMIT = 16
STATE_PAIR_LIMIT = 4096


@dataclass(frozen=True)
class Counterexample:
    cycle: int
    inputs: dict[str, int]
    output: str
    expected: int
    actual: int
    prefix: tuple[dict[str, int], ...] = ()


@dataclass(frozen=True)
class EquivalenceResult:
    passed: bool
    mode: str
    cycles: int
    counterexample: Optional[Counterexample] = None

    def __bool__(self) -> bool:
        return self.passed


def _check_ports(a: Netlist, b: Netlist) -> None:
    if sorted(a.inputs) != sorted(b.inputs) or sorted(a.outputs) != sorted(b.outputs):
        raise ValueError("netlists must have the same primary inputs and outputs")


def _step(nl: Netlist, order, state: dict[str, int], pis: dict[str, int], mask: int):
    vals = nl.evaluate({**pis, **state}, mask, order)
    return vals, nl.next_state(vals, mask)


def verify_equivalence(
    before: Netlist,
    after: Netlist,
    vector_count: int = 256,
    seed: int = 0,
    depth: int = 32,
) -> EquivalenceResult:
    """Exhaustive over reachable state pairs when there are at most 16 PI bits,
    otherwise ``vector_count`` random sequences of ``depth`` cycles."""
    _check_ports(before, after)
    if len(before.inputs) <= EXHAUSTIVE_PI_LIMIT:
        res = _exhaustive(before, after)
        if res is not None:
            return res
    return _random(before, after, vector_count, seed, depth)


def _exhaustive(a: Netlist, b: Netlist) -> Optional[EquivalenceResult]:
    pis = list(a.inputs)
    n = len(pis)
    lanes = 1 << n
    mask = (1 << lanes) - 1
    pattern = {}
    for j, p in enumerate(pis):
        v = 0
        for m in range(lanes):
            if (m >> (n - 1 - j)) & 1:
                v |= 1 << m
        pattern[p] = v
    order_a, order_b = a.topo_gates(), b.topo_gates()
    qa = sorted(a.reset_state(1))
    qb = sorted(b.reset_state(1))

    def expand(bits: tuple[int, ...], names) -> dict[str, int]:
        return {q: (mask if v else 0) for q, v in zip(names, bits)}

    start = (tuple(a.reset_state(1)[q] for q in qa), tuple(b.reset_state(1)[q] for q in qb))
    frontier = [(start, ())]
    seen = {start}
    cycles = 0
    while frontier:
        nxt_frontier = []
        for (sa, sb), path in frontier:
            va, na = _step(a, order_a, expand(sa, qa), pattern, mask)
            vb, nb = _step(b, order_b, expand(sb, qb), pattern, mask)
            cycles += lanes
            for po in sorted(a.outputs):
                diff = (va[po] ^ vb[po]) & mask
                if diff:
                    lane = (diff & -diff).bit_length() - 1
                    vec = {p: (lane >> (n - 1 - j)) & 1 for j, p in enumerate(pis)}
                    cex = Counterexample(len(path), vec, po, (va[po] >> lane) & 1, (vb[po] >> lane) & 1, path)
                    return EquivalenceResult(False, "exhaustive", cycles, cex)
            for lane in range(lanes):
                pair = (
                    tuple((na[q] >> lane) & 1 for q in qa),
                    tuple((nb[q] >> lane) & 1 for q in qb),
                )
                if pair not in seen:
                    seen.add(pair)
                    if len(seen) > STATE_PAIR_LIMIT:
                        return None
                    vec = {p: (lane >> (n - 1 - j)) & 1 for j, p in enumerate(pis)}
                    nxt_frontier.append((pair, path + (vec,)))
        frontier = nxt_frontier
    return EquivalenceResult(True, "exhaustive", cycles)


def _random(a: Netlist, b: Netlist, vector_count: int, seed: int, depth: int) -> EquivalenceResult:
    rng = random.Random(seed)
    lanes = max(1, vector_count)
    mask = (1 << lanes) - 1
    order_a, order_b = a.topo_gates(), b.topo_gates()
    sa, sb = a.reset_state(mask), b.reset_state(mask)
    history: list[dict[str, int]] = []
    for cycle in range(depth):
        pis = {p: rng.getrandbits(lanes) for p in a.inputs}
        history.append(pis)
        va, sa = _step(a, order_a, sa, pis, mask)
        vb, sb = _step(b, order_b, sb, pis, mask)
        for po in sorted(a.outputs):
            diff = (va[po] ^ vb[po]) & mask
            if diff:
                lane = (diff & -diff).bit_length() - 1
                seq = tuple({p: (h[p] >> lane) & 1 for p in a.inputs} for h in history)
                cex = Counterexample(cycle, seq[-1], po, (va[po] >> lane) & 1, (vb[po] >> lane) & 1, seq[:-1])
                return EquivalenceResult(False, "random", (cycle + 1) * lanes, cex)
    return EquivalenceResult(True, "random", depth * lanes)
