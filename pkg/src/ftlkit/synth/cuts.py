"""k-feasible cuts of flip-flop data inputs and their cone functions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..threshold import TruthTable
from .netlist import Netlist, NetlistError, eval_table

DEFAULT_CUT_CAP = 64


@dataclass(frozen=True)
class Cut:
    """Cut of the data input of register ``root``.

    ``gates`` are the gates between the leaves and the root net;
    ``absorbed_gates`` is the subset whose every fanout stays inside the cone,
    i.e. the gates that disappear when the cone is absorbed.
    """

    root: str
    net: str
    leaves: tuple[str, ...]
    gates: frozenset[str]
    absorbed_gates: frozenset[str]

    @property
    def is_trivial(self) -> bool:
        return self.leaves == (self.net,)


def _cone_gates(nl: Netlist, drivers, net: str, leaves: frozenset[str]) -> frozenset[str]:
    seen: set[str] = set()
    stack = [net]
    visited_nets: set[str] = set()
    while stack:
        n = stack.pop()
        if n in leaves or n in visited_nets:
            continue
        visited_nets.add(n)
        kind, gid = drivers[n]
        if kind != "gate":
            continue
        seen.add(gid)
        stack.extend(nl.gates[gid].inputs)
    return frozenset(seen)


def _absorbable(nl: Netlist, fanouts, gates: frozenset[str], root: str) -> frozenset[str]:
    out = set()
    for gid in gates:
        consumers = fanouts.get(nl.gates[gid].output, [])
        if all((k == "gate" and c in gates) or (k == "dff" and c == root) for k, c in consumers):
            out.add(gid)
    # a gate feeding a kept gate is still needed
    changed = True
    while changed:
        changed = False
        for gid in list(out):
            for k, c in fanouts.get(nl.gates[gid].output, []):
                if k == "gate" and c not in out:
                    out.discard(gid)
                    changed = True
                    break
    return frozenset(out)


def enumerate_cuts(nl: Netlist, dff: str, k: int = 5, cap: int = DEFAULT_CUT_CAP) -> list[Cut]:
    """All k-feasible cuts of the data input of ``dff`` (per-net cap ``cap``).

    Cuts are merged bottom-up; at each net the ``cap`` cuts with the most cone
    gates survive, and the trivial cut of the net is always kept.
    """
    if not 1 <= k <= 5:
        raise ValueError("k must be within 1..5")
    if dff not in nl.dffs:
        raise NetlistError(f"unknown register {dff!r}")
    drivers = nl.drivers()
    fanouts = nl.fanouts()
    memo: dict[str, list[frozenset[str]]] = {}

    def cuts_of(net: str) -> list[frozenset[str]]:
        if net in memo:
            return memo[net]
        kind, gid = drivers[net]
        trivial = frozenset([net])
        if kind != "gate":
            memo[net] = [trivial]
            return memo[net]
        g = nl.gates[gid]
        merged: set[frozenset[str]] = {frozenset()}
        for inp in g.inputs:
            nxt = set()
            for a in merged:
                for b in cuts_of(inp):
                    u = a | b
                    if len(u) <= k:
                        nxt.add(u)
            merged = nxt
        ranked = sorted(
            merged - {trivial},
            key=lambda c: (-len(_cone_gates(nl, drivers, net, c)), len(c), sorted(c)),
        )
        memo[net] = [trivial] + ranked[: cap - 1]
        return memo[net]

    net = nl.dffs[dff].d
    out = []
    for leaves in cuts_of(net):
        gates = _cone_gates(nl, drivers, net, leaves)
        out.append(Cut(dff, net, tuple(sorted(leaves)), gates, _absorbable(nl, fanouts, gates, dff)))
    return out


def is_valid_cut(nl: Netlist, net: str, leaves) -> bool:
    """Every path from ``net`` back to a register or primary input crosses a leaf."""
    drivers = nl.drivers()
    leaves = set(leaves)
    stack = [net]
    seen = set()
    while stack:
        n = stack.pop()
        if n in leaves or n in seen:
            continue
        seen.add(n)
        kind, gid = drivers[n]
        if kind != "gate":
            return False
        stack.extend(nl.gates[gid].inputs)
    return True


def cone_function(nl: Netlist, cut: Cut) -> TruthTable:
    """Truth table of the cut's root net over its leaves (first leaf = MSB)."""
    n = len(cut.leaves)
    if n == 0:
        raise ValueError("cone without leaves is a constant")
    size = 1 << n
    mask = (1 << size) - 1
    vals: dict[str, int] = {}
    for j, leaf in enumerate(cut.leaves):
        # lane m carries minterm m
        v = 0
        for m in range(size):
            if (m >> (n - 1 - j)) & 1:
                v |= 1 << m
        vals[leaf] = v
    drivers = nl.drivers()

    def value(net: str) -> int:
        if net in vals:
            return vals[net]
        kind, gid = drivers[net]
        if kind != "gate":
            raise ValueError(f"net {net!r} escapes the cut")
        g = nl.gates[gid]
        vals[net] = eval_table(g.bits, [value(i) for i in g.inputs], mask)
        return vals[net]

    return TruthTable(n, value(cut.net))
