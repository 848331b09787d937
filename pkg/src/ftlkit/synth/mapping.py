"""Replacement of (cone + flip-flop) pairs by threshold cells."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional

from ..threshold import Library, Match, NpnTransform, TruthTable, match_library
from .cuts import Cut, cone_function, enumerate_cuts
from .netlist import FtlCell, Gate, Netlist
from .ppa import TechTable

Policy = Literal["benefit", "exhaustive"]


@dataclass(frozen=True)
class FtlCellRef:
    """One placed threshold cell.

    ``binding[j]`` is the leaf net driving cell input j, ``inverted[j]``
    marks an inverter on that input.
    """

    cell_id: str
    dff_id: str
    class_index: int
    transform: NpnTransform
    leaves: tuple[str, ...]
    binding: tuple[str, ...]
    inverted: tuple[bool, ...]
    output_inverted: bool
    absorbed_gates: frozenset[str]
    area: Fraction = Fraction("15.6")

    @property
    def inverters(self) -> int:
        return sum(self.inverted) + int(self.output_inverted)


@dataclass(frozen=True)
class Candidate:
    cut: Cut
    match: Match
    table: TruthTable

    def rank(self):
        return (-len(self.cut.absorbed_gates), self.match.inverters, self.match.cls.class_index)


def best_candidate(nl: Netlist, dff: str, library: Library, k: int = 5) -> Optional[Candidate]:
    """Matching cut ranked by absorbed gates, then inverters, then class index."""
    best = None
    for cut in enumerate_cuts(nl, dff, k):
        if not cut.leaves:
            continue
        tt = cone_function(nl, cut)
        m = match_library(tt, library)
        if m is None:
            continue
        cand = Candidate(cut, m, tt)
        if best is None or cand.rank() < best.rank():
            best = cand
    return best


def _binding(cand: Candidate) -> tuple[tuple[str, ...], tuple[bool, ...]]:
    support_leaves = [cand.cut.leaves[i] for i in cand.match.support]
    t = cand.match.transform
    k = len(support_leaves)
    nets = [""] * k
    inv = [False] * k
    for i, leaf in enumerate(support_leaves):
        j = t.permutation[i]
        nets[j] = leaf
        inv[j] = bool((t.polarity >> i) & 1)
    return tuple(nets), tuple(inv)


def area_change(cand: Candidate, nl: Netlist, tech: TechTable) -> Fraction:
    """Area after minus area before for a single replacement."""
    _, inv = _binding(cand)
    removed = sum((tech.cost(nl.gates[g].kind).area for g in cand.cut.absorbed_gates), Fraction(0))
    removed += tech.cost("dff").area
    added = tech.ftl_cost().area + tech.cost("inv").area * (sum(inv) + cand.match.transform.output_negated)
    return added - removed


def map_to_ftl(
    nl: Netlist,
    library: Library,
    policy: Policy = "benefit",
    tech: Optional[TechTable] = None,
    k: int = 5,
) -> tuple[Netlist, list[FtlCellRef]]:
    """Rewrite matchable (cone + DFF) pairs into FTL cells.

    ``exhaustive`` replaces every matchable DFF; ``benefit`` only those whose
    replacement lowers the area.  Inverters needed by the chosen transform
    are inserted and shared per net.
    """
    if policy not in ("benefit", "exhaustive"):
        raise ValueError(f"unknown policy {policy!r}")
    tech = tech or TechTable.bundled()
    out = nl.copy()
    refs: list[FtlCellRef] = []
    inverter_of: dict[str, str] = {}
    for dff_id in sorted(nl.dffs, key=_natural):
        cand = best_candidate(out, dff_id, library, k)
        if cand is None:
            continue
        if policy == "benefit" and area_change(cand, out, tech) >= 0:
            continue
        refs.append(_apply(out, cand, inverter_of))
    return out, refs


def _apply(nl: Netlist, cand: Candidate, inverter_of: dict[str, str]) -> FtlCellRef:
    dff = nl.dffs.pop(cand.cut.root)
    for gid in cand.cut.absorbed_gates:
        del nl.gates[gid]
    # drop cached inverters that were absorbed
    for net in [n for n, g in inverter_of.items() if g not in nl.gates]:
        del inverter_of[net]
    nets, inv = _binding(cand)
    pins = []
    for net, flag in zip(nets, inv):
        pins.append(_inverted_net(nl, net, inverter_of) if flag else net)
    t = cand.match.transform
    cell_id = nl.fresh_id("ftl")
    if t.output_negated:
        raw = nl.fresh_net(f"{dff.q}_ftl")
        gid = nl.fresh_id("inv")
        nl.gates[gid] = Gate(gid, (raw,), dff.q, 0b01)
        q = raw
    else:
        q = dff.q
    cls = cand.match.cls
    nl.ftls[cell_id] = FtlCell(cell_id, cls.class_index, cls.function, tuple(pins), q, dff.init ^ t.output_negated)
    return FtlCellRef(
        cell_id,
        dff.id,
        cls.class_index,
        t,
        cand.cut.leaves,
        nets,
        inv,
        bool(t.output_negated),
        cand.cut.absorbed_gates,
    )


def _inverted_net(nl: Netlist, net: str, inverter_of: dict[str, str]) -> str:
    if net in inverter_of:
        return nl.gates[inverter_of[net]].output
    out = nl.fresh_net(f"{net}_n")
    gid = nl.fresh_id("inv")
    nl.gates[gid] = Gate(gid, (net,), out, 0b01)
    inverter_of[net] = gid
    return out


def inverters_added(refs: list[FtlCellRef], before: Netlist, after: Netlist) -> int:
    """Inverter gates present after the rewrite that did not exist before."""
    return sum(1 for gid, g in after.gates.items() if gid not in before.gates and g.kind == "inv")


def check_matching(nl_before: Netlist, ref: FtlCellRef, library: Library) -> bool:
    """Rebuild the cone function from the placed cell and compare with the original cone."""
    cut = next(c for c in enumerate_cuts(nl_before, ref.dff_id) if c.leaves == ref.leaves)
    tt = cone_function(nl_before, cut)
    fn = library[ref.class_index].function
    n = len(ref.leaves)
    pos = {leaf: i for i, leaf in enumerate(ref.leaves)}
    for m in range(1 << n):
        x = [(m >> (n - 1 - i)) & 1 for i in range(n)]
        y = [x[pos[net]] ^ int(flag) for net, flag in zip(ref.binding, ref.inverted)]
        val = fn(y) ^ int(ref.output_inverted)
        if val != tt[m]:
            return False
    return True


def _natural(s: str):
    import re

    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]
