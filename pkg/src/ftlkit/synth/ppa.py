"""Area and power accounting from a small tech table.

Values are kept as exact fractions so the before/after area identity holds
without rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from fractions import Fraction
from importlib import resources
from typing import Optional

from .netlist import Netlist

FTL_AREA = Fraction("15.6")


@dataclass(frozen=True)
class CellCost:
    area: Fraction
    energy: Fraction
    leakage: Fraction

    @property
    def power(self) -> Fraction:
        return self.energy + self.leakage


class TechTable:
    def __init__(self, costs: dict[str, CellCost]):
        self.costs = costs
        for needed in ("dff", "ftl", "inv"):
            if needed not in costs:
                raise ValueError(f"tech table lacks an entry for {needed!r}")

    @classmethod
    def parse(cls, text: str) -> "TechTable":
        costs = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"tech table line {lineno}: expected 'kind area energy leakage'")
            costs[parts[0]] = CellCost(*(Fraction(p) for p in parts[1:]))
        return cls(costs)

    @classmethod
    def bundled(cls) -> "TechTable":
        return cls.parse(resources.files("ftlkit.data").joinpath("tech.txt").read_text())

    @classmethod
    def load(cls, path) -> "TechTable":
        with open(path) as fh:
            return cls.parse(fh.read())

    def cost(self, kind: str) -> CellCost:
        if kind in self.costs:
            return self.costs[kind]
        if kind.startswith("const"):
            return CellCost(Fraction(0), Fraction(0), Fraction(0))
        # unknown gate kinds fall back to the complex-gate entry of their arity
        arity = "".join(ch for ch in kind if ch.isdigit())
        key = f"cplx{arity}"
        if key in self.costs:
            return self.costs[key]
        raise KeyError(f"no tech entry for cell kind {kind!r}")

    def ftl_cost(self) -> CellCost:
        return self.costs["ftl"]


@dataclass(frozen=True)
class Totals:
    cells: int
    gates: int
    dff: int
    ftl: int
    area: Fraction
    power: Fraction


def totals(nl: Netlist, tech: TechTable) -> Totals:
    area = Fraction(0)
    power = Fraction(0)
    for g in nl.gates.values():
        c = tech.cost(g.kind)
        area += c.area
        power += c.power
    dff = tech.cost("dff")
    area += dff.area * len(nl.dffs)
    power += dff.power * len(nl.dffs)
    ftl = tech.ftl_cost()
    area += ftl.area * len(nl.ftls)
    power += ftl.power * len(nl.ftls)
    return Totals(len(nl.gates) + len(nl.dffs) + len(nl.ftls), len(nl.gates), len(nl.dffs), len(nl.ftls), area, power)


@dataclass(frozen=True)
class ReplacementReport:
    before: Totals
    after: Totals
    inverters_added: int
    replaced: int
    equivalence: Optional[bool] = None

    @property
    def area_delta(self) -> float:
        """Relative area reduction; positive means the rewrite is smaller."""
        return float((self.before.area - self.after.area) / self.before.area) if self.before.area else 0.0

    @property
    def power_delta(self) -> float:
        return float((self.before.power - self.after.power) / self.before.power) if self.before.power else 0.0

    @property
    def cell_delta(self) -> float:
        return (self.before.cells - self.after.cells) / self.before.cells if self.before.cells else 0.0

    def as_json(self) -> dict:
        return {
            "cells_before": self.before.cells,
            "cells_after": self.after.cells,
            "dff": self.after.dff,
            "ftl": self.after.ftl,
            "area_before": float(self.before.area),
            "area_after": float(self.after.area),
            "power_before": float(self.before.power),
            "power_after": float(self.after.power),
            "area_reduction": self.area_delta,
            "power_reduction": self.power_delta,
            "inverters_added": self.inverters_added,
            "equivalence": {True: "pass", False: "fail", None: "unchecked"}[self.equivalence],
        }


def ppa_report(
    before: Netlist,
    after: Netlist,
    tech: TechTable,
    inverters_added: int = 0,
    equivalence: Optional[bool] = None,
) -> ReplacementReport:
    return ReplacementReport(
        totals(before, tech),
        totals(after, tech),
        inverters_added,
        len(after.ftls) - len(before.ftls),
        equivalence,
    )
