"""Post-fabrication setup/hold correction by retraining the launching cell.

The launching threshold cell's clock-to-output delay follows its margin on
the critical minterm, so a larger training handicap speeds it up and a
smaller handicap (or a deliberately thinned margin) slows it down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..cell import CellInstance, VtAssignment, critical_delay, margins, critical_minterm
from ..threshold import TruthTable
from ..trainer import TrainerConfig, find_max_handicap, mpla_plus, realizes, UntrainableError


@dataclass(frozen=True)
class Stage:
    """Launch cell -> combinational path -> capture flip-flop."""

    d2d: float
    setup: float
    hold: float
    skew: float
    period: float


@dataclass(frozen=True)
class TimingCheck:
    c2q: float
    setup_slack: float
    hold_slack: float

    @property
    def met(self) -> bool:
        return self.setup_slack >= 0 and self.hold_slack >= 0


def check_stage(stage: Stage, c2q: float) -> TimingCheck:
    """Setup: c2q + d2d + setup <= period + skew.  Hold: c2q + d2d >= hold + skew."""
    setup_slack = stage.period + stage.skew - (c2q + stage.d2d + stage.setup)
    hold_slack = (c2q + stage.d2d) - (stage.hold + stage.skew)
    return TimingCheck(c2q, setup_slack, hold_slack)


@dataclass(frozen=True)
class Candidate:
    vt: VtAssignment
    label: str
    c2q: float


@dataclass(frozen=True)
class TimingFix:
    vt: VtAssignment
    before: TimingCheck
    after: TimingCheck
    action: str
    fixed: bool


def thin_margin(inst: CellInstance, vt: VtAssignment, tt: TruthTable, step: float, max_steps: int = 200) -> list[VtAssignment]:
    """Assignments with progressively smaller critical margin, function intact.

    Each step undoes one training update on the current critical minterm.
    """
    out = []
    p = inst.params
    cur = vt
    for _ in range(max_steps):
        m = critical_minterm(inst, cur)
        n = inst.arity
        act = [0] + [i + 1 for i in range(n) if (m >> (n - 1 - i)) & 1]
        # move towards the decision boundary: opposite of the corrective direction
        sign = 1.0 if tt[m] else -1.0
        left = list(cur.left)
        right = list(cur.right)
        for i in act:
            left[i] = min(p.vt_max, max(p.vt_min, left[i] + sign * step))
            right[i] = min(p.vt_max, max(p.vt_min, right[i] - sign * step))
        nxt = VtAssignment(tuple(left), tuple(right))
        if nxt == cur or not realizes(inst, nxt, tt):
            break
        out.append(nxt)
        cur = nxt
    return out


def candidates(
    tt: TruthTable,
    inst: CellInstance,
    cfg: TrainerConfig = TrainerConfig(),
    lam: float = 1.0,
    resolution: float = 0.01,
) -> list[Candidate]:
    """Trained assignments across the handicap range plus margin-thinned variants."""
    c_star = find_max_handicap(tt, inst, cfg, lam, resolution)
    out = []
    units = int(round(c_star / resolution))
    base = None
    for u in range(units + 1):
        c = u * resolution
        res = mpla_plus(tt, inst, cfg, c, c, lam)
        if res.converged:
            out.append(Candidate(res.vt, f"handicap={c:.2f}", critical_delay(inst, res.vt)))
            if base is None:
                base = res.vt
    if base is not None:
        for k, vt in enumerate(thin_margin(inst, base, tt, cfg.step), 1):
            out.append(Candidate(vt, f"thinned={k}", critical_delay(inst, vt)))
    return out


def c2q_range(cands: list[Candidate]) -> tuple[float, float]:
    delays = [c.c2q for c in cands]
    return min(delays), max(delays)


def fix_timing(
    stage: Stage,
    tt: TruthTable,
    inst: CellInstance,
    current: VtAssignment,
    cfg: TrainerConfig = TrainerConfig(),
    lam: float = 1.0,
    cands: Optional[list[Candidate]] = None,
) -> TimingFix:
    """Pick a retrained assignment that meets both checks, maximizing the smaller slack.

    Setup violations are repaired by faster (higher-handicap) assignments and
    hold violations by slower ones; the current assignment is kept when it
    already meets timing.
    """
    before = check_stage(stage, critical_delay(inst, current))
    if before.met:
        return TimingFix(current, before, before, "none", True)
    if cands is None:
        cands = candidates(tt, inst, cfg, lam)
    best = None
    for c in cands:
        chk = check_stage(stage, c.c2q)
        if not chk.met:
            continue
        score = min(chk.setup_slack, chk.hold_slack)
        if best is None or score > best[0]:
            best = (score, c, chk)
    if best is None:
        return TimingFix(current, before, before, "unfixable", False)
    _, c, chk = best
    kind = "setup" if before.setup_slack < 0 else "hold"
    return TimingFix(c.vt, before, chk, f"{kind}: {c.label}", True)
