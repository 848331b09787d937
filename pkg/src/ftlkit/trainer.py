"""Perceptron-style training of flash threshold voltages.

Training operates on a single cell instance: every misclassified minterm
pulls the conductances of its active branches (always-on branch included)
towards the correct side by one VT step per branch.  A margin handicap
``lam * C`` turns correct-but-marginal minterms into training events, which
is how robustness and delay are traded.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence

import numpy as np

from .cell import (
    CellInstance,
    CellParams,
    MarginReport,
    VtAssignment,
    margins,
    nominal_instance,
    realized_bits,
    sample_instance,
    instance_seeds,
    truth_table_of,
    MetastableError,
)
from .progchain import PulseCommand
from .threshold import TruthTable

HANDICAP_RESOLUTION = 0.01


class UntrainableError(ValueError):
    """The target cannot be trained even without a handicap."""


@dataclass(frozen=True)
class TrainerConfig:
    step: float = 0.02
    kmax: Optional[int] = None
    minterm_order: Literal["ascending", "random"] = "ascending"
    order_seed: int = 0
    initial_vt: Optional[VtAssignment] = None

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.kmax is not None and self.kmax < 1:
            raise ValueError("kmax must be >= 1")
        if self.minterm_order not in ("ascending", "random"):
            raise ValueError(f"unknown minterm order {self.minterm_order!r}")

    def start(self, params: CellParams) -> VtAssignment:
        if self.initial_vt is not None:
            if self.initial_vt.arity != params.arity:
                raise ValueError("initial assignment arity mismatch")
            return self.initial_vt
        return VtAssignment.uniform(params.arity, params.vdd / 2)

    def iteration_cap(self, params: CellParams, start: Optional[VtAssignment] = None) -> int:
        if self.kmax is not None:
            return self.kmax
        return default_kmax(params.arity, start or self.start(params), self.step)


def default_kmax(n: int, start: VtAssignment, step: float) -> int:
    """2(n+1) * |VT0|^2 / step^2."""
    return int(math.ceil(2 * (n + 1) * start.norm_sq() / step**2 - 1e-9))


@dataclass(frozen=True)
class HandicapConfig:
    c1: float = 0.0
    c0: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if self.c1 < 0 or self.c0 < 0 or self.lam < 0:
            raise ValueError("handicaps and lam must be non-negative")

    @property
    def onset_threshold(self) -> float:
        return self.lam * self.c1

    @property
    def offset_threshold(self) -> float:
        return self.lam * self.c0


@dataclass(frozen=True)
class TrainResult:
    vt: VtAssignment
    iterations: int
    converged: bool
    margins: MarginReport
    pulses: tuple[PulseCommand, ...] = ()


def _run(
    tt: TruthTable,
    inst: CellInstance,
    cfg: TrainerConfig,
    handicap: HandicapConfig,
    start: VtAssignment,
    step: float,
    lo: float,
    hi: float,
) -> TrainResult:
    n = inst.arity
    if tt.arity != n:
        raise ValueError(f"truth table arity {tt.arity} does not match cell arity {n}")
    params = inst.params
    tol = params.tie_tolerance
    gain_l, gain_r = inst.gains()
    lim_l, lim_r = inst.overdrive_limits()
    vl = list(start.left)
    vr = list(start.right)
    kmax = cfg.iteration_cap(params, start)
    thr1 = handicap.onset_threshold
    thr0 = handicap.offset_threshold
    target = tt.values()
    active = [[0] + [i + 1 for i in range(n) if (m >> (n - 1 - i)) & 1] for m in range(1 << n)]
    order = list(range(1 << n))
    rng = np.random.default_rng(cfg.order_seed) if cfg.minterm_order == "random" else None
    seen: set[tuple] = set()
    k = 0
    converged = False
    while k < kmax:
        if rng is not None:
            rng.shuffle(order)
        clean = True
        for m in order:
            act = active[m]
            g = 0.0
            for i in act:
                dl = lim_l[i] - vl[i]
                dr = lim_r[i] - vr[i]
                g += (gain_l[i] * dl if dl > 0 else 0.0) - (gain_r[i] * dr if dr > 0 else 0.0)
            if target[m]:
                if g > thr1 + tol:
                    continue
                sign = -1.0  # lower left VTs, raise right VTs
            else:
                if -g > thr0 + tol:
                    continue
                sign = 1.0
            clean = False
            for i in act:
                vl[i] = _move(vl[i], sign * step, lo, hi)
                vr[i] = _move(vr[i], -sign * step, lo, hi)
            k += 1
            if k >= kmax:
                break
        if clean:
            converged = True
            break
        if rng is None:
            # deterministic dynamics: a repeated end-of-pass state is a cycle
            state = (tuple(vl), tuple(vr))
            if state in seen:
                break
            seen.add(state)
    vt = VtAssignment(tuple(vl), tuple(vr))
    return TrainResult(vt, k, converged, margins(inst, vt, tt))


def _move(v: float, delta: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, v + delta))


def mpla0(
    tt: TruthTable,
    inst: CellInstance,
    cfg: TrainerConfig = TrainerConfig(),
    handicap: HandicapConfig = HandicapConfig(),
) -> TrainResult:
    p = inst.params
    return _run(tt, inst, cfg, handicap, cfg.start(p), cfg.step, p.vt_min, p.vt_max)


def mpla_plus(
    tt: TruthTable,
    inst: CellInstance,
    cfg: TrainerConfig = TrainerConfig(),
    c1: float = 0.0,
    c0: float = 0.0,
    lam: float = 1.0,
) -> TrainResult:
    return mpla0(tt, inst, cfg, HandicapConfig(c1, c0, lam))


def find_max_handicap(
    tt: TruthTable,
    inst: CellInstance,
    cfg: TrainerConfig = TrainerConfig(),
    lam: float = 1.0,
    resolution: float = HANDICAP_RESOLUTION,
    c_limit: float = 2.0,
) -> float:
    """Largest C on the ``resolution`` grid with C1 = C0 = C converging.

    Doubling locates a failing grid point, then bisection narrows the bracket
    [converging, failing] to adjacent grid points.
    """
    def ok(units: int) -> bool:
        return mpla_plus(tt, inst, cfg, units * resolution, units * resolution, lam).converged

    if not ok(0):
        raise UntrainableError("target does not converge without a handicap")
    top = int(round(c_limit / resolution))
    lo, hi = 0, 1
    while hi <= top and ok(hi):
        lo, hi = hi, hi * 2
    if hi > top:
        hi = top + 1
        if ok(top):
            return top * resolution
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return round(lo * resolution, 10)


@dataclass
class VtDatabase:
    function_index: int
    target: TruthTable
    nominal: VtAssignment
    error_entries: dict[str, VtAssignment] = field(default_factory=dict)
    n_mc: int = 0
    n_errors: int = 0
    handicap: float = 0.0
    unfixable: list[str] = field(default_factory=list)
    class_sizes: dict[str, int] = field(default_factory=dict)

    @property
    def m_f(self) -> int:
        return len(self.error_entries)

    def to_lines(self) -> list[str]:
        from .io import format_volts

        lines = [f"{self.function_index}\tnominal\t{format_volts(self.nominal.vector())}"]
        for key in sorted(self.error_entries):
            lines.append(f"{self.function_index}\terrtype:{key}\t{format_volts(self.error_entries[key].vector())}")
        return lines


def write_vt_databases(dbs: Sequence[VtDatabase], path, config_hash: Optional[str] = None) -> None:
    from .io import atomic_write, header_line

    lines = [ln for db in dbs for ln in db.to_lines()]
    atomic_write(path, header_line(config_hash) + "\n".join(lines) + "\n")


def read_vt_databases(path, library=None) -> dict[int, VtDatabase]:
    """Parse a VT database file; targets come from ``library`` when given."""
    from .io import parse_volts

    out: dict[int, VtDatabase] = {}
    with open(path) as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            idx, tag, volts = line.rstrip("\n").split("\t")
            idx = int(idx)
            vt = VtAssignment.from_vector(parse_volts(volts))
            if tag == "nominal":
                target = library[idx].canonical_tt if library is not None else None
                out[idx] = VtDatabase(idx, target, vt)
            elif tag.startswith("errtype:"):
                out[idx].error_entries[tag.split(":", 1)[1]] = vt
            else:
                raise ValueError(f"unknown tag {tag!r}")
    return out


def tt_key(bits: int, n: int) -> str:
    return TruthTable(n, int(bits)).hex()


def _representative(members: Sequence[CellInstance]) -> CellInstance:
    """Member closest to the class mean of (offset, beta factor) draws."""
    draws = np.array([m.vt_offsets + m.beta_factors for m in members])
    center = draws.mean(axis=0)
    scale = draws.std(axis=0) + 1e-12
    dist = (((draws - center) / scale) ** 2).sum(axis=1)
    return members[int(np.argmin(dist))]


def mpla_plusplus(
    tt: TruthTable,
    params: CellParams,
    n_mc: int,
    sigma_vt: float,
    sigma_beta: float,
    seed: int,
    cfg: TrainerConfig = TrainerConfig(),
    lam: float = 1.0,
    function_index: int = 0,
    return_population: bool = False,
):
    """Nominal robust training followed by per-error-type retraining.

    Returns the database, and with ``return_population`` also the sampled
    instances grouped by error key.
    """
    nominal = nominal_instance(params)
    c_star = find_max_handicap(tt, nominal, cfg, lam)
    base = mpla_plus(tt, nominal, cfg, c_star, c_star, lam)
    db = VtDatabase(function_index, tt, base.vt, n_mc=n_mc, handicap=c_star)
    population = [sample_instance(params, sigma_vt, sigma_beta, s) for s in instance_seeds(seed, n_mc)]
    groups = group_errors(population, base.vt, tt)
    db.n_errors = sum(len(v) for v in groups.values())
    for key in sorted(groups):
        members = groups[key]
        db.class_sizes[key] = len(members)
        rep = _representative(members)
        fixed = _train_representative(tt, rep, cfg, lam, base.vt)
        if fixed is None:
            db.unfixable.append(key)
        else:
            db.error_entries[key] = fixed
    if return_population:
        return db, groups
    return db


def group_errors(population: Sequence[CellInstance], vt: VtAssignment, tt: TruthTable) -> dict[str, list[CellInstance]]:
    """Failing instances keyed by their realized table (``meta`` when a tie occurs)."""
    bits, meta = realized_bits(population, vt)
    groups: dict[str, list[CellInstance]] = defaultdict(list)
    for inst, b, mflag in zip(population, bits, meta):
        if mflag:
            groups["meta"].append(inst)
        elif int(b) != tt.bits:
            groups[tt_key(b, tt.arity)].append(inst)
    return dict(groups)


def _train_representative(
    tt: TruthTable, rep: CellInstance, cfg: TrainerConfig, lam: float, start: VtAssignment
) -> Optional[VtAssignment]:
    warm = replace(cfg, initial_vt=start, kmax=cfg.iteration_cap(rep.params))
    try:
        c = find_max_handicap(tt, rep, warm, lam)
    except UntrainableError:
        return None
    return mpla_plus(tt, rep, warm, c, c, lam).vt


def realizes(inst: CellInstance, vt: VtAssignment, tt: TruthTable) -> bool:
    try:
        return truth_table_of(inst, vt) == tt
    except MetastableError:
        return False


def realized_key(inst: CellInstance, vt: VtAssignment) -> Optional[str]:
    try:
        return truth_table_of(inst, vt).hex()
    except MetastableError:
        return "meta"


@dataclass(frozen=True)
class FallbackOutcome:
    vt: VtAssignment
    method: Literal["nominal", "errtype", "onchip", "failed"]
    onchip_iterations: int = 0
    pulses: tuple[PulseCommand, ...] = ()

    def __iter__(self):
        return iter((self.vt, self.method))


def program_with_fallback(
    inst: CellInstance,
    tt: TruthTable,
    db: VtDatabase,
    cfg: TrainerConfig = TrainerConfig(),
) -> FallbackOutcome:
    if realizes(inst, db.nominal, tt):
        return FallbackOutcome(db.nominal, "nominal")
    key = realized_key(inst, db.nominal)
    entry = db.error_entries.get(key)
    if entry is not None and realizes(inst, entry, tt):
        return FallbackOutcome(entry, "errtype")
    res = onchip_mpla0(inst, tt, db.nominal, cfg)
    if res.converged and realizes(inst, res.vt, tt):
        return FallbackOutcome(res.vt, "onchip", res.iterations, res.pulses)
    return FallbackOutcome(res.vt, "failed", res.iterations, res.pulses)


def onchip_mpla0(
    inst: CellInstance,
    tt: TruthTable,
    start: VtAssignment,
    cfg: TrainerConfig = TrainerConfig(),
    handicap: HandicapConfig = HandicapConfig(),
) -> TrainResult:
    """mpla0 with every VT move a whole number of pulses, logged as commands.

    Moves that would leave the legal VT range stop at the last grid point
    inside it, so the trajectory never leaves start + k * pulse_step.
    """
    p = inst.params
    step = max(1, int(round(cfg.step / p.pulse_step))) * p.pulse_step
    return _run_grid(tt, inst, cfg, handicap, start, step, p, log=True)


def _run_grid(tt, inst, cfg, handicap, start, step, params, log) -> TrainResult:
    """Training in integer pulse units per transistor, clamped on the grid."""
    n = inst.arity
    pulse = params.pulse_step
    base = start.vector()
    # per-transistor reachable unit range inside [vt_min, vt_max]
    lo_units = [math.ceil((params.vt_min - b) / pulse - 1e-9) for b in base]
    hi_units = [math.floor((params.vt_max - b) / pulse + 1e-9) for b in base]
    units_step = int(round(step / pulse))
    tol = params.tie_tolerance
    gain_l, gain_r = inst.gains()
    lim_l, lim_r = inst.overdrive_limits()
    u = [0] * (2 * n + 2)
    kmax = cfg.iteration_cap(params, start)
    target = tt.values()
    thr1, thr0 = handicap.onset_threshold, handicap.offset_threshold
    active = [[0] + [i + 1 for i in range(n) if (m >> (n - 1 - i)) & 1] for m in range(1 << n)]
    rng = np.random.default_rng(cfg.order_seed) if cfg.minterm_order == "random" else None
    order = list(range(1 << n))
    pulses: list[PulseCommand] = []
    seen: set[tuple] = set()
    k = 0
    converged = False

    def vt_of(t: int) -> float:
        return base[t] + u[t] * pulse

    while k < kmax:
        if rng is not None:
            rng.shuffle(order)
        clean = True
        for m in order:
            g = 0.0
            for i in active[m]:
                dl = lim_l[i] - vt_of(i)
                dr = lim_r[i] - vt_of(n + 1 + i)
                g += (gain_l[i] * dl if dl > 0 else 0.0) - (gain_r[i] * dr if dr > 0 else 0.0)
            if target[m]:
                if g > thr1 + tol:
                    continue
                sign = -1
            else:
                if -g > thr0 + tol:
                    continue
                sign = 1
            clean = False
            for i in active[m]:
                for t, s in ((i, sign), (n + 1 + i, -sign)):
                    new = min(hi_units[t], max(lo_units[t], u[t] + s * units_step))
                    if log and new != u[t]:
                        pulses.append(PulseCommand(0, t, "program" if new > u[t] else "erase", abs(new - u[t]), n))
                    u[t] = new
            k += 1
            if k >= kmax:
                break
        if clean:
            converged = True
            break
        if rng is None:
            state = tuple(u)
            if state in seen:
                break
            seen.add(state)
    vt = VtAssignment.from_vector([vt_of(t) for t in range(2 * n + 2)])
    return TrainResult(vt, k, converged, margins(inst, vt, tt), tuple(pulses))


@dataclass(frozen=True)
class YieldSummary:
    n_test: int
    nominal_pass: int
    errtype_pass: int
    onchip_pass: int
    failed: int
    covered_errors: int
    total_errors: int
    mean_onchip_iterations: float

    @property
    def nominal_yield(self) -> float:
        return self.nominal_pass / self.n_test

    @property
    def errtype_yield(self) -> float:
        return (self.nominal_pass + self.errtype_pass) / self.n_test

    @property
    def final_yield(self) -> float:
        return (self.nominal_pass + self.errtype_pass + self.onchip_pass) / self.n_test

    @property
    def coverage(self) -> float:
        return self.covered_errors / self.total_errors if self.total_errors else 1.0


def evaluate_yield(
    tt: TruthTable,
    db: VtDatabase,
    params: CellParams,
    n_test: int,
    sigma_vt: float,
    sigma_beta: float,
    seed: int,
    cfg: TrainerConfig = TrainerConfig(),
) -> YieldSummary:
    """Program a fresh population with the staged fallback and count outcomes."""
    population = [sample_instance(params, sigma_vt, sigma_beta, s) for s in instance_seeds(seed, n_test)]
    bits, meta = realized_bits(population, db.nominal)
    counts = {"nominal": 0, "errtype": 0, "onchip": 0, "failed": 0}
    covered = total = 0
    onchip_iters = []
    for inst, b, mflag in zip(population, bits, meta):
        if not mflag and int(b) == tt.bits:
            counts["nominal"] += 1
            continue
        total += 1
        key = "meta" if mflag else tt_key(b, tt.arity)
        covered += key in db.error_entries
        out = program_with_fallback(inst, tt, db, cfg)
        counts[out.method] += 1
        if out.method in ("onchip", "failed"):
            onchip_iters.append(out.onchip_iterations)
    return YieldSummary(
        n_test,
        counts["nominal"],
        counts["errtype"],
        counts["onchip"],
        counts["failed"],
        covered,
        total,
        float(np.mean(onchip_iters)) if onchip_iters else 0.0,
    )


def class_fix_rates(tt: TruthTable, db: VtDatabase, groups: dict[str, list[CellInstance]]) -> dict[str, float]:
    """Fraction of each training error class fixed by that class's entry."""
    rates = {}
    for key, members in groups.items():
        entry = db.error_entries.get(key)
        if entry is None:
            rates[key] = 0.0
            continue
        bits, meta = realized_bits(members, entry)
        ok = (bits == tt.bits) & ~meta
        rates[key] = float(ok.mean())
    return rates
