"""Library-wide flows shared by the command line and the test suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .cell import CellInstance, VtAssignment, apply_drift, nominal_instance
from .config import RunConfig
from .progchain import ProgramPlan, init_chain, plan_program
from .threshold import CanonicalClass, Library, TruthTable
from .trainer import (
    TrainResult,
    VtDatabase,
    default_kmax,
    find_max_handicap,
    mpla0,
    mpla_plus,
    realizes,
)


@dataclass(frozen=True)
class TrainedFunction:
    cls: CanonicalClass
    handicap: float
    result: TrainResult
    kmax: int

    def row(self) -> tuple:
        m = self.result.margins
        return (
            self.cls.class_index,
            self.result.iterations,
            int(self.result.converged),
            round(self.handicap, 4),
            round(m.min_onset_margin, 6),
            round(m.min_offset_margin, 6),
        )


TRAIN_HEADER = ("index", "iterations", "converged", "C*", "min_onset_margin", "min_offset_margin")


def train_function(cls: CanonicalClass, cfg: RunConfig) -> TrainedFunction:
    """Nominal-instance training at the largest converging handicap."""
    params = cfg.cell_params(cls.arity)
    inst = nominal_instance(params)
    tcfg = cfg.trainer()
    c_star = find_max_handicap(cls.canonical_tt, inst, tcfg, cfg.lam)
    res = mpla_plus(cls.canonical_tt, inst, tcfg, c_star, c_star, cfg.lam)
    return TrainedFunction(cls, c_star, res, tcfg.iteration_cap(params))


def train_library(library: Library, cfg: RunConfig, indices: Optional[Iterable[int]] = None) -> list[TrainedFunction]:
    chosen = list(library) if indices is None else [library[i] for i in indices]
    return [train_function(c, cfg) for c in chosen]


def survives_drift(inst: CellInstance, vt: VtAssignment, tt: TruthTable, drift_mv: float) -> bool:
    return realizes(inst, apply_drift(vt, drift_mv), tt)


DRIFT_SWEEP_MV = (1.0, 2.0, 5.0, 10.0, 20.0)


def drift_tolerance(inst: CellInstance, vt: VtAssignment, tt: TruthTable, sweep_mv: Sequence[float] = DRIFT_SWEEP_MV) -> float:
    """Largest drift of the sweep such that it and every smaller sweep point keep the function."""
    tolerated = 0.0
    for d in sorted(sweep_mv):
        if not survives_drift(inst, vt, tt, d):
            break
        tolerated = d
    return tolerated


@dataclass(frozen=True)
class DriftRow:
    index: int
    plus_survives: tuple[bool, ...]
    zero_survives: tuple[bool, ...]
    plus_tolerance: float
    zero_tolerance: float


def drift_study(library: Library, cfg: RunConfig, sweep_mv: Sequence[float], trained: Optional[Sequence[TrainedFunction]] = None) -> list[DriftRow]:
    """Compare handicap-trained and plain-trained cells under uniform drift."""
    trained = trained or train_library(library, cfg)
    rows = []
    for tf in trained:
        tt = tf.cls.canonical_tt
        inst = nominal_instance(cfg.cell_params(tf.cls.arity))
        base = mpla0(tt, inst, cfg.trainer()).vt
        plus = tf.result.vt
        rows.append(
            DriftRow(
                tf.cls.class_index,
                tuple(survives_drift(inst, plus, tt, d) for d in sweep_mv),
                tuple(survives_drift(inst, base, tt, d) for d in sweep_mv),
                drift_tolerance(inst, plus, tt, sweep_mv),
                drift_tolerance(inst, base, tt, sweep_mv),
            )
        )
    return rows


def program_library(dbs: Sequence[VtDatabase], cells: int, cfg: RunConfig) -> ProgramPlan:
    """Plan programming of ``cells`` chain positions from the erased state,
    cycling through the given functions."""
    chain = init_chain(cells)
    targets = {}
    current = {}
    n = max(db.nominal.arity for db in dbs)
    params = cfg.cell_params(n)
    for i in range(cells):
        db = dbs[i % len(dbs)]
        targets[i] = db.nominal
        current[i] = VtAssignment.uniform(db.nominal.arity, cfg.vt_floor)
    return plan_program(chain, targets, current, params, cfg.pulse_duration_us, cfg.bidirectional_pulses)
