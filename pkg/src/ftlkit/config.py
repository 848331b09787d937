"""Run configuration: a flat key=value file with command-line overrides."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace
from typing import Iterable, Optional

from .cell import CellParams
from .trainer import TrainerConfig


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1
    test_seed: int = 2
    vdd: float = 0.9
    gate_drive: float = 0.9
    beta: float = 1.0
    vt_floor: float = 0.02
    pulse_step: float = 0.02
    bias_width: float = 2.0
    sigma_vt: float = 0.03
    sigma_beta: float = 0.05
    lam: float = 1.0
    delay_d0: float = 1.0
    delay_k: float = 1.0
    train_step: float = 0.02
    n_mc: int = 2000
    n_test: int = 10000
    pulse_duration_us: float = 1.0
    bidirectional_pulses: bool = True
    vector_count: int = 256
    workers: int = 1
    out_dir: str = "out"

    def cell_params(self, arity: int) -> CellParams:
        return CellParams(
            arity,
            vdd=self.vdd,
            gate_drive=self.gate_drive,
            beta=self.beta,
            vt_floor=self.vt_floor,
            pulse_step=self.pulse_step,
            delay_d0=self.delay_d0,
            delay_k=self.delay_k,
            bias_width=self.bias_width,
        )

    def trainer(self) -> TrainerConfig:
        return TrainerConfig(step=self.train_step)

    def dumps(self) -> str:
        return "".join(f"{k} = {_render(v)}\n" for k, v in asdict(self).items())

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]

    def with_overrides(self, pairs: Iterable[str]) -> "RunConfig":
        return replace(self, **_parse_pairs(pairs, "override"))


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, text: str):
    kind = _TYPES[key]
    if kind in ("bool", bool):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: not a boolean: {text!r}")
    if kind in ("int", int):
        return int(text, 0)
    if kind in ("float", float):
        return float(text)
    return text.strip()


def _parse_pairs(pairs: Iterable[str], where: str) -> dict:
    out = {}
    for raw in pairs:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{where}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ValueError(f"{where}: unknown key {key!r}")
        out[key] = _coerce(key, val)
    return out


def load_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> RunConfig:
    cfg = RunConfig()
    if path:
        with open(path) as fh:
            cfg = replace(cfg, **_parse_pairs(fh.read().splitlines(), path))
    return cfg.with_overrides(overrides)
