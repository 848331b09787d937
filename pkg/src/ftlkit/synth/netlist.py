"""Gate-level sequential netlists, a BLIF subset reader/writer and a
bit-parallel simulator."""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..threshold import ThresholdFunction, TruthTable

MAX_GATE_INPUTS = 5


class NetlistError(ValueError):
    pass


@dataclass
class Gate:
    """Combinational gate; the first input is the most significant minterm bit."""

    id: str
    inputs: tuple[str, ...]
    output: str
    bits: int

    @property
    def arity(self) -> int:
        return len(self.inputs)

    def table(self) -> TruthTable:
        return TruthTable(self.arity, self.bits)

    def value(self, xs: Sequence[int]) -> int:
        m = 0
        for x in xs:
            m = (m << 1) | x
        return (self.bits >> m) & 1

    @property
    def kind(self) -> str:
        return gate_kind(self.arity, self.bits)


@dataclass
class Dff:
    id: str
    d: str
    q: str
    init: int = 0


@dataclass
class FtlCell:
    """Registered threshold cell: q <= f(inputs) on each clock."""

    id: str
    class_index: int
    function: ThresholdFunction
    inputs: tuple[str, ...]
    q: str
    init: int = 0


def _table_of(n: int, fn) -> int:
    return TruthTable.from_function(n, fn).bits


def _known_kinds() -> dict[tuple[int, int], str]:
    kinds = {(1, 0b10): "buf", (1, 0b01): "inv"}
    for n in range(2, MAX_GATE_INPUTS + 1):
        kinds[(n, _table_of(n, lambda *x: all(x)))] = f"and{n}"
        kinds[(n, _table_of(n, lambda *x: any(x)))] = f"or{n}"
        kinds[(n, _table_of(n, lambda *x: not all(x)))] = f"nand{n}"
        kinds[(n, _table_of(n, lambda *x: not any(x)))] = f"nor{n}"
        kinds[(n, _table_of(n, lambda *x: sum(x) % 2))] = f"xor{n}"
        kinds[(n, _table_of(n, lambda *x: 1 - sum(x) % 2))] = f"xnor{n}"
    kinds[(3, _table_of(3, lambda a, b, c: a + b + c >= 2))] = "maj3"
    return kinds


_KINDS = _known_kinds()


def gate_kind(arity: int, bits: int) -> str:
    if arity == 0:
        return f"const{bits & 1}"
    return _KINDS.get((arity, bits), f"cplx{arity}")


@dataclass
class Netlist:
    name: str = "top"
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    gates: dict[str, Gate] = field(default_factory=dict)
    dffs: dict[str, Dff] = field(default_factory=dict)
    ftls: dict[str, FtlCell] = field(default_factory=dict)

    def copy(self) -> "Netlist":
        return copy.deepcopy(self)

    # --- structure -----------------------------------------------------------

    def drivers(self) -> dict[str, tuple[str, str]]:
        """net -> (kind, id) with kind in pi/gate/dff/ftl; raises on multiple drivers."""
        out: dict[str, tuple[str, str]] = {}

        def add(net: str, who: tuple[str, str]) -> None:
            if net in out:
                raise NetlistError(f"net {net!r} has multiple drivers: {out[net]} and {who}")
            out[net] = who

        for pi in self.inputs:
            add(pi, ("pi", pi))
        for g in self.gates.values():
            add(g.output, ("gate", g.id))
        for d in self.dffs.values():
            add(d.q, ("dff", d.id))
        for f in self.ftls.values():
            add(f.q, ("ftl", f.id))
        return out

    def fanouts(self) -> dict[str, list[tuple[str, str]]]:
        """net -> consumers as (kind, id); kind in gate/dff/ftl/po."""
        out: dict[str, list[tuple[str, str]]] = {}
        for g in self.gates.values():
            for n in g.inputs:
                out.setdefault(n, []).append(("gate", g.id))
        for d in self.dffs.values():
            out.setdefault(d.d, []).append(("dff", d.id))
        for f in self.ftls.values():
            for n in f.inputs:
                out.setdefault(n, []).append(("ftl", f.id))
        for po in self.outputs:
            out.setdefault(po, []).append(("po", po))
        return out

    def state_elements(self) -> list[tuple[str, str]]:
        """Registers in a stable order: (kind, id)."""
        return [("dff", k) for k in sorted(self.dffs)] + [("ftl", k) for k in sorted(self.ftls)]

    def topo_gates(self) -> list[str]:
        drivers = self.drivers()
        order: list[str] = []
        state: dict[str, int] = {}
        for start in sorted(self.gates):
            if start in state:
                continue
            stack = [(start, 0)]
            while stack:
                gid, i = stack.pop()
                if i == 0:
                    if state.get(gid) == 2:
                        continue
                    state[gid] = 1
                g = self.gates[gid]
                if i < len(g.inputs):
                    stack.append((gid, i + 1))
                    kind, src = drivers.get(g.inputs[i], ("?", ""))
                    if kind == "gate":
                        st = state.get(src)
                        if st == 1:
                            raise NetlistError(f"combinational cycle through gate {src!r}")
                        if st is None:
                            stack.append((src, 0))
                else:
                    state[gid] = 2
                    order.append(gid)
        return order

    def validate(self) -> None:
        drivers = self.drivers()
        used = set(self.outputs)
        for g in self.gates.values():
            used.update(g.inputs)
            if g.arity > MAX_GATE_INPUTS:
                raise NetlistError(f"gate {g.id!r} has {g.arity} inputs, at most {MAX_GATE_INPUTS} supported")
        for d in self.dffs.values():
            used.add(d.d)
        for f in self.ftls.values():
            used.update(f.inputs)
        undriven = sorted(n for n in used if n not in drivers)
        if undriven:
            raise NetlistError(f"undriven nets: {undriven}")
        self.topo_gates()

    def nets(self) -> set[str]:
        out = set(self.inputs) | set(self.outputs)
        for g in self.gates.values():
            out.update(g.inputs)
            out.add(g.output)
        for d in self.dffs.values():
            out.update((d.d, d.q))
        for f in self.ftls.values():
            out.update(f.inputs)
            out.add(f.q)
        return out

    def fresh_net(self, base: str) -> str:
        taken = self.nets()
        if base not in taken:
            return base
        k = 1
        while f"{base}_{k}" in taken:
            k += 1
        return f"{base}_{k}"

    def fresh_id(self, base: str) -> str:
        taken = set(self.gates) | set(self.dffs) | set(self.ftls)
        k = 0
        while f"{base}{k}" in taken:
            k += 1
        return f"{base}{k}"

    # --- simulation ------------------------------------------------------------

    def evaluate(self, values: dict[str, int], mask: int, order: Optional[list[str]] = None) -> dict[str, int]:
        """Bit-parallel combinational evaluation; ``values`` holds PI and register nets."""
        vals = dict(values)
        for gid in order or self.topo_gates():
            g = self.gates[gid]
            vals[g.output] = eval_table(g.bits, [vals[n] for n in g.inputs], mask)
        return vals

    def next_state(self, vals: dict[str, int], mask: int) -> dict[str, int]:
        """Register output values after one clock edge, keyed by the register's q net."""
        nxt = {}
        for d in self.dffs.values():
            nxt[d.q] = vals[d.d]
        for f in self.ftls.values():
            nxt[f.q] = eval_table(f.function.truth_table().bits, [vals[n] for n in f.inputs], mask)
        return nxt

    def reset_state(self, mask: int) -> dict[str, int]:
        st = {d.q: (mask if d.init else 0) for d in self.dffs.values()}
        st.update({f.q: (mask if f.init else 0) for f in self.ftls.values()})
        return st


def eval_table(bits: int, inputs: Sequence[int], mask: int) -> int:
    """Evaluate a truth table on bit-vector inputs (one lane per bit)."""
    n = len(inputs)
    if n == 0:
        return mask if bits & 1 else 0
    size = 1 << n
    full = (1 << size) - 1
    invert = bin(bits).count("1") > size // 2
    cover = (full ^ bits) if invert else bits
    out = 0
    for m in range(size):
        if not (cover >> m) & 1:
            continue
        term = mask
        for j, v in enumerate(inputs):
            term &= v if (m >> (n - 1 - j)) & 1 else ~v
            if not term:
                break
        out |= term
    out &= mask
    return (mask ^ out) if invert else out


# --- BLIF -----------------------------------------------------------------------

_FTL_MODEL = re.compile(r"^ftl_(\d+)$")


def _logical_lines(text: str) -> list[tuple[int, str]]:
    out = []
    buf = ""
    start = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not buf:
            start = lineno
        if line.endswith("\\"):
            buf += line[:-1] + " "
            continue
        buf += line
        if buf.strip():
            out.append((start, buf.strip()))
        buf = ""
    if buf.strip():
        out.append((start, buf.strip()))
    return out


def parse_blif(text: str, library=None) -> Netlist:
    """Parse .model/.inputs/.outputs/.names/.latch/.end (plus ftl_<k> subcircuits).

    ``library`` is needed only when the text contains FTL subcircuits.
    """
    nl = Netlist()
    lines = _logical_lines(text)
    i = 0
    gate_no = 0
    dff_no = 0
    while i < len(lines):
        lineno, line = lines[i]
        tok = line.split()
        head = tok[0]
        if head == ".model":
            nl.name = tok[1] if len(tok) > 1 else "top"
        elif head == ".inputs":
            nl.inputs.extend(tok[1:])
        elif head == ".outputs":
            nl.outputs.extend(tok[1:])
        elif head == ".names":
            if len(tok) < 2:
                raise NetlistError(f"line {lineno}: .names needs an output net")
            ins, out = tuple(tok[1:-1]), tok[-1]
            if len(ins) > MAX_GATE_INPUTS:
                raise NetlistError(f"line {lineno}: {len(ins)} inputs exceed the supported {MAX_GATE_INPUTS}")
            cubes = []
            while i + 1 < len(lines) and not lines[i + 1][1].startswith("."):
                i += 1
                cubes.append(lines[i])
            bits = _cover_bits(ins, cubes, lineno)
            nl.gates[f"g{gate_no}"] = Gate(f"g{gate_no}", ins, out, bits)
            gate_no += 1
        elif head == ".latch":
            if len(tok) < 3:
                raise NetlistError(f"line {lineno}: .latch needs input and output nets")
            init = 0
            if len(tok) in (4, 6):
                init = _latch_init(tok[-1], lineno)
            nl.dffs[f"r{dff_no}"] = Dff(f"r{dff_no}", tok[1], tok[2], init)
            dff_no += 1
        elif head == ".subckt":
            _parse_ftl(nl, tok, lineno, library)
        elif head == ".end":
            break
        else:
            raise NetlistError(f"line {lineno}: unsupported directive {head!r}")
        i += 1
    nl.validate()
    return nl


def _latch_init(tok: str, lineno: int) -> int:
    if tok in ("0", "2", "3"):
        return 0
    if tok == "1":
        return 1
    raise NetlistError(f"line {lineno}: bad latch init value {tok!r}")


def _cover_bits(ins: tuple[str, ...], cubes: list[tuple[int, str]], lineno: int) -> int:
    n = len(ins)
    if not cubes:
        return 0
    on_bits = 0
    polarity = None
    for ln, text in cubes:
        parts = text.split()
        if n == 0:
            if len(parts) != 1 or parts[0] not in "01":
                raise NetlistError(f"line {ln}: malformed constant cube {text!r}")
            pat, val = "", parts[0]
        else:
            if len(parts) != 2 or len(parts[0]) != n or parts[1] not in ("0", "1") or set(parts[0]) - set("01-"):
                raise NetlistError(f"line {ln}: malformed cube {text!r}")
            pat, val = parts
        if polarity is None:
            polarity = val
        elif val != polarity:
            raise NetlistError(f"line {ln}: mixed on-set and off-set cubes")
        for m in range(1 << n):
            if all(c == "-" or int(c) == (m >> (n - 1 - j)) & 1 for j, c in enumerate(pat)):
                on_bits |= 1 << m
    if polarity == "0":
        on_bits ^= (1 << (1 << n)) - 1
    return on_bits


def _parse_ftl(nl: Netlist, tok: list[str], lineno: int, library) -> None:
    m = _FTL_MODEL.match(tok[1]) if len(tok) > 1 else None
    if m is None:
        raise NetlistError(f"line {lineno}: only ftl_<class> subcircuits are supported")
    if library is None:
        raise NetlistError(f"line {lineno}: a library is needed to read FTL cells")
    idx = int(m.group(1))
    pins = dict(p.split("=", 1) for p in tok[2:])
    fn = library[idx].function
    inputs = tuple(pins[f"in{j + 1}"] for j in range(fn.arity))
    fid = pins.get("name", f"ftl{len(nl.ftls)}")
    nl.ftls[fid] = FtlCell(fid, idx, fn, inputs, pins["out"], int(pins.get("init", "0")))


def emit_blif(nl: Netlist) -> str:
    lines = [f".model {nl.name}"]
    if nl.inputs:
        lines.append(".inputs " + " ".join(nl.inputs))
    if nl.outputs:
        lines.append(".outputs " + " ".join(nl.outputs))
    for gid in sorted(nl.gates, key=_natural):
        g = nl.gates[gid]
        lines.append(".names " + " ".join(g.inputs + (g.output,)))
        n = g.arity
        for m in range(1 << n):
            if (g.bits >> m) & 1:
                pat = "".join(str((m >> (n - 1 - j)) & 1) for j in range(n))
                lines.append(f"{pat} 1" if n else "1")
    for rid in sorted(nl.dffs, key=_natural):
        d = nl.dffs[rid]
        lines.append(f".latch {d.d} {d.q} re clk {d.init}")
    for fid in sorted(nl.ftls, key=_natural):
        f = nl.ftls[fid]
        pins = " ".join(f"in{j + 1}={n}" for j, n in enumerate(f.inputs))
        init = f" init={f.init}" if f.init else ""
        lines.append(f".subckt ftl_{f.class_index} {pins} clk=clk out={f.q} name={f.id}{init}")
    lines.append(".end")
    return "\n".join(lines) + "\n"


def _natural(s: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]
