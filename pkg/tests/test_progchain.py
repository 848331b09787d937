import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftlkit.cell import CellParams, VtAssignment
from ftlkit.progchain import (
    LEGAL_MODES,
    ModeSignals,
    ProtocolViolation,
    PulseCommand,
    address_width,
    decode,
    decode_bits,
    execute_plan,
    init_chain,
    mode_trace_for,
    plan_program,
    pulses_for,
    select_cell,
)

P5 = CellParams(5)


def random_assignment(rng, n=5):
    return VtAssignment.from_vector(rng.uniform(P5.vt_min, P5.vt_max, 2 * n + 2))


class TestChain:
    def test_init(self):
        assert init_chain(1).bits == (1, 1)
        assert init_chain(4).bits == (1,) * 5
        assert init_chain(4).selected() is None

    def test_select_first(self):
        chain = select_cell(init_chain(4), 0)
        assert chain.selected() == 0
        assert chain.bits == (0, 0, 1, 1, 1)

    def test_forward_reuses_token(self):
        a = select_cell(init_chain(6), 1)
        b = select_cell(a, 4)
        assert b.selected() == 4
        assert b.pclk_count - a.pclk_count == 3

    def test_backward_flushes(self):
        a = select_cell(init_chain(4), 3)
        b = select_cell(a, 1)
        assert b.selected() == 1
        assert b.pclk_count > a.pclk_count

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            select_cell(init_chain(3), 3)

    @given(st.integers(1, 8), st.lists(st.integers(0, 100), max_size=12))
    def test_selection_unique_after_any_sequence(self, n, picks):
        chain = init_chain(n)
        for p in picks:
            chain = select_cell(chain, p % n)
            assert chain.selected_cells() == [p % n]


class TestDecoder:
    def test_five_inputs(self):
        assert address_width(5) == 4
        assert len(decode(0, 5)) == 12

    def test_address_zero(self):
        assert decode(0, 5)[0] == 1 and sum(decode(0, 5)) == 1

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            decode(12, 5)

    @given(st.integers(1, 5), st.data())
    def test_one_hot(self, n, data):
        a = data.draw(st.integers(0, 2 * n + 1))
        bits = [(a >> (address_width(n) - 1 - i)) & 1 for i in range(address_width(n))]
        line = decode_bits(bits, n)
        assert sum(line) == 1 and line[a] == 1


class TestModes:
    def test_four_legal_tuples(self):
        assert {s.mode() for s in LEGAL_MODES.values()} == {"regular", "program", "erase", "scan_test"}

    def test_te_during_pulse_is_violation(self):
        bad = ModeSignals(prog=1, erase=0, clk=0, te=1, hiv=20.0)
        with pytest.raises(ProtocolViolation, match="TE"):
            bad.mode()

    def test_pulse_with_te_rejected_by_execution(self):
        a = VtAssignment.uniform(5, 0.5)
        plan = plan_program(init_chain(1), {0: VtAssignment.uniform(5, 0.52)}, {0: a}, P5)
        trace = [ModeSignals(prog=1, erase=0, clk=0, te=1, hiv=20.0)] * plan.total_pulses
        with pytest.raises(ProtocolViolation):
            execute_plan(plan, {0: a}, trace, P5)

    def test_program_pulse_adds_one_step(self):
        a = VtAssignment.uniform(5, 0.5)
        plan = plan_program(init_chain(1), {0: VtAssignment.from_vector((0.52,) + (0.5,) * 11)}, {0: a}, P5)
        out, _ = execute_plan(plan, {0: a}, [LEGAL_MODES["program"]], P5)
        assert out[0].left[0] == pytest.approx(0.52)

    def test_trace_too_short(self):
        a = VtAssignment.uniform(5, 0.5)
        plan = plan_program(init_chain(1), {0: VtAssignment.uniform(5, 0.6)}, {0: a}, P5)
        with pytest.raises(ProtocolViolation):
            execute_plan(plan, {0: a}, [LEGAL_MODES["program"]], P5)


class TestPulses:
    def test_examples(self):
        assert pulses_for(0.1, 0.0, 0.02) == ("program", 5)
        assert pulses_for(0.3, 0.3, 0.02)[1] == 0
        assert pulses_for(0.05, 0.0, 0.02) == ("program", 3)
        assert pulses_for(0.0, 0.1, 0.02) == ("erase", 5)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            pulses_for(0.1, 0.0, 0.0)

    def test_command_validation(self):
        with pytest.raises(ValueError):
            PulseCommand(0, 12, "program", 1, 5)
        with pytest.raises(ValueError):
            PulseCommand(0, 1, "program", 0, 5)


class TestPlan:
    def test_identical_is_empty(self):
        a = VtAssignment.uniform(5, 0.4)
        assert plan_program(init_chain(2), {0: a, 1: a}, {0: a, 1: a}, P5).commands == ()

    def test_single_transistor_tenth_of_a_volt(self):
        a = VtAssignment.uniform(5, 0.4)
        b = VtAssignment.from_vector((0.4,) * 3 + (0.5,) + (0.4,) * 8)
        plan = plan_program(init_chain(1), {0: b}, {0: a}, P5)
        assert plan.total_pulses == 5
        assert plan.estimated_time_us == 5.0

    def test_missing_cell(self):
        a = VtAssignment.uniform(5, 0.4)
        with pytest.raises(ValueError):
            plan_program(init_chain(2), {0: a, 1: a}, {0: a}, P5)

    def test_chain_order(self):
        rng = np.random.default_rng(0)
        cur = {i: random_assignment(rng) for i in range(5)}
        tgt = {i: random_assignment(rng) for i in range(5)}
        cells = [c.cell_index for c in plan_program(init_chain(5), tgt, cur, P5).commands]
        assert cells == sorted(cells)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.booleans())
    def test_round_trip_within_step(self, seed, bidirectional):
        rng = np.random.default_rng(seed)
        cur = {i: random_assignment(rng) for i in range(3)}
        tgt = {i: random_assignment(rng) for i in range(3)}
        plan = plan_program(init_chain(3), tgt, cur, P5, bidirectional=bidirectional)
        trace = mode_trace_for(plan)
        for sig in trace:
            sig.mode()
        out, chain = execute_plan(plan, cur, trace, P5)
        for i in range(3):
            err = np.abs(np.subtract(out[i].vector(), tgt[i].vector()))
            assert err.max() <= P5.pulse_step + 1e-9
            assert out[i].in_range(P5)

    def test_erase_then_program_when_unidirectional(self):
        cur = {0: VtAssignment.uniform(5, 0.5)}
        tgt = {0: VtAssignment.uniform(5, 0.3)}
        plan = plan_program(init_chain(1), tgt, cur, P5, bidirectional=False)
        assert plan.erase_cells == (0,)
        assert all(c.polarity == "program" for c in plan.commands)
        trace = mode_trace_for(plan)
        assert trace[0].mode() == "erase"
        out, _ = execute_plan(plan, cur, trace, P5)
        assert np.allclose(out[0].vector(), tgt[0].vector(), atol=P5.pulse_step)

    def test_doubling_cells_doubles_pulses(self):
        rng = np.random.default_rng(1)
        tgt = [random_assignment(rng) for _ in range(4)]
        erased = VtAssignment.uniform(5, P5.vt_min)
        one = plan_program(init_chain(4), dict(enumerate(tgt)), {i: erased for i in range(4)}, P5)
        two = plan_program(init_chain(8), dict(enumerate(tgt + tgt)), {i: erased for i in range(8)}, P5)
        assert two.total_pulses == 2 * one.total_pulses
        assert two.estimated_time_us == 2 * one.estimated_time_us

    def test_csv_layout(self):
        a = VtAssignment.uniform(5, 0.4)
        b = VtAssignment.from_vector((0.5,) + (0.4,) * 11)
        text = plan_program(init_chain(1), {0: b}, {0: a}, P5).to_csv("h")
        lines = text.splitlines()
        assert lines[0] == "# config h"
        assert lines[1] == "cell,transistor,polarity,count"
        assert lines[2] == "0,0,program,5"
        assert lines[-2:] == ["total_pulses,total_time_us", "5,5"]
