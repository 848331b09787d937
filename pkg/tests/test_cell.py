import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftlkit.cell import (
    CellParams,
    MetastableError,
    Output,
    VtAssignment,
    apply_drift,
    branch_conductance,
    conductance_pair,
    critical_delay,
    critical_minterm,
    delay_estimate,
    delay_from_margin,
    evaluate_cell,
    margins,
    nominal_instance,
    realized_bits,
    sample_instance,
    sample_population,
    truth_table_of,
)
from ftlkit.threshold import TruthTable
from ftlkit.trainer import mpla0, mpla_plus

P2 = CellParams(2)
NOM2 = nominal_instance(P2)
AND2 = TruthTable.from_function(2, lambda a, b: a and b)

volts = st.floats(0.0, 1.0, allow_nan=False)


@pytest.fixture(scope="module")
def and2_vt():
    res = mpla0(AND2, NOM2)
    assert res.converged
    return res.vt


class TestBranchConductance:
    def test_input_branch_arithmetic(self):
        assert branch_conductance(NOM2, "left", 1, 1, 0.5) == pytest.approx(0.4)

    def test_inactive_input_branch_is_zero(self):
        assert branch_conductance(NOM2, "left", 2, 0, 0.5) == 0.0

    def test_cutoff(self):
        assert branch_conductance(NOM2, "right", 1, 1, 0.95) == 0.0

    def test_always_on_branch_ignores_activity(self):
        assert branch_conductance(NOM2, "left", 0, 0, 0.5) == branch_conductance(NOM2, "left", 0, 1, 0.5) > 0

    def test_bad_index(self):
        with pytest.raises(IndexError):
            branch_conductance(NOM2, "left", 3, 1, 0.5)

    @given(volts, volts, st.integers(0, 2), st.sampled_from(["left", "right"]))
    def test_non_increasing_in_vt(self, a, b, index, side):
        lo, hi = sorted((a, b))
        assert branch_conductance(NOM2, side, index, 1, lo) >= branch_conductance(NOM2, side, index, 1, hi)

    @given(st.floats(0.1, 3.0), volts)
    def test_linear_in_beta_factor(self, k, vt):
        base = nominal_instance(CellParams(1))
        scaled = type(base)(base.params, base.vt_offsets, (k,) * 4)
        assert branch_conductance(scaled, "left", 1, 1, vt) == pytest.approx(k * branch_conductance(base, "left", 1, 1, vt))


class TestEvaluate:
    def test_left_bias_only_gives_one(self):
        vt = VtAssignment((0.5, 0.9, 0.9), (0.9, 0.9, 0.9))
        assert all(evaluate_cell(NOM2, vt, m) == Output.ONE for m in range(4))
        assert truth_table_of(NOM2, vt) == TruthTable(2, 0b1111)

    def test_symmetric_is_metastable(self):
        vt = VtAssignment.uniform(2, 0.45)
        assert all(evaluate_cell(NOM2, vt, m) == Output.METASTABLE for m in range(4))
        with pytest.raises(MetastableError):
            truth_table_of(NOM2, vt)

    def test_trained_and2(self, and2_vt):
        assert evaluate_cell(NOM2, and2_vt, (1, 1)) == Output.ONE
        assert truth_table_of(NOM2, and2_vt) == AND2

    def test_additivity(self, and2_vt):
        for m in range(4):
            bits = ((m >> 1) & 1, m & 1)
            gl = sum(branch_conductance(NOM2, "left", i, ([1] + list(bits))[i], and2_vt.left[i]) for i in range(3))
            gr = sum(branch_conductance(NOM2, "right", i, ([1] + list(bits))[i], and2_vt.right[i]) for i in range(3))
            assert conductance_pair(NOM2, and2_vt, m) == pytest.approx((gl, gr))

    def test_arity_mismatch(self):
        with pytest.raises(ValueError):
            evaluate_cell(NOM2, VtAssignment.uniform(2, 0.45), (1, 0, 1))


class TestMargins:
    def test_symmetric_all_zero(self):
        rep = margins(NOM2, VtAssignment.uniform(2, 0.45), AND2)
        assert all(m == 0 for m in rep.margin)

    def test_trained_and2_positive(self, and2_vt):
        rep = margins(NOM2, and2_vt, AND2)
        assert rep.min_onset_margin > 0 and rep.min_offset_margin > 0

    def test_handicap_enlarges_margins(self):
        base = mpla_plus(AND2, NOM2, c1=0.0, c0=0.0)
        hard = mpla_plus(AND2, NOM2, c1=0.1, c0=0.1)
        assert hard.converged
        assert hard.margins.min_onset_margin > base.margins.min_onset_margin
        assert hard.margins.min_offset_margin > base.margins.min_offset_margin

    def test_report_invariants(self, and2_vt):
        rep = margins(NOM2, and2_vt, AND2)
        assert rep.min_onset_margin == min(rep.margin[m] for m in range(4) if AND2[m])
        assert rep.min_offset_margin == min(-rep.margin[m] for m in range(4) if not AND2[m])


class TestSampling:
    def test_zero_sigma(self):
        inst = sample_instance(CellParams(3), 0.0, 0.0, 7)
        assert inst.vt_offsets == (0.0,) * 8
        assert inst.beta_factors == (1.0,) * 8

    def test_same_seed_identical(self):
        a = sample_instance(CellParams(3), 0.03, 0.05, 42)
        b = sample_instance(CellParams(3), 0.03, 0.05, 42)
        assert a.same_draws(b)
        assert a.vt_offsets == b.vt_offsets and a.beta_factors == b.beta_factors

    def test_offset_spread(self):
        pop = sample_population(CellParams(5), 0.03, 0.05, 1, 2000)
        offsets = np.array([i.vt_offsets for i in pop]).ravel()
        assert abs(offsets.std() - 0.03) <= 0.003

    def test_beta_factors_positive(self):
        pop = sample_population(CellParams(2), 0.03, 2.0, 3, 200)
        assert all(f > 0 for i in pop for f in i.beta_factors)

    def test_truth_table_reproducible(self, and2_vt):
        a = sample_instance(P2, 0.03, 0.05, 9)
        b = sample_instance(P2, 0.03, 0.05, 9)
        assert realized_bits([a], and2_vt)[0][0] == realized_bits([b], and2_vt)[0][0]

    def test_vectorized_matches_scalar(self, and2_vt):
        pop = sample_population(P2, 0.05, 0.05, 11, 50)
        bits, meta = realized_bits(pop, and2_vt)
        for inst, b, f in zip(pop, bits, meta):
            assert not f
            assert truth_table_of(inst, and2_vt).bits == int(b)


class TestDrift:
    def test_zero_is_identity(self, and2_vt):
        assert apply_drift(and2_vt, 0) == and2_vt

    def test_five_millivolts(self):
        assert apply_drift(VtAssignment.uniform(1, 0.5), 5).left[0] == pytest.approx(0.495)

    def test_clamped_at_zero(self):
        assert apply_drift(VtAssignment.uniform(1, 0.002), 5).left == (0.0, 0.0)

    def test_and2_survives_five(self, and2_vt):
        assert truth_table_of(NOM2, apply_drift(and2_vt, 5)) == AND2

    def test_negative_rejected(self, and2_vt):
        with pytest.raises(ValueError):
            apply_drift(and2_vt, -1)


class TestDelay:
    def test_arithmetic(self):
        assert delay_from_margin(CellParams(1), 0.4) == pytest.approx(3.5)

    @given(st.floats(1e-3, 10.0))
    def test_doubling_margin_reduces_delay(self, m):
        p = CellParams(1)
        assert delay_from_margin(p, 2 * m) < delay_from_margin(p, m)

    def test_metastable_undefined(self):
        with pytest.raises(MetastableError):
            delay_estimate(NOM2, VtAssignment.uniform(2, 0.45), 0)

    def test_handicap_training_not_slower(self):
        tt = TruthTable.from_function(3, lambda a, b, c: a + b + c >= 2)
        inst = nominal_instance(CellParams(3))
        base = mpla0(tt, inst).vt
        hard = mpla_plus(tt, inst, c1=0.1, c0=0.1)
        assert hard.converged
        assert critical_delay(inst, hard.vt) <= critical_delay(inst, base)

    def test_margin_delay_duality(self, and2_vt):
        other = mpla_plus(AND2, NOM2, c1=0.1, c0=0.1).vt
        for m in range(4):
            a = abs(np.subtract(*conductance_pair(NOM2, other, m)))
            b = abs(np.subtract(*conductance_pair(NOM2, and2_vt, m)))
            if a > b:
                assert delay_estimate(NOM2, other, m) < delay_estimate(NOM2, and2_vt, m)

    def test_critical_minterm_has_smallest_margin(self, and2_vt):
        m = critical_minterm(NOM2, and2_vt)
        diffs = [abs(np.subtract(*conductance_pair(NOM2, and2_vt, k))) for k in range(4)]
        assert diffs[m] == min(diffs)


def test_params_validation():
    with pytest.raises(ValueError):
        CellParams(2, vt_floor=1.0)
    with pytest.raises(ValueError):
        CellParams(2, gate_drive=1.0)
    with pytest.raises(ValueError):
        CellParams(2, pulse_step=0)
