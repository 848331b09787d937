import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftlkit.threshold import (
    NpnTransform,
    ThresholdFunction,
    TruthTable,
    chow_signature,
    detect_threshold,
    enumerate_library,
    evaluate,
    match_library,
    minimize_weights,
    npn_canonicalize,
    read_library,
    write_library,
)

from oracles import minimal_cost, monotone_tables

HEAVY_T7 = ThresholdFunction.parse("[4,3,2,2,1;7]")
HEAVY_T6 = ThresholdFunction.parse("[4,3,2,2,1;6]")

AND2 = TruthTable.from_function(2, lambda a, b: a and b)
XOR2 = TruthTable.from_function(2, lambda a, b: a ^ b)
MAJ3 = TruthTable.from_function(3, lambda a, b, c: a + b + c >= 2)

# input-negated variant of ab+ace+ade+bcd+acd
NEG_INPUTS = TruthTable.from_function(5, lambda a, b, c, d, e: 4 * (1 - a) + 3 * b + 2 * (1 - c) + 2 * d + e >= 7)
# output-negated, permuted and input-negated variant
NEG_OUTPUT = TruthTable.from_function(5, lambda a, b, c, d, e: not (4 * (1 - b) + 3 * c + 2 * (1 - d) + 2 * a + e >= 7))


def sop_heavy_t7(a, b, c, d, e):
    return (a and b) or (a and c and e) or (a and d and e) or (b and c and d) or (a and c and d)


@st.composite
def truth_tables(draw, min_arity=1, max_arity=5):
    n = draw(st.integers(min_arity, max_arity))
    return TruthTable(n, draw(st.integers(0, (1 << (1 << n)) - 1)))


@st.composite
def transforms(draw, n):
    perm = tuple(draw(st.permutations(range(n))))
    return NpnTransform(perm, draw(st.integers(0, (1 << n) - 1)), draw(st.integers(0, 1)))


@st.composite
def threshold_functions(draw, max_arity=5):
    n = draw(st.integers(1, max_arity))
    w = draw(st.lists(st.integers(0, 6), min_size=n, max_size=n))
    t = draw(st.integers(1, max(1, sum(w) + 1)))
    return ThresholdFunction(tuple(w), t)


class TestTruthTable:
    def test_minterm_order_first_variable_is_msb(self):
        tt = TruthTable.from_function(3, lambda a, b, c: a)
        assert tt.onset() == [4, 5, 6, 7]

    def test_hex_round_trip(self):
        tt = HEAVY_T7.truth_table()
        assert TruthTable.from_hex(5, tt.hex()) == tt

    def test_rejects_bad_arity(self):
        with pytest.raises(ValueError):
            TruthTable(6, 0)
        with pytest.raises(ValueError):
            TruthTable(0, 0)

    def test_rejects_oversized_bits(self):
        with pytest.raises(ValueError):
            TruthTable(1, 0b100)

    @given(truth_tables(), st.data())
    def test_transform_inverse_is_identity(self, tt, data):
        t = data.draw(transforms(tt.arity))
        assert tt.transform(t).transform(t.inverse()) == tt

    def test_support_drops_degenerate_variable(self):
        tt = TruthTable.from_function(3, lambda a, b, c: a and c)
        assert tt.support() == (0, 2)
        assert tt.restrict((0, 2)) == AND2


class TestEvaluate:
    def test_maj3_110(self):
        assert evaluate(ThresholdFunction((1, 1, 1), 2), (1, 1, 0)) == 1

    def test_single_dominant_input_function(self):
        assert evaluate(ThresholdFunction.parse("[4,1,1,1,1;5]"), (1, 0, 0, 0, 1)) == 1

    def test_two_heavy_inputs_function(self):
        assert evaluate(ThresholdFunction.parse("[3,3,2,1,1;8]"), (1, 1, 1, 0, 0)) == 1

    def test_arity_mismatch(self):
        with pytest.raises(ValueError):
            evaluate(ThresholdFunction((1, 1), 2), (1, 1, 1))

    def test_minterm_index_form(self):
        assert evaluate(ThresholdFunction((1, 1, 1), 2), 0b110) == 1
        assert evaluate(ThresholdFunction((1, 1, 1), 2), 0b100) == 0

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            ThresholdFunction((1, -1), 1)


class TestDetect:
    def test_xor_rejected(self):
        assert detect_threshold(XOR2) is None

    def test_and2(self):
        assert detect_threshold(AND2) == ThresholdFunction((1, 1), 2)

    def test_sop_form_of_heavy_function(self):
        tt = TruthTable.from_function(5, sop_heavy_t7)
        tf = detect_threshold(tt)
        assert tf is not None
        assert tf.truth_table() == tt
        assert tf == HEAVY_T7

    def test_constants_rejected(self):
        assert detect_threshold(TruthTable(3, 0)) is None
        assert detect_threshold(TruthTable(3, 0xFF)) is None

    def test_negative_unate_rejected(self):
        assert detect_threshold(AND2.complement()) is None

    @settings(max_examples=200, deadline=None)
    @given(truth_tables(max_arity=4))
    def test_accepted_tables_are_reproduced_and_positive_unate(self, tt):
        tf = detect_threshold(tt)
        if tf is None:
            return
        assert tf.truth_table() == tt
        assert all(tt.is_positive_unate(i) for i in range(tt.arity))

    @settings(max_examples=100, deadline=None)
    @given(threshold_functions())
    def test_every_threshold_table_detected(self, tf):
        tt = tf.truth_table()
        if tt.is_constant():
            return
        found = detect_threshold(tt)
        assert found is not None and found.truth_table() == tt


class TestMinimize:
    def test_maj3(self):
        assert minimize_weights(ThresholdFunction((3, 3, 3), 6)) == ThresholdFunction((1, 1, 1), 2)

    def test_scaled_and2(self):
        assert minimize_weights(ThresholdFunction((2, 2), 4)) == ThresholdFunction((1, 1), 2)

    def test_five_input_minimal_and_matches_bounded_search(self):
        tf = minimize_weights(ThresholdFunction((8, 6, 4, 4, 2), 14))
        assert tf == HEAVY_T7
        assert tf.weight_sum() == minimal_cost(HEAVY_T7.truth_table().bits, 5)

    @settings(max_examples=60, deadline=None)
    @given(threshold_functions(max_arity=4), st.integers(1, 4))
    def test_scaling_invariance(self, tf, k):
        if tf.truth_table().is_constant():
            return
        scaled = ThresholdFunction(tuple(k * w for w in tf.weights), k * tf.threshold)
        assert minimize_weights(scaled) == minimize_weights(tf)

    @settings(max_examples=60, deadline=None)
    @given(threshold_functions(max_arity=4))
    def test_minimal_weight_sum_matches_oracle(self, tf):
        tt = tf.truth_table()
        if tt.is_constant():
            return
        m = minimize_weights(tf)
        assert m.truth_table() == tt
        assert m.weight_sum() == minimal_cost(tt.bits, tt.arity)


class TestChow:
    def test_maj3(self):
        assert chow_signature(MAJ3) == (4, (3, 3, 3))

    def test_and2(self):
        assert chow_signature(AND2) == (1, (1, 1))

    def test_buffer(self):
        assert chow_signature(TruthTable(1, 0b10)) == (1, (1,))

    @given(truth_tables(), st.data())
    def test_permutation_invariance(self, tt, data):
        perm = tuple(data.draw(st.permutations(range(tt.arity))))
        assert chow_signature(tt.permute(perm)) == chow_signature(tt)


class TestLibrary:
    def test_arity_one_and_two(self):
        assert [str(c.function) for c in enumerate_library(1)] == ["[1;1]"]
        lib2 = enumerate_library(2)
        assert sorted(str(c.function) for c in lib2) == ["[1,1;1]", "[1,1;2]", "[1;1]"]

    def test_arity_two_against_monotone_enumeration(self):
        # permutation classes of non-constant monotone 2-input tables, by brute force
        classes = set()
        for bits in monotone_tables(2):
            tt = TruthTable(2, bits)
            sup = tt.support()
            classes.add(min(tt.restrict(sup).permute(p).bits for p in itertools.permutations(range(len(sup)))) + (len(sup) << 8))
        assert len(enumerate_library(2)) == len(classes) == 3

    def test_buffer_is_index_zero(self, library):
        assert str(library[0].function) == "[1;1]"
        assert library[0].class_index == 0

    def test_round_trip_evaluation(self, library):
        for c in library:
            assert c.function.truth_table() == c.canonical_tt
            for m in range(c.canonical_tt.size):
                assert evaluate(c.function, m) == c.canonical_tt[m]

    def test_entries_are_distinct_and_full_support(self, library):
        keys = {(c.arity, c.canonical_tt.bits) for c in library}
        assert len(keys) == len(library)
        assert all(len(c.canonical_tt.support()) == c.arity for c in library)

    def test_rejects_arity_six(self):
        with pytest.raises(ValueError):
            enumerate_library(6)

    def test_file_round_trip(self, library, tmp_path):
        path = tmp_path / "lib.tsv"
        write_library(library, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 117
        idx, n, ws, t, hx = lines[0].split("\t")
        assert (idx, n, ws, t) == ("0", "1", "1", "1")
        again = read_library(path)
        assert [c.canonical_tt for c in again] == [c.canonical_tt for c in library]


class TestNpn:
    def test_identity_on_canonical(self, library):
        heavy = library.find(HEAVY_T7)
        got, t = npn_canonicalize(heavy.canonical_tt, library)
        assert got.class_index == heavy.class_index
        assert t == NpnTransform.identity(5)

    def test_negated_inputs_variant_inverts_a_and_c(self, library):
        got, t = npn_canonicalize(NEG_INPUTS, library)
        assert got.function == HEAVY_T7
        assert t.negated_inputs() == (0, 2)
        assert not t.output_negated

    def test_output_negated_variant_lands_on_dual_class(self, library):
        got, t = npn_canonicalize(NEG_OUTPUT, library)
        assert got.function == HEAVY_T6
        assert t.inverter_count() == 3

    def test_match_transform_reproduces_class(self, library):
        for tt in (NEG_INPUTS, NEG_OUTPUT):
            m = match_library(tt, library)
            assert tt.restrict(m.support).transform(m.transform) == m.cls.canonical_tt

    @settings(max_examples=80, deadline=None)
    @given(st.sampled_from(range(117)), st.data())
    def test_class_invariant_under_random_transform(self, library, idx, data):
        cls = library[idx]
        t = data.draw(transforms(cls.arity))
        moved = cls.canonical_tt.transform(t)
        got, back = npn_canonicalize(moved, library)
        assert got.npn_key == npn_canonicalize(cls.canonical_tt)[0].npn_key
        # the returned transform maps the moved table onto the returned class
        assert moved.restrict(moved.support()).transform(back) == got.canonical_tt

    @settings(max_examples=60, deadline=None)
    @given(truth_tables(max_arity=4), st.data())
    def test_npn_key_idempotent_and_invariant(self, tt, data):
        key = npn_canonicalize(tt)[0].npn_key
        assert npn_canonicalize(key)[0].npn_key == key
        t = data.draw(transforms(tt.arity))
        assert npn_canonicalize(tt.transform(t))[0].npn_key == key


def test_library_weights_nonincreasing(library):
    for c in library:
        w = np.array(c.function.weights)
        assert (np.diff(w) <= 0).all()
