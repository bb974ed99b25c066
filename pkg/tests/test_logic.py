import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochedge.bitstream import BitStream, CorrelationMode, EntropySource, FlipSpec, decode, encode, encode_pair, inject_flips
from stochedge.logic import GateKind, VerificationReport, gate_apply, gate_mux, hold_select, oracle, verify_gate

N = 100_000
TWO_INPUT = [GateKind.AND, GateKind.OR, GateKind.XOR]


def bits(text):
    return BitStream.from_string(text)


class TestGateApply:
    def test_truth_tables(self):
        a, b = bits("0011"), bits("0101")
        assert str(gate_apply("and", a, b)) == "0001"
        assert str(gate_apply("or", a, b)) == "0111"
        assert str(gate_apply("xor", a, b)) == "0110"

    def test_multiplier(self):
        a, b = encode_pair(4 / 8, 6 / 8, N, "uncorrelated", EntropySource(1))
        assert abs(decode(gate_apply(GateKind.AND, a, b)) - 0.375) <= 0.01

    def test_worked_8bit_example_is_exact(self):
        # 8-bit worked example: 4/8 AND 6/8 with overlapping 1s placed to give 3/8.
        a, b = bits("10101010"), bits("11101101")
        assert decode(a) == 4 / 8 and decode(b) == 6 / 8
        assert decode(gate_apply("and", a, b)) == 3 / 8

    def test_xor_self_is_zero(self):
        a = encode(0.6, 512, EntropySource(2))
        assert not gate_apply("xor", a, a).bits.any()

    def test_negative_or_saturates(self):
        a, b = encode_pair(0.6, 0.7, N, "negative", EntropySource(3))
        assert abs(decode(gate_apply("or", a, b)) - 1.0) <= 0.01

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            gate_apply("and", bits("010"), bits("0101"))

    def test_mux_rejected(self):
        with pytest.raises(ValueError):
            gate_apply("mux", bits("01"), bits("01"))

    @pytest.mark.parametrize("kind", TWO_INPUT)
    def test_commutative(self, kind):
        a, b = encode_pair(0.3, 0.8, 1000, "uncorrelated", EntropySource(4))
        assert gate_apply(kind, a, b) == gate_apply(kind, b, a)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 200), st.data())
    def test_bitwise_purity(self, n, data):
        # Splicing two input pairs at a cut point splices the outputs at the same cut.
        cut = data.draw(st.integers(1, n - 1))
        kind = data.draw(st.sampled_from(TWO_INPUT))
        seed = data.draw(st.integers(0, 2**32))
        a1, b1 = encode_pair(0.5, 0.5, n, "uncorrelated", EntropySource(seed, 1))
        a2, b2 = encode_pair(0.5, 0.5, n, "uncorrelated", EntropySource(seed, 2))
        sa = BitStream(np.concatenate([a1.bits[:cut], a2.bits[cut:]]))
        sb = BitStream(np.concatenate([b1.bits[:cut], b2.bits[cut:]]))
        out = gate_apply(kind, sa, sb).bits
        assert np.array_equal(out[:cut], gate_apply(kind, a1, b1).bits[:cut])
        assert np.array_equal(out[cut:], gate_apply(kind, a2, b2).bits[cut:])

    @pytest.mark.parametrize("rate", [0.1, 0.3, 0.5])
    def test_xor_with_shared_mask_flips_unchanged(self, rate):
        a, b = encode_pair(0.9, 0.35, 4096, "positive", EntropySource(5))
        fa, fb = inject_flips((a, b), FlipSpec("shared-mask", rate), EntropySource(6))
        assert gate_apply("xor", fa, fb) == gate_apply("xor", a, b)


class TestMux:
    def test_hold_select(self):
        assert hold_select(np.array([1, 0, 1], dtype=np.uint8), 5).tolist() == [1, 1, 0, 0, 1]
        assert hold_select(np.array([1, 0], dtype=np.uint8), 4).tolist() == [1, 1, 0, 0]

    def test_hold_select_wrong_length(self):
        with pytest.raises(ValueError):
            hold_select(np.zeros(4, dtype=np.uint8), 5)

    def test_truth(self):
        out = gate_mux(bits("0011"), bits("0101"), bits("01"))
        assert str(out) == "0001"

    def test_mean_filter(self):
        a, b = encode_pair(6 / 8, 4 / 8, N, "uncorrelated", EntropySource(7, "ab"))
        s = encode(0.5, N // 2, EntropySource(7, "s"))
        assert abs(decode(gate_mux(a, b, s)) - 0.625) <= 0.01

    def test_zero_select_passes_a(self):
        a, b = encode_pair(0.3, 0.9, 101, "uncorrelated", EntropySource(8))
        assert gate_mux(a, b, BitStream(np.zeros(51, dtype=np.uint8))) == a

    def test_correlated_select_breaks_mean_filter(self):
        # Select tracks b: each held select bit is b's bit at the start of its two-cycle slot.
        a, b = encode_pair(6 / 8, 4 / 8, N, "uncorrelated", EntropySource(9))
        s = BitStream(b.bits[0::2])
        measured = decode(gate_mux(a, b, s))
        report = VerificationReport(GateKind.MUX, CorrelationMode.UNCORRELATED, 6 / 8, 4 / 8, 0.5,
                                    predicted=0.625, measured=measured, n=N)
        assert report.abs_error > 0.05

    def test_select_length_checked(self):
        with pytest.raises(ValueError):
            gate_mux(bits("0101"), bits("0101"), bits("0101"))

    @pytest.mark.parametrize("ps", [0.25, 0.5, 0.75])
    def test_linearity(self, ps):
        r = verify_gate("mux", "uncorrelated", 0.8, 0.3, N, EntropySource(10, repr(ps)), ps=ps)
        assert r.predicted == pytest.approx((1 - ps) * 0.8 + ps * 0.3)
        assert r.abs_error < 0.01


class TestOracle:
    def test_xor_positive(self):
        assert oracle("xor", "positive", 0.7, 0.2) == pytest.approx(0.5)

    def test_and_annihilator(self):
        for pb in (0.0, 0.3, 1.0):
            assert oracle("and", "uncorrelated", 0.0, pb) == 0.0

    def test_xor_negative_piecewise(self):
        assert oracle("xor", "negative", 0.8, 0.5) == pytest.approx(0.7)
        assert oracle("xor", "negative", 0.3, 0.5) == pytest.approx(0.8)

    def test_table(self):
        pa, pb = 0.6, 0.7
        expected = {
            ("and", "uncorrelated"): 0.42, ("and", "positive"): 0.6, ("and", "negative"): 0.3,
            ("or", "uncorrelated"): 0.88, ("or", "positive"): 0.7, ("or", "negative"): 1.0,
            ("xor", "uncorrelated"): 0.46, ("xor", "positive"): 0.1, ("xor", "negative"): 0.7,
        }
        for (kind, mode), value in expected.items():
            assert oracle(kind, mode, pa, pb) == pytest.approx(value), (kind, mode)

    def test_mux(self):
        assert oracle("mux", "uncorrelated", 0.75, 0.5, ps=0.5) == pytest.approx(0.625)

    def test_mux_requires_ps(self):
        with pytest.raises(ValueError):
            oracle("mux", "uncorrelated", 0.5, 0.5)

    @pytest.mark.parametrize("select_mode", ["positive", "negative"])
    def test_mux_correlated_select_undefined(self, select_mode):
        with pytest.raises(ValueError):
            oracle("mux", "uncorrelated", 0.5, 0.5, ps=0.5, select_mode=select_mode)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            oracle("and", "positive", 1.2, 0.5)

    @settings(max_examples=100, deadline=None)
    @given(st.sampled_from(TWO_INPUT), st.sampled_from(list(CorrelationMode)), st.floats(0, 1), st.floats(0, 1))
    def test_commutative_and_bounded(self, kind, mode, pa, pb):
        v = oracle(kind, mode, pa, pb)
        assert v == pytest.approx(oracle(kind, mode, pb, pa), abs=1e-15)
        assert -1e-15 <= v <= 1 + 1e-15

    def test_oracle_against_enumeration(self):
        # Independent check: enumerate every cycle of a length-L discrete construction.
        L = 20
        for ka, kb in itertools.product(range(L + 1), repeat=2):
            pa, pb = ka / L, kb / L
            a = np.arange(L) < ka
            pos_b = np.arange(L) < kb
            neg_b = np.arange(L) >= L - kb
            assert oracle("and", "positive", pa, pb) == pytest.approx(np.mean(a & pos_b))
            assert oracle("or", "positive", pa, pb) == pytest.approx(np.mean(a | pos_b))
            assert oracle("xor", "positive", pa, pb) == pytest.approx(np.mean(a ^ pos_b))
            assert oracle("and", "negative", pa, pb) == pytest.approx(np.mean(a & neg_b))
            assert oracle("or", "negative", pa, pb) == pytest.approx(np.mean(a | neg_b))
            assert oracle("xor", "negative", pa, pb) == pytest.approx(np.mean(a ^ neg_b))
            # all L*L cycle pairs of two independent streams
            ua, ub = np.meshgrid(a, pos_b)
            assert oracle("and", "uncorrelated", pa, pb) == pytest.approx(np.mean(ua & ub))
            assert oracle("or", "uncorrelated", pa, pb) == pytest.approx(np.mean(ua | ub))
            assert oracle("xor", "uncorrelated", pa, pb) == pytest.approx(np.mean(ua ^ ub))


class TestVerifyGate:
    def test_positive_and(self):
        r = verify_gate("and", "positive", 0.6, 0.4, N, EntropySource(11))
        assert r.abs_error < 0.01 and r.ps is None

    @pytest.mark.parametrize("kind", list(GateKind))
    @pytest.mark.parametrize("mode", list(CorrelationMode))
    def test_zero_inputs(self, kind, mode):
        self_err = verify_gate(kind, mode, 0.0, 0.0, 1000, EntropySource(12)).abs_error
        assert self_err == 0.0

    def test_report_dict(self):
        d = verify_gate("xor", "positive", 0.7, 0.2, 1000, EntropySource(13)).to_dict()
        assert d["gate"] == "xor" and d["mode"] == "positive"
        assert d["abs_error"] == pytest.approx(abs(d["predicted"] - d["measured"]))

    def test_deterministic(self):
        a = verify_gate("mux", "negative", 0.2, 0.9, 5000, EntropySource(14))
        b = verify_gate("mux", "negative", 0.2, 0.9, 5000, EntropySource(14))
        assert a == b

    def test_coarse_grid(self):
        worst = 0.0
        for kind in GateKind:
            for mode in CorrelationMode:
                for pa in (0.1, 0.5, 0.9):
                    for pb in (0.2, 0.6):
                        r = verify_gate(kind, mode, pa, pb, N, EntropySource(15, (kind.value, mode.value, repr(pa), repr(pb))))
                        worst = max(worst, r.abs_error)
        assert worst < 0.01
