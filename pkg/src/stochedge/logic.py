"""Stochastic logic gates and their closed-form output probabilities."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .bitstream import BitStream, CorrelationMode, EntropySource, decode, encode, encode_pair

__all__ = [
    "GateKind",
    "VerificationReport",
    "gate_apply",
    "gate_mux",
    "hold_select",
    "oracle",
    "verify_gate",
]


class GateKind(str, enum.Enum):
    AND = "and"
    OR = "or"
    XOR = "xor"
    MUX = "mux"


_BITWISE = {
    GateKind.AND: np.bitwise_and,
    GateKind.OR: np.bitwise_or,
    GateKind.XOR: np.bitwise_xor,
}


def _same_shape(*streams: BitStream) -> None:
    shapes = {s.bits.shape for s in streams}
    if len(shapes) != 1:
        raise ValueError(f"stream lengths differ: {sorted(shapes)}")


def gate_apply(kind: GateKind, a: BitStream, b: BitStream) -> BitStream:
    kind = GateKind(kind)
    if kind is GateKind.MUX:
        raise ValueError("MUX needs a select stream; use gate_mux")
    _same_shape(a, b)
    return BitStream(_BITWISE[kind](a.bits, b.bits))


def hold_select(select: np.ndarray, n: int) -> np.ndarray:
    """Stretch a half-rate select to ``n`` input cycles, holding each bit twice."""
    need = (n + 1) // 2
    if select.shape[-1] != need:
        raise ValueError(f"half-rate select for {n} input cycles needs {need} bits, got {select.shape[-1]}")
    return np.repeat(select, 2, axis=-1)[..., :n]


def gate_mux(a: BitStream, b: BitStream, select: BitStream) -> BitStream:
    """2:1 multiplexer: ``b`` where the held select bit is 1, else ``a``.

    ``select`` runs at half the input rate (``ceil(n/2)`` bits).
    """
    _same_shape(a, b)
    s = hold_select(select.bits, a.n)
    if s.shape != a.bits.shape:
        raise ValueError(f"select batch shape {select.bits.shape[:-1]} does not match inputs {a.bits.shape[:-1]}")
    return BitStream(np.where(s == 1, b.bits, a.bits))


def oracle(kind: GateKind, mode: CorrelationMode, pa: float, pb: float,
           ps: float | None = None, select_mode: CorrelationMode = CorrelationMode.UNCORRELATED) -> float:
    """Expected output probability of a stochastic gate.

    MUX is only defined for a select uncorrelated with its inputs; any other
    ``select_mode`` raises.
    """
    kind = GateKind(kind)
    mode = CorrelationMode(mode)
    for name, p in (("pa", pa), ("pb", pb)) + ((("ps", ps),) if ps is not None else ()):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {p}")
    if kind is GateKind.MUX:
        if ps is None:
            raise ValueError("MUX oracle needs a select probability ps")
        if CorrelationMode(select_mode) is not CorrelationMode.UNCORRELATED:
            raise ValueError("MUX output is undefined for a select correlated with its inputs")
        return (1.0 - ps) * pa + ps * pb
    if mode is CorrelationMode.UNCORRELATED:
        return {
            GateKind.AND: pa * pb,
            GateKind.OR: pa + pb - pa * pb,
            GateKind.XOR: pa + pb - 2.0 * pa * pb,
        }[kind]
    if mode is CorrelationMode.POSITIVE:
        return {
            GateKind.AND: min(pa, pb),
            GateKind.OR: max(pa, pb),
            GateKind.XOR: abs(pa - pb),
        }[kind]
    total = pa + pb
    return {
        GateKind.AND: max(total - 1.0, 0.0),
        GateKind.OR: min(1.0, total),
        GateKind.XOR: total if total <= 1.0 else 2.0 - total,
    }[kind]


@dataclass(frozen=True)
class VerificationReport:
    gate: GateKind
    mode: CorrelationMode
    pa: float
    pb: float
    ps: float | None
    predicted: float
    measured: float
    n: int

    @property
    def abs_error(self) -> float:
        return abs(self.predicted - self.measured)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gate"] = self.gate.value
        d["mode"] = self.mode.value
        d["abs_error"] = self.abs_error
        return d


def verify_gate(kind: GateKind, mode: CorrelationMode, pa: float, pb: float, n: int,
                src: EntropySource, ps: float = 0.5) -> VerificationReport:
    """Encode, apply the gate, and compare the decoded output to the oracle."""
    kind = GateKind(kind)
    mode = CorrelationMode(mode)
    a, b = encode_pair(pa, pb, n, mode, src.child("inputs"))
    if kind is GateKind.MUX:
        select = encode(ps, (n + 1) // 2, src.child("select"))
        out = gate_mux(a, b, select)
    else:
        ps = None
        out = gate_apply(kind, a, b)
    return VerificationReport(
        gate=kind, mode=mode, pa=float(pa), pb=float(pb), ps=ps,
        predicted=oracle(kind, mode, pa, pb, ps), measured=decode(out), n=int(n),
    )
