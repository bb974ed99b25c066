"""Stochastic numbers: encoding, decoding, correlation and fault injection.

A stochastic number is a bitstream whose value is the fraction of 1s it
carries (unipolar format). Streams are held as ``uint8`` arrays of 0/1 and
may be batched: the last axis is always the clock-cycle axis.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BitStream",
    "CorrelationMode",
    "EntropySource",
    "FlipMode",
    "FlipSpec",
    "StreamFormatError",
    "complement",
    "decode",
    "encode",
    "encode_pair",
    "inject_flips",
    "pack_streams",
    "scc",
    "streams_from_text",
    "streams_to_text",
    "unpack_streams",
]


class StreamFormatError(ValueError):
    """Raised when a serialized stream cannot be parsed."""


class CorrelationMode(str, enum.Enum):
    UNCORRELATED = "uncorrelated"
    POSITIVE = "positive"
    NEGATIVE = "negative"


class FlipMode(str, enum.Enum):
    INDEPENDENT = "independent"
    SHARED_MASK = "shared-mask"
    EXACT_COUNT = "exact-count"


def _label_word(part: int | str) -> int:
    if isinstance(part, str):
        return _string_word(part)
    if isinstance(part, (bool, np.bool_)):
        raise TypeError("boolean labels are ambiguous")
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"integer label parts must be non-negative, got {part}")
        return int(part)
    raise TypeError(f"label parts must be str or int, got {type(part).__name__}")


@functools.lru_cache(maxsize=1024)
def _string_word(part: str) -> int:
    digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
    # Offset keeps string words from colliding with small integer parts.
    return (1 << 64) + int.from_bytes(digest, "big")


@dataclass(frozen=True)
class EntropySource:
    """Seeded stand-in for the memristor's physical entropy.

    ``(seed, label)`` fully determines the uniform sequence; ``child()``
    extends the label to derive an independent named substream.
    """

    seed: int
    label: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if isinstance(self.label, (str, int)):
            object.__setattr__(self, "label", (self.label,))
        else:
            object.__setattr__(self, "label", tuple(self.label))

    def child(self, *parts: int | str) -> "EntropySource":
        return EntropySource(self.seed, self.label + parts)

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            int(self.seed), spawn_key=tuple(_label_word(p) for p in self.label)
        )

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this substream."""
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def uniforms(self, shape) -> np.ndarray:
        return self.generator().random(shape)

    def substream_generator(self, *parts: int | str) -> np.random.Generator:
        """Same as ``self.child(*parts).generator()`` without building the child."""
        key = tuple(_label_word(p) for p in self.label + parts)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(self.seed), spawn_key=key)))


@dataclass(frozen=True)
class FlipSpec:
    mode: FlipMode
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "mode", FlipMode(self.mode))
        rate = float(self.rate)
        if not 0.0 <= rate <= 0.5:
            raise ValueError(f"flip rate must lie in [0, 0.5], got {self.rate}")
        object.__setattr__(self, "rate", rate)


@dataclass(frozen=True, eq=False)
class BitStream:
    """One stochastic number, or a batch of them along leading axes."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim == 0 or bits.shape[-1] < 1:
            raise ValueError("a bitstream needs at least one cycle")
        if bits.dtype != np.uint8:
            if bits.dtype == bool:
                bits = bits.astype(np.uint8)
            else:
                if not np.isin(bits, (0, 1)).all():
                    raise ValueError("bitstream entries must be 0 or 1")
                bits = bits.astype(np.uint8)
        elif bits.size and bits.max() > 1:
            raise ValueError("bitstream entries must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, text: str) -> "BitStream":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise StreamFormatError(f"not a 0/1 string: {text[:32]!r}")
        return cls(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"))

    @property
    def n(self) -> int:
        return int(self.bits.shape[-1])

    @property
    def value(self):
        return decode(self)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitStream):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __str__(self) -> str:
        if self.bits.ndim != 1:
            return f"BitStream(batch={self.bits.shape[:-1]}, n={self.n})"
        return (self.bits + ord("0")).tobytes().decode("ascii")


def _check_probability(p, name="p") -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return arr


def _check_length(n) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"bit length must be a positive integer, got {n}")
    return int(n)


def encode(p, n: int, src: EntropySource) -> BitStream:
    """Bernoulli(p) stream of ``n`` bits drawn from ``src``.

    ``p`` may be an array, in which case a batch of shape ``p.shape + (n,)``
    is returned.
    """
    p = _check_probability(p)
    n = _check_length(n)
    u = src.uniforms(p.shape + (n,))
    return BitStream(u < p[..., None])


def encode_pair(pa, pb, n: int, mode: CorrelationMode, src: EntropySource) -> tuple[BitStream, BitStream]:
    """Two streams with marginals ``pa``, ``pb`` and the requested correlation.

    Correlated pairs threshold one shared uniform per cycle: positive pairs
    compare it from below for both streams (maximal overlap of 1s), negative
    pairs compare from opposite ends (minimal overlap).
    """
    pa = _check_probability(pa, "pa")
    pb = _check_probability(pb, "pb")
    n = _check_length(n)
    mode = CorrelationMode(mode)
    shape = np.broadcast_shapes(pa.shape, pb.shape)
    pa = np.broadcast_to(pa, shape)[..., None]
    pb = np.broadcast_to(pb, shape)[..., None]
    g = src.generator()
    if mode is CorrelationMode.UNCORRELATED:
        u = g.random((2,) + shape + (n,))
        return BitStream(u[0] < pa), BitStream(u[1] < pb)
    u = g.random(shape + (n,))
    a = u < pa
    if mode is CorrelationMode.POSITIVE:
        b = u < pb
    else:
        b = u >= 1.0 - pb
    return BitStream(a), BitStream(b)


def decode(s: BitStream):
    """Fraction of 1s; a float for a single stream, an array for a batch."""
    if not isinstance(s, BitStream):
        s = BitStream(s)
    value = s.bits.mean(axis=-1, dtype=np.float64)
    return float(value) if s.bits.ndim == 1 else value


def complement(s: BitStream) -> BitStream:
    return BitStream(1 - s.bits)


def scc(a: BitStream, b: BitStream):
    """Stochastic cross-correlation of two equal-length streams.

    +1 for maximal overlap of 1s, -1 for minimal overlap, near 0 for
    independent streams. Degenerate pairs (zero normaliser) give 0.
    """
    if a.bits.shape != b.bits.shape:
        raise ValueError(f"stream shapes differ: {a.bits.shape} vs {b.bits.shape}")
    pa = a.bits.mean(axis=-1, dtype=np.float64)
    pb = b.bits.mean(axis=-1, dtype=np.float64)
    pab = (a.bits & b.bits).mean(axis=-1, dtype=np.float64)
    indep = pa * pb
    delta = pab - indep
    denom = np.where(
        delta > 0,
        np.minimum(pa, pb) - indep,
        indep - np.maximum(pa + pb - 1.0, 0.0),
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, delta / np.where(denom > 0, denom, 1.0), 0.0)
    out = np.clip(out, -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def flip_mask(shape, spec: FlipSpec, rng: np.random.Generator) -> np.ndarray:
    """0/1 mask of the given shape; ``EXACT_COUNT`` sets floor(r*n) per row."""
    n = shape[-1]
    if spec.mode is FlipMode.EXACT_COUNT:
        k = int(np.floor(spec.rate * n))
        mask = np.zeros(shape, dtype=np.uint8)
        if k:
            keys = rng.random(shape)
            idx = np.argsort(keys, axis=-1, kind="stable")[..., :k]
            np.put_along_axis(mask, idx, 1, axis=-1)
        return mask
    return (rng.random(shape) < spec.rate).astype(np.uint8)


def inject_flips(streams, spec: FlipSpec, src: EntropySource):
    """Invert bits of one stream or of a correlated pair.

    With ``SHARED_MASK`` one mask is drawn per cycle and applied to both
    members of the pair, so it cancels inside an XOR of the pair.
    """
    rng = src.generator()
    if isinstance(streams, BitStream):
        if spec.mode is FlipMode.SHARED_MASK:
            raise ValueError("shared-mask flips apply to a pair of streams, got one stream")
        return BitStream(streams.bits ^ flip_mask(streams.bits.shape, spec, rng))
    a, b = streams
    if a.bits.shape != b.bits.shape:
        raise ValueError(f"pair shapes differ: {a.bits.shape} vs {b.bits.shape}")
    if spec.mode is FlipMode.SHARED_MASK:
        mask = flip_mask(a.bits.shape, spec, rng)
        return BitStream(a.bits ^ mask), BitStream(b.bits ^ mask)
    masks = flip_mask((2,) + a.bits.shape, spec, rng)
    return BitStream(a.bits ^ masks[0]), BitStream(b.bits ^ masks[1])


# --- serialization -----------------------------------------------------------

PACKED_MAGIC = b"SNB1"


def streams_to_text(streams: Iterable[BitStream]) -> str:
    return "".join(f"{s}\n" for s in _flatten(streams))


def streams_from_text(text: str) -> list[BitStream]:
    lines = [ln.strip() for ln in text.splitlines()]
    return [BitStream.from_string(ln) for ln in lines if ln]


def pack_streams(streams: Iterable[BitStream]) -> bytes:
    """Binary form: per stream, ``SNB1 <n>\\n`` then MSB-first packed bits."""
    out = io.BytesIO()
    for s in _flatten(streams):
        out.write(PACKED_MAGIC + f" {s.n}\n".encode("ascii"))
        out.write(np.packbits(s.bits, bitorder="big").tobytes())
    return out.getvalue()


def unpack_streams(data: bytes) -> list[BitStream]:
    streams = []
    pos = 0
    while pos < len(data):
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise StreamFormatError(f"unterminated header at byte {pos}")
        parts = data[pos:nl].split()
        if len(parts) != 2 or parts[0] != PACKED_MAGIC or not parts[1].isdigit():
            raise StreamFormatError(f"bad packed-stream header at byte {pos}: {data[pos:nl][:32]!r}")
        n = int(parts[1])
        if n < 1:
            raise StreamFormatError(f"zero-length stream at byte {pos}")
        nbytes = (n + 7) // 8
        start = nl + 1
        if start + nbytes > len(data):
            raise StreamFormatError(f"truncated payload at byte {len(data)}; expected {nbytes} bytes from {start}")
        payload = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=start)
        bits = np.unpackbits(payload, bitorder="big")
        if bits[n:].any():
            raise StreamFormatError(f"nonzero pad bits in stream at byte {pos}")
        streams.append(BitStream(bits[:n]))
        pos = start + nbytes
    return streams


def _flatten(streams) -> Sequence[BitStream]:
    if isinstance(streams, BitStream):
        streams = [streams]
    flat = []
    for s in streams:
        if s.bits.ndim == 1:
            flat.append(s)
        else:
            flat.extend(BitStream(row) for row in s.bits.reshape(-1, s.n))
    return flat
