"""Memristor-based stochastic number encoder (SNE) model.

The encoder is characterised by two fitted logistic transfer curves: the
probability of an uncorrelated 1 as a function of the input pulse amplitude,
and the probability of a negatively correlated 1 as a function of the
comparator reference. Cycle-to-cycle drift of the switching threshold is an
Ornstein-Uhlenbeck process.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit, logit

from .bitstream import BitStream, EntropySource

__all__ = [
    "DeviceState",
    "MemristorParams",
    "SneTransfer",
    "load_params",
    "ou_step",
    "ou_stationary_std",
    "ou_trajectory",
    "p_negative",
    "p_positive",
    "p_uncorrelated",
    "sample_switching_voltages",
    "sne_sample_pair",
    "sne_sample_uncorrelated",
    "v_in_for",
    "v_ref_for",
]

OU_SCHEMES = ("exact", "euler")


@dataclass(frozen=True)
class MemristorParams:
    theta: float = 0.306
    mu: float = 0.729
    sigma: float = 0.284
    vth_mean: float = 0.78
    vth_std: float = 0.39
    vhold_mean: float = 0.23
    vhold_std: float = 0.18
    r_on: float | None = None
    r_off: float | None = None

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.sigma < 0 or self.vth_std < 0 or self.vhold_std < 0:
            raise ValueError("noise and spread parameters must be non-negative")
        if (self.r_on is None) != (self.r_off is None):
            raise ValueError("r_on and r_off must be given together")
        if self.r_on is not None and not (self.r_on > 0 and self.r_off / self.r_on >= 1):
            raise ValueError(f"need r_off/r_on >= 1, got r_on={self.r_on}, r_off={self.r_off}")


@dataclass(frozen=True)
class SneTransfer:
    k_in: float = 38.9
    v0_in: float = 1.34
    k_ref: float = 63.1
    v0_ref: float = 0.19

    def __post_init__(self):
        if not (self.k_in > 0 and self.k_ref > 0):
            raise ValueError("sigmoid slopes must be positive")


@dataclass(frozen=True)
class DeviceState:
    vth_current: float
    cycle_index: int = 0

    def __post_init__(self):
        if self.cycle_index < 0:
            raise ValueError("cycle_index must be non-negative")


def load_params(path) -> tuple[MemristorParams, SneTransfer]:
    """Read device constants from JSON or ``key = value`` lines.

    Missing keys keep their default values; unknown keys are an error.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = None if value.lower() in ("none", "") else float(value)
    m_keys = {f.name for f in fields(MemristorParams)}
    t_keys = {f.name for f in fields(SneTransfer)}
    unknown = set(raw) - m_keys - t_keys
    if unknown:
        raise ValueError(f"unknown device parameters: {sorted(unknown)}")
    params = MemristorParams(**{k: v for k, v in raw.items() if k in m_keys})
    transfer = SneTransfer(**{k: v for k, v in raw.items() if k in t_keys})
    return params, transfer


def params_dict(params: MemristorParams, transfer: SneTransfer) -> dict:
    return {**asdict(params), **asdict(transfer)}


# --- transfer curves ---------------------------------------------------------

def p_uncorrelated(v_in, t: SneTransfer = SneTransfer()):
    """Probability of a 1 from an uncorrelated SNE driven at ``v_in`` volts."""
    return expit(t.k_in * (np.asarray(v_in, dtype=np.float64) - t.v0_in))[()]


def v_in_for(p, t: SneTransfer = SneTransfer()):
    p = np.asarray(p, dtype=np.float64)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError(f"no finite input voltage encodes p={p}; need 0 < p < 1")
    return (t.v0_in + logit(p) / t.k_in)[()]


def p_negative(v_ref, t: SneTransfer = SneTransfer()):
    return expit(t.k_ref * (np.asarray(v_ref, dtype=np.float64) - t.v0_ref))[()]


def p_positive(v_ref, t: SneTransfer = SneTransfer()):
    return (1.0 - p_negative(v_ref, t))[()]


def v_ref_for(p_pos, t: SneTransfer = SneTransfer()):
    """Comparator reference giving a positively correlated output of ``p_pos``.

    0 and 1 map to +inf and -inf (a comparator that never or always fires).
    """
    p = np.asarray(p_pos, dtype=np.float64)
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError(f"target probability outside [0, 1]: {p_pos}")
    with np.errstate(divide="ignore"):
        return (t.v0_ref + logit(1.0 - p) / t.k_ref)[()]


def vmem_samples(shape, t: SneTransfer, rng: np.random.Generator) -> np.ndarray:
    """Memristor output voltage, logistic with location v0_ref and scale 1/k_ref."""
    return t.v0_ref + rng.logistic(0.0, 1.0, shape) / t.k_ref


# --- Ornstein-Uhlenbeck threshold drift --------------------------------------

def _ou_coefficients(params: MemristorParams, scheme: str) -> tuple[float, float]:
    """(decay, noise_scale) of the one-cycle AR(1) update about mu."""
    if scheme == "euler":
        return 1.0 - params.theta, params.sigma
    if scheme == "exact":
        decay = math.exp(-params.theta)
        return decay, params.sigma * math.sqrt(-math.expm1(-2.0 * params.theta) / (2.0 * params.theta))
    raise ValueError(f"unknown OU scheme {scheme!r}; expected one of {OU_SCHEMES}")


def ou_step(state: DeviceState, params: MemristorParams, rng: np.random.Generator,
            scheme: str = "exact") -> DeviceState:
    """Advance the threshold voltage by one switching cycle.

    ``scheme="euler"`` is the Euler-Maruyama update with unit step,
    ``vth + theta*(mu - vth) + sigma*z``. ``"exact"`` samples the OU
    transition density over one cycle, whose stationary spread is exactly
    ``sigma / sqrt(2*theta)``; Euler at unit step inflates it to
    ``sigma / sqrt(2*theta - theta**2)``.
    """
    decay, scale = _ou_coefficients(params, scheme)
    z = rng.standard_normal()
    if scheme == "euler":
        vth = state.vth_current + params.theta * (params.mu - state.vth_current) + params.sigma * z
    else:
        vth = params.mu + (state.vth_current - params.mu) * decay + scale * z
    return DeviceState(vth, state.cycle_index + 1)


def ou_trajectory(n_cycles: int, params: MemristorParams, rng: np.random.Generator,
                  v0: float | None = None, scheme: str = "exact") -> np.ndarray:
    """Threshold voltage over ``n_cycles`` cycles, starting at ``v0`` (default mu).

    Element 0 is the starting value; element k is the state after k steps.
    Consumes the same normals, in the same order, as repeated ``ou_step``.
    """
    if n_cycles < 1:
        raise ValueError("need at least one cycle")
    decay, scale = _ou_coefficients(params, scheme)
    start = params.mu if v0 is None else float(v0)
    z = rng.standard_normal(n_cycles - 1)
    # deviation d_{k+1} = decay * d_k + scale * z_k
    dev, _ = lfilter([scale], [1.0, -decay], z, zi=[decay * (start - params.mu)])
    return np.concatenate(([start], params.mu + dev))


def ou_stationary_std(params: MemristorParams, scheme: str = "exact") -> float:
    decay, scale = _ou_coefficients(params, scheme)
    return scale / math.sqrt(1.0 - decay * decay)


def sample_switching_voltages(n_cycles: int, params: MemristorParams,
                              rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian cycle-to-cycle V_th and V_hold draws from the DC-sweep statistics."""
    vth = rng.normal(params.vth_mean, params.vth_std, n_cycles)
    vhold = rng.normal(params.vhold_mean, params.vhold_std, n_cycles)
    return vth, vhold


# --- SNE sampling -------------------------------------------------------------

def sne_sample_pair(target_pa, target_pb, n: int, params: MemristorParams = MemristorParams(),
                    t: SneTransfer = SneTransfer(), src: EntropySource | None = None
                    ) -> tuple[BitStream, BitStream]:
    """Positively correlated pair from two comparators on one memristor output.

    Each cycle draws one V_mem; stream x fires when V_mem exceeds the
    reference chosen so that ``p_positive(v_ref_x)`` equals its target.
    """
    pa = np.asarray(target_pa, dtype=np.float64)
    pb = np.asarray(target_pb, dtype=np.float64)
    if np.any((pa <= 0) | (pa >= 1) | (pb <= 0) | (pb >= 1)):
        raise ValueError(f"targets must lie strictly inside (0, 1), got {target_pa}, {target_pb}")
    if src is None:
        raise ValueError("an entropy source is required")
    return _comparator_pair(pa, pb, n, t, src.generator())


def _comparator_pair(pa, pb, n, t, rng) -> tuple[BitStream, BitStream]:
    shape = np.broadcast_shapes(np.shape(pa), np.shape(pb))
    v_a = np.broadcast_to(v_ref_for(pa, t), shape)[..., None]
    v_b = np.broadcast_to(v_ref_for(pb, t), shape)[..., None]
    vmem = vmem_samples(shape + (int(n),), t, rng)
    return BitStream(vmem > v_a), BitStream(vmem > v_b)


def sne_sample_uncorrelated(v_in: float, n: int, params: MemristorParams = MemristorParams(),
                            t: SneTransfer = SneTransfer(), src: EntropySource | None = None,
                            mode: str = "iid", scheme: str = "exact") -> BitStream:
    """Uncorrelated SNE output for a pulse train of amplitude ``v_in``.

    ``mode="iid"`` draws independent Bernoulli bits at the fitted transfer
    probability. ``mode="ou"`` fires when ``v_in`` exceeds an OU-drifting
    threshold, giving a temporally correlated stream.
    """
    if src is None:
        raise ValueError("an entropy source is required")
    if n < 1:
        raise ValueError("bit length must be positive")
    rng = src.generator()
    if mode == "iid":
        p = p_uncorrelated(v_in, t)
        return BitStream(rng.random(int(n)) < p)
    if mode == "ou":
        vth = ou_trajectory(int(n), params, rng, scheme=scheme)
        return BitStream(v_in > vth)
    raise ValueError(f"unknown SNE mode {mode!r}; expected 'iid' or 'ou'")
