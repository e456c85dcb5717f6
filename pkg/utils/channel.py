"""Synthetic acid/base tube channel.

Injection schedule -> net ion concentration (linear dispersion) -> pH (water
autoionization) -> probe noise -> 10-bit ADC.
"""
import dataclasses
import enum
import functools
import hashlib
import json
import logging
import math

import numpy as np
import pandas as pd

from .errors import InvalidConfig, InvalidSchedule
from .io_utils import read_csv, write_csv

logger = logging.getLogger(__name__)

KW = 1e-14


class Polarity(enum.IntEnum):
    ACID = 1
    BASE = -1


@dataclasses.dataclass(frozen=True)
class ChannelConfig:
    transit_mean_s: float = 0.6
    dispersion_shape: float = 3.0
    pulse_amplitude_mol_per_l: float = 2.5e-4
    baseline_ph: float = 7.0
    noise_std_ph: float = 0.02
    sample_rate_hz: float = 200.0
    adc_bits: int = 10
    adc_range_ph: tuple = (0.0, 14.0)
    # kernel support, in multiples of transit_mean_s
    kernel_span: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "adc_range_ph", tuple(float(v) for v in self.adc_range_ph))
        if self.transit_mean_s <= 0:
            raise InvalidConfig("transit_mean_s must be > 0")
        if self.dispersion_shape <= 0:
            raise InvalidConfig("dispersion_shape must be > 0")
        if self.sample_rate_hz <= 0:
            raise InvalidConfig("sample_rate_hz must be > 0")
        if self.noise_std_ph < 0:
            raise InvalidConfig("noise_std_ph must be >= 0")
        if int(self.adc_bits) < 1:
            raise InvalidConfig("adc_bits must be >= 1")
        lo, hi = self.adc_range_ph
        if not lo < hi:
            raise InvalidConfig("adc_range_ph must satisfy lo < hi")
        if not 0 < self.baseline_ph < 14:
            raise InvalidConfig("baseline_ph must lie in (0, 14)")

    @property
    def sample_period_s(self):
        return 1.0 / self.sample_rate_hz

    @property
    def adc_levels(self):
        return 2 ** int(self.adc_bits)

    @property
    def adc_step_ph(self):
        lo, hi = self.adc_range_ph
        return (hi - lo) / (self.adc_levels - 1)

    def digest(self):
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclasses.dataclass(frozen=True)
class PulseEvent:
    start_s: float
    duration_s: float
    polarity: Polarity


def _as_event(e):
    if isinstance(e, PulseEvent):
        return PulseEvent(float(e.start_s), float(e.duration_s), Polarity(e.polarity))
    start_s, duration_s, polarity = e
    return PulseEvent(float(start_s), float(duration_s), Polarity(polarity))


@dataclasses.dataclass(frozen=True)
class PulseSchedule:
    events: tuple
    total_duration_s: float

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(_as_event(e) for e in self.events))
        starts = [e.start_s for e in self.events]
        if starts != sorted(starts):
            raise InvalidSchedule("events must be sorted by start_s")
        for e in self.events:
            if e.duration_s <= 0:
                raise InvalidSchedule("event durations must be > 0")
            if e.start_s < 0:
                raise InvalidSchedule("event start must be >= 0")
            if e.start_s + e.duration_s > self.total_duration_s + 1e-9:
                raise InvalidSchedule("event at %.6f s extends past the schedule end" % e.start_s)

    def __add__(self, other):
        """Union of two schedules, used for superposition checks."""
        events = sorted(self.events + other.events, key=lambda e: e.start_s)
        return PulseSchedule(events, max(self.total_duration_s, other.total_duration_s))


@dataclasses.dataclass(frozen=True)
class PhTrace:
    sample_rate_hz: float
    samples: np.ndarray
    seed: int
    config_digest: str
    adc_range_ph: tuple = (0.0, 14.0)
    adc_bits: int = 10

    @property
    def adc_step_ph(self):
        lo, hi = self.adc_range_ph
        return (hi - lo) / (2 ** int(self.adc_bits) - 1)

    @property
    def times_s(self):
        return np.arange(len(self.samples)) / self.sample_rate_hz

    def __len__(self):
        return len(self.samples)


def _kernel_length(cfg):
    return int(math.ceil(cfg.kernel_span * cfg.transit_mean_s * cfg.sample_rate_hz))


def _raw_density(tau, cfg):
    tau = np.asarray(tau, dtype=np.float64)
    out = np.zeros_like(tau)
    pos = tau > 0
    t = tau[pos]
    out[pos] = t ** -1.5 * np.exp(-cfg.dispersion_shape * (t - cfg.transit_mean_s) ** 2 / t)
    return out


@functools.lru_cache(maxsize=64)
def _normalizer(cfg):
    dt = cfg.sample_period_s
    grid = np.arange(1, _kernel_length(cfg) + 1) * dt
    mass = _raw_density(grid, cfg).sum() * dt
    return 1.0 / mass


def impulse_response(tau, cfg):
    """Dispersion density g(tau) in 1/s, zero for tau <= 0, unit discrete mass on the sample grid."""
    g = _raw_density(tau, cfg) * _normalizer(cfg)
    return float(g) if np.ndim(tau) == 0 else g


def kernel_taps(cfg):
    """h[m] = g(m dt) dt for m = 0..L, h[0] = 0."""
    dt = cfg.sample_period_s
    taps = impulse_response(np.arange(_kernel_length(cfg) + 1) * dt, cfg) * dt
    return taps


def analytic_mode(cfg):
    """Peak location of g, root of k tau^2 + 1.5 tau - k mu^2 = 0."""
    k, mu = cfg.dispersion_shape, cfg.transit_mean_s
    return (-1.5 + math.sqrt(2.25 + 4.0 * k * k * mu * mu)) / (2.0 * k)


def n_samples(schedule, cfg):
    return int(math.floor(schedule.total_duration_s * cfg.sample_rate_hz + 1e-9))


def injection_waveform(schedule, cfg):
    """Rectangular source u[k] in mol/L per second of injection, on the sample grid."""
    n = n_samples(schedule, cfg)
    u = np.zeros(n)
    fs = cfg.sample_rate_hz
    for e in schedule.events:
        i0 = int(math.ceil(e.start_s * fs - 1e-9))
        i1 = int(math.ceil((e.start_s + e.duration_s) * fs - 1e-9))
        u[max(i0, 0):min(i1, n)] += int(e.polarity) * cfg.pulse_amplitude_mol_per_l
    return u


def net_ion_concentration(schedule, cfg):
    if schedule.total_duration_s <= 0:
        raise InvalidSchedule("total_duration_s must be > 0")
    u = injection_waveform(schedule, cfg)
    if not u.any():
        return np.zeros_like(u)
    return np.convolve(u, kernel_taps(cfg))[:len(u)]


def ph_from_net(c, baseline_ph):
    """pH of water at `baseline_ph` after adding net strong acid `c` (negative = base)."""
    if not 0 < baseline_ph < 14:
        raise InvalidConfig("baseline_ph must lie in (0, 14)")
    c = np.asarray(c, dtype=np.float64)
    h0 = 10.0 ** (-baseline_ph)
    ctot = (h0 - KW / h0) + c
    root = np.sqrt(ctot * ctot + 4.0 * KW)
    # both branches solve h^2 - ctot h - Kw = 0 without cancellation
    safe_pos = np.where(ctot >= 0, ctot, 0.0)
    safe_neg = np.where(ctot < 0, ctot, 0.0)
    h = np.where(ctot >= 0, (safe_pos + root) / 2.0, 2.0 * KW / (root - safe_neg))
    ph = -np.log10(h)
    return float(ph) if ph.ndim == 0 else ph


def quantize(ph, cfg):
    lo, hi = cfg.adc_range_ph
    codes = np.rint((np.clip(ph, lo, hi) - lo) / (hi - lo) * (cfg.adc_levels - 1))
    return lo + codes * cfg.adc_step_ph


def simulate(schedule, cfg, seed):
    c = net_ion_concentration(schedule, cfg)
    ph = ph_from_net(c, cfg.baseline_ph)
    ph = np.atleast_1d(ph)
    if cfg.noise_std_ph > 0:
        rng = np.random.default_rng(seed)
        ph = ph + rng.normal(0.0, cfg.noise_std_ph, size=ph.shape)
    samples = quantize(ph, cfg)
    return PhTrace(sample_rate_hz=cfg.sample_rate_hz, samples=samples, seed=int(seed),
                   config_digest=cfg.digest(), adc_range_ph=cfg.adc_range_ph,
                   adc_bits=int(cfg.adc_bits))


def write_trace_csv(path, trace, **provenance):
    frame = pd.DataFrame({"time_s": trace.times_s, "ph": trace.samples})
    lo, hi = trace.adc_range_ph
    provenance.update(seed=trace.seed, channel_digest=trace.config_digest,
                      sample_rate_hz=repr(float(trace.sample_rate_hz)),
                      adc_bits=trace.adc_bits, adc_lo=repr(lo), adc_hi=repr(hi))
    write_csv(path, frame, provenance)


def read_trace_csv(path):
    frame, prov = read_csv(path)
    lo, hi = float(prov["adc_lo"]), float(prov["adc_hi"])
    bits = int(prov["adc_bits"])
    step = (hi - lo) / (2 ** bits - 1)
    # snap the 6-decimal text back onto the ADC grid
    samples = lo + np.rint((frame["ph"].to_numpy() - lo) / step) * step
    return PhTrace(sample_rate_hz=float(prov["sample_rate_hz"]), samples=samples,
                   seed=int(prov["seed"]), config_digest=prov["channel_digest"],
                   adc_range_ph=(lo, hi), adc_bits=bits)


def write_schedule_csv(path, schedule, **provenance):
    frame = pd.DataFrame({
        "start_s": [e.start_s for e in schedule.events],
        "duration_s": [e.duration_s for e in schedule.events],
        "polarity": [e.polarity.name.lower() for e in schedule.events],
    })
    provenance.setdefault("total_duration_s", repr(float(schedule.total_duration_s)))
    write_csv(path, frame, provenance)


def read_schedule_csv(path):
    frame, prov = read_csv(path)
    events = [(row.start_s, row.duration_s, Polarity[row.polarity.upper()])
              for row in frame.itertuples(index=False)]
    total = float(prov["total_duration_s"]) if "total_duration_s" in prov else \
        max([e[0] + e[1] for e in events], default=0.0)
    return PulseSchedule(events, total)
