import dataclasses
import logging
import math

import numpy as np
from scipy import ndimage

from .channel import Polarity, PulseSchedule
from .errors import InvalidConfig, SyncNotFound, TraceTooShort

logger = logging.getLogger(__name__)

PAUSES_S = (0.220, 0.304, 0.350, 0.470)
TERMINATOR_BITS = (0, 0, 0, 0, 0)

SMOOTH_SAMPLES = 5
TRIGGER_RUN = 3


@dataclasses.dataclass(frozen=True)
class FrameSpec:
    injection_s: float = 0.030
    pause_s: float = 0.220
    preamble_injection_s: float = 0.100
    preamble_silence_s: float = 0.900
    append_terminator: bool = False
    # extra silence after the last symbol interval
    settle_s: float = 0.5
    # each window ends this long after its injection starts
    decision_delay_s: float = 0.33

    def __post_init__(self):
        for name in ("injection_s", "pause_s", "preamble_injection_s", "preamble_silence_s"):
            if getattr(self, name) <= 0:
                raise InvalidConfig("%s must be > 0" % name)
        if self.settle_s < 0:
            raise InvalidConfig("settle_s must be >= 0")
        if self.decision_delay_s <= 0:
            raise InvalidConfig("decision_delay_s must be > 0")

    @property
    def symbol_interval_s(self):
        return self.injection_s + self.pause_s

    @property
    def interval_ms(self):
        return int(round(1000.0 * self.symbol_interval_s))

    @property
    def preamble_total_s(self):
        return self.preamble_injection_s + self.preamble_silence_s


def modulate(bits, spec):
    bits = [int(b) for b in bits]
    if not bits:
        raise ValueError("cannot modulate an empty bit sequence")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("bits must be 0 or 1")
    if spec.append_terminator:
        bits = bits + list(TERMINATOR_BITS)

    events = [(0.0, spec.preamble_injection_s, Polarity.ACID)]
    t0 = spec.preamble_total_s
    T = spec.symbol_interval_s
    for i, bit in enumerate(bits):
        events.append((t0 + i * T, spec.injection_s, Polarity.ACID if bit == 0 else Polarity.BASE))

    last_start = t0 + (len(bits) - 1) * T
    total = last_start + T + max(T, spec.settle_s)
    return PulseSchedule(events, total)


def sync_threshold(noise_std_ph, adc_step_ph):
    return max(4.0 * noise_std_ph / math.sqrt(SMOOTH_SAMPLES), 2.0 * adc_step_ph)


def detect_sync(trace, spec, noise_std_ph=0.0, adc_step_ph=None):
    """Index of the last flat sample before the preamble's pH drop."""
    if adc_step_ph is None:
        adc_step_ph = trace.adc_step_ph
    x = np.asarray(trace.samples, dtype=np.float64)
    if len(x) < SMOOTH_SAMPLES + TRIGGER_RUN:
        raise SyncNotFound("trace too short to search for a preamble")

    smooth = ndimage.uniform_filter1d(x, size=SMOOTH_SAMPLES, mode="nearest")
    d = np.diff(smooth)
    thr = sync_threshold(noise_std_ph, adc_step_ph)

    falling = d < -thr
    run = falling[:len(falling) - TRIGGER_RUN + 1].copy()
    for k in range(1, TRIGGER_RUN):
        run &= falling[k:len(falling) - TRIGGER_RUN + 1 + k]
    hits = np.flatnonzero(run)
    if hits.size == 0:
        raise SyncNotFound("no pH drop steeper than %.4f pH/sample" % thr)

    j = int(hits[0])
    flat = thr / 4.0
    while j > 0 and d[j - 1] < -flat:
        j -= 1
    logger.debug("Sync trigger at %d, onset at %d (thr=%.4f)", hits[0], j, thr)
    return j


def window_bounds(onset, spec, k, sample_rate_hz):
    """Samples [start, stop) of symbol k: one interval ending decision_delay_s after its injection."""
    T = spec.symbol_interval_s
    start = onset + int(math.floor((spec.preamble_total_s + k * T + spec.decision_delay_s - T)
                                   * sample_rate_hz + 1e-9))
    return start, start + window_length(spec, sample_rate_hz)


def window_length(spec, sample_rate_hz):
    return int(round(spec.symbol_interval_s * sample_rate_hz))


def slice_symbols(trace, onset, spec, n):
    if n == 0:
        return []
    x = np.asarray(trace.samples)
    fs = trace.sample_rate_hz
    windows = []
    for k in range(n):
        start, stop = window_bounds(onset, spec, k, fs)
        if stop > len(x):
            raise TraceTooShort(k, n)
        windows.append(x[start:stop].copy())
    return windows
