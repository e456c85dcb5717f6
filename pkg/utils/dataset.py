import concurrent.futures
import dataclasses
import logging
import os
from collections import defaultdict

import numpy as np
import pandas as pd
from tqdm import tqdm

from .channel import read_trace_csv, simulate, write_trace_csv
from .errors import InsufficientRecords
from .framing import FrameSpec, PAUSES_S, modulate
from .io_utils import read_csv, write_csv

logger = logging.getLogger(__name__)

MANIFEST = "manifest.csv"


@dataclasses.dataclass
class ExperimentRecord:
    index: int
    bits: np.ndarray
    pause_s: float
    trace: object
    seed: int
    config_digest: str
    baseline_ph: float
    split: str = ""

    def frame_spec(self, template):
        return dataclasses.replace(template, pause_s=self.pause_s)

    def interval_ms(self, template):
        return self.frame_spec(template).interval_ms


def record_seeds(master_seed, index):
    """(bit generator, noise seed) derived from (master_seed, record index)."""
    bit_ss, noise_ss = np.random.SeedSequence([int(master_seed), int(index)]).spawn(2)
    return np.random.default_rng(bit_ss), int(noise_ss.generate_state(1, np.uint64)[0])


def _simulate_record(index, pause_s, channel_cfg, frame_template, master_seed, n_bits,
                     baseline_spread_ph):
    rng, noise_seed = record_seeds(master_seed, index)
    bits = rng.integers(0, 2, size=n_bits).astype(np.uint8)
    cfg = channel_cfg
    if baseline_spread_ph > 0:
        cfg = dataclasses.replace(
            channel_cfg, baseline_ph=channel_cfg.baseline_ph + rng.uniform(0.0, baseline_spread_ph))
    spec = dataclasses.replace(frame_template, pause_s=pause_s)
    trace = simulate(modulate(bits, spec), cfg, noise_seed)
    return ExperimentRecord(index=index, bits=bits, pause_s=pause_s, trace=trace, seed=noise_seed,
                            config_digest=trace.config_digest, baseline_ph=cfg.baseline_ph)


def generate_dataset(channel_cfg, master_seed, n_experiments=194, pauses_s=PAUSES_S,
                     frame_template=None, bits_per_experiment=120, baseline_spread_ph=0.0,
                     workers=1, progress=True):
    if n_experiments < 1:
        raise ValueError("n_experiments must be >= 1")
    frame_template = frame_template or FrameSpec()
    jobs = [(i, pauses_s[i % len(pauses_s)]) for i in range(n_experiments)]

    logger.info("***** Generating dataset *****")
    logger.info("  Num experiments = %d", n_experiments)
    logger.info("  Bits per experiment = %d", bits_per_experiment)
    logger.info("  Master seed = %d", master_seed)

    args = (channel_cfg, frame_template, master_seed, bits_per_experiment, baseline_spread_ph)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_simulate_record, i, p, *args) for i, p in jobs]
            records = [f.result() for f in tqdm(futures, desc="Simulating", bar_format="{l_bar}{r_bar}",
                                                dynamic_ncols=True, disable=not progress)]
    else:
        records = [_simulate_record(i, p, *args)
                   for i, p in tqdm(jobs, desc="Simulating", bar_format="{l_bar}{r_bar}",
                                    dynamic_ncols=True, disable=not progress)]
    return records


def group_by_interval(records, frame_template=None):
    frame_template = frame_template or FrameSpec()
    groups = defaultdict(list)
    for r in records:
        groups[r.interval_ms(frame_template)].append(r)
    return dict(sorted(groups.items()))


def split_dataset(records, test_fraction=0.2, seed=0, test_intervals=None, frame_template=None):
    """Stratified experiment-level split; returns (train, test) in record order."""
    rng = np.random.default_rng(seed)
    test_ids = set()
    for interval_ms, group in group_by_interval(records, frame_template).items():
        if len(group) < 2:
            raise InsufficientRecords(interval_ms, len(group))
        if test_intervals is not None and interval_ms not in test_intervals:
            continue
        n_test = min(len(group) - 1, max(1, int(round(test_fraction * len(group)))))
        picked = rng.permutation(len(group))[:n_test]
        test_ids.update(group[i].index for i in picked)

    train = [r for r in records if r.index not in test_ids]
    test = [r for r in records if r.index in test_ids]
    for r in train:
        r.split = "train"
    for r in test:
        r.split = "test"
    logger.info("Split %d records: %d train / %d test", len(records), len(train), len(test))
    logger.info("Test record indices: %s", sorted(test_ids))
    return train, test


def record_filename(index):
    return "record_%04d.csv" % index


def write_dataset(root, records, provenance):
    os.makedirs(root, exist_ok=True)
    rows = []
    for r in records:
        write_trace_csv(os.path.join(root, record_filename(r.index)), r.trace, **provenance)
        rows.append({"index": r.index, "file": record_filename(r.index), "pause_s": r.pause_s,
                     "seed": str(r.seed), "baseline_ph": r.baseline_ph, "split": r.split,
                     "bits": "".join(str(int(b)) for b in r.bits)})
    write_csv(os.path.join(root, MANIFEST), pd.DataFrame(rows), provenance)
    logger.info("Wrote %d records to [DIR: %s]", len(records), root)


def read_dataset(root):
    frame, _ = read_csv(os.path.join(root, MANIFEST),
                        dtype={"bits": str, "seed": str, "split": str}, keep_default_na=False)
    records = []
    for row in frame.to_dict("records"):
        trace = read_trace_csv(os.path.join(root, row["file"]))
        records.append(ExperimentRecord(
            index=int(row["index"]), bits=np.array([int(c) for c in row["bits"]], dtype=np.uint8),
            pause_s=float(row["pause_s"]), trace=trace, seed=int(row["seed"]),
            config_digest=trace.config_digest, baseline_ph=float(row["baseline_ph"]),
            split=row["split"]))
    return records
