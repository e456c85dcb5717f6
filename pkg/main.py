# coding=utf-8
from __future__ import absolute_import, division, print_function
import argparse
import logging
import os
import sys

import pandas as pd

from models.configs import (CONFIGS, channel_config, config_digest, flatten_config, frame_template,
                            held_out_intervals, load_config, validate_config)
from models.detectors import DETECTOR_NAMES, load_detectors, save_detector, train_detectors
from utils.data_utils import Receiver
from utils.dataset import generate_dataset, group_by_interval, read_dataset, split_dataset, write_dataset
from utils.errors import (InsufficientRecords, InvalidConfig, ModelNotFound, NoConvergence,
                          NonFiniteLoss, PhLinkError)
from utils.evaluation import (EvalReport, evaluate, eye_diagram_export, eye_opening, eye_separation, write_eye_csv,
                              write_report_csv)
from utils.features import feature_frame
from utils.io_utils import format_provenance, read_provenance, write_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGED = 4
EXIT_NO_MODEL = 5

CONFIG_FILE = "config.cfg"
REPORT_FILE = "report.csv"


def setup(args):
    """Config from --config (or the default factory) with the --seed override applied."""
    if args.config is None:
        config = CONFIGS["default"]()
    else:
        config = load_config(args.config)
    if args.seed is not None:
        config.seeds.master = args.seed
    validate_config(config)
    if args.out is None:
        args.out = config.output_dir
    if args.dataset is None:
        args.dataset = os.path.join(args.out, "dataset")

    logger.info("Run configuration:\n  %s", "\n  ".join(flatten_config(config)))
    return config


def provenance(config):
    return {"config_digest": config_digest(config), "master_seed": config.seeds.master}


def get_receiver(config):
    return Receiver(frame_template=frame_template(config), noise_std_ph=config.channel.noise_std_ph)


def load_records(args, config, split=None):
    records = read_dataset(args.dataset)
    stored = read_provenance(os.path.join(args.dataset, "manifest.csv")).get("config_digest")
    if stored is not None and stored != config_digest(config):
        logger.warning("Dataset [DIR: %s] was generated with config %s, running with %s",
                       args.dataset, stored, config_digest(config))
    if split is not None:
        records = [r for r in records if r.split == split]
    logger.info("Loaded %d %srecords from [DIR: %s]", len(records), split + " " if split else "", args.dataset)
    return records


def cmd_generate(args, config):
    records = generate_dataset(channel_config(config), config.seeds.master,
                               n_experiments=config.dataset.n_experiments,
                               pauses_s=config.frame.pauses_s,
                               frame_template=frame_template(config),
                               bits_per_experiment=config.dataset.bits_per_experiment,
                               baseline_spread_ph=config.dataset.baseline_spread_ph,
                               workers=config.dataset.workers,
                               progress=not args.no_progress)
    split_dataset(records, test_fraction=config.dataset.test_fraction, seed=config.seeds.split,
                  test_intervals=held_out_intervals(config), frame_template=frame_template(config))
    write_dataset(args.dataset, records, provenance(config))
    with open(os.path.join(args.dataset, CONFIG_FILE), "w") as f:
        f.write(format_provenance(**provenance(config)) + "\n")
        f.write("\n".join(flatten_config(config)) + "\n")
    print("Generated %d records in %s" % (len(records), args.dataset))
    return EXIT_OK


def cmd_train(args, config):
    records = load_records(args, config, split="train")
    names = [args.detector] if args.detector else list(DETECTOR_NAMES)
    for name in names:
        detectors, log = train_detectors(name, records, get_receiver(config), config,
                                         log_dir=os.path.join(args.out, "logs"),
                                         progress=not args.no_progress)
        for detector in detectors.values():
            save_detector(args.out, detector, provenance(config))
        write_csv(os.path.join(args.out, "%s_training_log.csv" % name), log, provenance(config))
        print("Trained %s detector for intervals %s" % (name, ", ".join("%d ms" % ms for ms in detectors)))
    return EXIT_OK


def cmd_evaluate(args, config):
    records = load_records(args, config, split="test")
    receiver = get_receiver(config)
    intervals = group_by_interval(records, receiver.frame_template)
    names = [args.detector] if args.detector else list(DETECTOR_NAMES)
    report = EvalReport(provenance=provenance(config))
    for name in names:
        detectors = load_detectors(args.out, name, intervals)
        report.merge(evaluate(detectors, records, receiver, name=name, progress=not args.no_progress))
    write_report_csv(os.path.join(args.out, REPORT_FILE), report, provenance(config))
    print(report.format_table())
    return EXIT_OK


def cmd_eye(args, config):
    records = load_records(args, config)
    receiver = get_receiver(config)
    for interval_ms, group in group_by_interval(records, receiver.frame_template).items():
        eye = eye_diagram_export(group, interval_ms, receiver)
        write_eye_csv(os.path.join(args.out, "eye_%dms.csv" % interval_ms), eye, provenance(config))

        frames = []
        for record in group:
            fvs = receiver.try_features(record)
            if fvs is not None:
                frames.append(feature_frame(fvs, record.bits))
        if frames:
            write_csv(os.path.join(args.out, "features_%dms.csv" % interval_ms),
                      pd.concat(frames, ignore_index=True), provenance(config))
        if len(eye):
            print("%d ms: %d eye rows, d6 median gap %.4f, opening %.4f"
                  % (interval_ms, len(eye), eye_separation(eye), eye_opening(eye)))
        else:
            print("%d ms: no synchronized records" % interval_ms)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "eye": cmd_eye,
}


def get_parser():
    parser = argparse.ArgumentParser(description="Acid/base pH link simulator and detector benchmark.")
    parser.add_argument("command", choices=sorted(COMMANDS),
                        help="generate a dataset, train detectors, evaluate them, or export eye data.")
    parser.add_argument("--config", type=str, default=None,
                        help="Dotted-key config file; the default config is used when omitted.")
    parser.add_argument("--dataset", type=str, default=None,
                        help="Dataset directory (default: <out>/dataset).")
    parser.add_argument("--detector", choices=DETECTOR_NAMES, default=None,
                        help="Which detector to train or evaluate (default: all).")
    parser.add_argument("--out", type=str, default=None,
                        help="Output directory for models, reports and logs (default: config output_dir).")
    parser.add_argument("--seed", type=int, default=None,
                        help="Master seed, overrides seeds.master in the config.")
    parser.add_argument("--no_progress", action="store_true",
                        help="Disable progress bars.")
    parser.add_argument("--verbose", action="store_true",
                        help="Log at DEBUG level.")
    return parser


def main(argv=None):
    args = get_parser().parse_args(argv)

    # Setup logging
    logging.basicConfig(format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
                        datefmt='%m/%d/%Y %H:%M:%S',
                        level=logging.DEBUG if args.verbose else logging.INFO)

    try:
        config = setup(args)
    except (InvalidConfig, OSError) as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG

    try:
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args, config)
    except ModelNotFound as e:
        logger.error("%s; run `train` first", e)
        return EXIT_NO_MODEL
    except (NonFiniteLoss, NoConvergence) as e:
        logger.error("Training diverged: %s", e)
        return EXIT_DIVERGED
    except (InvalidConfig, InsufficientRecords) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except OSError as e:
        logger.error("I/O failure: %s", e)
        return EXIT_IO
    except PhLinkError as e:
        logger.error("%s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
