import json
import logging
import os

import pandas as pd

from .errors import ModelNotFound

logger = logging.getLogger(__name__)


def format_provenance(**fields):
    """One `# key=value ...` comment line; values must not contain whitespace."""
    return "# " + " ".join("%s=%s" % (k, fields[k]) for k in sorted(fields))


def parse_provenance(line):
    fields = {}
    for token in line.lstrip("#").split():
        if "=" in token:
            key, value = token.split("=", 1)
            fields[key] = value
    return fields


def read_provenance(path):
    fields = {}
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            fields.update(parse_provenance(line))
    return fields


def write_csv(path, frame, provenance, float_format="%.6f"):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(format_provenance(**provenance) + "\n")
        frame.to_csv(f, index=False, float_format=float_format, lineterminator="\n")


def read_csv(path, **kwargs):
    return pd.read_csv(path, comment="#", **kwargs), read_provenance(path)


def write_model_file(path, payload, provenance):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(format_provenance(**provenance) + "\n")
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")
    logger.info("Saved model to [FILE: %s]", path)


def read_model_file(path):
    if not os.path.isfile(path):
        raise ModelNotFound(path)
    with open(path) as f:
        lines = f.readlines()
    body = "".join(line for line in lines if not line.startswith("#"))
    return json.loads(body), read_provenance(path)
