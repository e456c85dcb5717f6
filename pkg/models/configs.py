# coding=utf-8
import ast
import dataclasses
import hashlib
import logging
import re

import ml_collections

from utils.channel import ChannelConfig
from utils.errors import InvalidConfig
from utils.framing import FrameSpec

logger = logging.getLogger(__name__)

# everything before the first `#` that is not inside a quoted value
_CODE = re.compile(r"""(?:[^#'"]|'[^']*'|"[^"]*")*""")


def get_default_config():
    """Returns the full experiment configuration (194 experiments, four intervals)."""
    config = ml_collections.ConfigDict()

    config.channel = ml_collections.ConfigDict()
    config.channel.transit_mean_s = 0.6
    config.channel.dispersion_shape = 3.0
    config.channel.pulse_amplitude_mol_per_l = 2.5e-4
    config.channel.baseline_ph = 7.0
    config.channel.noise_std_ph = 0.02
    config.channel.sample_rate_hz = 200.0
    config.channel.adc_bits = 10
    config.channel.adc_range_ph = (0.0, 14.0)
    config.channel.kernel_span = 20.0

    config.frame = ml_collections.ConfigDict()
    config.frame.injection_s = 0.030
    config.frame.pauses_s = (0.220, 0.304, 0.350, 0.470)
    config.frame.preamble_injection_s = 0.100
    config.frame.preamble_silence_s = 0.900
    config.frame.append_terminator = False
    config.frame.settle_s = 0.5
    config.frame.decision_delay_s = 0.33

    config.dataset = ml_collections.ConfigDict()
    config.dataset.n_experiments = 194
    config.dataset.bits_per_experiment = 120
    config.dataset.test_fraction = 0.2
    config.dataset.train_only_longest = False
    config.dataset.baseline_spread_ph = 0.0
    config.dataset.workers = 1

    config.svm = ml_collections.ConfigDict()
    config.svm.sigma_sq = 5.0
    config.svm.c_reg = 1.0
    config.svm.c_grid = (0.1, 1.0, 10.0)
    config.svm.sigma_sq_grid = (5.0,)
    config.svm.tol = 1e-3
    config.svm.max_iter = 1000000
    config.svm.standardize = True
    config.svm.val_fraction = 0.2

    config.rnn = ml_collections.ConfigDict()
    config.rnn.cell_kind = 'lstm'
    config.rnn.state_dim = 16
    config.rnn.learning_rate = 0.05
    config.rnn.epochs = 40
    config.rnn.sequence_length = 120
    config.rnn.clip_norm = 5.0
    config.rnn.prob_floor = 1e-12
    config.rnn.val_fraction = 0.1
    config.rnn.batch_size = 1

    config.seeds = ml_collections.ConfigDict()
    config.seeds.master = 20170
    config.seeds.split = 7
    config.seeds.train = 1234

    config.output_dir = 'output'
    return config


def get_testing():
    """Returns a minimal configuration for testing."""
    config = get_default_config()
    config.dataset.n_experiments = 8
    config.dataset.bits_per_experiment = 24
    config.svm.c_grid = (1.0,)
    config.rnn.state_dim = 4
    config.rnn.epochs = 2
    config.rnn.sequence_length = 24
    return config


def get_short_test_config():
    """Returns the default configuration with test records drawn from 250/334/380 ms only."""
    config = get_default_config()
    config.dataset.train_only_longest = True
    return config


CONFIGS = {
    'default': get_default_config,
    'testing': get_testing,
    'short-test': get_short_test_config,
}


def _parse_value(text):
    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        value = text
    return tuple(value) if isinstance(value, list) else value


def parse_config_text(text):
    """Flat `dotted.key = literal` lines; `#` outside quotes starts a comment."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _CODE.match(raw).group(0).strip()
        if not line:
            continue
        if '=' not in line:
            raise InvalidConfig("line %d: expected `key = value`, got %r" % (lineno, raw))
        key, value = (part.strip() for part in line.split('=', 1))
        if not key:
            raise InvalidConfig("line %d: empty key" % lineno)
        entries[key] = _parse_value(value)
    return entries


def _known_keys(config, prefix=''):
    keys = set()
    for key, value in config.items():
        if isinstance(value, ml_collections.ConfigDict):
            keys |= _known_keys(value, prefix + key + '.')
        else:
            keys.add(prefix + key)
    return keys


def load_config(path=None, text=None):
    if text is None:
        with open(path) as f:
            text = f.read()
    entries = parse_config_text(text)
    base = entries.pop('base', 'default')
    if base not in CONFIGS:
        raise InvalidConfig('Unknown base config "%s"' % base)
    config = CONFIGS[base]()

    unknown = sorted(set(entries) - _known_keys(config))
    if unknown:
        raise InvalidConfig("unknown config keys: %s" % ", ".join(unknown))
    try:
        config.update_from_flattened_dict(entries)
        validate_config(config)
    except (TypeError, ValueError, KeyError) as e:
        raise InvalidConfig(str(e))
    return config


def validate_config(config):
    if not config.frame.pauses_s:
        raise InvalidConfig("frame.pauses_s must list at least one pause")
    for name in ('master', 'split', 'train'):
        if not isinstance(config.seeds[name], int) or isinstance(config.seeds[name], bool):
            raise InvalidConfig("seeds.%s must be an integer" % name)
    if config.dataset.n_experiments < 1:
        raise InvalidConfig("dataset.n_experiments must be >= 1")
    if config.dataset.bits_per_experiment < 1:
        raise InvalidConfig("dataset.bits_per_experiment must be >= 1")
    if not 0 < config.dataset.test_fraction < 1:
        raise InvalidConfig("dataset.test_fraction must lie in (0, 1)")
    if config.dataset.train_only_longest and len(set(config.frame.pauses_s)) < 2:
        raise InvalidConfig("dataset.train_only_longest needs at least two pauses")
    if config.rnn.cell_kind not in ('vanilla', 'lstm'):
        raise InvalidConfig('Unknown rnn.cell_kind "%s"' % config.rnn.cell_kind)
    # constructing these validates every interval and the channel
    frame_specs(config)
    channel_config(config)


def channel_config(config):
    return ChannelConfig(**config.channel.to_dict())


def frame_template(config):
    fields = config.frame.to_dict()
    pauses = fields.pop('pauses_s')
    return FrameSpec(pause_s=pauses[0], **fields)


def frame_specs(config):
    """interval_ms -> FrameSpec for every configured pause."""
    template = frame_template(config)
    specs = {}
    for pause in config.frame.pauses_s:
        spec = dataclasses.replace(template, pause_s=pause)
        specs[spec.interval_ms] = spec
    return specs


def held_out_intervals(config):
    """Intervals that contribute test records (None = all); the longest one trains only."""
    if not config.dataset.train_only_longest:
        return None
    intervals = set(frame_specs(config))
    return intervals - {max(intervals)}


def config_digest(config):
    return hashlib.sha256(config.to_json(sort_keys=True).encode()).hexdigest()[:16]


def flatten_config(config, prefix=''):
    lines = []
    for key in sorted(config.keys()):
        value = config[key]
        if isinstance(value, ml_collections.ConfigDict):
            lines.extend(flatten_config(value, prefix + key + '.'))
        else:
            lines.append('%s%s = %r' % (prefix, key, value))
    return lines
