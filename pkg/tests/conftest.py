import os

import numpy as np
import pytest

from models.configs import get_testing
from utils.channel import ChannelConfig
from utils.data_utils import Receiver
from utils.dataset import ExperimentRecord, generate_dataset, split_dataset

GOLDEN_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")


@pytest.fixture
def channel_cfg():
    return ChannelConfig()


@pytest.fixture
def noiseless_cfg():
    return ChannelConfig(noise_std_ph=0.0)


@pytest.fixture
def testing_config():
    return get_testing()


@pytest.fixture
def receiver():
    return Receiver(noise_std_ph=ChannelConfig().noise_std_ph)


@pytest.fixture(scope="session")
def small_records():
    """Eight simulated records, two per symbol interval, split 1 train / 1 test per interval."""
    records = generate_dataset(ChannelConfig(), master_seed=3, n_experiments=8,
                               bits_per_experiment=24, progress=False)
    split_dataset(records, test_fraction=0.2, seed=0)
    return records


@pytest.fixture
def make_record():
    """Records without a simulated trace, for split and bookkeeping tests."""
    def make(index, pause_s=0.220, n_bits=10, trace=None):
        return ExperimentRecord(index=index, bits=np.zeros(n_bits, dtype=np.uint8), pause_s=pause_s,
                                trace=trace, seed=index, config_digest="", baseline_ph=7.0)
    return make
