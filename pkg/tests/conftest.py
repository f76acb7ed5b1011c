import numpy as np
import pytest

from plrn_grounding.config import load_config
from plrn_grounding.data import Dataset, GroundingSample
from plrn_grounding.providers import MemoryFeatureProvider
from plrn_grounding.synthetic import SyntheticConfig, generate_synthetic, save_synthetic
from plrn_grounding.text_encoder import Vocabulary
from plrn_grounding.video_encoder import RawVideo


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def tiny_cfg():
    return load_config("tiny")


@pytest.fixture
def synthetic_cfg():
    return SyntheticConfig(num_samples=10, vocab_size=32, num_signal_tokens=4, d_raw=6, min_frames=12,
                           max_frames=24, fps=4.0, train_fraction=0.6, val_fraction=0.2, test_fraction=0.2, seed=3)


@pytest.fixture
def synthetic(synthetic_cfg):
    return generate_synthetic(synthetic_cfg)


@pytest.fixture
def dataset_dir(synthetic, tmp_path):
    return save_synthetic(synthetic, tmp_path / "data")


@pytest.fixture
def single_sample_dataset(tmp_path):
    """One video-query pair used as both train and val split."""
    frames = np.random.default_rng(2).standard_normal((24, 6))
    frames[8:16] += 2.0
    provider = MemoryFeatureProvider({"clip": RawVideo(frames, 12.0)})
    sample = GroundingSample("clip_0", "clip", "a person opens the door", 4.0, 8.0, 12.0)
    vocab = Vocabulary.build([sample.query])
    return Dataset(tmp_path, [sample], provider, vocab, {"train": ["clip_0"], "val": ["clip_0"], "test": []})
