import numpy as np
import pytest

from plrn_grounding.errors import ConfigurationError
from plrn_grounding.synthetic import (SyntheticConfig, generate_synthetic, least_squares_probe, load_synthetic_config,
                                      pattern_direction, planted_window, save_synthetic, window_contrast_search)
from plrn_grounding.templates import get_query, vocabulary_words


def test_directions_are_orthonormal(synthetic):
    D = synthetic.directions
    np.testing.assert_allclose(D.T @ D, np.eye(D.shape[1]), atol=1e-12)


def test_noise_free_single_token_plants_exact_pattern():
    cfg = SyntheticConfig(num_samples=5, vocab_size=32, num_signal_tokens=4, d_raw=6, min_frames=20, max_frames=30,
                          sigma=0.0, min_signal=1, max_signal=1, seed=2)
    dataset = generate_synthetic(cfg)
    for sample in dataset.samples:
        frames = dataset.provider.load(sample.video_id).frames
        start, end = planted_window(dataset, sample)
        pattern = pattern_direction(dataset, sample).astype(np.float32).astype(np.float64)
        np.testing.assert_array_equal(frames[start:end], np.tile(pattern, (end - start, 1)))
        np.testing.assert_array_equal(frames[:start], np.zeros((start, cfg.d_raw)))
        np.testing.assert_array_equal(frames[end:], np.zeros((len(frames) - end, cfg.d_raw)))


def test_same_seed_gives_identical_files(synthetic_cfg, tmp_path):
    first = save_synthetic(generate_synthetic(synthetic_cfg), tmp_path / "a")
    second = save_synthetic(generate_synthetic(synthetic_cfg), tmp_path / "b")
    names = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    assert names == sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_queries_use_signal_words(synthetic):
    for sample in synthetic.samples:
        words = sample.query.split()
        assert words[:2] == ["a", "person"]
        assert any(w in synthetic.signal_words for w in words)
        assert all(w in synthetic.vocab for w in words)


def test_least_squares_probe_recovers_noise_free_boundaries():
    cfg = SyntheticConfig(num_samples=60, vocab_size=32, num_signal_tokens=4, d_raw=8, min_frames=40, max_frames=80,
                          sigma=0.0, seed=5)
    assert least_squares_probe(generate_synthetic(cfg)).miou > 90.0


def test_window_search_finds_planted_window():
    cfg = SyntheticConfig(num_samples=3, vocab_size=32, num_signal_tokens=4, d_raw=6, min_frames=20, max_frames=30,
                          sigma=0.0, seed=8)
    dataset = generate_synthetic(cfg)
    for sample in dataset.samples:
        frames = dataset.provider.load(sample.video_id).frames
        assert window_contrast_search(frames, pattern_direction(dataset, sample)) == planted_window(dataset, sample)


def test_distractors_stay_outside_boundary():
    cfg = SyntheticConfig(num_samples=4, vocab_size=32, num_signal_tokens=4, d_raw=6, min_frames=40, max_frames=60,
                          sigma=0.0, min_signal=1, max_signal=1, distractors=1, seed=4)
    dataset = generate_synthetic(cfg)
    for sample in dataset.samples:
        frames = dataset.provider.load(sample.video_id).frames
        start, end = planted_window(dataset, sample)
        pattern = pattern_direction(dataset, sample)
        outside = np.concatenate([frames[:start], frames[end:]])
        np.testing.assert_allclose(outside @ pattern, 0.0, atol=1e-6)


def test_config_validation_and_file(tmp_path):
    with pytest.raises(ConfigurationError):
        SyntheticConfig(num_signal_tokens=40, d_raw=32)
    with pytest.raises(ConfigurationError):
        SyntheticConfig(train_fraction=0.5)
    path = tmp_path / "synthetic.txt"
    path.write_text("num_samples = 12\nsigma = 0\n")
    cfg = load_synthetic_config(path, {"seed": "9"})
    assert (cfg.num_samples, cfg.sigma, cfg.seed) == (12, 0.0, 9)


def test_templates():
    assert get_query(["opens"]) == "a person opens the"
    assert get_query(["opens", "door", "sits"], ["slowly"]) == "a person opens the door and then sits slowly"
    words = vocabulary_words(40, 3)
    assert len(words) == 40 and len(set(words)) == 40
    assert words[5:8] == ["opens", "closes", "holds"]


def paired_windows(dataset, sample):
    """(target window, companion window) in frames, located by projecting on each query token."""
    index = {w: k for k, w in enumerate(dataset.signal_words)}
    tokens = [index[w] for w in sample.query.split() if w in index]
    frames = dataset.provider.load(sample.video_id).frames
    windows = []
    for token in tokens:
        rows = np.flatnonzero(frames @ dataset.directions[:, token] > 0.5)
        windows.append((int(rows[0]), int(rows[-1]) + 1))
    return tokens, windows


@pytest.mark.parametrize("order_bias", [1.0, 0.0])
def test_paired_samples_follow_word_order(order_bias):
    cfg = SyntheticConfig(num_samples=6, vocab_size=32, num_signal_tokens=4, d_raw=6, min_frames=30, max_frames=50,
                          sigma=0.0, paired=True, order_bias=order_bias, seed=6)
    dataset = generate_synthetic(cfg)
    for sample in dataset.samples:
        tokens, (target, companion) = paired_windows(dataset, sample)
        assert len(tokens) == 2 and tokens[0] != tokens[1]
        assert target == planted_window(dataset, sample)
        assert target[1] <= companion[0] if order_bias == 1.0 else companion[1] <= target[0]
        np.testing.assert_allclose(pattern_direction(dataset, sample), dataset.directions[:, tokens[0]])


def test_paired_window_search_needs_the_first_word():
    cfg = SyntheticConfig(num_samples=3, vocab_size=32, num_signal_tokens=4, d_raw=6, min_frames=30, max_frames=40,
                          sigma=0.0, paired=True, order_bias=0.5, seed=9)
    dataset = generate_synthetic(cfg)
    for sample in dataset.samples:
        tokens, (target, companion) = paired_windows(dataset, sample)
        frames = dataset.provider.load(sample.video_id).frames
        assert window_contrast_search(frames, dataset.directions[:, tokens[0]]) == target
        assert window_contrast_search(frames, dataset.directions[:, tokens[1]]) == companion


def test_paired_config_validation():
    with pytest.raises(ConfigurationError):
        SyntheticConfig(paired=True, num_signal_tokens=1, max_signal=1)
    with pytest.raises(ConfigurationError):
        SyntheticConfig(order_bias=1.5)
    cfg = load_synthetic_config(overrides={"paired": "true", "order_bias": "0.8"})
    assert cfg.paired is True and cfg.order_bias == 0.8
