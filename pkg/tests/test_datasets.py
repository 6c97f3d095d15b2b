import numpy as np
import pytest

from kim.datasets import (MLP_TILE_WINDOW, Dataset, bind_batches,
                          dataset_from_episodes, split_dataset)
from kim.episodes import Episode, Outcome
from kim.fixtures import load_fixture
from kim.graph import GraphError
from kim.mlp import build_mlp
from kim.normalize import fit_normalizer


def lander_episode(seed, n_steps):
    gen = np.random.default_rng(seed)
    transitions = tuple(
        (gen.standard_normal(8), int(gen.integers(4))) for _ in range(n_steps))
    return Episode("lander", seed, transitions, Outcome(n_steps, success=True))


def racing_episode(seed, n_steps, n_tiles):
    gen = np.random.default_rng(seed)
    transitions = tuple(
        ((gen.uniform(-40, 40, (n_tiles, 8)), gen.uniform(-1, 1, 7)),
         gen.uniform(0, 1, 3))
        for _ in range(n_steps))
    return Episode("racing", seed, transitions,
                   Outcome(n_steps, reward=0.0, coverage=1.0,
                           max_coverage=1.0))


def test_flatten_keeps_source_order():
    eps = [lander_episode(0, 3), lander_episode(1, 2)]
    ds = dataset_from_episodes(eps)
    assert [(s[0], s[1]) for s in ds.samples] == [
        (0, 0), (0, 1), (0, 2), (1, 0), (1, 1)]
    assert len(ds) == 5


def test_mixed_envs_rejected():
    with pytest.raises(ValueError, match="mix"):
        dataset_from_episodes([lander_episode(0, 2), racing_episode(1, 2, 40)])
    with pytest.raises(ValueError, match="no episodes"):
        dataset_from_episodes([])


def test_split_by_step_counts_and_partition():
    eps = [lander_episode(i, 10) for i in range(10)]
    train, val = split_dataset(eps, "by_step", 0.2, seed=0)
    assert (len(train), len(val)) == (80, 20)
    key = lambda s: (s[0], s[1])
    all_keys = {key(s) for s in dataset_from_episodes(eps).samples}
    assert {key(s) for s in train.samples} | {key(s) for s in val.samples} == all_keys
    assert not ({key(s) for s in train.samples} & {key(s) for s in val.samples})
    # source order survives the split
    assert [key(s) for s in train.samples] == sorted(key(s) for s in train.samples)


def test_split_by_episode_holds_out_whole_episodes():
    eps = [lander_episode(i, 4 + i) for i in range(10)]
    train, val = split_dataset(eps, "by_episode", 0.2, seed=3)
    val_seeds = {s[0] for s in val.samples}
    assert len(val_seeds) == 2
    assert val_seeds.isdisjoint({s[0] for s in train.samples})
    # every held-out episode is intact
    for seed in val_seeds:
        assert sum(1 for s in val.samples if s[0] == seed) == 4 + seed


def test_split_deterministic_in_seed():
    eps = [lander_episode(i, 10) for i in range(10)]
    a = split_dataset(eps, "by_step", 0.2, seed=5)
    b = split_dataset(eps, "by_step", 0.2, seed=5)
    c = split_dataset(eps, "by_step", 0.2, seed=6)
    assert [s[:2] for s in a[1].samples] == [s[:2] for s in b[1].samples]
    assert [s[:2] for s in a[1].samples] != [s[:2] for s in c[1].samples]


def test_split_validation():
    eps = [lander_episode(i, 10) for i in range(10)]
    with pytest.raises(ValueError, match="fraction"):
        split_dataset(eps, "by_step", 0.0, seed=0)
    with pytest.raises(ValueError, match="unknown split mode"):
        split_dataset(eps, "by_half", 0.2, seed=0)
    with pytest.raises(ValueError, match="empty side"):
        split_dataset(eps[:2], "by_episode", 0.01, seed=0)


def test_bind_lander_kim_columns():
    eps = [lander_episode(0, 6)]
    ds = dataset_from_episodes(eps)
    graph = load_fixture("lander_kim")
    groups = bind_batches(graph, ds, fit_normalizer("lander"))
    assert len(groups) == 1
    inputs, targets, n = groups[0]
    assert n == 6 and targets.dtype == np.int64
    block = np.asarray([s[2] for s in ds.samples])
    for i, name in enumerate(graph.input_names()):
        np.testing.assert_array_equal(inputs[name], block[:, i])


def test_bind_racing_groups_by_track_length():
    eps = [racing_episode(0, 3, 40), racing_episode(1, 2, 55),
           racing_episode(2, 1, 40)]
    ds = dataset_from_episodes(eps)
    graph = load_fixture("racing_kim")
    groups = bind_batches(graph, ds, fit_normalizer("racing"))
    # grouped by tile count, ordered by first appearance, nothing dropped
    assert [g[0]["tiles"].shape for g in groups] == [(4, 40, 8), (2, 55, 8)]
    assert sum(g[2] for g in groups) == len(ds)
    # normalizer applied: column 0 scaled onto [-1, 1]
    raw = ds.samples[0][2][0][:, 0]
    np.testing.assert_allclose(groups[0][0]["tiles"][0, :, 0], raw / 80.0)


def test_bind_env_graph_mismatch():
    lander_ds = dataset_from_episodes([lander_episode(0, 2)])
    racing_ds = dataset_from_episodes([racing_episode(0, 2, 40)])
    with pytest.raises(GraphError, match="non-racing"):
        bind_batches(load_fixture("racing_kim"), lander_ds,
                     fit_normalizer("lander"))
    with pytest.raises(GraphError, match="non-lander"):
        bind_batches(load_fixture("lander_kim"), racing_ds,
                     fit_normalizer("racing"))


def test_bind_mlp_lander_features_passthrough():
    ds = dataset_from_episodes([lander_episode(0, 4)])
    graph = build_mlp(8, [4], 4)
    [(inputs, targets, n)] = bind_batches(graph, ds, fit_normalizer("lander"))
    assert inputs["features"].shape == (4, 8)
    assert targets.dtype == np.int64 and n == 4


def test_bind_mlp_racing_window():
    n_tiles = MLP_TILE_WINDOW + 7
    ds = dataset_from_episodes([racing_episode(0, 3, n_tiles)])
    width = 7 + MLP_TILE_WINDOW * 8
    graph = build_mlp(width, [4], 3)
    [(inputs, targets, _)] = bind_batches(graph, ds, fit_normalizer("racing"))
    assert inputs["features"].shape == (3, width)
    assert targets.shape == (3, 3)
    # indicators first, then the nearest tiles row-major
    norm = fit_normalizer("racing")
    tiles, ind = ds.samples[0][2]
    st, si = (np.clip(tiles * np.asarray(norm.tile_scale), -1, 1),
              np.clip(ind, -1, 1))
    np.testing.assert_allclose(inputs["features"][0, :7], si)
    np.testing.assert_allclose(inputs["features"][0, 7:15], st[0])


def test_bind_mlp_width_mismatch_and_short_track():
    ds = dataset_from_episodes([racing_episode(0, 2, 40)])
    with pytest.raises(GraphError, match="features"):
        bind_batches(build_mlp(100, [4], 3), ds, fit_normalizer("racing"))
    short = dataset_from_episodes([racing_episode(0, 2, MLP_TILE_WINDOW - 1)])
    with pytest.raises(GraphError, match="tiles"):
        bind_batches(build_mlp(7 + MLP_TILE_WINDOW * 8, [4], 3), short,
                     fit_normalizer("racing"))


def test_bind_empty_dataset_rejected():
    ds = Dataset("lander", "train", ())
    with pytest.raises(ValueError, match="empty"):
        bind_batches(load_fixture("lander_kim"), ds, fit_normalizer("lander"))
