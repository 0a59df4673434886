import numpy as np
import numpy.testing as npt
import pytest
from scipy import stats

from srngate import tasks
from srngate.errors import ConfigError, FormatError
from srngate.model import LossKind
from srngate.tasks import SYMBOL_X, SYMBOL_Y, TaskKind, TaskSpec


def marker_positions(seq):
    """0-based positions where the marker channel is set."""
    return np.flatnonzero(seq[:, 1] == 1.0)


class TestAdding:
    def test_targets_recomputable_from_inputs(self):
        batch = tasks.gen_adding(T=100, n=500, seed=0)
        for i in range(batch.n):
            pos = marker_positions(batch.inputs[i])
            assert len(pos) == 2
            v1, v2 = batch.inputs[i, pos, 0]
            npt.assert_allclose(batch.targets[i, 0], (v1 + v2) / 2.0, rtol=1e-15)

    def test_marker_windows_respected(self):
        T = 100
        batch = tasks.gen_adding(T=T, n=2000, seed=1)
        for i in range(batch.n):
            p1, p2 = marker_positions(batch.inputs[i]) + 1  # 1-based
            assert 1 <= p1 <= T // 10
            assert T // 10 < p2 <= T // 2

    def test_targets_in_unit_interval(self):
        batch = tasks.gen_adding(T=50, n=5000, seed=2)
        assert np.all(batch.targets >= 0.0) and np.all(batch.targets <= 1.0)

    def test_target_mean(self):
        batch = tasks.gen_adding(T=100, n=100_000, seed=3)
        assert abs(batch.targets.mean() - 0.5) < 0.005

    def test_deterministic(self):
        b1 = tasks.gen_adding(T=30, n=50, seed=4)
        b2 = tasks.gen_adding(T=30, n=50, seed=4)
        assert b1.inputs.tobytes() == b2.inputs.tobytes()
        assert b1.targets.tobytes() == b2.targets.tobytes()

    def test_too_short_fatal(self):
        with pytest.raises(ConfigError):
            tasks.gen_adding(T=9, n=10, seed=0)

    def test_metadata(self):
        batch = tasks.gen_adding(T=20, n=3, seed=5)
        assert batch.loss_kind is LossKind.MSE
        assert batch.task_kind is TaskKind.ADDING
        assert batch.inputs.shape == (3, 20, 2)
        assert batch.targets.shape == (3, 1)
        assert batch.success_tolerance == 0.04


class TestMultiplication:
    def test_targets_recomputable_from_inputs(self):
        batch = tasks.gen_multiplication(T=60, n=500, seed=6)
        for i in range(batch.n):
            pos = marker_positions(batch.inputs[i])
            v1, v2 = batch.inputs[i, pos, 0]
            npt.assert_allclose(batch.targets[i, 0], v1 * v2, rtol=1e-15)

    def test_target_mean(self):
        # product of two independent uniforms has mean 1/4
        batch = tasks.gen_multiplication(T=100, n=100_000, seed=7)
        assert abs(batch.targets.mean() - 0.25) < 0.005


class TestTemporalOrder:
    def test_class_recomputable_from_inputs(self):
        for count, T in ((2, 100), (3, 100), (2, 50), (3, 50)):
            spec = TaskSpec(TaskKind.TEMPORAL_ORDER if count == 2
                            else TaskKind.TEMPORAL_ORDER_3BIT, T)
            batch = tasks.generate(spec, 300, seed=8)
            for i in range(batch.n):
                symbols = np.argmax(batch.inputs[i], axis=1)
                special = symbols[symbols >= SYMBOL_X]
                assert len(special) == count
                cls = 0
                for s in special:
                    cls = cls * 2 + (1 if s == SYMBOL_Y else 0)
                assert cls == batch.targets[i]

    def test_specials_inside_windows(self):
        spec = TaskSpec(TaskKind.TEMPORAL_ORDER_3BIT, 100)
        batch = tasks.generate(spec, 1000, seed=9)
        windows = spec.windows()
        for i in range(batch.n):
            symbols = np.argmax(batch.inputs[i], axis=1)
            positions = np.flatnonzero(symbols >= SYMBOL_X) + 1
            assert len(positions) == 3
            for pos, (lo, hi) in zip(sorted(positions), windows):
                assert lo <= pos <= hi

    def test_one_hot_rows(self):
        batch = tasks.gen_temporal_order(T=40, n=100, seed=10)
        npt.assert_array_equal(batch.inputs.sum(axis=2), np.ones((100, 40)))
        assert set(np.unique(batch.inputs)) == {0.0, 1.0}

    def test_class_histogram_uniform(self):
        for count, classes in ((2, 4), (3, 8)):
            batch = tasks.gen_temporal_order(T=100, n=100_000, seed=11,
                                             special_count=count)
            histogram = np.bincount(batch.targets, minlength=classes)
            p = stats.chisquare(histogram).pvalue
            assert p > 0.01, f"count={count}: histogram {histogram}, p={p}"

    def test_distractors_only_elsewhere(self):
        batch = tasks.gen_temporal_order(T=30, n=200, seed=12)
        symbols = np.argmax(batch.inputs, axis=2)
        n_specials = (symbols >= SYMBOL_X).sum(axis=1)
        npt.assert_array_equal(n_specials, np.full(200, 2))

    def test_window_collision_fatal(self):
        with pytest.raises(ConfigError, match="window"):
            tasks.gen_temporal_order(T=5, n=10, seed=0)
        with pytest.raises(ConfigError, match="window"):
            tasks.gen_temporal_order(T=9, n=10, seed=0, special_count=3)

    def test_bad_special_count(self):
        with pytest.raises(ConfigError):
            tasks.gen_temporal_order(T=100, n=10, seed=0, special_count=4)

    def test_metadata(self):
        batch = tasks.gen_temporal_order(T=50, n=4, seed=13, special_count=3)
        assert batch.inputs.shape == (4, 50, 6)
        assert batch.targets.shape == (4,)
        assert batch.targets.dtype == np.int64
        assert batch.loss_kind is LossKind.CROSS_ENTROPY


class TestMakeSplits:
    def test_default_sizes(self):
        spec = TaskSpec(TaskKind.ADDING, 20)
        splits = tasks.make_splits(spec, seed=14, sizes=(200, 10, 100))
        assert splits["train"].n == 200
        assert splits["valid"].n == 10
        assert splits["test"].n == 100

    def test_same_seed_identical(self):
        spec = TaskSpec(TaskKind.TEMPORAL_ORDER, 30)
        s1 = tasks.make_splits(spec, seed=15, sizes=(50, 20, 30))
        s2 = tasks.make_splits(spec, seed=15, sizes=(50, 20, 30))
        for name in ("train", "valid", "test"):
            assert s1[name].inputs.tobytes() == s2[name].inputs.tobytes()

    def test_splits_do_not_collide(self):
        spec = TaskSpec(TaskKind.ADDING, 40)
        splits = tasks.make_splits(spec, seed=16, sizes=(500, 500, 500))
        seen = set()
        for name in ("train", "valid", "test"):
            for row in splits[name].inputs.reshape(splits[name].n, -1):
                seen.add(row.tobytes())
        assert len(seen) == 1500

    def test_paper_default_sizes(self):
        spec = TaskSpec(TaskKind.ADDING, 20)
        children = np.random.SeedSequence(0).spawn(3)
        assert tasks.make_splits.__defaults__[0] == (20000, 1000, 10000)
        assert len(children) == 3


class TestSubset:
    def test_subset_slices_consistently(self):
        batch = tasks.gen_temporal_order(T=20, n=30, seed=17)
        sub = batch.subset(np.arange(5, 10))
        npt.assert_array_equal(sub.inputs, batch.inputs[5:10])
        npt.assert_array_equal(sub.targets, batch.targets[5:10])
        assert sub.task_kind is batch.task_kind


class TestDumpLoad:
    def test_round_trip_regression(self, tmp_path):
        batch = tasks.gen_adding(T=25, n=40, seed=18)
        path = tmp_path / "adding.dat"
        tasks.save_batch(path, batch, seed=18)
        loaded = tasks.load_batch(path)
        assert loaded.inputs.tobytes() == batch.inputs.tobytes()
        assert loaded.targets.tobytes() == batch.targets.tobytes()
        assert loaded.task_kind is batch.task_kind
        assert loaded.loss_kind is batch.loss_kind
        assert loaded.success_tolerance == batch.success_tolerance

    def test_round_trip_classification(self, tmp_path):
        batch = tasks.gen_temporal_order(T=30, n=25, seed=19, special_count=3)
        path = tmp_path / "order.dat"
        tasks.save_batch(path, batch)
        loaded = tasks.load_batch(path)
        assert loaded.targets.dtype == batch.targets.dtype
        npt.assert_array_equal(loaded.targets, batch.targets)
        npt.assert_array_equal(loaded.inputs, batch.inputs)

    def test_identical_files_for_identical_batches(self, tmp_path):
        b = tasks.gen_adding(T=25, n=40, seed=20)
        p1, p2 = tmp_path / "a.dat", tmp_path / "b.dat"
        tasks.save_batch(p1, b, seed=20)
        tasks.save_batch(p2, tasks.gen_adding(T=25, n=40, seed=20), seed=20)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_files(self, tmp_path):
        path = tmp_path / "junk.dat"
        path.write_bytes(b"NOTDATA\n{}\n")
        with pytest.raises(FormatError):
            tasks.load_batch(path)
        path.write_bytes(tasks.DATA_MAGIC + b"\nnot json\n")
        with pytest.raises(FormatError):
            tasks.load_batch(path)
        batch = tasks.gen_adding(T=25, n=4, seed=21)
        good = tmp_path / "good.dat"
        tasks.save_batch(good, batch)
        truncated = good.read_bytes()[:-16]
        bad = tmp_path / "trunc.dat"
        bad.write_bytes(truncated)
        with pytest.raises(FormatError):
            tasks.load_batch(bad)
