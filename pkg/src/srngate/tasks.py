"""Seeded generators for the four synthetic long-range benchmarks.

All four tasks hide the relevant information early in a long input sequence
and ask for a single answer after the final step, so solving them requires
carrying information across most of the sequence:

* adding / multiplication: channel 0 carries i.i.d. uniform [0, 1] values,
  channel 1 marks exactly two positions with 1.0.  The first marker falls in
  steps [1, T//10], the second in (T//10, T//2] (1-based).  The target is the
  mean (respectively product) of the two marked values, predicted by a linear
  output under squared error; a prediction counts as correct when it lands
  within the success tolerance (0.04 by default).

* temporal order (2 or 3 specials): sequences over a 6-symbol alphabet,
  one-hot encoded.  Four symbols are uniform distractor noise; at one random
  position inside each of 2 (or 3) disjoint windows a special symbol X or Y
  appears.  The class is the ordered tuple of specials read as a binary
  number with X=0 and Y=1, giving 4 (or 8) classes under softmax /
  cross-entropy.  Windows sit at [0.1T, 0.2T] and [0.5T, 0.6T], the 3-special
  variant at [0.1T, 0.2T], [0.3T, 0.4T] and [0.6T, 0.7T].

Generation is a pure function of (spec, n, seed): repeating a call gives a
bit-identical batch.  Split generation derives independent child seeds with
numpy's SeedSequence spawning, so train / validation / test never share a
stream.
"""

import json
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ConfigError, FormatError
from .model import LossKind, OutputActivation

DATA_MAGIC = b"SRNDATA1"

N_DISTRACTORS = 4  # temporal-order alphabet: distractors 0..3, X=4, Y=5
SYMBOL_X = 4
SYMBOL_Y = 5


class TaskKind(Enum):
    ADDING = "adding"
    MULTIPLICATION = "multiplication"
    TEMPORAL_ORDER = "temporal_order"
    TEMPORAL_ORDER_3BIT = "temporal_order_3bit"


@dataclass(frozen=True)
class TaskSpec:
    kind: TaskKind
    T: int
    success_tolerance: float = 0.04

    @property
    def regression(self) -> bool:
        return self.kind in (TaskKind.ADDING, TaskKind.MULTIPLICATION)

    @property
    def n_in(self) -> int:
        return 2 if self.regression else N_DISTRACTORS + 2

    @property
    def n_out(self) -> int:
        if self.regression:
            return 1
        return 2 ** self.special_count

    @property
    def special_count(self) -> int:
        if self.kind is TaskKind.TEMPORAL_ORDER:
            return 2
        if self.kind is TaskKind.TEMPORAL_ORDER_3BIT:
            return 3
        return 0

    @property
    def loss_kind(self) -> LossKind:
        return LossKind.MSE if self.regression else LossKind.CROSS_ENTROPY

    @property
    def output_activation(self) -> OutputActivation:
        return OutputActivation.LINEAR if self.regression else OutputActivation.SOFTMAX

    def windows(self) -> list:
        """1-based inclusive [lo, hi] windows holding markers or specials."""
        if self.regression:
            return [(1, self.T // 10), (self.T // 10 + 1, self.T // 2)]
        # windows are tenths of T; integer arithmetic keeps them exact
        tenths = {2: [(1, 2), (5, 6)],
                  3: [(1, 2), (3, 4), (6, 7)]}[self.special_count]
        return [(lo * self.T // 10, hi * self.T // 10) for lo, hi in tenths]

    def validate(self) -> None:
        if self.regression and self.T < 10:
            raise ConfigError(f"{self.kind.value} needs T >= 10, got T={self.T}")
        if self.success_tolerance <= 0:
            raise ConfigError(f"success tolerance must be positive, "
                              f"got {self.success_tolerance}")
        last_hi = 0
        for lo, hi in self.windows():
            if lo < 1 or hi > self.T or lo > hi:
                raise ConfigError(
                    f"{self.kind.value}: window [{lo}, {hi}] does not fit in "
                    f"[1, {self.T}]; increase T")
            if lo <= last_hi:
                raise ConfigError(
                    f"{self.kind.value}: window [{lo}, {hi}] overlaps the "
                    f"previous one ending at {last_hi}")
            last_hi = hi


@dataclass
class SequenceBatch:
    inputs: np.ndarray        # (n, T, n_in) float64
    targets: np.ndarray       # (n, n_out) float64 or (n,) int64 class ids
    task_kind: TaskKind
    T: int
    loss_kind: LossKind
    success_tolerance: float

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def subset(self, indices) -> "SequenceBatch":
        return replace(self, inputs=self.inputs[indices],
                       targets=self.targets[indices])


def _marked_value_batch(spec: TaskSpec, n: int, seed, combine) -> SequenceBatch:
    spec.validate()
    rng = np.random.default_rng(seed)
    T = spec.T
    values = rng.uniform(0.0, 1.0, size=(n, T))
    (lo1, hi1), (lo2, hi2) = spec.windows()
    m1 = rng.integers(lo1, hi1 + 1, size=n)
    m2 = rng.integers(lo2, hi2 + 1, size=n)
    markers = np.zeros((n, T))
    rows = np.arange(n)
    markers[rows, m1 - 1] = 1.0
    markers[rows, m2 - 1] = 1.0
    inputs = np.stack([values, markers], axis=2)
    targets = combine(values[rows, m1 - 1], values[rows, m2 - 1])[:, None]
    return SequenceBatch(inputs=inputs, targets=targets, task_kind=spec.kind,
                         T=T, loss_kind=LossKind.MSE,
                         success_tolerance=spec.success_tolerance)


def gen_adding(T: int, n: int, seed, tolerance: float = 0.04) -> SequenceBatch:
    """Mean of the two marked values; targets stay inside [0, 1]."""
    spec = TaskSpec(TaskKind.ADDING, T, tolerance)
    return _marked_value_batch(spec, n, seed, lambda v1, v2: (v1 + v2) / 2.0)


def gen_multiplication(T: int, n: int, seed, tolerance: float = 0.04) -> SequenceBatch:
    """Product of the two marked values."""
    spec = TaskSpec(TaskKind.MULTIPLICATION, T, tolerance)
    return _marked_value_batch(spec, n, seed, lambda v1, v2: v1 * v2)


def gen_temporal_order(T: int, n: int, seed, special_count: int = 2) -> SequenceBatch:
    """Classify the ordered tuple of special symbols hidden in noise."""
    if special_count == 2:
        spec = TaskSpec(TaskKind.TEMPORAL_ORDER, T)
    elif special_count == 3:
        spec = TaskSpec(TaskKind.TEMPORAL_ORDER_3BIT, T)
    else:
        raise ConfigError(f"special_count must be 2 or 3, got {special_count}")
    spec.validate()
    rng = np.random.default_rng(seed)
    symbols = rng.integers(0, N_DISTRACTORS, size=(n, T))
    rows = np.arange(n)
    classes = np.zeros(n, dtype=np.int64)
    for lo, hi in spec.windows():
        pos = rng.integers(lo, hi + 1, size=n)
        bit = rng.integers(0, 2, size=n)  # 0 -> X, 1 -> Y
        symbols[rows, pos - 1] = SYMBOL_X + bit
        classes = classes * 2 + bit
    inputs = np.eye(spec.n_in)[symbols]
    return SequenceBatch(inputs=inputs, targets=classes, task_kind=spec.kind,
                         T=T, loss_kind=LossKind.CROSS_ENTROPY,
                         success_tolerance=spec.success_tolerance)


def generate(spec: TaskSpec, n: int, seed) -> SequenceBatch:
    """Generate n sequences for any task spec."""
    if spec.kind is TaskKind.ADDING:
        return gen_adding(spec.T, n, seed, spec.success_tolerance)
    if spec.kind is TaskKind.MULTIPLICATION:
        return gen_multiplication(spec.T, n, seed, spec.success_tolerance)
    return gen_temporal_order(spec.T, n, seed, spec.special_count)


def make_splits(spec: TaskSpec, seed,
                sizes: tuple = (20000, 1000, 10000)) -> dict:
    """Disjoint train / validation / test batches from one master seed.

    Child seeds come from SeedSequence(seed).spawn, so the three streams are
    statistically independent and the same master seed always reproduces the
    same splits.  ``seed`` may be an int or an existing SeedSequence.
    """
    names = ("train", "valid", "test")
    if len(sizes) != 3 or any(s < 1 for s in sizes):
        raise ConfigError(f"sizes must be three positive counts, got {sizes}")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    children = seed.spawn(3)
    return {name: generate(spec, size, child)
            for name, size, child in zip(names, sizes, children)}


def save_batch(path, batch: SequenceBatch, seed: int | None = None) -> None:
    """Write a batch as a self-describing flat binary file.

    Layout: magic line, one JSON header line, then the raw little-endian
    C-order array bytes (inputs, then targets).  Identical batches produce
    byte-identical files.
    """
    header = {
        "task": batch.task_kind.value,
        "T": batch.T,
        "n": batch.n,
        "n_in": batch.inputs.shape[2],
        "seed": seed,
        "loss_kind": batch.loss_kind.value,
        "success_tolerance": batch.success_tolerance,
        "targets_dtype": str(batch.targets.dtype),
        "targets_shape": list(batch.targets.shape),
    }
    with open(path, "wb") as f:
        f.write(DATA_MAGIC + b"\n")
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        f.write(np.ascontiguousarray(batch.inputs, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(batch.targets).astype(
            "<f8" if batch.targets.dtype.kind == "f" else "<i8").tobytes())


def load_batch(path) -> SequenceBatch:
    """Read a file produced by save_batch."""
    with open(path, "rb") as f:
        magic = f.readline().rstrip(b"\n")
        if magic != DATA_MAGIC:
            raise FormatError(f"not a dataset file (bad magic {magic!r})")
        try:
            header = json.loads(f.readline().decode("utf-8"))
            kind = TaskKind(header["task"])
            n, T, n_in = int(header["n"]), int(header["T"]), int(header["n_in"])
            t_shape = tuple(header["targets_shape"])
            t_dtype = np.dtype(header["targets_dtype"])
            payload = f.read()
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as e:
            raise FormatError(f"malformed dataset header: {e}") from e
    n_input_bytes = n * T * n_in * 8
    expected = n_input_bytes + int(np.prod(t_shape)) * 8
    if len(payload) != expected:
        raise FormatError(f"dataset payload has {len(payload)} bytes, "
                          f"expected {expected}")
    inputs = np.frombuffer(payload[:n_input_bytes], dtype="<f8").reshape(n, T, n_in)
    raw = np.frombuffer(payload[n_input_bytes:],
                        dtype="<f8" if t_dtype.kind == "f" else "<i8")
    targets = raw.reshape(t_shape).astype(t_dtype, copy=True)
    return SequenceBatch(inputs=inputs.copy(), targets=targets, task_kind=kind,
                         T=T, loss_kind=LossKind(header["loss_kind"]),
                         success_tolerance=float(header["success_tolerance"]))
