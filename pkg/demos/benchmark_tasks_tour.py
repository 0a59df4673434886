"""Tour of the four synthetic benchmarks: what a sequence looks like, where
the information hides, and how the target follows from it.

Run:  python3 demos/benchmark_tasks_tour.py
"""

import numpy as np

from srngate import tasks

np.set_printoptions(precision=3, suppress=True)


def show_marked_value_task(name, batch):
    print(f"\n=== {name} (T={batch.T}) ===")
    seq = batch.inputs[0]
    marked = np.flatnonzero(seq[:, 1] == 1.0)
    print(f"value channel, first 12 steps : {seq[:12, 0]}")
    print(f"marker channel set at steps   : {marked + 1} (1-based)")
    v1, v2 = seq[marked, 0]
    print(f"marked values                 : {v1:.3f}, {v2:.3f}")
    print(f"target                        : {batch.targets[0, 0]:.3f}")
    print(f"success criterion             : |prediction - target| < "
          f"{batch.success_tolerance}")


def show_temporal_order_task(name, batch, specials):
    print(f"\n=== {name} (T={batch.T}) ===")
    symbols = np.argmax(batch.inputs[0], axis=1)
    letters = np.array(list("abcdXY"))
    text = "".join(letters[symbols])
    print(f"symbol stream : {text}")
    pos = np.flatnonzero(symbols >= tasks.SYMBOL_X)
    read = "".join(letters[symbols[pos]])
    print(f"specials      : {read!r} at steps {pos + 1} (1-based)")
    print(f"class         : {batch.targets[0]} of {2 ** specials} "
          f"(binary reading of the tuple, X=0, Y=1)")


def main():
    show_marked_value_task("adding", tasks.gen_adding(T=100, n=3, seed=0))
    show_marked_value_task("multiplication",
                           tasks.gen_multiplication(T=100, n=3, seed=1))
    show_temporal_order_task("temporal order",
                             tasks.gen_temporal_order(T=100, n=3, seed=2), 2)
    show_temporal_order_task("temporal order, 3 specials",
                             tasks.gen_temporal_order(T=100, n=3, seed=3,
                                                      special_count=3), 3)

    print("\n=== split protocol ===")
    spec = tasks.TaskSpec(tasks.TaskKind.ADDING, 100)
    splits = tasks.make_splits(spec, seed=4, sizes=(200, 50, 100))
    for name, batch in splits.items():
        print(f"{name:5s}: {batch.n} sequences, targets mean "
              f"{batch.targets.mean():.3f}")
    print("(default sizes are 20000 / 1000 / 10000)")


if __name__ == "__main__":
    main()
