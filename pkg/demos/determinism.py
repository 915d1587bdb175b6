"""Show that the partition is a pure function of (instance, k, eps, seed).

The worker pool size changes wall time only. Every run below must print
the same hash line for its seed, no matter the thread count or repeat.
"""

from fractions import Fraction

import numpy as np

from detpart import Hypergraph, WorkerPool, partition
from detpart.io import assignment_digest

rng = np.random.default_rng(7)
n, m = 4000, 6000
hg = Hypergraph.from_edges(
    [rng.choice(n, size=4, replace=False) for _ in range(m)],
    num_vertices=n,
)

for seed in (1, 2):
    digests = set()
    for threads in (1, 2, 4):
        with WorkerPool(threads) as pool:
            for rep in range(2):
                res = partition(hg, k=8, epsilon=Fraction(3, 100),
                                seed=seed, pool=pool)
                d = assignment_digest(res.state.assignment)
                digests.add(d)
                print(f"seed={seed} threads={threads} rep={rep} "
                      f"hash={d} metric={res.state.metric()}")
    assert len(digests) == 1, "thread count leaked into the result"
    print(f"seed={seed}: all 6 runs identical\n")
