"""Partition a small hand-built hypergraph and inspect the result."""

from fractions import Fraction

from detpart import Hypergraph, max_block_weight, partition

# Two clusters of three vertices joined by one bridge edge. A good
# bipartition cuts only the bridge.
edges = [
    [0, 1, 2],
    [0, 1],
    [1, 2],
    [3, 4, 5],
    [3, 4],
    [4, 5],
    [2, 3],
]
hg = Hypergraph.from_edges(edges)
print(hg)

result = partition(hg, k=2, epsilon=Fraction(3, 100), seed=1)
state = result.state

print("assignment:", state.assignment.tolist())
print("connectivity metric:", state.metric())
print("block weights:", state.block_weights.tolist())
print("weight cap:", max_block_weight(int(hg.vertex_weights.sum()), 2,
                                      Fraction(3, 100)))
print("balanced:", state.is_balanced())
print("levels in the hierarchy:", result.num_levels)
