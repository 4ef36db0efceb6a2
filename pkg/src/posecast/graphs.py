"""Skeleton graphs, hop-distance partitions, and spatio-temporal operators.

A skeleton is an undirected connected graph over V joints. Its adjacency
is split into disjoint hop layers (layer k holds exactly the pairs at
shortest-path distance k), which are then replicated across T frames:
block (t1, t2) of layer k is the single-frame layer whenever
|t1 - t2| <= span, and zero beyond. Each assembled operator is
symmetrically degree-normalized.

Node (frame t, joint v) maps to flat index t * V + v.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SkeletonGraph",
    "HopPartition",
    "PartitionedMultiGraph",
    "ConnectivityError",
    "hop_distances",
    "build_hop_partition",
    "build_multigraph",
    "normalize",
    "write_operator",
    "read_operator",
    "dump_multigraph",
]


class ConnectivityError(ValueError):
    """Raised when a skeleton graph is not connected."""


@dataclass(frozen=True)
class SkeletonGraph:
    joint_count: int
    edges: frozenset

    def __post_init__(self):
        edges = frozenset(frozenset(e) for e in self.edges)
        for e in edges:
            if len(e) != 2:
                raise ValueError(f"self-loop or malformed edge {set(e)}")
            for v in e:
                if not 0 <= v < self.joint_count:
                    raise ValueError(
                        f"joint index {v} out of range [0, {self.joint_count})"
                    )
        object.__setattr__(self, "edges", edges)

    def adjacency(self):
        a = np.zeros((self.joint_count, self.joint_count))
        for e in self.edges:
            i, j = sorted(e)
            a[i, j] = a[j, i] = 1.0
        return a

    def neighbors(self):
        nbrs = [[] for _ in range(self.joint_count)]
        for e in self.edges:
            i, j = sorted(e)
            nbrs[i].append(j)
            nbrs[j].append(i)
        return nbrs


@dataclass(frozen=True)
class HopPartition:
    """Disjoint binary layers: layers[k][i, j] == 1 iff d(i, j) == k."""

    max_hop: int
    layers: tuple

    @property
    def joint_count(self):
        return self.layers[0].shape[0]


@dataclass(frozen=True)
class PartitionedMultiGraph:
    """Normalized convolution operators over all V*T joint-frame nodes."""

    frame_count: int
    span: int
    max_hop: int
    joint_count: int
    operators: tuple
    raw_operators: tuple = field(repr=False, default=())

    @property
    def node_count(self):
        return self.frame_count * self.joint_count


def hop_distances(graph):
    """All-pairs shortest-path lengths by BFS from every joint."""
    v = graph.joint_count
    nbrs = graph.neighbors()
    dist = np.full((v, v), -1, dtype=np.int64)
    for src in range(v):
        dist[src, src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for w in nbrs[u]:
                if dist[src, w] < 0:
                    dist[src, w] = dist[src, u] + 1
                    queue.append(w)
    if (dist < 0).any():
        i, j = np.argwhere(dist < 0)[0]
        raise ConnectivityError(
            f"skeleton is disconnected: no path between joints {i} and {j}"
        )
    return dist


def build_hop_partition(graph, max_hop):
    if max_hop < 0:
        raise ValueError(f"max_hop must be >= 0, got {max_hop}")
    dist = hop_distances(graph)
    layers = tuple(
        (dist == k).astype(np.float64) for k in range(max_hop + 1)
    )
    return HopPartition(max_hop=max_hop, layers=layers)


def build_multigraph(partition, frame_count, span):
    """Assemble and normalize the per-hop operators over frame_count frames.

    Pre-normalization, layer k is kron(B, g_k) with B the 0/1 band matrix
    B[t1, t2] = 1 iff |t1 - t2| <= span: for k = 0 this yields same-joint
    edges across frames (plus self-loops on the diagonal blocks), for
    k >= 1 natural-link edges both within and across frames.
    """
    if frame_count < 1:
        raise ValueError(f"frame_count must be >= 1, got {frame_count}")
    if span < 0:
        raise ValueError(f"span must be >= 0, got {span}")
    t = np.arange(frame_count)
    band = (np.abs(t[:, None] - t[None, :]) <= span).astype(np.float64)
    raw = tuple(np.kron(band, g_k) for g_k in partition.layers)
    return PartitionedMultiGraph(
        frame_count=frame_count,
        span=span,
        max_hop=partition.max_hop,
        joint_count=partition.joint_count,
        operators=tuple(normalize(a) for a in raw),
        raw_operators=raw,
    )


def normalize(adjacency):
    """Symmetric degree normalization D^(-1/2) A D^(-1/2).

    Isolated nodes (zero degree in this partition) keep zero rows/columns.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    if not np.array_equal(a, a.T):
        raise ValueError("normalize() requires a symmetric matrix")
    if (a < 0).any():
        raise ValueError("normalize() requires a nonnegative matrix")
    deg = a.sum(axis=1)
    denom = np.sqrt(np.outer(deg, deg))
    return np.divide(a, denom, out=np.zeros_like(a), where=denom > 0)


def write_operator(path, matrix, joint_count, frame_count, span, max_hop, hop):
    """Plain-text matrix dump: one ``V T L D k`` header line, then rows."""
    with open(path, "w") as f:
        f.write(f"{joint_count} {frame_count} {span} {max_hop} {hop}\n")
        for row in np.asarray(matrix):
            f.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_operator(path):
    """Inverse of write_operator; returns (matrix, header dict)."""
    with open(path) as f:
        fields = f.readline().split()
        if len(fields) != 5:
            raise ValueError(f"bad operator header in {path}: expected 'V T L D k'")
        v, t, span, max_hop, hop = (int(x) for x in fields)
        matrix = np.array([[float(x) for x in line.split()] for line in f])
    header = {"V": v, "T": t, "L": span, "D": max_hop, "k": hop}
    if matrix.shape != (v * t, v * t):
        raise ValueError(
            f"operator in {path} has shape {matrix.shape}, header implies {(v * t, v * t)}"
        )
    return matrix, header


def dump_multigraph(multigraph, out_dir):
    """Write every hop operator pre- and post-normalization; returns paths."""
    paths = []
    meta = (
        multigraph.joint_count,
        multigraph.frame_count,
        multigraph.span,
        multigraph.max_hop,
    )
    for k in range(multigraph.max_hop + 1):
        for tag, matrix in (("pre", multigraph.raw_operators[k]),
                            ("post", multigraph.operators[k])):
            path = os.path.join(out_dir, f"operator_k{k}_{tag}.txt")
            write_operator(path, matrix, *meta, hop=k)
            paths.append(path)
    return paths
