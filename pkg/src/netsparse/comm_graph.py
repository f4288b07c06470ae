"""Communication tree validation, seeded measurement blocks and the in-network
aggregation of ``y(k) = sum_l C_l(k) x_l(k)``.

Vertex 0 is the estimator; subsystems are 1..L.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CyclicGraph, DimensionMismatch, GraphError, MultiplePaths, Unreachable

FIGURE3_EDGES = ((6, 1), (1, 4), (2, 4), (4, 0), (5, 0), (3, 0))


def star_edges(L: int) -> tuple[tuple[int, int], ...]:
    return tuple((ell, 0) for ell in range(1, L + 1))


@dataclass(frozen=True)
class CommGraph:
    vertex_count: int
    edges: frozenset[tuple[int, int]]
    parent: dict[int, int]
    children: dict[int, tuple[int, ...]]
    partition: tuple[tuple[int, ...], ...]  # partition[t-1] = C_t, ascending

    @property
    def L(self) -> int:
        return self.vertex_count - 1

    @property
    def max_path_len(self) -> int:
        return len(self.partition)

    def depth(self, v: int) -> int:
        for t, group in enumerate(self.partition, start=1):
            if v in group:
                return t
        raise KeyError(v)


def validate(edges: Iterable[Sequence[int]], L: int) -> CommGraph:
    """Check the graph is acyclic with exactly one path from every subsystem to 0."""
    edge_set = frozenset((int(a), int(b)) for a, b in edges)
    for a, b in edge_set:
        if not (1 <= a <= L and 0 <= b <= L) or a == b:
            raise GraphError(f"invalid edge ({a}, {b}) for L={L}")

    out: dict[int, list[int]] = {v: [] for v in range(L + 1)}
    for a, b in sorted(edge_set):
        out[a].append(b)
    try:
        # successors must be ordered before a vertex: feed out-neighbours as predecessors
        order = list(TopologicalSorter({v: out[v] for v in out}).static_order())
    except CycleError as exc:
        raise CyclicGraph(f"cycle through vertices {exc.args[1]}") from None

    paths = {0: 1}
    for v in order:
        if v != 0:
            paths[v] = sum(paths[u] for u in out[v])
    for v in range(1, L + 1):
        if paths[v] == 0:
            raise Unreachable(v)
        if paths[v] > 1:
            raise MultiplePaths(v, paths[v])

    # one path each => one outgoing edge each: a tree rooted at 0
    parent = {v: out[v][0] for v in range(1, L + 1)}
    children: dict[int, list[int]] = {v: [] for v in range(L + 1)}
    for v, p in parent.items():
        children[p].append(v)
    depth = {0: 0}
    for v in order:  # parents precede children in this order
        if v != 0:
            depth[v] = depth[parent[v]] + 1
    T = max(depth.values())
    partition = tuple(
        tuple(sorted(v for v in range(1, L + 1) if depth[v] == t)) for t in range(1, T + 1)
    )
    return CommGraph(
        vertex_count=L + 1,
        edges=edge_set,
        parent=parent,
        children={v: tuple(sorted(c)) for v, c in children.items()},
        partition=partition,
    )


def read_edge_list(path: str | Path) -> list[tuple[int, int]]:
    """One ``src dst`` pair per line (comma or whitespace separated, ``#`` comments)."""
    edges = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].replace(",", " ").strip()
        if line:
            a, b = line.split()
            edges.append((int(a), int(b)))
    return edges


@dataclass(frozen=True)
class SeededMatrixGen:
    """Standard-normal measurement blocks keyed by ``(k, l)``.

    Each block comes from a Philox counter-based stream seeded with
    ``SeedSequence([base_seed, k, l])``, so transmitter and receiver
    regenerate ``C_l(k)`` bit-exactly without sharing a sequential stream.
    """

    base_seed: int

    def stream_seed(self, k: int, ell: int) -> np.random.SeedSequence:
        return np.random.SeedSequence([self.base_seed, k, ell])

    def block(self, k: int, ell: int, p: int, n_ell: int) -> np.ndarray:
        return gen_measurement_block(self, k, ell, p, n_ell)

    def matrix(self, k: int, p: int, block_sizes: Sequence[int]) -> np.ndarray:
        """Full ``C(k) = [C_1(k) .. C_L(k)]``."""
        return np.hstack([self.block(k, ell, p, nl) for ell, nl in enumerate(block_sizes, start=1)])


def gen_measurement_block(gen: SeededMatrixGen, k: int, ell: int, p: int, n_ell: int) -> np.ndarray:
    if p < 1 or n_ell < 1:
        raise ValueError("block dimensions must be positive")
    rng = np.random.Generator(np.random.Philox(gen.stream_seed(k, ell)))
    return rng.standard_normal((p, n_ell))


@dataclass(frozen=True)
class Message:
    round: int
    sender: int
    receiver: int
    payload_dim: int


@dataclass
class MessageLog:
    messages: list[Message] = field(default_factory=list)
    rounds: int = 0

    def __len__(self) -> int:
        return len(self.messages)

    def write_csv(self, path: str | Path, k: int | None = None, append: bool = False) -> None:
        write_messages_csv(path, [(k, self)], append=append)


MESSAGE_CSV_HEADER = ("k", "round", "sender", "receiver", "payload_dim")


def write_messages_csv(path, logs: Iterable[tuple[int | None, MessageLog]], append: bool = False) -> None:
    path = Path(path)
    write_header = not (append and path.exists())
    with path.open("a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if write_header:
            w.writerow(MESSAGE_CSV_HEADER)
        for k, log in logs:
            for msg in log.messages:
                w.writerow(("" if k is None else k, msg.round, msg.sender, msg.receiver, msg.payload_dim))


def _local_terms(graph, gen, k, p, states):
    if len(states) != graph.L:
        raise DimensionMismatch(f"{len(states)} state blocks for L={graph.L}")
    terms = {}
    for ell, xl in enumerate(states, start=1):
        xl = np.atleast_1d(np.asarray(xl, dtype=float))
        terms[ell] = gen.block(k, ell, p, xl.shape[0]) @ xl
    return terms


def distributed_measure(
    graph: CommGraph, gen: SeededMatrixGen, k: int, p: int, states: Sequence[np.ndarray]
) -> tuple[np.ndarray, MessageLog]:
    """Round-based aggregation: in round t every vertex at depth ``T - t`` adds
    its children's partial sums (ascending index) to ``C_l x_l`` and forwards
    the result to its parent. The estimator sums what it receives from depth 1.
    """
    terms = _local_terms(graph, gen, k, p, states)
    T = graph.max_path_len
    inbox: dict[int, dict[int, np.ndarray]] = {v: {} for v in range(graph.vertex_count)}
    log = MessageLog(rounds=T)
    for t in range(T):
        for ell in graph.partition[T - t - 1]:
            z = terms[ell]
            for child in sorted(inbox[ell]):
                z = z + inbox[ell][child]
            parent = graph.parent[ell]
            inbox[parent][ell] = z
            log.messages.append(Message(t, ell, parent, p))
    received = inbox[0]
    y = np.zeros(p)
    for i, child in enumerate(sorted(received)):
        y = received[child] if i == 0 else y + received[child]
    return y, log


def centralized_measure(
    graph: CommGraph, gen: SeededMatrixGen, k: int, p: int, states: Sequence[np.ndarray]
) -> np.ndarray:
    """Direct evaluation of the nested path expansion
    ``sum_{i1 in C_1} (C_i1 x_i1 + sum_{i2 in N_i1} (C_i2 x_i2 + ...))``
    by recursion from the estimator, with no message passing. It uses the same
    per-vertex summation order as the protocol, so results agree bit-exactly.
    """
    terms = _local_terms(graph, gen, k, p, states)

    def subtree(v: int) -> np.ndarray:
        z = terms[v]
        for c in graph.children[v]:
            z = z + subtree(c)
        return z

    roots = graph.children[0]
    if not roots:
        return np.zeros(p)
    y = subtree(roots[0])
    for r in roots[1:]:
        y = y + subtree(r)
    return y
