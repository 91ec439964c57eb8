"""Simplicial complexes lifted from point clouds and graphs.

A Vietoris-Rips complex is built as the clique complex of the radius graph:
every set of points with all pairwise distances <= delta becomes a simplex.
Cliques are enumerated by ascending-id expansion of common-neighbour sets
(vectorised over all simplices of one dimension at a time), which emits every
clique exactly once and in lexicographic order. Cech complexes are not built;
the VR complex at delta is sandwiched between Cech(delta) and Cech(2 delta),
and is much cheaper to construct.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

import numpy as np

from .errors import InvalidInputError

Simplex = tuple[int, ...]

KINDS = ("boundary", "coboundary", "lower", "upper")


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    """Vertex positions plus simplices grouped by dimension.

    ``simplices[d]`` is an int array of shape (count_d, d+1) whose rows are
    strictly increasing vertex ids, stored in lexicographic order. The id of a
    simplex is ``(d, row)``.
    """

    simplices: tuple[np.ndarray, ...]
    positions: np.ndarray | None = None
    _lookup: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for d, s in enumerate(self.simplices):
            s.setflags(write=False)
        if self.positions is not None:
            self.positions.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return len(self.simplices[0])

    @property
    def max_dim(self) -> int:
        """Highest dimension with at least one simplex."""
        top = 0
        for d, s in enumerate(self.simplices):
            if len(s):
                top = d
        return top

    @property
    def ambient_dim(self) -> int | None:
        return None if self.positions is None else self.positions.shape[1]

    def count(self, dim: int) -> int:
        return len(self.simplices[dim]) if dim < len(self.simplices) else 0

    def counts(self) -> list[int]:
        return [len(s) for s in self.simplices]

    def simplex(self, dim: int, index: int) -> Simplex:
        return tuple(int(v) for v in self.simplices[dim][index])

    def iter_simplices(self, dim: int) -> Iterable[Simplex]:
        for row in self.simplices[dim]:
            yield tuple(int(v) for v in row)

    def simplex_set(self) -> set[Simplex]:
        return {s for d in range(len(self.simplices)) for s in self.iter_simplices(d)}

    def index_of(self, simplex: Iterable[int]) -> tuple[int, int]:
        simplex = tuple(sorted(int(v) for v in simplex))
        d = len(simplex) - 1
        if d not in self._lookup:
            self._lookup[d] = {s: i for i, s in enumerate(self.iter_simplices(d))}
        return d, self._lookup[d][simplex]

    def with_positions(self, positions) -> "SimplicialComplex":
        positions = np.array(positions, dtype=np.float64)
        if positions.ndim != 2 or positions.shape[0] != self.num_vertices:
            raise InvalidInputError("need one position per vertex")
        return SimplicialComplex(self.simplices, positions)

    def truncated(self, max_dim: int) -> "SimplicialComplex":
        return SimplicialComplex(self.simplices[: max_dim + 1], self.positions)

    def validate(self) -> None:
        """Check ordering, uniqueness, downward closure and vertex coverage."""
        n = self.num_vertices
        if not np.array_equal(self.simplices[0].ravel(), np.arange(n)):
            raise InvalidInputError("0-simplices must be exactly 0..num_vertices-1")
        if self.positions is not None and self.positions.shape[0] != n:
            raise InvalidInputError("every vertex needs a position")
        for d in range(1, len(self.simplices)):
            s = self.simplices[d]
            if s.size and (s.min() < 0 or s.max() >= n):
                raise InvalidInputError(f"dimension {d} references an unknown vertex")
            if s.size and not np.all(np.diff(s, axis=1) > 0):
                raise InvalidInputError(f"dimension {d} has a non-increasing simplex")
            codes = _encode(s, n)
            if np.any(np.diff(codes) <= 0):
                raise InvalidInputError(f"dimension {d} is unsorted or has duplicates")
            lower = _encode(self.simplices[d - 1], n)
            for j in range(d + 1):
                faces = _encode(np.delete(s, j, axis=1), n)
                pos = np.searchsorted(lower, faces)
                ok = (pos < len(lower)) & (lower[np.minimum(pos, len(lower) - 1)] == faces)
                if not np.all(ok):
                    raise InvalidInputError(f"dimension {d} is not downward closed")

    # serialization ------------------------------------------------------

    def to_json(self) -> str:
        if self.positions is None:
            raise InvalidInputError("cannot serialize a complex without positions")
        rows = ", ".join("[" + ", ".join(format(float(v), ".17g") for v in p) + "]"
                         for p in self.positions)
        simplices = {str(d): s.tolist() for d, s in enumerate(self.simplices)}
        return ('{"n": %d, "positions": [%s], "simplices": %s}'
                % (self.positions.shape[1], rows, json.dumps(simplices)))

    @classmethod
    def from_json(cls, text: str) -> "SimplicialComplex":
        doc = json.loads(text)
        positions = np.array(doc["positions"], dtype=np.float64).reshape(-1, int(doc["n"]))
        dims = sorted(int(k) for k in doc["simplices"])
        if dims != list(range(len(dims))):
            raise InvalidInputError("simplex dimensions must be contiguous from 0")
        simplices = tuple(np.array(doc["simplices"][str(d)], dtype=np.int64).reshape(-1, d + 1)
                          for d in dims)
        K = cls(simplices, positions)
        K.validate()
        return K


def _encode(s: np.ndarray, base: int) -> np.ndarray:
    """Base-``base`` integer code per row; monotone in lexicographic order."""
    code = np.zeros(len(s), dtype=np.int64)
    for col in range(s.shape[1]):
        code = code * base + s[:, col]
    return code


def _check_delta(delta: float) -> None:
    if not np.isfinite(delta) or delta <= 0:
        raise InvalidInputError(f"delta must be positive, got {delta}")


def _within(positions: np.ndarray, delta: float) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    close = np.sqrt((diff * diff).sum(-1)) <= delta
    np.fill_diagonal(close, False)
    return close


def radius_graph(positions, delta: float) -> np.ndarray:
    """Undirected edges {i, j}, i < j, with ||x_i - x_j|| <= delta, as an (E, 2) array."""
    _check_delta(delta)
    pts = np.asarray(positions, dtype=np.float64)
    close = np.triu(_within(pts, delta), 1)
    i, j = np.nonzero(close)
    return np.stack([i, j], axis=1)


def _expand(adjacent: np.ndarray, max_dim: int) -> tuple[np.ndarray, ...]:
    n = adjacent.shape[0]
    later = np.triu(np.ones((n, n), dtype=bool), 1)
    level = np.arange(n, dtype=np.int64)[:, None]
    out = [level]
    for _ in range(max_dim):
        if len(level) == 0:
            level = np.zeros((0, level.shape[1] + 1), dtype=np.int64)
            out.append(level)
            continue
        common = later[level[:, -1]]
        for col in range(level.shape[1]):
            common = common & adjacent[level[:, col]]
        rows, new = np.nonzero(common)
        level = np.concatenate([level[rows], new[:, None]], axis=1)
        out.append(level)
    return tuple(out)


def clique_lift(edges, num_vertices: int, max_dim: int = 2) -> SimplicialComplex:
    """Clique complex of a graph: every (k+1)-clique with k <= max_dim is a k-simplex."""
    if max_dim < 0:
        raise InvalidInputError("max_dim must be >= 0")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_vertices):
        raise InvalidInputError("edge references a vertex outside 0..num_vertices-1")
    adjacent = np.zeros((num_vertices, num_vertices), dtype=bool)
    adjacent[edges[:, 0], edges[:, 1]] = True
    adjacent[edges[:, 1], edges[:, 0]] = True
    np.fill_diagonal(adjacent, False)
    return SimplicialComplex(_expand(adjacent, max_dim))


def vietoris_rips(positions, delta: float, max_dim: int = 2) -> SimplicialComplex:
    _check_delta(delta)
    if max_dim < 0:
        raise InvalidInputError("max_dim must be >= 0")
    pts = np.array(positions, dtype=np.float64)
    return SimplicialComplex(_expand(_within(pts, delta), max_dim), pts)


def fully_connected(positions, max_dim: int = 2) -> SimplicialComplex:
    pts = np.array(positions, dtype=np.float64)
    adjacent = ~np.eye(len(pts), dtype=bool)
    return SimplicialComplex(_expand(adjacent, max_dim), pts)


def augment_fully_connected_edges(K: SimplicialComplex) -> SimplicialComplex:
    """Union the 1-skeleton with the complete graph; higher dimensions are left as is."""
    n = K.num_vertices
    i, j = np.nonzero(np.triu(np.ones((n, n), dtype=bool), 1))
    edges = np.stack([i, j], axis=1).astype(np.int64)
    simplices = list(K.simplices)
    if len(simplices) < 2:
        simplices.append(edges)
    else:
        simplices[1] = edges
    return SimplicialComplex(tuple(simplices), K.positions)


def exhaustive_vietoris_rips(positions, delta: float, max_dim: int) -> set[Simplex]:
    """Reference enumeration over every vertex subset; exponential, for testing."""
    pts = np.asarray(positions, dtype=np.float64)
    n = len(pts)
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    out: set[Simplex] = set()
    for size in range(1, max_dim + 2):
        for subset in combinations(range(n), size):
            if all(d[i, j] <= delta for i, j in combinations(subset, 2)):
                out.add(subset)
    return out


# adjacency -----------------------------------------------------------------

@dataclass(frozen=True)
class Adjacency:
    """Directed (sender -> receiver) pairs for a single kind and dimension pair.

    ``witnesses`` holds the common parent (upper) or common face (lower) index.
    """

    kind: str
    sender_dim: int
    receiver_dim: int
    senders: np.ndarray
    receivers: np.ndarray
    witnesses: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.senders)

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.senders.tolist(), self.receivers.tolist()))


AdjacencyIndex = dict[tuple[str, int, int], Adjacency]


def _face_table(K: SimplicialComplex, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """For every dim-simplex: index of each codim-1 face, shape (count, dim+1).

    Column j is the face that omits vertex j.
    """
    s = K.simplices[dim]
    lower = _encode(K.simplices[dim - 1], K.num_vertices)
    faces = np.empty((len(s), dim + 1), dtype=np.int64)
    for j in range(dim + 1):
        faces[:, j] = np.searchsorted(lower, _encode(np.delete(s, j, axis=1), K.num_vertices))
    return faces


def all_dim_pairs(max_dim: int) -> set[tuple[int, int]]:
    pairs = set()
    for d in range(max_dim + 1):
        pairs.add((d, d))
        if d < max_dim:
            pairs.add((d, d + 1))
            pairs.add((d + 1, d))
    return pairs


def build_adjacency(K: SimplicialComplex, kinds: Iterable[str] = KINDS,
                    dim_pairs: Iterable[tuple[int, int]] | None = None) -> AdjacencyIndex:
    kinds = set(kinds)
    unknown = kinds - set(KINDS)
    if unknown:
        raise InvalidInputError(f"unknown adjacency kinds {sorted(unknown)}")
    top = len(K.simplices) - 1
    dim_pairs = all_dim_pairs(top) if dim_pairs is None else set(dim_pairs)
    faces_cache: dict[int, np.ndarray] = {}

    def faces(d: int) -> np.ndarray:
        if d not in faces_cache:
            faces_cache[d] = _face_table(K, d)
        return faces_cache[d]

    index: AdjacencyIndex = {}
    for d in range(top + 1):
        if d + 1 <= top:
            f = faces(d + 1)
            cofaces = np.repeat(np.arange(len(f)), d + 2)
            face_ids = f.ravel()
            if "boundary" in kinds and (d, d + 1) in dim_pairs:
                index[("boundary", d, d + 1)] = Adjacency("boundary", d, d + 1, face_ids, cofaces)
            if "coboundary" in kinds and (d + 1, d) in dim_pairs:
                index[("coboundary", d + 1, d)] = Adjacency("coboundary", d + 1, d, cofaces, face_ids)
            if "upper" in kinds and (d, d) in dim_pairs:
                j1, j2 = [np.array(c) for c in zip(*[(a, b) for a in range(d + 2)
                                                     for b in range(d + 2) if a != b])]
                senders = f[:, j1].ravel()
                receivers = f[:, j2].ravel()
                parents = np.repeat(np.arange(len(f)), len(j1))
                index[("upper", d, d)] = Adjacency("upper", d, d, senders, receivers, parents)
        elif "upper" in kinds and (d, d) in dim_pairs:
            empty = np.zeros(0, dtype=np.int64)
            index[("upper", d, d)] = Adjacency("upper", d, d, empty, empty, empty)
        if "lower" in kinds and (d, d) in dim_pairs:
            senders, receivers, shared = [], [], []
            if d >= 1:
                f = faces(d)
                by_face: dict[int, list[int]] = {}
                for simplex_id, row in enumerate(f.tolist()):
                    for face_id in row:
                        by_face.setdefault(face_id, []).append(simplex_id)
                for face_id in sorted(by_face):
                    group = by_face[face_id]
                    for a in group:
                        for b in group:
                            if a != b:
                                senders.append(a)
                                receivers.append(b)
                                shared.append(face_id)
            index[("lower", d, d)] = Adjacency(
                "lower", d, d, np.array(senders, dtype=np.int64),
                np.array(receivers, dtype=np.int64), np.array(shared, dtype=np.int64))
    return index
