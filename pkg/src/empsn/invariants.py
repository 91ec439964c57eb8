"""E(n)-invariant features attached to every directed adjacency pair.

Layouts (all slots are >= 0; undefined slots are zero-filled):

upper (sender and receiver share all but one point; a = sender-only point,
b = receiver-only point, p_i = shared points)::

    [mean_i |p_i - a|, mean_i |p_i - b|, mean_{i<j} |p_i - p_j|, |a - b|,
     vol(sender), vol(receiver), angle(sender, receiver)]

    node-node pairs with velocities append [v_a . v_b, |v_a|, |v_b|]

boundary / coboundary (face -> coface or coface -> face; b = the coface's
extra point)::

    [mean |face_i - b|, mean pairwise |face_i - face_j|, vol(face), vol(coface),
     mean angle(face, other faces of coface), mean angle among the other faces]

Means are used as the permutation-invariant aggregator so magnitudes do not
grow with simplex dimension. Angles are unsigned dihedral angles in
[0, pi/2] measured inside the parent simplex; degenerate faces yield a 0
sentinel and bump a counter instead of raising.

Two routes compute the same numbers: :func:`upper_invariants` /
:func:`boundary_invariants` work pair by pair with :mod:`empsn.geometry`;
:func:`batched_invariants` evaluates every pair at once with differentiable
tensor ops (Gram-Schmidt volumes and altitude normals) for use inside the
model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import geometry
from .complex import AdjacencyIndex, SimplicialComplex
from .errors import DegenerateGeometryError, InvalidAdjacencyError
from .nn import autodiff as ad
from .nn.autodiff import Tensor

UPPER_LAYOUT = ("dist_shared_to_a", "dist_shared_to_b", "dist_shared_pairwise", "dist_a_b",
                "vol_sender", "vol_receiver", "angle")
VELOCITY_LAYOUT = ("vel_dot", "vel_norm_a", "vel_norm_b")
BOUNDARY_LAYOUT = ("dist_face_to_b", "dist_face_pairwise", "vol_face", "vol_coface",
                   "angle_with_face", "angle_without_face")

NORMAL_TOL = 1e-12
VOLUME_TOL = 1e-12


def layout(kind: str, sender_dim: int, receiver_dim: int, velocities: bool = False) -> tuple[str, ...]:
    if kind == "upper":
        if sender_dim != receiver_dim:
            raise InvalidAdjacencyError("upper adjacency joins equal dimensions")
        return UPPER_LAYOUT + (VELOCITY_LAYOUT if velocities and sender_dim == 0 else ())
    if kind == "boundary" and receiver_dim == sender_dim + 1:
        return BOUNDARY_LAYOUT
    if kind == "coboundary" and sender_dim == receiver_dim + 1:
        return BOUNDARY_LAYOUT
    raise InvalidAdjacencyError(f"no invariant layout for {kind} {sender_dim}->{receiver_dim}")


def layout_width(kind: str, sender_dim: int, receiver_dim: int, velocities: bool = False) -> int:
    return len(layout(kind, sender_dim, receiver_dim, velocities))


@dataclass
class Diagnostics:
    degenerate_angles: int = 0
    degenerate_volumes: int = 0

    @property
    def total(self) -> int:
        return self.degenerate_angles + self.degenerate_volumes


def _volume(points: np.ndarray, diag: Diagnostics | None) -> float:
    k = points.shape[0] - 1
    if k > points.shape[1]:
        vol = 0.0
    else:
        vol = geometry.simplex_volume(points)
    if vol < VOLUME_TOL and diag is not None:
        diag.degenerate_volumes += 1
    return vol


def _angle(a: np.ndarray, b: np.ndarray, diag: Diagnostics | None) -> float:
    try:
        return geometry.dihedral_angle(a, b)
    except DegenerateGeometryError:
        if diag is not None:
            diag.degenerate_angles += 1
        return 0.0


def _mean_dist(x: np.ndarray, pairs) -> float:
    pairs = list(pairs)
    if not pairs:
        return 0.0
    return float(np.mean([np.linalg.norm(x[i] - x[j]) for i, j in pairs]))


def upper_invariants(sender, receiver, parent, positions, velocities=None,
                     diagnostics: Diagnostics | None = None) -> np.ndarray:
    x = np.asarray(positions, dtype=np.float64)
    s, r, p = set(sender), set(receiver), set(parent)
    k = len(sender) - 1
    if len(s) != len(sender) or len(r) != len(receiver) or len(sender) != len(receiver):
        raise InvalidAdjacencyError("upper pairs need two simplices of equal dimension")
    if s == r or len(s & r) != k or (s | r) != p:
        raise InvalidAdjacencyError("sender and receiver must share all but one point and span the parent")
    (a,) = s - r
    (b,) = r - s
    shared = sorted(s & r)
    out = [
        _mean_dist(x, ((i, a) for i in shared)),
        _mean_dist(x, ((i, b) for i in shared)),
        _mean_dist(x, combinations(shared, 2)),
        float(np.linalg.norm(x[a] - x[b])),
        0.0, 0.0, 0.0,
    ]
    if k >= 1:
        sp, rp = x[sorted(s)], x[sorted(r)]
        out[4] = _volume(sp, diagnostics)
        out[5] = _volume(rp, diagnostics)
        out[6] = _angle(sp, rp, diagnostics)
    if velocities is not None and k == 0:
        v = np.asarray(velocities, dtype=np.float64)
        out += [float(v[a] @ v[b]), float(np.linalg.norm(v[a])), float(np.linalg.norm(v[b]))]
    return np.array(out)


def boundary_invariants(sender, receiver, positions,
                        diagnostics: Diagnostics | None = None) -> np.ndarray:
    """Invariants of a face ``sender`` on the boundary of ``receiver``."""
    x = np.asarray(positions, dtype=np.float64)
    face, coface = sorted(set(sender)), sorted(set(receiver))
    if len(face) != len(sender) or len(coface) != len(face) + 1 or not set(face) < set(coface):
        raise InvalidAdjacencyError("boundary pairs need a codimension-1 face")
    (b,) = set(coface) - set(face)
    out = [
        _mean_dist(x, ((i, b) for i in face)),
        _mean_dist(x, combinations(face, 2)),
        _volume(x[face], diagnostics) if len(face) > 1 else 0.0,
        _volume(x[coface], diagnostics),
        0.0, 0.0,
    ]
    if len(coface) >= 3:
        others = [[v for v in coface if v != w] for w in coface if w != b]
        out[4] = float(np.mean([_angle(x[face], x[o], diagnostics) for o in others]))
        out[5] = float(np.mean([_angle(x[o1], x[o2], diagnostics)
                                for o1, o2 in combinations(others, 2)]))
    return np.array(out)


@dataclass
class InvariantTable:
    """One invariant row per directed pair, keyed by (kind, sender_dim, receiver_dim)."""

    values: dict[tuple[str, int, int], np.ndarray]
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def vector(self, kind: str, sender_dim: int, receiver_dim: int, pair: int) -> np.ndarray:
        return self.values[(kind, sender_dim, receiver_dim)][pair]


def all_invariants(K: SimplicialComplex, adj: AdjacencyIndex, velocities=None) -> InvariantTable:
    """Exact invariants for every boundary, coboundary and upper pair in ``adj``.

    Lower-adjacency pairs carry no invariant layout and are skipped.
    """
    diag = Diagnostics()
    x = K.positions
    values = {}
    for key in sorted(adj):
        kind, sd, rd = key
        if kind == "lower":
            continue
        a = adj[key]
        width = layout_width(kind, sd, rd, velocities is not None)
        rows = np.zeros((len(a), width))
        for i in range(len(a)):
            s = K.simplex(sd, a.senders[i])
            r = K.simplex(rd, a.receivers[i])
            if kind == "upper":
                rows[i] = upper_invariants(s, r, K.simplex(sd + 1, a.witnesses[i]), x,
                                           velocities, diag)
            elif kind == "boundary":
                rows[i] = boundary_invariants(s, r, x, diag)
            else:
                rows[i] = boundary_invariants(r, s, x, diag)
        values[key] = rows
    return InvariantTable(values, diag)


# batched, differentiable route -------------------------------------------

@dataclass(frozen=True)
class UpperPlan:
    sender: np.ndarray      # simplex index within dim
    receiver: np.ndarray
    parent: np.ndarray      # index within dim + 1
    a: np.ndarray           # vertex ids
    b: np.ndarray
    shared: np.ndarray      # (P, dim) vertex ids
    slot_b: np.ndarray      # position of b in the parent row (sender omits it)
    slot_a: np.ndarray


@dataclass(frozen=True)
class BoundaryPlan:
    face: np.ndarray        # simplex index within dim
    coface: np.ndarray      # index within dim + 1
    b: np.ndarray           # vertex id of coface minus face
    face_vertices: np.ndarray
    slot_b: np.ndarray      # position of b in the coface row


@dataclass(frozen=True)
class InvariantPlan:
    """Index arrays needed to evaluate every pair's invariants in one sweep."""

    simplices: tuple[np.ndarray, ...]
    relations: dict[tuple[str, int, int], UpperPlan | BoundaryPlan]


def _position_in_rows(rows: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.argmax(rows == values[:, None], axis=1)


def compile_plan(K: SimplicialComplex, adj: AdjacencyIndex, keys=None) -> InvariantPlan:
    relations = {}
    for key in sorted(adj if keys is None else keys):
        kind, sd, rd = key
        a = adj[key]
        if kind == "upper":
            S = K.simplices[sd][a.senders]
            R = K.simplices[sd][a.receivers]
            in_r = (S[:, :, None] == R[:, None, :]).any(-1)
            in_s = (R[:, :, None] == S[:, None, :]).any(-1)
            va = S[~in_r]
            vb = R[~in_s]
            shared = S[in_r].reshape(len(a), sd)
            if len(a):
                parents = K.simplices[sd + 1][a.witnesses]
                slot_b = _position_in_rows(parents, vb)
                slot_a = _position_in_rows(parents, va)
            else:
                slot_a = slot_b = np.zeros(0, dtype=np.int64)
            relations[key] = UpperPlan(a.senders, a.receivers, a.witnesses, va, vb, shared,
                                       slot_b, slot_a)
        elif kind in ("boundary", "coboundary"):
            fd = min(sd, rd)
            face = a.senders if kind == "boundary" else a.receivers
            coface = a.receivers if kind == "boundary" else a.senders
            F = K.simplices[fd][face]
            C = K.simplices[fd + 1][coface]
            in_f = (C[:, :, None] == F[:, None, :]).any(-1)
            vb = C[~in_f]
            relations[key] = BoundaryPlan(face, coface, vb, F, _position_in_rows(C, vb))
    return InvariantPlan(K.simplices, relations)


def _norm(v: Tensor) -> Tensor:
    return ad.sqrt(ad.tsum(v * v, axis=-1))


def _safe(denominator: Tensor) -> Tensor:
    return denominator + (denominator.data < NORMAL_TOL).astype(np.float64)


def _orthonormal(edges: list[Tensor]) -> tuple[list[Tensor], list[Tensor]]:
    """Gram-Schmidt on a list of (C, n) edge tensors -> (unit vectors, residual norms)."""
    basis, norms = [], []
    for e in edges:
        u = e
        for q in basis:
            u = u - ad.tsum(u * q, axis=-1, keepdims=True) * q
        s = _norm(u)
        basis.append(u / ad.reshape(_safe(s), (-1, 1)))
        norms.append(s)
    return basis, norms


def _volumes(X: Tensor, verts: np.ndarray) -> Tensor:
    d = verts.shape[1] - 1
    if d == 0 or len(verts) == 0:
        return Tensor(np.zeros(len(verts)))
    base = ad.take_rows(X, verts[:, 0])
    _, norms = _orthonormal([ad.take_rows(X, verts[:, j]) - base for j in range(1, d + 1)])
    vol = norms[0]
    for s in norms[1:]:
        vol = vol * s
    return vol / float(math.factorial(d))


def _angle_table(X: Tensor, verts: np.ndarray) -> dict[tuple[int, int], Tensor]:
    """Dihedral angles between faces i < j of each simplex (face j omits vertex j)."""
    m = verts.shape[1] - 1
    normals = []
    for j in range(m + 1):
        face = [c for c in range(m + 1) if c != j]
        base = ad.take_rows(X, verts[:, face[0]])
        basis, _ = _orthonormal([ad.take_rows(X, verts[:, c]) - base for c in face[1:]])
        n = ad.take_rows(X, verts[:, j]) - base
        for q in basis:
            n = n - ad.tsum(n * q, axis=-1, keepdims=True) * q
        normals.append((n, _norm(n)))
    table = {}
    for i, j in combinations(range(m + 1), 2):
        (ni, si), (nj, sj) = normals[i], normals[j]
        live = ((si.data >= NORMAL_TOL) & (sj.data >= NORMAL_TOL)).astype(np.float64)
        c = ad.tabs(ad.tsum(ni * nj, axis=-1)) / _safe(si * sj)
        table[(i, j)] = ad.arccos(c) * live
    return table


def _gather_angle(table: dict, m: int, rows: np.ndarray, slot_i: np.ndarray,
                  slot_j: np.ndarray) -> Tensor:
    """Angle between faces slot_i[p] and slot_j[p] of simplex rows[p]."""
    pairs = sorted(table)
    column = np.zeros((m + 1, m + 1), dtype=np.int64)
    for c, (i, j) in enumerate(pairs):
        column[i, j] = column[j, i] = c
    flat = ad.reshape(ad.stack([table[k] for k in pairs], axis=1), (-1,))
    return ad.take_rows(flat, rows * len(pairs) + column[slot_i, slot_j])


def _mean_pair_dist(X: Tensor, left: np.ndarray, right: np.ndarray) -> Tensor:
    """Row-wise mean of |x[left[:, i]] - x[right[:, i]]| over columns i."""
    diff = ad.take_rows(X, left) - ad.take_rows(X, right)
    return ad.mean(_norm(diff), axis=1)


def batched_invariants(X: Tensor, plan: InvariantPlan, velocities: np.ndarray | None = None
                       ) -> dict[tuple[str, int, int], Tensor]:
    """Invariant matrices (pairs x layout width) for every relation in ``plan``."""
    X = X if isinstance(X, Tensor) else Tensor(X)
    vols: dict[int, Tensor] = {}
    angles: dict[int, dict] = {}

    def vol(d: int) -> Tensor:
        if d not in vols:
            vols[d] = _volumes(X, plan.simplices[d])
        return vols[d]

    def angle_table(m: int) -> dict:
        if m not in angles:
            angles[m] = _angle_table(X, plan.simplices[m])
        return angles[m]

    out = {}
    for key, rel in plan.relations.items():
        kind, sd, rd = key
        P = len(rel.b)
        zero = Tensor(np.zeros(P))
        if kind == "upper":
            k = sd
            cols = [zero, zero, zero]
            if k >= 1 and P:
                cols[0] = _mean_pair_dist(X, rel.shared, np.repeat(rel.a[:, None], k, 1))
                cols[1] = _mean_pair_dist(X, rel.shared, np.repeat(rel.b[:, None], k, 1))
            if k >= 2 and P:
                ii, jj = zip(*combinations(range(k), 2))
                cols[2] = _mean_pair_dist(X, rel.shared[:, list(ii)], rel.shared[:, list(jj)])
            cols.append(_norm(ad.take_rows(X, rel.a) - ad.take_rows(X, rel.b)) if P else zero)
            if k >= 1 and P:
                v = vol(k)
                cols += [ad.take_rows(v, rel.sender), ad.take_rows(v, rel.receiver)]
                cols.append(_gather_angle(angle_table(k + 1), k + 1, rel.parent, rel.slot_b, rel.slot_a))
            else:
                cols += [zero, zero, zero]
            if velocities is not None and k == 0:
                va, vb = velocities[rel.a], velocities[rel.b]
                extra = np.stack([(va * vb).sum(-1), np.linalg.norm(va, axis=-1),
                                  np.linalg.norm(vb, axis=-1)], axis=1) if P else np.zeros((0, 3))
                cols += [Tensor(extra[:, 0]), Tensor(extra[:, 1]), Tensor(extra[:, 2])]
        else:
            fd = min(sd, rd)
            m = fd + 1
            if P:
                cols = [_mean_pair_dist(X, rel.face_vertices, np.repeat(rel.b[:, None], fd + 1, 1))]
                if fd >= 1:
                    ii, jj = zip(*combinations(range(fd + 1), 2))
                    F = rel.face_vertices
                    cols.append(_mean_pair_dist(X, F[:, list(ii)], F[:, list(jj)]))
                    cols.append(ad.take_rows(vol(fd), rel.face))
                else:
                    cols += [zero, zero]
                cols.append(ad.take_rows(vol(m), rel.coface))
                if m >= 2:
                    table = angle_table(m)
                    # other faces of the coface, skipping the face's own slot
                    others = np.arange(m)[None, :] + (np.arange(m)[None, :] >= rel.slot_b[:, None])
                    with_face = [_gather_angle(table, m, rel.coface, rel.slot_b, others[:, c])
                                 for c in range(m)]
                    cols.append(ad.mean(ad.stack(with_face, axis=1), axis=1))
                    without = [_gather_angle(table, m, rel.coface, others[:, c1], others[:, c2])
                               for c1, c2 in combinations(range(m), 2)]
                    cols.append(ad.mean(ad.stack(without, axis=1), axis=1))
                else:
                    cols += [zero, zero]
            else:
                cols = [zero] * len(BOUNDARY_LAYOUT)
        out[key] = ad.stack(cols, axis=1)
    return out
