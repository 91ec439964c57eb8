"""Exact low-dimensional Euclidean geometry on explicit point sets.

Everything here works one simplex at a time on plain numpy arrays and is
meant to be obviously correct rather than fast. The batched, differentiable
counterparts used during training live in :mod:`empsn.invariants`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidInputError

ORTHO_TOL = 1e-12
DEGENERATE_TOL = 1e-12


def as_points(points) -> np.ndarray:
    """Coerce to a finite float64 array of shape (count, n)."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise InvalidInputError(f"expected a (count, n) array of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("point coordinates must be finite")
    return arr


def distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise InvalidInputError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.linalg.norm(p - q))


def simplex_volume(points) -> float:
    """k-dimensional volume of the simplex spanned by k+1 points in R^n.

    Uses the Gram determinant ``sqrt(det(E E^T)) / k!`` of the edge vectors
    ``E = v_i - v_0``, which equals ``|det(E)| / n!`` when k == n. Degenerate
    point sets give 0.
    """
    pts = as_points(points)
    k = pts.shape[0] - 1
    n = pts.shape[1]
    if k < 1:
        raise InvalidInputError("volume of a 0-simplex is undefined")
    if k > n:
        raise InvalidInputError(f"a {k}-simplex cannot be embedded in R^{n}")
    edges = pts[1:] - pts[0]
    gram_det = np.linalg.det(edges @ edges.T)
    return math.sqrt(max(gram_det, 0.0)) / math.factorial(k)


def determinant_volume(points) -> float:
    """|det(v_1 - v_0, ..., v_n - v_0)| / n! for an n-simplex in R^n."""
    pts = as_points(points)
    k = pts.shape[0] - 1
    if k != pts.shape[1] or k < 1:
        raise InvalidInputError("determinant volume needs exactly n+1 points in R^n")
    return abs(float(np.linalg.det(pts[1:] - pts[0]))) / math.factorial(k)


def _unique_rows(a: np.ndarray) -> np.ndarray:
    out: list[np.ndarray] = []
    for row in a:
        if not any(np.array_equal(row, r) for r in out):
            out.append(row)
    return np.array(out)


def _face_normal(face: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Unit normal of ``face`` inside the affine span described by ``basis``."""
    r = basis.shape[0]
    if face.shape[0] == 1:
        if r != 1:
            raise DegenerateGeometryError("a point face only has a normal in a 1-D span")
        return np.ones(1)
    local = (face[1:] - face[0]) @ basis.T
    _, s, vt = np.linalg.svd(local, full_matrices=True)
    if s.size < r - 1 or s[-1] < DEGENERATE_TOL * max(1.0, s[0]):
        raise DegenerateGeometryError("face does not span a hyperplane")
    return vt[-1]


def dihedral_angle(face_a, face_b) -> float:
    """Unsigned dihedral angle in [0, pi/2] between two faces of a common simplex.

    Both faces get a normal inside the affine span of their union: the span
    is orthonormalised by SVD and each face's normal is the direction in that
    span orthogonal to the face.
    """
    a = as_points(face_a)
    b = as_points(face_b)
    if a.shape != b.shape:
        raise InvalidInputError(f"faces must have matching shapes, got {a.shape} and {b.shape}")
    m = a.shape[0]
    union = _unique_rows(np.vstack([a, b]))
    if union.shape[0] == m:
        # identical faces: check the face itself is non-degenerate, then angle is zero
        if m > 1:
            s = np.linalg.svd(a[1:] - a[0], compute_uv=False)
            if s[-1] < DEGENERATE_TOL * max(1.0, s[0]):
                raise DegenerateGeometryError("face does not span a hyperplane")
        return 0.0
    if union.shape[0] != m + 1:
        raise InvalidInputError("faces must share all but one point")
    edges = union[1:] - union[0]
    _, s, vt = np.linalg.svd(edges, full_matrices=False)
    if s.size < m or s[-1] < DEGENERATE_TOL * max(1.0, s[0]):
        raise DegenerateGeometryError("faces do not span a common m-dimensional simplex")
    basis = vt[:m]
    na = _face_normal(a, basis)
    nb = _face_normal(b, basis)
    c = abs(float(na @ nb)) / (np.linalg.norm(na) * np.linalg.norm(nb))
    return math.acos(min(c, 1.0))


@dataclass(frozen=True)
class RigidMotion:
    """x -> Q x + t with Q orthogonal (rotations and reflections)."""

    Q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or t.shape != (Q.shape[0],):
            raise InvalidInputError("Q must be n x n and t an n-vector")
        if np.max(np.abs(Q.T @ Q - np.eye(Q.shape[0]))) > ORTHO_TOL:
            raise InvalidInputError("Q is not orthogonal")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "t", t)

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def identity(cls, n: int) -> "RigidMotion":
        return cls(np.eye(n), np.zeros(n))

    @classmethod
    def random(cls, rng: np.random.Generator, n: int, reflect: bool | None = None,
               translation_scale: float = 1.0) -> "RigidMotion":
        """QR-orthogonalised Gaussian matrix, optionally forced to be a reflection."""
        q, r = np.linalg.qr(rng.standard_normal((n, n)))
        q = q * np.sign(np.diag(r))
        if reflect is None:
            reflect = bool(rng.integers(2))
        if (np.linalg.det(q) < 0) != reflect:
            q[:, 0] = -q[:, 0]
        return cls(q, translation_scale * rng.standard_normal(n))

    def apply_vectors(self, vectors) -> np.ndarray:
        """Rotate direction vectors (velocities) without translating them."""
        return np.asarray(vectors, dtype=np.float64) @ self.Q.T


def apply_motion(g: RigidMotion, points) -> np.ndarray:
    pts = as_points(points)
    if pts.shape[1] != g.dim:
        raise InvalidInputError(f"motion acts on R^{g.dim}, points live in R^{pts.shape[1]}")
    return pts @ g.Q.T + g.t
