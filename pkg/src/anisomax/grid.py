"""Anisotropic dyadic grids and the parallelepiped geometry they generate.

A grid cube at scale (sigma, tau) is the image under A^tau of the dyadic cube
2^sigma ([0, 1)^d + index).  Cubes of a fixed scale tile space half-open; for
containment questions the closed hull is used with a diameter-relative
tolerance.  Expanded cubes and tendril outer bounds are parallelepipeds plus
dilated balls, handled exactly through pullback coordinates.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .dilation import DilationStructure, cube_diameter
from .errors import BudgetExceededError, InputInvalidError, NotNormalizedError

_COVER_BUDGET = 10_000_000
_CONTAIN_TOL = 1e-12


@dataclass(frozen=True)
class GridCube:
    """One cube of the grid at scale (sigma, tau), addressed by integer index."""

    sigma: int
    tau: int
    index: tuple
    dilation: DilationStructure = field(compare=False, hash=False, repr=False)

    def __post_init__(self):
        if self.sigma > 0:
            raise InputInvalidError(f"sigma must be <= 0, got {self.sigma}")
        if len(self.index) != self.dilation.dim:
            raise InputInvalidError("index length does not match dimension")

    @property
    def volume(self) -> float:
        d = self.dilation.dim
        return (2.0 ** (d * self.sigma)) * (self.dilation.det_scale ** self.tau)

    @property
    def side(self) -> float:
        return 2.0 ** self.sigma

    def diameter(self) -> float:
        return cube_diameter(self.dilation, self.tau, self.sigma)

    def realize(self) -> "Parallelepiped":
        power = self.dilation.power(self.tau)
        n = np.asarray(self.index, dtype=float)
        origin = power @ (self.side * n)
        return Parallelepiped(origin=origin, basis=self.side * power)

    def center(self) -> np.ndarray:
        n = np.asarray(self.index, dtype=float)
        return self.dilation.power(self.tau) @ (self.side * (n + 0.5))

    def tau_parent(self) -> "GridCube":
        """The cube of R_{0, tau+1} containing this cube's center."""
        c = np.asarray(self.index, dtype=float) + 0.5
        pulled = np.linalg.solve(self.dilation.matrix, (self.side * c))
        parent_index = tuple(int(np.floor(x)) for x in pulled)
        return GridCube(0, self.tau + 1, parent_index, self.dilation)

    def sigma_parent(self) -> "GridCube":
        if self.sigma >= 0:
            raise InputInvalidError("sigma = 0 cubes have no sigma parent")
        parent_index = tuple(int(np.floor(n / 2)) for n in self.index)
        return GridCube(self.sigma + 1, self.tau, parent_index, self.dilation)


@dataclass(frozen=True)
class Parallelepiped:
    """Affine image origin + basis [0, 1]^d of the unit cube."""

    origin: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def volume(self) -> float:
        return float(abs(np.linalg.det(self.basis)))

    def vertices(self) -> np.ndarray:
        corners = np.array(list(product((0.0, 1.0), repeat=self.dim)))
        return self.origin + corners @ self.basis.T

    def diameter(self) -> float:
        verts = self.vertices()
        diffs = verts[:, None, :] - verts[None, :, :]
        return float(np.sqrt((diffs ** 2).sum(-1)).max())

    def contains_points(self, points, tol: float = None) -> np.ndarray:
        """Closed-hull membership test with a diameter-relative tolerance."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if tol is None:
            tol = _CONTAIN_TOL * max(1.0, self.diameter())
        local = np.linalg.solve(self.basis, (pts - self.origin).T).T
        return np.all((local >= -tol) & (local <= 1.0 + tol), axis=1)

    def bbox(self):
        verts = self.vertices()
        return verts.min(axis=0), verts.max(axis=0)


def realize_cube(cube: GridCube) -> Parallelepiped:
    return cube.realize()


def cube_contains(outer: Parallelepiped, inner: GridCube) -> bool:
    """True when every vertex of the inner cube lies in the closed outer hull."""
    return bool(np.all(outer.contains_points(inner.realize().vertices())))


def expand_cube(cube: GridCube, factor: float) -> Parallelepiped:
    """Dilate the cube about its center by the given factor."""
    if factor <= 0:
        raise InputInvalidError("expansion factor must be positive")
    inner = cube.realize()
    shift = 0.5 * (factor - 1.0) * (inner.basis @ np.ones(inner.dim))
    return Parallelepiped(origin=inner.origin - shift, basis=factor * inner.basis)


def expand_parallelepiped(p: Parallelepiped, factor: float) -> Parallelepiped:
    shift = 0.5 * (factor - 1.0) * (p.basis @ np.ones(p.dim))
    return Parallelepiped(origin=p.origin - shift, basis=factor * p.basis)


# ------------------------------------------------------------------ covering


def _axes_for_sat(basis: np.ndarray):
    """Separating-axis candidates for a parallelepiped against an aligned box."""
    d = basis.shape[0]
    axes = [np.eye(d)[:, i] for i in range(d)]
    try:
        normals = np.linalg.inv(basis).T
    except np.linalg.LinAlgError:
        return axes
    axes.extend(normals[:, i] for i in range(d))
    if d == 3:
        for i in range(3):
            for j in range(3):
                cross = np.cross(np.eye(3)[:, i], basis[:, j])
                if np.linalg.norm(cross) > 1e-14:
                    axes.append(cross)
    return axes


def _boxes_intersect_open(verts_a: np.ndarray, verts_b: np.ndarray, axes) -> bool:
    """SAT with strict overlap, so shared boundary faces do not count."""
    for axis in axes:
        pa = verts_a @ axis
        pb = verts_b @ axis
        span = max(pa.max() - pa.min(), pb.max() - pb.min(), 1e-300)
        if min(pa.max(), pb.max()) - max(pa.min(), pb.min()) <= 1e-12 * span:
            return False
    return True


def enumerate_cover(D: DilationStructure, sigma: int, tau: int, box) -> list:
    """All cubes of R_{sigma, tau} whose half-open realization meets the box.

    The box is a pair (lo, hi) of arrays and is treated half-open, matching
    the cubes, so a box [0, 1)^d at sigma = tau = 0 is covered by exactly one
    cube.  An empty box gives an empty list.  The integer candidate window is
    counted before materializing and BudgetExceededError is raised past 1e7.
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if lo.shape != (D.dim,) or hi.shape != (D.dim,):
        raise InputInvalidError("box endpoints must be d-vectors")
    if np.any(hi <= lo):
        return []
    side = 2.0 ** sigma
    inv_pow = D.power(-tau)
    corners = np.array(list(product(*zip(lo, hi))))
    pulled = corners @ inv_pow.T
    pb_lo = pulled.min(axis=0)
    pb_hi = pulled.max(axis=0)

    n_lo = np.floor(pb_lo / side).astype(int) - 1
    n_hi = np.ceil(pb_hi / side).astype(int) + 1
    counts = n_hi - n_lo + 1
    total = int(np.prod(counts.astype(object)))
    if total > _COVER_BUDGET:
        raise BudgetExceededError(
            f"candidate window holds {total} cubes, budget is {_COVER_BUDGET}"
        )

    diagonal = np.allclose(D.matrix, np.diag(np.diag(D.matrix)))
    cubes = []
    if diagonal:
        # Exact per-axis half-open interval overlap in pullback coordinates.
        ranges = []
        for i in range(D.dim):
            lo_i, hi_i = sorted((pb_lo[i], pb_hi[i]))
            ns = [n for n in range(n_lo[i], n_hi[i] + 1)
                  if side * n < hi_i and side * (n + 1) > lo_i]
            ranges.append(ns)
        for idx in product(*ranges):
            cubes.append(GridCube(sigma, tau, idx, D))
        return cubes

    box_verts = corners
    axes = _axes_for_sat(D.power(tau) * side)
    for idx in product(*(range(n_lo[i], n_hi[i] + 1) for i in range(D.dim))):
        cube = GridCube(sigma, tau, idx, D)
        if _boxes_intersect_open(cube.realize().vertices(), box_verts, axes):
            cubes.append(cube)
    return cubes


# ------------------------------------------------------------------ tendrils


class _ClampedProjector:
    """Exact distance from points to origin + basis [0, 1]^d.

    Tries every active-set pattern (each coordinate free, clamped at 0, or
    clamped at 1); free coordinates solve a least-squares system and are then
    clamped, so every candidate is a point of the set and the minimum over
    patterns is the exact distance.
    """

    def __init__(self, origin: np.ndarray, basis: np.ndarray):
        self.origin = origin
        self.basis = basis
        self.patterns = []
        d = basis.shape[1]
        for pattern in product((None, 0.0, 1.0), repeat=d):
            free = [i for i, p in enumerate(pattern) if p is None]
            fixed = np.array([0.0 if p is None else p for p in pattern])
            base = origin + basis @ fixed
            sub = basis[:, free] if free else None
            pinv = np.linalg.pinv(sub) if free else None
            self.patterns.append((base, sub, pinv))

    def distance(self, points: np.ndarray) -> np.ndarray:
        best = np.full(points.shape[0], np.inf)
        for base, sub, pinv in self.patterns:
            resid = points - base
            if sub is not None:
                u_free = np.clip(resid @ pinv.T, 0.0, 1.0)
                resid = resid - u_free @ sub.T
            np.minimum(best, np.sqrt((resid ** 2).sum(axis=1)), out=best)
        return best


@dataclass(frozen=True)
class TendrilBound:
    """Outer bound for the tendril of a cube q: q** + A^(tau+2) B_2(0).

    volume_bound is the closed-form budget 4^d vol(B_2) a^2 2^sigma a^tau and
    scale is the bare geometric factor 2^sigma a^tau used when summing volume
    terms of exceptional sets.  sample_box is an axis-aligned bounding box of
    the outer set, used for Monte Carlo volume estimates.
    """

    cube: GridCube
    sample_box: Parallelepiped
    volume_bound: float
    scale: float

    @property
    def _projector(self) -> _ClampedProjector:
        got = self.__dict__.get("_projector_cache")
        if got is None:
            D = self.cube.dilation
            pull = D.power(-(self.cube.tau + 2))
            quad = expand_cube(self.cube, 4.0)
            got = _ClampedProjector(pull @ quad.origin, pull @ quad.basis)
            self.__dict__["_projector_cache"] = got
        return got

    def contains_points(self, points) -> np.ndarray:
        """Membership in q** + A^(tau+2) B_2(0), exact through pullback.

        A point x is in the set exactly when A^-(tau+2) x is within Euclidean
        distance 2 of the pullback of q**.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        pull = self.cube.dilation.power(-(self.cube.tau + 2))
        return self._projector.distance(pts @ pull.T) <= 2.0 + 1e-9


def _unit_ball_volume(d: int) -> float:
    from math import gamma, pi
    return pi ** (d / 2.0) / gamma(d / 2.0 + 1.0)


def tendril_of(cube: GridCube) -> TendrilBound:
    """Outer bound of the tendril of q, for normalized dilations only."""
    D = cube.dilation
    if D.norm_power != 1:
        raise NotNormalizedError(
            f"tendril bounds need norm_power 1, dilation has {D.norm_power}"
        )
    d = D.dim
    quad = expand_cube(cube, 4.0)
    ball_radius = 2.0
    ball_vol = _unit_ball_volume(d) * (ball_radius ** d)
    scale = (2.0 ** cube.sigma) * (D.det_scale ** cube.tau)
    volume_bound = (4.0 ** d) * ball_vol * (D.det_scale ** 2) * scale
    rows = D.power(cube.tau + 2)
    shift = ball_radius * np.sqrt((rows ** 2).sum(axis=1))
    box_lo, box_hi = quad.bbox()
    sample_box = Parallelepiped(
        origin=box_lo - shift,
        basis=np.diag(box_hi - box_lo + 2.0 * shift),
    )
    return TendrilBound(cube=cube, sample_box=sample_box, volume_bound=volume_bound, scale=scale)


def tendril_volume_estimate(bound: TendrilBound, n_samples: int, seed: int) -> float:
    """Monte Carlo volume of the exact outer set q** + A^(tau+2) B_2(0).

    Samples uniformly from the stored bounding box and counts membership; at
    least 1e3 samples are required.
    """
    if n_samples < 1_000:
        raise InputInvalidError("need at least 1000 samples")
    rng = np.random.default_rng(seed)
    lo = bound.sample_box.origin
    widths = np.diag(bound.sample_box.basis)
    pts = lo + rng.random((n_samples, len(lo))) * widths
    frac = float(np.mean(bound.contains_points(pts)))
    return frac * float(np.prod(widths))
