"""Expanding matrix dilations and the geometry they induce.

A dilation is an invertible real matrix A whose eigenvalues all have modulus
strictly greater than one.  Powers A^tau scale space anisotropically; this
module validates a matrix, extracts its scaling data (determinant scale,
minimal eigenvalue modulus, Jordan block size, slowest direction), and
provides the induced quasi-metric and cube-diameter asymptotics.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import (
    DegenerateFitError,
    EigenvalueNotExpandingError,
    NonSquareError,
    NumericalFailureError,
    WindowExhaustedError,
)

_EXPAND_TOL = 1e-9
_RANK_TOL = 1e-7
_SCAN_LIMIT = 64


@dataclass
class DilationStructure:
    """Validated dilation matrix together with derived scaling data."""

    matrix: np.ndarray
    dim: int
    det_scale: float
    r_min: float
    block_size: int
    slow_vector: np.ndarray
    slow_subspace: np.ndarray
    norm_power: int
    _pow_cache: dict = field(default_factory=dict, repr=False)

    def power(self, k: int) -> np.ndarray:
        """A^k for integer k, cached."""
        k = int(k)
        got = self._pow_cache.get(k)
        if got is None:
            got = np.linalg.matrix_power(self.matrix, k)
            self._pow_cache[k] = got
        return got


def _operator_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def _block_size_at(A: np.ndarray, lam: complex, rank_tol: float) -> int:
    """Size of the largest Jordan block of A at eigenvalue lam.

    Works over the reals: for a complex pair the factor (A - lam)(A - conj lam)
    is the real quadratic A^2 - 2 Re(lam) A + |lam|^2 I.  The block size is the
    first j at which rank(M^j) stabilizes, where M is the (real) factor.
    """
    d = A.shape[0]
    if abs(lam.imag) <= rank_tol:
        m_factor = A - lam.real * np.eye(d)
    else:
        m_factor = A @ A - 2.0 * lam.real * A + (abs(lam) ** 2) * np.eye(d)
    norm = _operator_norm(m_factor)
    if norm == 0.0:
        return 1
    m_factor = m_factor / norm
    prev_rank = d
    power = np.eye(d)
    for j in range(1, d + 1):
        power = power @ m_factor
        scale = _operator_norm(power)
        if scale == 0.0:
            rank = 0
        else:
            rank = int(np.linalg.matrix_rank(power / scale, tol=rank_tol))
        if rank == prev_rank:
            return j - 1 if j > 1 else 1
        prev_rank = rank
    return d


def _eigen_groups(eigvals: np.ndarray, tol: float):
    """Group eigenvalues into conjugate-pair representatives (Im >= 0)."""
    reps = []
    for lam in eigvals:
        lam = complex(lam)
        if lam.imag < -tol:
            lam = lam.conjugate()
        if lam.imag < tol:
            lam = complex(lam.real, 0.0)
        if not any(abs(lam - r) <= tol * max(1.0, abs(r)) for r in reps):
            reps.append(lam)
    return reps


def validate_dilation(matrix) -> DilationStructure:
    """Validate an expanding matrix and compute its scaling structure.

    Raises NonSquareError for a non-square input and
    EigenvalueNotExpandingError when any eigenvalue modulus is <= 1 + 1e-9.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSquareError(f"expected a square matrix, got shape {A.shape}")
    d = A.shape[0]
    eigvals = np.linalg.eigvals(A)
    moduli = np.abs(eigvals)
    if np.min(moduli) <= 1.0 + _EXPAND_TOL:
        raise EigenvalueNotExpandingError(
            f"minimum eigenvalue modulus {np.min(moduli):.6g} is not > 1"
        )
    det_scale = float(abs(np.linalg.det(A)))
    r_min = float(np.min(moduli))

    group_tol = 1e-8 * max(1.0, float(np.max(moduli)))
    reps = _eigen_groups(eigvals, group_tol)
    rank_tol = _RANK_TOL * max(1.0, _operator_norm(A))
    slow_reps = [lam for lam in reps if abs(abs(lam) - r_min) <= 1e-8 * r_min]
    block_size = max(_block_size_at(A, lam, rank_tol) for lam in slow_reps)

    structure = DilationStructure(
        matrix=A,
        dim=d,
        det_scale=det_scale,
        r_min=r_min,
        block_size=block_size,
        slow_vector=np.zeros(d),
        slow_subspace=np.zeros((d, 0)),
        norm_power=_norm_power(A),
    )
    v, w = slowest_direction(structure)
    structure.slow_vector = v
    structure.slow_subspace = w
    return structure


def _norm_power(A: np.ndarray) -> int:
    inv = np.linalg.inv(A)
    power = np.eye(A.shape[0])
    for m in range(1, _SCAN_LIMIT + 1):
        power = power @ inv
        if _operator_norm(power) <= 0.5:
            return m
    raise WindowExhaustedError(
        f"no m <= {_SCAN_LIMIT} gives an operator norm of A^-m at most 1/2"
    )


def normalization_power(D: DilationStructure) -> int:
    """Smallest m >= 1 with operator norm of A^-m at most 1/2."""
    return D.norm_power


def slowest_direction(D: DilationStructure):
    """Unit vector v in the slowest generalized eigenspace, plus limit span.

    Returns (v, W) where v lies in a generalized eigenspace of an eigenvalue
    of minimal modulus with maximal Jordan block size, and W is a matrix
    whose columns span the 1- or 2-dimensional subspace that the normalized
    backward iterates A^tau v approach.  The approach is checked numerically
    at tau = -40 and NumericalFailureError is raised if it fails.
    """
    A = D.matrix
    d = D.dim
    eigvals = np.linalg.eigvals(A)
    moduli = np.abs(eigvals)
    r = float(np.min(moduli))
    group_tol = 1e-8 * max(1.0, float(np.max(moduli)))
    reps = _eigen_groups(eigvals, group_tol)
    slow_reps = [lam for lam in reps if abs(abs(lam) - r) <= 1e-8 * r]
    rank_tol = _RANK_TOL * max(1.0, _operator_norm(A))

    best = None
    for lam in slow_reps:
        n_lam = _block_size_at(A, lam, rank_tol)
        if best is None or n_lam > best[1]:
            best = (lam, n_lam)
    lam, n_max = best

    if abs(lam.imag) <= rank_tol:
        m_factor = A - lam.real * np.eye(d)
    else:
        m_factor = A @ A - 2.0 * lam.real * A + (abs(lam) ** 2) * np.eye(d)
    norm = _operator_norm(m_factor)
    if norm > 0.0:
        m_factor = m_factor / norm

    full = np.linalg.matrix_power(m_factor, n_max)
    u_mat, s_vals, _ = np.linalg.svd(full)
    null_dim = int(np.sum(s_vals <= rank_tol * max(1.0, s_vals[0] if len(s_vals) else 1.0)))
    if null_dim == 0:
        raise NumericalFailureError("empty generalized eigenspace; eigen data inconsistent")
    # Orthonormal basis of the generalized eigenspace G = null(m_factor^n_max).
    basis = np.linalg.svd(full)[2][d - null_dim:].T

    depth_test = np.linalg.matrix_power(m_factor, n_max - 1) if n_max > 1 else np.eye(d)
    proj = basis @ basis.T
    v = None
    for i in range(d):
        cand = proj @ np.eye(d)[:, i]
        if np.linalg.norm(cand) <= rank_tol:
            continue
        cand = cand / np.linalg.norm(cand)
        if n_max == 1 or np.linalg.norm(depth_test @ cand) > rank_tol:
            v = cand
            break
    if v is None:
        raise NumericalFailureError("no basis vector projects to full Jordan depth")
    # Deterministic sign: make the largest-magnitude component positive.
    lead = int(np.argmax(np.abs(v)))
    if v[lead] < 0:
        v = -v
    v = np.where(np.abs(v) <= 1e-14, 0.0, v)
    v = v / np.linalg.norm(v)

    if abs(lam.imag) <= rank_tol:
        # The backward iterates of v align with the true eigenvector of v's
        # Jordan chain, which is (A - lam I)^(n_max - 1) v up to scale.
        w_dir = depth_test @ v
        w_dir = w_dir / np.linalg.norm(w_dir)
        lead = int(np.argmax(np.abs(w_dir)))
        if w_dir[lead] < 0:
            w_dir = -w_dir
        w_dir = np.where(np.abs(w_dir) <= 1e-12, 0.0, w_dir)
        W = (w_dir / np.linalg.norm(w_dir)).reshape(d, 1)
    else:
        # Complex pair: iterates rotate within the real 2-plane of the pair.
        ev_vals, ev_vecs = np.linalg.eig(A)
        idx = int(np.argmin(np.abs(ev_vals - lam)))
        u = ev_vecs[:, idx]
        plane = np.stack([u.real, u.imag], axis=1)
        q, _ = np.linalg.qr(plane)
        W = q[:, :2]

    iterate = np.linalg.matrix_power(np.linalg.inv(A), 40) @ v
    iterate = iterate / np.linalg.norm(iterate)
    residual = iterate - W @ (W.T @ iterate)
    if np.linalg.norm(residual) >= 0.05:
        raise NumericalFailureError(
            f"backward iterates of v do not approach W (residual {np.linalg.norm(residual):.3g})"
        )
    return v, W


def quasi_metric(D: DilationStructure, x, y) -> float:
    """exp(k*) where k* is the least integer k with |A^-k (y - x)| <= 1.

    The scan covers k in [-64, 64]; identical points give 0 exactly and a
    difference that never contracts into the unit ball raises
    WindowExhaustedError.
    """
    diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    if not np.any(diff):
        return 0.0
    for k in range(-_SCAN_LIMIT, _SCAN_LIMIT + 1):
        if np.linalg.norm(D.power(-k) @ diff) <= 1.0:
            return float(np.exp(k))
    raise WindowExhaustedError("no k in [-64, 64] contracts the difference into the unit ball")


def cube_diameter(D: DilationStructure, tau: int, sigma: int = 0) -> float:
    """Euclidean diameter of a grid cube at scale (sigma, tau).

    The cube is the image under A^tau of a dyadic cube of side 2^sigma, so the
    diameter is 2^sigma times the longest image of a vertex difference
    u in {-1, 0, 1}^d.
    """
    power = D.power(int(tau))
    best = 0.0
    for u in product((-1, 0, 1), repeat=D.dim):
        if all(c == 0 for c in u):
            continue
        length = float(np.linalg.norm(power @ np.asarray(u, dtype=float)))
        if length > best:
            best = length
    return (2.0 ** sigma) * best


def fit_diameter_exponent(D: DilationStructure, tau_range) -> float:
    """Fit p in log diam(tau) = tau log r + p log|tau| + const.

    tau_range must contain at least 10 distinct negative integers; the known
    coefficient tau log r is subtracted and p is found by ordinary least
    squares against log|tau|.
    """
    taus = sorted(set(int(t) for t in tau_range))
    if len(taus) < 10:
        raise DegenerateFitError(f"need at least 10 tau values, got {len(taus)}")
    if any(t >= 0 for t in taus):
        raise DegenerateFitError("tau_range must contain negative integers only")
    logs = np.array([np.log(cube_diameter(D, t)) for t in taus])
    t_arr = np.array(taus, dtype=float)
    resid = logs - t_arr * np.log(D.r_min)
    design = np.stack([np.log(-t_arr), np.ones_like(t_arr)], axis=1)
    coef, _, rank, _ = np.linalg.lstsq(design, resid, rcond=None)
    if rank < 2:
        raise DegenerateFitError("design matrix is rank-deficient")
    return float(coef[0])
