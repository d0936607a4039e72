"""Convolution with dilated surface measures and the maximal field.

The measure is a node cloud with weights (a full quadrature measure or a
single partition piece).  Convolving an atomic sum with its dilate by A^k
is a windowed scatter: each displaced measure node contributes one copy
of the atom profile, and the profile's support cube bounds the affected
lattice cells.  The maximal field is the pointwise sup of |mu_k * f| over
a finite k range, with a reported tail criterion in place of k in Z.

Superlevel-set sizes are cell counts times the cell volume, optionally
skipping cells captured by an exceptional-set descriptor.
"""

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .atoms import AtomicSum
from .dilation import DilationStructure, cube_diameter
from .errors import InputInvalidError, ResolutionTooCoarseError, TailNotNegligibleWarning
from .grid import realize_cube

MAGIC = b"ANISOFLD"
THRESHOLD_COUNT = 64
THRESHOLD_FLOOR = 1e-3
TAIL_FRACTION = 0.01


# ------------------------------------------------------------------ lattice


@dataclass(frozen=True)
class Lattice:
    """Axis-aligned sample grid; values live at cell centers."""

    origin: tuple
    spacing: tuple
    shape: tuple

    def __post_init__(self):
        if not (len(self.origin) == len(self.spacing) == len(self.shape)):
            raise InputInvalidError("lattice origin, spacing, shape disagree")
        if any(h <= 0 for h in self.spacing) or any(n <= 0 for n in self.shape):
            raise InputInvalidError("lattice spacing and shape must be positive")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_centers(self, j: int) -> np.ndarray:
        return self.origin[j] + self.spacing[j] * (np.arange(self.shape[j]) + 0.5)

    def points(self) -> np.ndarray:
        """All cell centers, C order, matching values.ravel()."""
        axes = [self.axis_centers(j) for j in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def window(self, lo, hi):
        """Index slices of cells whose centers fall in [lo, hi], or None."""
        slices = []
        for j in range(self.dim):
            a = int(np.ceil((lo[j] - self.origin[j]) / self.spacing[j] - 0.5))
            b = int(np.floor((hi[j] - self.origin[j]) / self.spacing[j] - 0.5))
            a, b = max(a, 0), min(b, self.shape[j] - 1)
            if a > b:
                return None
            slices.append(slice(a, b + 1))
        return tuple(slices)

    def window_points(self, slices) -> np.ndarray:
        axes = [self.axis_centers(j)[slices[j]] for j in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])


def make_lattice(box, shape) -> Lattice:
    """Lattice over the axis-aligned box with the given cell counts."""
    box = [(float(lo), float(hi)) for lo, hi in box]
    if isinstance(shape, int):
        shape = (shape,) * len(box)
    shape = tuple(int(n) for n in shape)
    if len(shape) != len(box):
        raise InputInvalidError("box and shape dimensions disagree")
    for lo, hi in box:
        if not hi > lo:
            raise InputInvalidError("box sides must have positive length")
    origin = tuple(lo for lo, _ in box)
    spacing = tuple((hi - lo) / n for (lo, hi), n in zip(box, shape))
    return Lattice(origin=origin, spacing=spacing, shape=shape)


@dataclass
class SampledField:
    lattice: Lattice
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.lattice.shape:
            raise InputInvalidError("values shape does not match the lattice")
        if not np.all(np.isfinite(self.values)):
            raise InputInvalidError("field values must be finite")


@dataclass
class DistributionReport:
    thresholds: np.ndarray
    measures: np.ndarray
    weak_ratio: float
    h1: float = None


# -------------------------------------------------------------- convolution


def _measure_nodes(measure):
    pts = getattr(measure, "quad_points", None)
    if pts is None:
        # bare surface: fall back to its full quadrature measure
        from .surface import surface_quadrature

        meas = surface_quadrature(measure)
        return meas.quad_points, meas.quad_weights
    return pts, measure.quad_weights


def _measure_label(measure) -> str:
    surface = getattr(measure, "surface", measure)
    label = getattr(surface, "catalog_id", "measure")
    rho = getattr(measure, "rho", None)
    if rho is not None:
        label = f"{label}/piece{rho}"
    return label


def _atomic_label(f: AtomicSum) -> str:
    taus = sorted(atom.support.tau for atom, _ in f.terms)
    if not taus:
        return "0 atoms"
    return f"{len(taus)} atoms, tau in [{taus[0]},{taus[-1]}]"


def _min_atom_diameter(f: AtomicSum) -> float:
    D = f.dilation
    return min(cube_diameter(D, atom.support.tau) for atom, _ in f.terms)


def convolve_dilated(f: AtomicSum, measure, k: int, lattice: Lattice) -> SampledField:
    """Field of (mu_k * f)(x) = sum_i w_i f(x - A^k p_i) at cell centers."""
    if not f.terms:
        return SampledField(lattice, np.zeros(lattice.shape),
                            {"f": _atomic_label(f), "k": k})
    min_diam = _min_atom_diameter(f)
    if max(lattice.spacing) > min_diam / 8.0:
        raise ResolutionTooCoarseError(
            f"lattice spacing {max(lattice.spacing):.4g} exceeds an eighth "
            f"of the smallest atom diameter {min_diam:.4g}")

    D = f.dilation
    pts, w = _measure_nodes(measure)
    shifted = pts @ D.power(k).T
    values = np.zeros(lattice.shape)
    for atom, lam in f.terms:
        blo, bhi = realize_cube(atom.support).bbox()
        for i in range(shifted.shape[0]):
            slices = lattice.window(blo + shifted[i], bhi + shifted[i])
            if slices is None:
                continue
            local = lattice.window_points(slices) - shifted[i]
            block = atom.evaluate(local).reshape(values[slices].shape)
            values[slices] += (lam * w[i]) * block
    return SampledField(lattice, values, {
        "f": _atomic_label(f), "measure": _measure_label(measure), "k": k,
    })


def maximal_field(f: AtomicSum, measure, k_range, lattice: Lattice) -> SampledField:
    """Pointwise sup over k of |mu_k * f|, with per-cell argmax recorded.

    The ends of the truncated range must contribute less than 1% of the
    field maximum; otherwise a TailNotNegligibleWarning is emitted.  The
    measured end fractions are stored in the provenance either way.
    """
    ks = _normalize_k_range(k_range)
    best = np.zeros(lattice.shape)
    argmax = np.full(lattice.shape, ks[0], dtype=int)
    end_max = {}
    for k in ks:
        fk = np.abs(convolve_dilated(f, measure, k, lattice).values)
        if k in (ks[0], ks[-1]):
            end_max[k] = float(fk.max())
        mask = fk > best
        best[mask] = fk[mask]
        argmax[mask] = k
    peak = float(best.max())
    tails = (
        end_max[ks[0]] / peak if peak > 0 else 0.0,
        end_max[ks[-1]] / peak if peak > 0 else 0.0,
    )
    if max(tails) > TAIL_FRACTION:
        warnings.warn(
            f"range ends contribute {max(tails):.3f} of the field max",
            TailNotNegligibleWarning)
    return SampledField(lattice, best, {
        "f": _atomic_label(f), "measure": _measure_label(measure),
        "k_range": (ks[0], ks[-1]), "argmax_k": argmax,
        "tail_fractions": tails,
    })


def _normalize_k_range(k_range) -> list:
    if isinstance(k_range, tuple) and len(k_range) == 2 and all(
            isinstance(v, (int, np.integer)) for v in k_range):
        lo, hi = int(k_range[0]), int(k_range[1])
        if lo > hi:
            raise InputInvalidError("empty k range")
        return list(range(lo, hi + 1))
    ks = sorted(int(k) for k in k_range)
    if not ks:
        raise InputInvalidError("empty k range")
    return ks


# ------------------------------------------------------- distribution sizes


def _excluded_mask(lattice: Lattice, exclude) -> np.ndarray:
    mask = np.zeros(int(np.prod(lattice.shape)), dtype=bool)
    if exclude:
        pts = lattice.points()
        for primitive in exclude:
            mask |= primitive.contains_points(pts)
    return mask


def distribution_function(field: SampledField, thresholds, h1: float = None,
                          exclude=None) -> DistributionReport:
    """Cell-count sizes of the superlevel sets {field > lambda}.

    Cells whose centers lie in any exclude primitive are skipped, which
    never enlarges a superlevel set.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.ndim != 1 or thresholds.size == 0:
        raise InputInvalidError("thresholds must be a nonempty 1-d sequence")
    if np.any(np.diff(thresholds) < 0):
        raise InputInvalidError("thresholds must be sorted ascending")
    flat = field.values.ravel()
    keep = ~_excluded_mask(field.lattice, exclude)
    cell = field.lattice.cell_volume
    kept = flat[keep]
    measures = np.array([cell * np.count_nonzero(kept > lam) for lam in thresholds])
    weak = float(np.max(thresholds * measures)) if thresholds.size else 0.0
    return DistributionReport(thresholds=thresholds, measures=measures,
                              weak_ratio=weak, h1=h1)


def weak_type_ratio(f: AtomicSum, measure, k_range, lattice: Lattice,
                    exclude=None) -> float:
    """sup over a log-spaced grid of lambda |{Mf > lambda} \\ E| / ||f||."""
    h1 = f.h1_norm()
    if h1 <= 0:
        raise InputInvalidError("the atomic sum must have positive norm")
    mf = maximal_field(f, measure, k_range, lattice)
    peak = float(mf.values.max())
    if peak <= 0:
        return 0.0
    thresholds = np.geomspace(THRESHOLD_FLOOR * peak, peak, THRESHOLD_COUNT)
    report = distribution_function(mf, thresholds, h1=h1, exclude=exclude)
    return report.weak_ratio / h1


# ----------------------------------------------------------------- exports


def write_field_binary(field: SampledField, path) -> None:
    """Flat little-endian dump: magic, dims, shape, origin, spacing, values."""
    lat = field.lattice
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", lat.dim))
        fh.write(struct.pack(f"<{lat.dim}I", *lat.shape))
        fh.write(struct.pack(f"<{lat.dim}d", *lat.origin))
        fh.write(struct.pack(f"<{lat.dim}d", *lat.spacing))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field_binary(path) -> SampledField:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise InputInvalidError(f"not a field file: bad magic {magic!r}")
        (dim,) = struct.unpack("<I", fh.read(4))
        shape = struct.unpack(f"<{dim}I", fh.read(4 * dim))
        origin = struct.unpack(f"<{dim}d", fh.read(8 * dim))
        spacing = struct.unpack(f"<{dim}d", fh.read(8 * dim))
        count = int(np.prod(shape))
        values = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
    lattice = Lattice(origin=origin, spacing=spacing, shape=shape)
    return SampledField(lattice, values.copy(), {"source": "binary"})


def write_field_csv(field: SampledField, path) -> None:
    """Cell centers and values, one row per cell, repr-exact floats."""
    lat = field.lattice
    pts = lat.points()
    flat = field.values.ravel()
    header = ",".join(f"x{j + 1}" for j in range(lat.dim)) + ",value"
    lines = [header]
    for row, val in zip(pts, flat):
        lines.append(",".join(repr(float(c)) for c in row) + f",{repr(float(val))}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
