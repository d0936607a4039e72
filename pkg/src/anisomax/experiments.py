"""Named experiments over the modules, with manifest, CSVs, and summary.

Each experiment reads everything from an ExperimentConfig, writes its
artifacts into the configured output directory, and reports pass/fail
lines.  Outputs are deterministic for a fixed config and seed: floats
are serialized with repr, no timestamps are recorded, and all random
draws flow from the configured seed.
"""

import json
import platform
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .atoms import AtomicSum
from .decomposition import (
    stopping_time,
    verify_stopping,
    verify_whitney,
    whitney_decompose,
)
from .dilation import cube_diameter, fit_diameter_exponent
from .errors import ConfigInvalidError, TailNotNegligibleWarning
from .maximal import (
    THRESHOLD_COUNT,
    THRESHOLD_FLOOR,
    TAIL_FRACTION,
    distribution_function,
    make_lattice,
    maximal_field,
    write_field_binary,
)
from .surface import (
    autocorrelation_kernel,
    check_kernel_decay,
    classify_pieces,
    excluded_piece_growth,
    partition_measure,
    surface_quadrature,
)

EXPERIMENT_NAMES = (
    "validate-dilation",
    "whitney",
    "stopping",
    "surface-classify",
    "kernel-decay",
    "maximal-weak-type",
    "full-pipeline",
)

MODULE_CONSTANTS = {
    "classify_fine_points": 4096,
    "decay_n_shells": 12,
    "decay_slope_cut": -0.7,
    "diameter_fit_tau": [-40, -10],
    "kernel_smooth_cells": 1.0,
    "maximal_tail_fraction": TAIL_FRACTION,
    "maximal_threshold_count": THRESHOLD_COUNT,
    "maximal_threshold_floor": THRESHOLD_FLOOR,
    "partition_cap_spread": "1/(2 sqrt(2 (d-1)))",
    "power_scan_window": 64,
}


# ------------------------------------------------------------- plumbing


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _joined(vector) -> str:
    parts = np.atleast_1d(np.asarray(vector)).tolist()
    return ";".join(repr(float(v)) for v in parts)


def _index_str(index) -> str:
    return ";".join(str(int(v)) for v in index)


class Lines:
    """Accumulates named pass/fail lines for the summary."""

    def __init__(self):
        self.rows = []

    def add(self, name: str, passed: bool, detail: str = ""):
        self.rows.append((name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.rows)

    def render(self) -> str:
        out = []
        for name, ok, detail in self.rows:
            tag = "PASS" if ok else "FAIL"
            out.append(f"{tag} {name}: {detail}" if detail else f"{tag} {name}")
        out.append(f"RESULT {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(out) + "\n"


def _write_manifest(out: Path, config, experiment: str) -> None:
    manifest = {
        "experiment": experiment,
        "seed": config.seed,
        "config": config.as_dict(),
        "module_constants": MODULE_CONSTANTS,
        "versions": {
            "anisomax": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "scipy": scipy.__version__,
        },
    }
    out.joinpath("manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def run_experiment(config, experiment: str, out_dir=None) -> int:
    """Run one named experiment; 0 when every summary line passes."""
    if experiment not in EXPERIMENT_NAMES:
        raise ConfigInvalidError(
            f"unknown experiment {experiment!r}; choose from {EXPERIMENT_NAMES}")
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = _RUNNERS[experiment]
    lines = Lines()
    runner(config, out, lines)
    out.joinpath("summary.txt").write_text(lines.render())
    _write_manifest(out, config, experiment)
    return 0 if lines.passed else 1


# ---------------------------------------------------------- experiments


def _run_validate_dilation(config, out: Path, lines: Lines) -> None:
    D = config.dilation()
    lines.add("dilation_valid", True,
              f"a={D.det_scale:g}, r={D.r_min:g}, n={D.block_size}, "
              f"norm_power={D.norm_power}")
    taus = list(range(-40, 1))
    _write_csv(out / "diameters.csv", ["tau", "diameter"],
               [(t, cube_diameter(D, t)) for t in taus])
    p = fit_diameter_exponent(D, range(-40, -9))
    lines.add("diameter_exponent", True, f"p={p!r} over tau in [-40,-10]")


def _run_whitney(config, out: Path, lines: Lines) -> None:
    entries = config.entries()
    alpha = config.alpha
    result = whitney_decompose(entries, alpha)
    report = verify_whitney(result, entries, alpha,
                            c_w=config.constants["c_w"])
    rows = []
    for sid, S in enumerate(result.selected):
        mass = sum(entries[i][1] for i, j in result.assigned.items() if j == sid)
        rows.append((S.tau, _index_str(S.index), S.volume, mass))
    _write_csv(out / "selected.csv",
               ["tau", "index", "volume", "assigned_mass"], rows)
    lines.add("selection", True,
              f"{len(result.selected)} cubes from {len(entries)} entries, "
              f"alpha={alpha!r}")
    for name, ok, witness in report.checks:
        lines.add(name, ok, witness or "")


def _pipeline_decomposition(config):
    """Entries -> Whitney -> kept entries -> stopping, shared by two runs."""
    entries = config.entries()
    alpha = config.alpha
    wres = whitney_decompose(entries, alpha)
    wrep = verify_whitney(wres, entries, alpha, c_w=config.constants["c_w"])
    if not wres.selected:
        return entries, wres, wrep, None, None, []
    kept = [entries[i] for i in sorted(wres.assigned)]
    sres = stopping_time(wres.selected, kept, alpha)
    srep = verify_stopping(sres, wres.selected, kept, alpha,
                           C=config.constants["c_stop"],
                           C_iv=config.constants["c_iv"],
                           seed=config.seed)
    return entries, wres, wrep, sres, srep, kept


def _kappa_rows(sres, kept):
    per_entry = []
    for i, (cube, lam) in enumerate(kept):
        per_entry.append((i, cube.tau, _index_str(cube.index), lam,
                          sres.kappa[i], sres.classification[i]))
    values = sorted(set(sres.kappa.values()))
    hist = [(k, sum(1 for v in sres.kappa.values() if v == k)) for k in values]
    return per_entry, hist


def _run_stopping(config, out: Path, lines: Lines) -> None:
    entries, wres, wrep, sres, srep, kept = _pipeline_decomposition(config)
    lines.add("whitney", wrep.passed,
              f"{len(wres.selected)} cubes from {len(entries)} entries")
    if sres is None:
        _write_csv(out / "kappa.csv",
                   ["entry", "tau", "index", "lam", "kappa", "class"], [])
        _write_csv(out / "kappa_hist.csv", ["kappa", "count"], [])
        _write_csv(out / "exceptional.csv", ["kind", "volume_term"], [])
        lines.add("stopping", True, "no cubes selected; nothing to stop")
        return
    per_entry, hist = _kappa_rows(sres, kept)
    _write_csv(out / "kappa.csv",
               ["entry", "tau", "index", "lam", "kappa", "class"], per_entry)
    _write_csv(out / "kappa_hist.csv", ["kappa", "count"], hist)
    _write_csv(out / "exceptional.csv", ["kind", "volume_term"],
               [(p.kind, p.volume_term) for p in sres.exceptional])
    for name, ok, witness in srep.checks:
        lines.add(name, ok, witness or "")


def _run_surface_classify(config, out: Path, lines: Lines) -> None:
    surface = config.surface_obj()
    D = config.dilation()
    rows = []
    for s in config.s_values():
        pieces = partition_measure(surface, s, config.eps, n_gl=24)
        records = classify_pieces(pieces, surface, D, config.eps, config.zeta,
                                  tau_window=config.tau_window)
        excluded = sum(1 for r in records if r.in_I1 or r.in_I2)
        lines.add(f"scale_s{s}", True,
                  f"{len(records)} pieces, {excluded} excluded")
        for r in records:
            rows.append((r.s, r.rho, _joined(r.center), r.min_curvature,
                         r.worst_mass_ratio, r.worst_tau,
                         int(r.in_I1), int(r.in_I2)))
    _write_csv(out / "classification.csv",
               ["s", "rho", "center", "min_curvature", "worst_mass_ratio",
                "worst_tau", "in_I1", "in_I2"], rows)
    s_values = config.s_values()
    if len(set(s_values)) >= 5:
        growth = excluded_piece_growth(surface, D, config.eps, config.zeta,
                                       s_values)
        lines.add("excluded_growth", True,
                  f"eta={growth.eta!r}, counts={growth.counts}")


def _run_kernel_decay(config, out: Path, lines: Lines) -> None:
    surface = config.surface_obj()
    measure = surface_quadrature(surface, config.n_gl)
    kernel = autocorrelation_kernel(measure, n_bins=config.n_bins)
    report = check_kernel_decay(kernel)
    _write_csv(out / "shells.csv", ["radius", "maximum"],
               list(zip(report.radii, report.maxima)))
    lines.add("kernel_decay", report.ok,
              f"slope={report.slope!r} over {len(report.radii)} shells")


def _weak_type_report(f, measure, config, lattice, exclude=None):
    """Maximal field, distribution report, and normalized ratio."""
    k_lo, k_hi = (int(v) for v in config.k_range)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailNotNegligibleWarning)
        mf = maximal_field(f, measure, (k_lo, k_hi), lattice)
    h1 = f.h1_norm()
    peak = float(mf.values.max())
    if peak <= 0.0:
        return mf, None, 0.0
    thresholds = np.geomspace(THRESHOLD_FLOOR * peak, peak, THRESHOLD_COUNT)
    report = distribution_function(mf, thresholds, h1=h1, exclude=exclude)
    return mf, report, report.weak_ratio / h1


def _run_maximal_weak_type(config, out: Path, lines: Lines) -> None:
    f = config.atomic_sum()
    if not f.terms:
        raise ConfigInvalidError("maximal-weak-type needs a nonempty atom list")
    measure = surface_quadrature(config.surface_obj(), config.n_gl)
    lattice = make_lattice(config.lattice["box"], tuple(config.lattice["shape"]))
    mf, report, ratio = _weak_type_report(f, measure, config, lattice)
    rows = []
    if report is not None:
        rows = [(lam, mu, lam * mu) for lam, mu
                in zip(report.thresholds, report.measures)]
    _write_csv(out / "distribution.csv",
               ["threshold", "size", "product"], rows)
    write_field_binary(mf, out / "maximal_field.bin")
    tails = mf.provenance["tail_fractions"]
    lines.add("weak_type_ratio", ratio <= config.constants["c_stop"],
              f"ratio={ratio!r} over {THRESHOLD_COUNT} thresholds")
    lines.add("range_tails", True,
              f"end fractions {tails[0]!r}, {tails[1]!r}")


def _run_full_pipeline(config, out: Path, lines: Lines) -> None:
    f = config.atomic_sum()
    if not f.terms:
        raise ConfigInvalidError("full-pipeline needs a nonempty atom list")
    alpha = config.alpha
    entries, wres, wrep, sres, srep, kept = _pipeline_decomposition(config)
    lines.add("whitney", wrep.passed,
              f"{len(wres.selected)} cubes from {len(entries)} entries")
    exclude = []
    if sres is not None:
        per_entry, hist = _kappa_rows(sres, kept)
        _write_csv(out / "kappa_hist.csv", ["kappa", "count"], hist)
        _write_csv(out / "exceptional_volume.csv", ["kind", "volume_term"],
                   [(p.kind, p.volume_term) for p in sres.exceptional])
        lines.add("stopping", srep.passed,
                  "; ".join(n for n, _ in srep.failures()) or "all checks hold")
        e_volume = sum(p.volume_term for p in sres.exceptional)
        bound = config.constants["c_stop"] * (
            sum(lam for _, lam in kept) / alpha
            + sum(S.volume for S in wres.selected))
        lines.add("exceptional_volume", e_volume <= bound,
                  f"sum={e_volume!r} vs bound={bound!r}")
        exclude = sres.exceptional
    else:
        _write_csv(out / "kappa_hist.csv", ["kappa", "count"], [])
        _write_csv(out / "exceptional_volume.csv", ["kind", "volume_term"], [])
        lines.add("stopping", True, "no cubes selected; E is empty")

    surface = config.surface_obj()
    D = config.dilation()
    s0 = config.s_values()[0]
    pieces = partition_measure(surface, s0, config.eps, n_gl=24)
    records = classify_pieces(pieces, surface, D, config.eps, config.zeta,
                              tau_window=config.tau_window)
    _write_csv(out / "pieces.csv",
               ["s", "rho", "min_curvature", "worst_mass_ratio",
                "in_I1", "in_I2"],
               [(r.s, r.rho, r.min_curvature, r.worst_mass_ratio,
                 int(r.in_I1), int(r.in_I2)) for r in records])
    usable = sum(1 for r in records if not (r.in_I1 or r.in_I2))
    lines.add("piece_split", True,
              f"s={s0}: {usable} of {len(records)} pieces kept")

    measure = surface_quadrature(surface, config.n_gl)
    lattice = make_lattice(config.lattice["box"], tuple(config.lattice["shape"]))
    cap = config.constants["c_stop"] / alpha
    taus = sorted({atom.support.tau for atom, _ in f.terms})
    rows = []
    all_ok = True
    for tau in taus:
        group = AtomicSum(terms=[(a, l) for a, l in f.terms
                                 if a.support.tau == tau], dilation=f.dilation)
        _, _, ratio = _weak_type_report(group, measure, config, lattice,
                                        exclude=exclude)
        rows.append((tau, len(group.terms), group.h1_norm(), ratio))
        all_ok = all_ok and ratio <= cap
    _, _, total = _weak_type_report(f, measure, config, lattice,
                                    exclude=exclude)
    rows.append(("all", len(f.terms), f.h1_norm(), total))
    _write_csv(out / "weak_type.csv", ["tau", "atoms", "h1", "ratio"], rows)
    lines.add("weak_type_outside_E", all_ok and total <= cap,
              f"overall ratio={total!r} vs cap={cap!r}")


_RUNNERS = {
    "validate-dilation": _run_validate_dilation,
    "whitney": _run_whitney,
    "stopping": _run_stopping,
    "surface-classify": _run_surface_classify,
    "kernel-decay": _run_kernel_decay,
    "maximal-weak-type": _run_maximal_weak_type,
    "full-pipeline": _run_full_pipeline,
}
