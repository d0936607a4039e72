"""Experiment configuration: a YAML file resolved against defaults.

One structured-text file per run.  Every parameter referenced by an
experiment lives here, so the run manifest can record the fully resolved
configuration.  Dotted overrides ("surface.kind=quartic-flat") patch
individual keys after the file is read.
"""

import copy
from dataclasses import asdict, dataclass

import yaml

from .atoms import AtomicSum, make_atom, random_atomic_sum
from .dilation import DilationStructure, validate_dilation
from .errors import AnisoError, ConfigInvalidError
from .grid import GridCube
from .surface import make_surface

DEFAULTS = {
    "matrix": [[2.0, 0.0], [0.0, 4.0]],
    "surface": {"kind": "circle-arc", "dim": 2, "coeffs": None},
    "eps": 0.25,
    "zeta": 0.03125,
    "alpha": 1.0,
    "atoms": {
        "count": 12,
        "tau_range": [-3, 0],
        "lam_range": [0.1, 2.0],
        "seed": None,
        "profile": "haar",
        "index_span": 6,
        "list": None,
    },
    "lattice": {"box": [[-4.0, 4.0], [-4.0, 4.0]], "shape": [512, 512]},
    "k_range": [-4, 4],
    "s_range": [4, 16],
    "tau_window": None,
    "n_gl": 200,
    "n_bins": 255,
    "constants": {"c_w": 16.0, "c_stop": 100.0, "c_iv": 32.0, "c_pair": 64.0},
    "out_dir": "runs",
    "seed": 7,
}


def _coeff_key(key) -> tuple:
    """Monomial key: a list in YAML, or a comma-joined string like "4,0"."""
    if isinstance(key, (list, tuple)):
        return tuple(int(v) for v in key)
    return tuple(int(v) for v in str(key).split(","))


@dataclass
class ExperimentConfig:
    """Fully resolved run parameters; build through load_config."""

    matrix: list
    surface: dict
    eps: float
    zeta: float
    alpha: float
    atoms: dict
    lattice: dict
    k_range: list
    s_range: list
    tau_window: object
    n_gl: int
    n_bins: int
    constants: dict
    out_dir: str
    seed: int

    def dilation(self) -> DilationStructure:
        return validate_dilation(self.matrix)

    def surface_obj(self):
        kind = self.surface["kind"]
        dim = int(self.surface.get("dim", 2))
        coeffs = self.surface.get("coeffs")
        if coeffs is not None:
            coeffs = {_coeff_key(key): float(c) for key, c in coeffs.items()}
        return make_surface(kind, dim=dim, coeffs=coeffs)

    def atomic_sum(self) -> AtomicSum:
        """The input function: an explicit atom list or a seeded draw."""
        D = self.dilation()
        spec = self.atoms
        if spec.get("list") is not None:
            terms = []
            for row in spec["list"]:
                cube = GridCube(0, int(row["tau"]), tuple(int(v) for v in row["index"]), D)
                atom = make_atom(cube, row.get("profile", "haar"),
                                 seed=int(row.get("seed", 0)))
                terms.append((atom, float(row["lam"])))
            return AtomicSum(terms=terms, dilation=D)
        seed = spec["seed"] if spec["seed"] is not None else self.seed
        lo, hi = (int(v) for v in spec["tau_range"])
        return random_atomic_sum(
            D, int(spec["count"]), range(lo, hi + 1),
            tuple(float(v) for v in spec["lam_range"]), int(seed),
            profile=spec["profile"], index_span=int(spec["index_span"]))

    def entries(self):
        """The mass instance (cube, lambda) seen by the decompositions."""
        return [(atom.support, lam) for atom, lam in self.atomic_sum().terms]

    def s_values(self) -> list:
        lo, hi = (int(v) for v in self.s_range)
        return list(range(lo, hi + 1))

    def as_dict(self) -> dict:
        return asdict(self)


def _merge(base: dict, patch: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in patch.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigInvalidError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, overrides=(), seed=None, out_dir=None) -> ExperimentConfig:
    """Read a YAML config, apply dotted overrides, validate everything."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigInvalidError(f"cannot read config: {exc}")
        except yaml.YAMLError as exc:
            raise ConfigInvalidError(f"config is not valid YAML: {exc}")
    if not isinstance(data, dict):
        raise ConfigInvalidError("config root must be a mapping")
    merged = _merge(DEFAULTS, data)
    for item in overrides:
        merged = _apply_override(merged, item)
    if seed is not None:
        merged["seed"] = int(seed)
    if out_dir is not None:
        merged["out_dir"] = str(out_dir)
    return _validate(merged)


def _apply_override(merged: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigInvalidError(f"override must look like key=value: {item!r}")
    key, _, raw = item.partition("=")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    patch = {}
    node = patch
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    return _merge(merged, patch)


def _validate(raw: dict) -> ExperimentConfig:
    cfg = ExperimentConfig(**raw)
    try:
        cfg.dilation()
        cfg.surface_obj()
    except AnisoError as exc:
        raise ConfigInvalidError(f"config rejected by its module: {exc}")
    if not (cfg.eps > 0 and cfg.zeta > 0 and cfg.alpha > 0):
        raise ConfigInvalidError("eps, zeta, alpha must be positive")
    if len(cfg.k_range) != 2 or int(cfg.k_range[0]) > int(cfg.k_range[1]):
        raise ConfigInvalidError("k_range must be [lo, hi] with lo <= hi")
    if len(cfg.s_range) != 2 or int(cfg.s_range[0]) > int(cfg.s_range[1]) \
            or int(cfg.s_range[0]) < 0:
        raise ConfigInvalidError("s_range must be [lo, hi] with 0 <= lo <= hi")
    box, shape = cfg.lattice.get("box"), cfg.lattice.get("shape")
    if not box or not shape or len(box) != len(shape):
        raise ConfigInvalidError("lattice needs box and shape of equal dimension")
    for side in box:
        if len(side) != 2 or not float(side[1]) > float(side[0]):
            raise ConfigInvalidError("lattice box sides must have positive length")
    if any(int(n) <= 0 for n in shape):
        raise ConfigInvalidError("lattice shape must be positive")
    if cfg.atoms.get("list") is None:
        if int(cfg.atoms["count"]) < 0:
            raise ConfigInvalidError("atom count must be nonnegative")
        tl, th = (int(v) for v in cfg.atoms["tau_range"])
        if tl > th:
            raise ConfigInvalidError("atom tau_range must be [lo, hi]")
    for name, value in cfg.constants.items():
        if not float(value) > 0:
            raise ConfigInvalidError(f"constant {name} must be positive")
    if cfg.n_gl < 4 or cfg.n_bins < 8:
        raise ConfigInvalidError("n_gl and n_bins too small to quadrature")
    return cfg
