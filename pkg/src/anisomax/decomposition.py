"""Mass decompositions over anisotropic grids.

Two constructions live here.  whitney_decompose selects disjoint cubes whose
doubles absorb concentrated mass, leaving a leftover family of controlled
density; verify_whitney re-checks the three defining conditions on every
output.  stopping_time runs a two-parameter refinement loop over scales
(sigma, tau), classifies every input cube with a stopping level kappa, and
assembles an exceptional set out of tendril bounds and quadrupled cubes;
verify_stopping re-checks its four defining conditions.
"""

from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .dilation import DilationStructure, cube_diameter
from .errors import (
    BudgetExceededError,
    InputInvalidError,
    NotNormalizedError,
    NumericalFailureError,
)
from .grid import (
    GridCube,
    Parallelepiped,
    TendrilBound,
    cube_contains,
    expand_cube,
    tendril_of,
)

_LEVEL_BUDGET = 200
_TOL = 1e-9


# --------------------------------------------------------------- shared math


def star_window(Q: GridCube, sigma: int, tau: int):
    """Integer indices n with Q contained in the double of (sigma, tau, n).

    The double of the cube is the box 2^sigma [n - 1/2, n + 3/2]^d in the
    A^-tau pullback frame, so containment reduces to per-axis inequalities on
    the pullback bounding box of Q, which is exact because Q is the convex
    hull of its vertices.
    """
    D = Q.dilation
    verts = Q.realize().vertices() @ D.power(-tau).T
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    side = 2.0 ** sigma
    windows = []
    for i in range(D.dim):
        tol = _TOL * max(1.0, abs(lo[i]) + abs(hi[i]))
        n_min = int(np.ceil(hi[i] / side - 1.5 - tol))
        n_max = int(np.floor(lo[i] / side + 0.5 + tol))
        if n_min > n_max:
            return []
        windows.append(range(n_min, n_max + 1))
    return [tuple(n) for n in product(*windows)]


def _entry_in_star(Q: GridCube, host: GridCube) -> bool:
    """Exact test Q subset of host* through the host's pullback frame."""
    if host.sigma == 0 and host.tau == Q.tau and Q.sigma == 0:
        # Same scale: the double [n - 1/2, n + 3/2]^d holds exactly one
        # integer unit cube per axis, the host's own.
        return Q.index == host.index
    verts = Q.realize().vertices() @ Q.dilation.power(-host.tau).T
    side = 2.0 ** host.sigma
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    for i, n in enumerate(host.index):
        tol = _TOL * max(1.0, abs(lo[i]) + abs(hi[i]))
        if lo[i] < side * (n - 0.5) - tol or hi[i] > side * (n + 1.5) + tol:
            return False
    return True


def _cubes_overlap(a: GridCube, b: GridCube) -> bool:
    """Strict interior overlap of two half-open grid cubes."""
    if a.tau == b.tau and a.sigma == b.sigma:
        return a.index == b.index
    inner, outer = (a, b) if a.volume <= b.volume else (b, a)
    verts = inner.realize().vertices() @ inner.dilation.power(-outer.tau).T
    side = 2.0 ** outer.sigma
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    for i, n in enumerate(outer.index):
        if min(hi[i], side * (n + 1)) - max(lo[i], side * n) <= _TOL * max(1.0, side):
            return False
    return True


# ------------------------------------------------------------------- whitney


@dataclass
class WhitneyResult:
    """Selected cubes, entry assignments (entry id -> selected id), leftovers."""

    selected: list
    assigned: dict
    leftover: list
    alpha: float


@dataclass
class CheckReport:
    """Named pass/fail outcomes with witnesses for the first failure of each."""

    checks: list = field(default_factory=list)

    def add(self, name: str, passed: bool, witness: str = None):
        self.checks.append((name, bool(passed), witness))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failures(self) -> list:
        return [(n, w) for n, ok, w in self.checks if not ok]


def _validate_entries(entries):
    if not entries:
        return
    D = entries[0][0].dilation
    for cube, lam in entries:
        if cube.sigma != 0:
            raise InputInvalidError("mass entries must live on sigma = 0 cubes")
        if lam < 0:
            raise InputInvalidError("masses must be nonnegative")
        if cube.dilation is not D:
            raise InputInvalidError("entries must share one dilation structure")


def whitney_decompose(entries, alpha: float) -> WhitneyResult:
    """Select disjoint cubes S whose doubles carry the concentrated mass.

    entries is a list of (GridCube, lam) pairs on the sigma = 0 grid.  The
    level sweep runs from the coarsest potentially selectable level downward;
    a cube is selected when the still-unassigned mass inside its double
    exceeds alpha times its volume, and it absorbs that mass.  A second pass
    repairs leftover chains whose stacked density exceeds alpha, and a final
    pass merges nested selections.  All three defining conditions should be
    re-checked with verify_whitney on every instance.
    """
    if alpha <= 0:
        raise InputInvalidError("alpha must be positive")
    _validate_entries(entries)
    if not entries:
        return WhitneyResult(selected=[], assigned={}, leftover=[], alpha=alpha)
    D = entries[0][0].dilation
    a = D.det_scale
    total = float(sum(lam for _, lam in entries))
    t_lo = min(cube.tau for cube, _ in entries)
    if total <= 0:
        return WhitneyResult(selected=[], assigned={}, leftover=list(range(len(entries))),
                             alpha=alpha)
    # Highest level at which any selection is possible: total > alpha a^t.
    t_hi = int(np.ceil(np.log(total / alpha) / np.log(a))) - 1
    while total > alpha * (a ** (t_hi + 1)):
        t_hi += 1
    while t_hi >= t_lo and total <= alpha * (a ** t_hi):
        t_hi -= 1
    t_hi = max(t_hi, t_lo - 1)
    if t_hi - t_lo > _LEVEL_BUDGET:
        raise BudgetExceededError(
            f"selection ladder spans {t_hi - t_lo} levels, budget is {_LEVEL_BUDGET}"
        )

    active = set(range(len(entries)))
    selected = []
    assigned = {}

    for t in range(t_hi, t_lo - 1, -1):
        if not active:
            break
        remaining = sum(entries[i][1] for i in active)
        if remaining <= alpha * (a ** t):
            continue
        candidates = {}
        for i in sorted(active):
            for n in star_window(entries[i][0], 0, t):
                candidates.setdefault(n, []).append(i)
        for n in sorted(candidates):
            members = [i for i in candidates[n] if i in active]
            residual = sum(entries[i][1] for i in members)
            if residual > alpha * (a ** t):
                s_cube = GridCube(0, t, n, D)
                s_id = len(selected)
                selected.append(s_cube)
                for i in members:
                    assigned[i] = s_id
                    active.discard(i)

    # Density repair: leftover chains whose stacked density exceeds alpha are
    # capped by selecting the shallowest offending cube of each chain.
    leftover_ids = sorted(active)
    by_cube = {}
    for i in leftover_ids:
        key = (entries[i][0].tau, entries[i][0].index)
        by_cube.setdefault(key, [0.0, entries[i][0], []])
        by_cube[key][0] += entries[i][1]
        by_cube[key][2].append(i)

    nodes = sorted(by_cube.values(), key=lambda rec: (-rec[1].tau, rec[1].index))
    children = {id(rec): [] for rec in nodes}
    roots = []
    placed = []
    for rec in nodes:
        parent = None
        for cand in placed:
            if cube_contains(cand[1].realize(), rec[1]):
                if parent is None or cand[1].volume < parent[1].volume:
                    parent = cand
        if parent is None:
            roots.append(rec)
        else:
            children[id(parent)].append(rec)
        placed.append(rec)

    def _collect(rec):
        got = list(rec[2])
        for child in children[id(rec)]:
            got.extend(_collect(child))
        return got

    def _repair(rec, prefix):
        dens = prefix + rec[0] / rec[1].volume
        if dens > alpha:
            s_id = len(selected)
            selected.append(rec[1])
            for i in _collect(rec):
                assigned[i] = s_id
                active.discard(i)
        else:
            for child in children[id(rec)]:
                _repair(child, dens)

    for rec in roots:
        _repair(rec, 0.0)

    _merge_nested(selected, assigned, entries)

    # Bounded-density guard: a selected double should not carry more than
    # 16 alpha times the cube volume.  Offenders are merged upward.
    for _ in range(_LEVEL_BUDGET):
        worst = None
        for s_id, s_cube in enumerate(selected):
            if s_cube is None:
                continue
            full = sum(lam for cube, lam in entries if _entry_in_star(cube, s_cube))
            excess = full - 16.0 * alpha * s_cube.volume
            if excess > _TOL * max(1.0, full) and (worst is None or excess > worst[1]):
                worst = (s_id, excess)
        if worst is None:
            break
        s_id = worst[0]
        selected[s_id] = selected[s_id].tau_parent()
        _merge_nested(selected, assigned, entries)
    else:
        raise BudgetExceededError("density guard did not settle within budget")

    live = [s for s in selected if s is not None]
    remap = {}
    for s_id, s_cube in enumerate(selected):
        if s_cube is not None:
            remap[s_id] = len(remap)
    assigned = {i: remap[s] for i, s in assigned.items()}
    return WhitneyResult(selected=live, assigned=assigned,
                         leftover=sorted(active), alpha=alpha)


def _merge_nested(selected, assigned, entries):
    """Drop selected cubes contained in other selected cubes, reassigning."""
    order = sorted((s_id for s_id, s in enumerate(selected) if s is not None),
                   key=lambda s_id: -selected[s_id].volume)
    for small_pos in range(len(order) - 1, -1, -1):
        small_id = order[small_pos]
        small = selected[small_id]
        for big_id in order:
            big = selected[big_id]
            if big is None or big_id == small_id or small is None:
                continue
            same = (big.sigma, big.tau, big.index) == (small.sigma, small.tau, small.index)
            if not same and big.volume < small.volume:
                continue
            if same or cube_contains(big.realize(), small):
                for i, s in list(assigned.items()):
                    if s == small_id:
                        assigned[i] = big_id
                selected[small_id] = None
                small = None
            elif _cubes_overlap(big, small):
                raise NumericalFailureError(
                    "selected cubes overlap without containment; grid is not nested"
                )


def verify_whitney(result: WhitneyResult, entries, alpha: float, c_w: float = 16.0) -> CheckReport:
    """Re-check disjointness and the three defining conditions with witnesses."""
    report = CheckReport()
    selected = result.selected

    ok, witness = True, None
    for i in range(len(selected)):
        for j in range(i + 1, len(selected)):
            if _cubes_overlap(selected[i], selected[j]):
                ok, witness = False, f"cubes {i} and {j} overlap"
                break
        if not ok:
            break
    report.add("disjoint", ok, witness)

    ok, witness = True, None
    for i, s_id in result.assigned.items():
        if not _entry_in_star(entries[i][0], selected[s_id]):
            ok, witness = False, f"entry {i} not inside the double of its host {s_id}"
            break
    report.add("assignment", ok, witness)

    ok, witness = True, None
    for s_id, s_cube in enumerate(selected):
        full = sum(lam for cube, lam in entries if _entry_in_star(cube, s_cube))
        bound = c_w * alpha * s_cube.volume
        if full > bound * (1.0 + 1e-9):
            ok, witness = False, f"host {s_id}: mass {full:.6g} > {bound:.6g}"
            break
    report.add("condition1_star_mass", ok, witness)

    total_volume = sum(s.volume for s in selected)
    total_mass = sum(lam for _, lam in entries)
    ok = total_volume <= total_mass / alpha * (1.0 + 1e-9)
    report.add(
        "condition2_total_volume", ok,
        None if ok else f"sum |S| = {total_volume:.6g} > {total_mass / alpha:.6g}",
    )

    ok, witness = True, None
    distinct = {}
    for i in result.leftover:
        cube, lam = entries[i]
        key = (cube.tau, cube.index)
        distinct.setdefault(key, [0.0, cube])
        distinct[key][0] += lam
    recs = list(distinct.values())
    conservative = False
    for k in range(len(recs)):
        for m in range(k + 1, len(recs)):
            a_rec, b_rec = recs[k], recs[m]
            if _cubes_overlap(a_rec[1], b_rec[1]):
                inner, outer = sorted((a_rec[1], b_rec[1]), key=lambda c: c.volume)
                if not cube_contains(outer.realize(), inner):
                    conservative = True
    worst = 0.0
    for mass, cube in recs:
        chain = 0.0
        for other_mass, other in recs:
            if other is cube or cube_contains(other.realize(), cube) or \
                    (conservative and _cubes_overlap(other, cube)):
                chain += other_mass / other.volume
        if chain > worst:
            worst = chain
            if chain > alpha * (1.0 + 1e-9):
                ok = False
                witness = f"leftover density {chain:.6g} > alpha at {cube}"
    suffix = " (conservative, non-nested leftovers)" if conservative else ""
    report.add("condition3_leftover_density", ok,
               (witness + suffix) if witness else None)
    return report


# ------------------------------------------------------------- stopping time


@dataclass(frozen=True)
class TraceEvent:
    """One event of the stopping-time loop, for replay and verification."""

    kind: str
    sigma: int
    tau: int
    index: tuple = None
    entry: int = None
    mass: float = None
    action: str = None


@dataclass(frozen=True)
class ExceptionalPrimitive:
    """One piece of the exceptional set: a tendril bound or a quadrupled cube.

    volume_term is the number this primitive contributes when the size of the
    exceptional set is summed: the geometric scale 2^sigma a^tau for tendril
    bounds and the exact volume 4^d |S| for quadrupled cubes.
    """

    kind: str
    cube: GridCube
    tendril: TendrilBound
    quad: Parallelepiped
    volume_term: float

    def contains_points(self, points) -> np.ndarray:
        if self.kind == "tendril":
            return self.tendril.contains_points(points)
        return self.quad.contains_points(points)


@dataclass
class StoppingResult:
    """Classification levels, exceptional primitives, and the full trace."""

    kappa: dict
    classification: dict
    host: dict
    assigned_primitive: dict
    exceptional: list
    trace: list
    tau0: int
    dimension_violations: list
    alpha: float


def stopping_time(S_list, entries, alpha: float) -> StoppingResult:
    """Run the two-parameter stopping loop over scales (sigma, tau).

    S_list holds pairwise disjoint sigma = 0 cubes; every entry cube must sit
    inside the double of at least one of them.  Stages run from tau0 - 1 down
    to the finest entry level.  Within a stage, sigma descends while at least
    one live entry still fits inside a double at that scale; all doubles whose
    live mass exceeds alpha 2^sigma a^tau are selected simultaneously, and the
    entries inside them stop with kappa = tau + 1.  Entries that survive to
    their own stage stop against their hosting S.  A final repair pass lifts
    kappa to tau(S) + 1 over every S whose double holds the entry.
    """
    if alpha <= 0:
        raise InputInvalidError("alpha must be positive")
    _validate_entries(entries)
    if not entries:
        raise InputInvalidError("stopping_time needs at least one entry")
    D = entries[0][0].dilation
    if D.norm_power != 1:
        raise NotNormalizedError("stopping_time needs a dilation with norm_power 1")
    for s_cube in S_list:
        if s_cube.sigma != 0:
            raise InputInvalidError("S cubes must live on the sigma = 0 grid")

    hosts_of = {}
    for i, (cube, _) in enumerate(entries):
        hosts_of[i] = [k for k, s_cube in enumerate(S_list) if _entry_in_star(cube, s_cube)]
        if not hosts_of[i]:
            raise InputInvalidError(f"entry {i} is not inside the double of any S")

    a = D.det_scale
    total = float(sum(lam for _, lam in entries))
    tau_max = max(cube.tau for cube, _ in entries)
    tau_min = min(cube.tau for cube, _ in entries)
    tau0 = tau_max + 1
    while alpha * (a ** tau0) <= total:
        tau0 += 1
        if tau0 - tau_max > _LEVEL_BUDGET:
            raise BudgetExceededError("tau0 search exceeded the level budget")

    unit_diam = cube_diameter(D, 0)
    live = set(range(len(entries)))
    kappa, classification, host, assigned_primitive = {}, {}, {}, {}
    trace = []
    dimension_violations = []
    selected_qs = {}

    for tau in range(tau0 - 1, tau_min - 1, -1):
        sigma = 0
        while live:
            fits = any(
                cube_diameter(D, entries[i][0].tau - tau) <= (2.0 ** (sigma + 1)) * unit_diam
                for i in live
            )
            if not fits:
                break
            candidates = {}
            for i in sorted(live):
                for n in star_window(entries[i][0], sigma, tau):
                    candidates.setdefault(n, []).append(i)
            threshold = alpha * (2.0 ** sigma) * (a ** tau)
            chosen = []
            for n in sorted(candidates):
                mass = sum(entries[i][1] for i in candidates[n])
                if mass > threshold:
                    chosen.append((n, mass))
            trace.append(TraceEvent(kind="step", sigma=sigma, tau=tau))
            for n, mass in chosen:
                q = GridCube(sigma, tau, n, D)
                selected_qs[(sigma, tau, n)] = q
                trace.append(TraceEvent(kind="select", sigma=sigma, tau=tau,
                                        index=n, mass=mass))
            if chosen:
                chosen_set = {n for n, _ in chosen}
                for n, _ in chosen:
                    for i in list(candidates[n]):
                        if i not in live:
                            continue
                        first = min(m for m in star_window(entries[i][0], sigma, tau)
                                    if m in chosen_set)
                        live.discard(i)
                        kappa[i] = tau + 1
                        classification[i] = "C1"
                        host[i] = ("q", sigma, tau, first)
                        trace.append(TraceEvent(kind="classify", sigma=sigma, tau=tau,
                                                index=first, entry=i, action="C1"))
            sigma -= 1
        finishing = [i for i in sorted(live) if entries[i][0].tau == tau]
        for i in finishing:
            hosts = hosts_of[i]
            host_taus = {S_list[k].tau for k in hosts}
            if len(host_taus) > 1:
                dimension_violations.append((i, sorted(host_taus)))
            best = min(hosts, key=lambda k: (S_list[k].tau, S_list[k].index))
            live.discard(i)
            kappa[i] = S_list[best].tau + 1
            classification[i] = "C2"
            host[i] = ("S", best)
            trace.append(TraceEvent(kind="classify", sigma=0, tau=tau,
                                    index=S_list[best].index, entry=i, action="C2"))

    for i in range(len(entries)):
        lift = max(S_list[k].tau + 1 for k in hosts_of[i])
        if lift > kappa[i]:
            trace.append(TraceEvent(kind="repair", sigma=0, tau=entries[i][0].tau,
                                    entry=i, action=f"kappa {kappa[i]} -> {lift}"))
            kappa[i] = lift

    exceptional = []
    primitive_of_q = {}
    for key in sorted(selected_qs):
        q = selected_qs[key]
        bound = tendril_of(q)
        primitive_of_q[key] = len(exceptional)
        exceptional.append(ExceptionalPrimitive(
            kind="tendril", cube=q, tendril=bound, quad=None,
            volume_term=bound.scale,
        ))
    primitive_of_s = {}
    for k, s_cube in enumerate(S_list):
        primitive_of_s[k] = len(exceptional)
        exceptional.append(ExceptionalPrimitive(
            kind="quad", cube=s_cube, tendril=None, quad=expand_cube(s_cube, 4.0),
            volume_term=(4.0 ** D.dim) * s_cube.volume,
        ))
    for i in range(len(entries)):
        if host[i][0] == "q":
            _, sigma, tau, n = host[i]
            assigned_primitive[i] = primitive_of_q[(sigma, tau, n)]
        else:
            assigned_primitive[i] = primitive_of_s[host[i][1]]

    return StoppingResult(
        kappa=kappa, classification=classification, host=host,
        assigned_primitive=assigned_primitive, exceptional=exceptional,
        trace=trace, tau0=tau0, dimension_violations=dimension_violations,
        alpha=alpha,
    )


def _sample_support(surface, count, rng):
    """Points of the measure's support: graph points over the cutoff box."""
    if surface is None:
        return None
    half = surface.chi_radius
    d = surface.dim
    y = rng.uniform(-half, half, size=(count, d - 1))
    return np.column_stack([y, surface.psi(y)])


def verify_stopping(result: StoppingResult, S_list, entries, alpha: float,
                    surface=None, C: float = 100.0, C_iv: float = 32.0,
                    n_samples: int = 1000, seed: int = 0,
                    checks=("i", "ii", "iii", "iv")) -> CheckReport:
    """Re-check the four defining conditions of the stopping construction.

    (i) the summed volume terms of the exceptional primitives are controlled
    by C (alpha^-1 sum lam + sum |S|); (ii) sampled dilates of each entry at
    levels below kappa land inside the exceptional set; (iii) kappa exceeds
    tau(S) for every S whose double holds the entry; (iv) at every recorded
    step (sigma, tau), mass already stopped (kappa <= tau) stacks to at most
    C_iv alpha 2^sigma a^tau inside any double.
    """
    report = CheckReport()
    D = entries[0][0].dilation
    a = D.det_scale
    rng = np.random.default_rng(seed)

    if "i" in checks:
        lhs = sum(p.volume_term for p in result.exceptional)
        rhs = C * (sum(lam for _, lam in entries) / alpha + sum(s.volume for s in S_list))
        report.add("i_volume_sum", lhs <= rhs,
                   None if lhs <= rhs else f"{lhs:.6g} > {rhs:.6g}")

    if "ii" in checks:
        ok, witness = True, None
        if surface is None:
            ball = rng.normal(size=(n_samples, D.dim))
            ball = ball / np.linalg.norm(ball, axis=1, keepdims=True)
            ball = ball * (rng.random((n_samples, 1)) ** (1.0 / D.dim))
            support = ball
        else:
            support = _sample_support(surface, n_samples, rng)
        for i, (cube, _) in enumerate(entries):
            base = cube.realize()
            u = rng.random((n_samples, D.dim))
            x = base.origin + u @ base.basis.T
            for j in (result.kappa[i] - 1, result.kappa[i] - 3, result.kappa[i] - 8):
                pts = x + support @ D.power(j).T
                inside = result.exceptional[result.assigned_primitive[i]].contains_points(pts)
                if not np.all(inside):
                    missing = np.where(~inside)[0]
                    rest = np.zeros(len(missing), dtype=bool)
                    for p_idx, prim in enumerate(result.exceptional):
                        if p_idx == result.assigned_primitive[i]:
                            continue
                        rest |= prim.contains_points(pts[missing])
                        if np.all(rest):
                            break
                    if not np.all(rest):
                        ok = False
                        witness = (f"entry {i}, level {j}: "
                                   f"{int(np.sum(~rest))} of {n_samples} samples escape")
                        break
            if not ok:
                break
        report.add("ii_dilates_covered", ok, witness)

    if "iii" in checks:
        ok, witness = True, None
        for i, (cube, _) in enumerate(entries):
            for k, s_cube in enumerate(S_list):
                if _entry_in_star(cube, s_cube) and result.kappa[i] <= s_cube.tau:
                    ok = False
                    witness = f"entry {i}: kappa {result.kappa[i]} <= tau(S_{k}) {s_cube.tau}"
                    break
            if not ok:
                break
        report.add("iii_kappa_exceeds_hosts", ok, witness)

    if "iv" in checks:
        ok, witness = True, None
        steps = [(ev.sigma, ev.tau) for ev in result.trace if ev.kind == "step"]
        for sigma, tau in steps:
            stopped = [i for i in range(len(entries)) if result.kappa[i] <= tau]
            if not stopped:
                continue
            sums = {}
            for i in stopped:
                for n in star_window(entries[i][0], sigma, tau):
                    sums[n] = sums.get(n, 0.0) + entries[i][1]
            bound = C_iv * alpha * (2.0 ** sigma) * (a ** tau)
            for n, mass in sums.items():
                if mass > bound * (1.0 + 1e-9):
                    ok = False
                    witness = (f"step ({sigma}, {tau}), cube {n}: "
                               f"stopped mass {mass:.6g} > {bound:.6g}")
                    break
            if not ok:
                break
        report.add("iv_stopped_mass_bounded", ok, witness)

    return report


def replay_trace_masses(result: StoppingResult, entries):
    """Recompute each select event's mass from scratch by replaying the trace.

    Returns a list of (event, recomputed mass) pairs for every select event;
    a correct trace reproduces its recorded masses exactly.
    """
    live = set(range(len(entries)))
    classified_at = {}
    for ev in result.trace:
        if ev.kind == "classify":
            classified_at[ev.entry] = (ev.sigma, ev.tau)
    pairs = []
    pos = 0
    trace = result.trace
    while pos < len(trace):
        ev = trace[pos]
        if ev.kind == "select":
            mass = sum(
                entries[i][1] for i in live
                if ev.index in star_window(entries[i][0], ev.sigma, ev.tau)
            )
            pairs.append((ev, mass))
        elif ev.kind == "classify":
            live.discard(ev.entry)
        pos += 1
    return pairs
