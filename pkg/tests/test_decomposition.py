"""Tests for the mass decomposition and stopping-time constructions."""

import numpy as np
import pytest
from numpy.random import default_rng
from pytest import approx

from anisomax.decomposition import (
    replay_trace_masses,
    star_window,
    stopping_time,
    verify_stopping,
    verify_whitney,
    whitney_decompose,
    WhitneyResult,
)
from anisomax.dilation import validate_dilation
from anisomax.errors import BudgetExceededError, InputInvalidError, NotNormalizedError
from anisomax.grid import GridCube


@pytest.fixture(scope="module")
def diag_dilation():
    return validate_dilation(np.array([[2.0, 0.0], [0.0, 4.0]]))


def random_instance(D, alpha, n_entries, seed, tau_lo=-6, tau_hi=0, span=6):
    """Random mass instance with per-cube ratios lam/(alpha|Q|) in [0.01, 20]."""
    rng = default_rng(seed)
    entries = []
    for _ in range(n_entries):
        tau = int(rng.integers(tau_lo, tau_hi + 1))
        index = (int(rng.integers(-span, span + 1)), int(rng.integers(-span, span + 1)))
        cube = GridCube(0, tau, index, D)
        ratio = 10.0 ** rng.uniform(-2.0, 1.3)
        entries.append((cube, alpha * cube.volume * ratio))
    return entries


# ---------------------------------------------------------------------------
# star windows


def test_star_window_same_level_is_singleton(diag_dilation):
    Q = GridCube(0, -2, (3, -1), diag_dilation)
    assert star_window(Q, 0, -2) == [(3, -1)]


def test_star_window_coarser_level_count(diag_dilation):
    # A unit cube pulled back one dilation level spans at most two indices
    # per axis of the coarser grid.
    Q = GridCube(0, 0, (0, 0), diag_dilation)
    window = star_window(Q, 0, 1)
    assert (0, 0) in window
    assert 1 <= len(window) <= 4
    for n in window:
        host = GridCube(0, 1, n, diag_dilation)
        assert host.volume == approx(8.0)


# ---------------------------------------------------------------------------
# whitney selection: small frozen instances


def test_single_heavy_entry_selects_own_cube(diag_dilation):
    alpha = 1.0
    Q = GridCube(0, 0, (0, 0), diag_dilation)
    res = whitney_decompose([(Q, 2.0 * alpha)], alpha)
    assert len(res.selected) == 1
    S = res.selected[0]
    assert (S.tau, S.index) == (0, (0, 0))
    assert res.assigned == {0: 0}
    assert res.leftover == []
    assert verify_whitney(res, [(Q, 2.0 * alpha)], alpha).passed


def test_two_identical_cubes_share_one_selection(diag_dilation):
    alpha = 0.5
    Q = GridCube(0, -1, (2, 2), diag_dilation)
    lam = alpha * Q.volume
    entries = [(Q, lam), (GridCube(0, -1, (2, 2), diag_dilation), lam)]
    res = whitney_decompose(entries, alpha)
    assert len(res.selected) == 1
    assert res.selected[0].index == (2, 2)
    assert set(res.assigned) == {0, 1}
    rep = verify_whitney(res, entries, alpha)
    assert rep.passed, rep.failures()


def test_sparse_light_entries_all_leftover(diag_dilation):
    alpha = 1.0
    entries = []
    for i in range(10):
        cube = GridCube(0, -1, (3 * i, -3 * i), diag_dilation)
        entries.append((cube, 1e-3 * alpha * cube.volume))
    res = whitney_decompose(entries, alpha)
    assert res.selected == []
    assert sorted(res.leftover) == list(range(10))
    rep = verify_whitney(res, entries, alpha)
    assert rep.passed, rep.failures()


def test_heavy_stack_selects_coarser_host(diag_dilation):
    alpha = 1.0
    Q = GridCube(0, 0, (0, 0), diag_dilation)
    entries = [(Q, 0.9 * alpha)] * 18
    res = whitney_decompose(entries, alpha)
    assert len(res.selected) == 1
    assert res.selected[0].tau == 1
    assert len(res.assigned) == 18
    rep = verify_whitney(res, entries, alpha)
    assert rep.passed, rep.failures()


def test_nested_chain_density_repair(diag_dilation):
    # Six nested cubes each carrying density 0.3*alpha: no single level is
    # heavy, but the leftover chain would exceed density one, so the sweep
    # must select a cube partway down the chain.
    alpha = 1.0
    entries = []
    for tau in range(0, -6, -1):
        cube = GridCube(0, tau, (0, 0), diag_dilation)
        entries.append((cube, 0.3 * alpha * cube.volume))
    res = whitney_decompose(entries, alpha)
    assert len(res.selected) == 1
    assert res.selected[0].tau == -3
    assert sorted(res.leftover) == [0, 1, 2]
    rep = verify_whitney(res, entries, alpha)
    assert rep.passed, rep.failures()


def test_empty_instance_is_vacuous(diag_dilation):
    res = whitney_decompose([], 1.0)
    assert res.selected == [] and res.assigned == {} and res.leftover == []
    assert verify_whitney(res, [], 1.0).passed


def test_budget_guard_on_extreme_mass_ratio(diag_dilation):
    Q = GridCube(0, 0, (0, 0), diag_dilation)
    with pytest.raises(BudgetExceededError):
        whitney_decompose([(Q, 1.0)], alpha=1e-200)


def test_verifier_catches_undersized_selection(diag_dilation):
    # Hand-built result claiming the cube hosts far more mass than the
    # star-mass condition allows: the verifier must fail with a witness.
    alpha = 1.0
    Q = GridCube(0, 0, (0, 0), diag_dilation)
    entries = [(Q, 100.0 * alpha)]
    fake = WhitneyResult(selected=[Q], assigned={0: 0}, leftover=[], alpha=alpha)
    rep = verify_whitney(fake, entries, alpha)
    assert not rep.passed
    assert any(name == "condition1_star_mass" for name, _ in rep.failures())


def test_random_instances_verify_and_are_deterministic(diag_dilation):
    alpha = 0.7
    for seed in range(30):
        entries = random_instance(diag_dilation, alpha, 40, seed)
        res = whitney_decompose(entries, alpha)
        rep = verify_whitney(res, entries, alpha)
        assert rep.passed, (seed, rep.failures())
        res2 = whitney_decompose(entries, alpha)
        assert [(s.tau, s.index) for s in res2.selected] == [
            (s.tau, s.index) for s in res.selected
        ]
        assert res2.assigned == res.assigned and res2.leftover == res.leftover


# ---------------------------------------------------------------------------
# stopping time: frozen small instances


def test_huge_entry_stops_at_first_stage(diag_dilation):
    alpha = 1.0
    Q = GridCube(0, -2, (0, 0), diag_dilation)
    lam = 1e6 * alpha * Q.volume
    res = stopping_time([Q], [(Q, lam)], alpha)
    assert res.tau0 == 5
    assert res.kappa[0] == 5
    assert res.classification[0] == "C1"
    # The entry sits at the shared corner of four coarse windows, and all of
    # them carry its full mass above threshold, so all four are selected.
    selects = [ev for ev in res.trace if ev.kind == "select"]
    assert len(selects) == 4
    assert {(ev.sigma, ev.tau) for ev in selects} == {(0, 4)}
    assert res.host[0] == ("q", 0, 4, (-1, -1))


def test_huge_alpha_yields_no_selections(diag_dilation):
    entries = random_instance(diag_dilation, 1.0, 12, seed=5)
    S_list = [GridCube(0, 1, (i, i), diag_dilation) for i in range(-6, 7)]
    alpha = 1e6 * sum(lam for _, lam in entries)
    usable = [(q, lam) for q, lam in entries]
    res = stopping_time(S_list, usable, alpha)
    assert all(kind == "C2" for kind in res.classification.values())
    assert not any(ev.kind == "select" for ev in res.trace)
    assert all(p.kind == "quad" for p in res.exceptional)
    for i, (q, _) in enumerate(usable):
        host = res.host[i]
        assert host[0] == "S"
        assert res.kappa[i] == S_list[host[1]].tau + 1


def test_multiple_hosts_repair_lifts_kappa(diag_dilation):
    alpha = 1e9
    Q = GridCube(0, -1, (0, 0), diag_dilation)
    S_small = GridCube(0, -1, (0, 0), diag_dilation)
    S_big = GridCube(0, 1, (0, 0), diag_dilation)
    res = stopping_time([S_small, S_big], [(Q, 1.0)], alpha)
    assert res.classification[0] == "C2"
    assert res.kappa[0] == S_big.tau + 1
    assert res.dimension_violations
    assert any(ev.kind == "repair" for ev in res.trace)
    rep = verify_stopping(res, [S_small, S_big], [(Q, 1.0)], alpha, seed=1)
    assert rep.passed, rep.failures()


def test_entry_without_host_rejected(diag_dilation):
    Q = GridCube(0, 0, (50, 50), diag_dilation)
    S = GridCube(0, 0, (0, 0), diag_dilation)
    with pytest.raises(InputInvalidError):
        stopping_time([S], [(Q, 1.0)], 1.0)


def test_jordan_dilation_rejected_for_stopping():
    D = validate_dilation(np.array([[2.0, 1.0], [0.0, 2.0]]))
    Q = GridCube(0, 0, (0, 0), D)
    with pytest.raises(NotNormalizedError):
        stopping_time([Q], [(Q, 1.0)], 1.0)


# ---------------------------------------------------------------------------
# stopping time: pipeline instances and verification


def pipeline_instance(D, alpha, seed):
    """Whitney-decompose a random instance and keep the covered entries."""
    entries = random_instance(D, alpha, 40, seed)
    res = whitney_decompose(entries, alpha)
    if not res.selected:
        return None
    kept = [entries[i] for i in sorted(res.assigned)]
    return res.selected, kept


def test_pipeline_instances_pass_all_checks(diag_dilation):
    alpha = 0.7
    checked = 0
    seed = 0
    while checked < 10:
        built = pipeline_instance(diag_dilation, alpha, seed)
        seed += 1
        if built is None:
            continue
        S_list, kept = built
        res = stopping_time(S_list, kept, alpha)
        rep = verify_stopping(res, S_list, kept, alpha, seed=seed)
        assert rep.passed, (seed, rep.failures())
        checked += 1


def test_classification_partitions_entries(diag_dilation):
    alpha = 0.7
    built = pipeline_instance(diag_dilation, alpha, seed=3)
    assert built is not None
    S_list, kept = built
    res = stopping_time(S_list, kept, alpha)
    assert set(res.classification) == set(range(len(kept)))
    assert set(res.classification.values()) <= {"C1", "C2"}
    assert set(res.kappa) == set(range(len(kept)))
    assert set(res.assigned_primitive) == set(range(len(kept)))


def test_sentinel_mutation_fails_host_check(diag_dilation):
    alpha = 0.7
    built = pipeline_instance(diag_dilation, alpha, seed=3)
    S_list, kept = built
    sentinel_cube = GridCube(0, -3, (10000, 10000), diag_dilation)
    sentinel_lam = 1e-6 * alpha * sentinel_cube.volume
    S_mut = list(S_list) + [sentinel_cube]
    kept_mut = list(kept) + [(sentinel_cube, sentinel_lam)]
    res = stopping_time(S_mut, kept_mut, alpha)
    sid = len(kept_mut) - 1
    assert res.classification[sid] == "C2"
    assert res.kappa[sid] == sentinel_cube.tau + 1

    broken = dict(res.kappa)
    broken[sid] -= 5
    mutated = res.__class__(
        kappa=broken,
        classification=res.classification,
        host=res.host,
        assigned_primitive=res.assigned_primitive,
        exceptional=res.exceptional,
        trace=res.trace,
        tau0=res.tau0,
        dimension_violations=res.dimension_violations,
        alpha=res.alpha,
    )
    rep = verify_stopping(mutated, S_mut, kept_mut, alpha, seed=7, checks=("iii",))
    assert not rep.passed
    assert any(name == "iii_kappa_exceeds_hosts" for name, _ in rep.failures())


def test_kappa_decrement_fails_stopped_mass_check(diag_dilation):
    # A second, light entry keeps the stage loop alive down to deep levels so
    # the trace records steps where the mutated index counts as stopped.
    alpha = 1.0
    Q = GridCube(0, -2, (0, 0), diag_dilation)
    lam = 1e6 * alpha * Q.volume
    # The light companion must sit outside the coarse-stage stars around the
    # origin (which reach out to |x| ~ 24), or it is absorbed immediately.
    far = GridCube(0, -2, (400, 400), diag_dilation)
    far_lam = 1e-3 * alpha * far.volume
    entries = [(Q, lam), (far, far_lam)]
    S_list = [Q, far]
    res = stopping_time(S_list, entries, alpha)
    assert res.kappa[0] == 5
    assert res.classification[1] == "C2"
    assert any(ev.kind == "step" and ev.tau == 0 for ev in res.trace)

    broken = dict(res.kappa)
    broken[0] = 0
    mutated = res.__class__(
        kappa=broken,
        classification=res.classification,
        host=res.host,
        assigned_primitive=res.assigned_primitive,
        exceptional=res.exceptional,
        trace=res.trace,
        tau0=res.tau0,
        dimension_violations=res.dimension_violations,
        alpha=res.alpha,
    )
    rep = verify_stopping(mutated, S_list, entries, alpha, seed=7, checks=("iv",))
    assert not rep.passed
    assert any(name == "iv_stopped_mass_bounded" for name, _ in rep.failures())


def test_replay_reproduces_recorded_masses(diag_dilation):
    alpha = 0.7
    checked = 0
    seed = 100
    while checked < 10:
        built = pipeline_instance(diag_dilation, alpha, seed)
        seed += 1
        if built is None:
            continue
        S_list, kept = built
        res = stopping_time(S_list, kept, alpha)
        for event, mass in replay_trace_masses(res, kept):
            assert mass == approx(event.mass, rel=0, abs=0)
        checked += 1


def test_selected_windows_have_no_selected_ancestor(diag_dilation):
    # Once a window cube is selected every finer window inside it empties,
    # so no select event may sit below an earlier selection at the same tau.
    alpha = 0.7
    seed = 200
    checked = 0
    while checked < 10:
        built = pipeline_instance(diag_dilation, alpha, seed)
        seed += 1
        if built is None:
            continue
        S_list, kept = built
        res = stopping_time(S_list, kept, alpha)
        selected = {}
        for ev in res.trace:
            if ev.kind != "select":
                continue
            selected.setdefault(ev.tau, []).append((ev.sigma, ev.index))
        for tau, picks in selected.items():
            for sigma, index in picks:
                for up_sigma, up_index in picks:
                    if up_sigma <= sigma:
                        continue
                    shift = up_sigma - sigma
                    parent = tuple(int(np.floor(n / 2.0**shift)) for n in index)
                    assert parent != up_index, (tau, sigma, index, up_sigma)
        checked += 1


def test_dilation_covariance_shifts_kappa(diag_dilation):
    alpha = 0.7
    a = diag_dilation.det_scale
    checked = 0
    seed = 300
    while checked < 10:
        built = pipeline_instance(diag_dilation, alpha, seed)
        seed += 1
        if built is None:
            continue
        S_list, kept = built
        res = stopping_time(S_list, kept, alpha)

        S_up = [GridCube(0, S.tau + 1, S.index, diag_dilation) for S in S_list]
        kept_up = [
            (GridCube(0, q.tau + 1, q.index, diag_dilation), a * lam)
            for q, lam in kept
        ]
        res_up = stopping_time(S_up, kept_up, alpha)
        assert res_up.tau0 == res.tau0 + 1
        for i in res.kappa:
            assert res_up.kappa[i] == res.kappa[i] + 1
            assert res_up.classification[i] == res.classification[i]
        checked += 1
