"""Allocation evaluator and solver tests.

The brute-force oracle below re-implements the SINR balance independently
(plain loops over an explicit assignment enumeration) and is the reference
for the solver tests.
"""

import itertools
import math

import numpy as np
import pytest

from owcplan.allocation import (AllocationProblem, Assignment,
                                ExhaustiveCapError, check_feasible,
                                objective, optimize_branches, sinr, solve,
                                solve_bnb, solve_exhaustive)


def problem_from_arrays(p, s, sigma_rx=1e-13, threshold=1.0, noise=None):
    p = np.asarray(p, dtype=float)
    names = tuple(f"w{i}" for i in range(p.shape[2]))
    return AllocationProblem(p, np.asarray(s, dtype=float), sigma_rx,
                             threshold, names,
                             tuple(range(p.shape[0])), noise)


def oracle_enumerate(problem):
    """Independent exhaustive oracle: best (objective, assignment) or None."""
    n, na, nw, nb = problem.p_signal.shape
    tuples = [(ap, w, b) for ap in range(na) for w in range(nw)
              for b in range(nb)]
    best = None
    for combo in itertools.product(tuples, repeat=n):
        pairs = [(ap, w) for ap, w, _ in combo]
        if len(set(pairs)) != len(pairs):
            continue
        active = set(pairs)
        vals = []
        for us, (ap, w, b) in enumerate(combo):
            den = problem.sigma_rx
            for cp in range(na):
                if cp == ap:
                    continue
                if (cp, w) in active:
                    den += problem.p_signal[us, cp, w, b]
                else:
                    den += problem.sigma_bg[us, cp, w, b]
            vals.append(problem.p_signal[us, ap, w, b] / den)
        if min(vals) < problem.sinr_threshold_linear:
            continue
        total = sum(vals)
        if best is None or total > best[0] + 1e-15 * abs(best[0]):
            best = (total, combo)
    return best


class TestSinr:
    def test_single_ap_noise_limited(self):
        # One user, one AP: SINR = P / sigma_rx = 3.6e-12 / 1e-13 = 36.
        prob = problem_from_arrays([[[[3.6e-12]]]], [[[[0.0]]]])
        a = Assignment.from_choices([(0, 0, 0)])
        assert sinr(prob, a, 0) == pytest.approx(36.0, rel=1e-12)

    def test_two_users_same_wavelength_interfere(self):
        # User 0 on AP0, user 1 on AP1, same wavelength: the interferer's
        # full power at user 0's branch enters the denominator:
        # 4e-12 / (1e-14 + 1e-13) = 36.36...
        p = np.zeros((2, 2, 1, 1))
        p[0, 0, 0, 0] = 4e-12
        p[0, 1, 0, 0] = 1e-14
        p[1, 1, 0, 0] = 4e-12
        p[1, 0, 0, 0] = 1e-14
        s = np.full_like(p, 1e-16)
        prob = problem_from_arrays(p, s)
        a = Assignment.from_choices([(0, 0, 0), (1, 0, 0)])
        assert sinr(prob, a, 0) == pytest.approx(36.36, abs=1e-2)

    def test_unmodulated_ap_contributes_shot_noise(self):
        # Second AP active on the OTHER wavelength: user 0 sees only its
        # background shot noise on wavelength 0.
        p = np.zeros((2, 2, 2, 1))
        p[0, 0, 0, 0] = 4e-12
        p[0, 1, 0, 0] = 1e-14       # would-be interference, never active
        p[1, 1, 1, 0] = 4e-12
        s = np.zeros_like(p)
        s[0, 1, 0, 0] = 3e-14
        prob = problem_from_arrays(p, s)
        a = Assignment.from_choices([(0, 0, 0), (1, 1, 0)])
        expected = 4e-12 / (3e-14 + 1e-13)
        assert sinr(prob, a, 0) == pytest.approx(expected, rel=1e-12)

    def test_unassigned_user_rejected(self):
        prob = problem_from_arrays([[[[3.6e-12]]]], [[[[0.0]]]])
        a = Assignment.from_choices([None])
        with pytest.raises(ValueError):
            sinr(prob, a, 0)


class TestObjective:
    def test_single_user_equals_sinr(self):
        prob = problem_from_arrays([[[[3.6e-12]]]], [[[[0.0]]]])
        a = Assignment.from_choices([(0, 0, 0)])
        assert objective(prob, a) == sinr(prob, a, 0)

    def test_user_relabel_symmetry(self):
        rng = np.random.default_rng(3)
        p = 10 ** rng.uniform(-14, -10, size=(3, 2, 2, 2))
        s = 10 ** rng.uniform(-17, -15, size=(3, 2, 2, 2))
        prob = problem_from_arrays(p, s)
        a = Assignment.from_choices([(0, 0, 0), (1, 1, 1), (0, 1, 0)])
        perm = [2, 0, 1]
        prob_p = problem_from_arrays(p[perm], s[perm])
        a_p = Assignment.from_choices([a.choices[u] for u in perm])
        assert objective(prob_p, a_p) == pytest.approx(objective(prob, a),
                                                       rel=1e-12)

    def test_structural_violation_raises(self):
        prob = problem_from_arrays(np.full((2, 1, 2, 1), 1e-12),
                                   np.zeros((2, 1, 2, 1)))
        clash = Assignment.from_choices([(0, 0, 0), (0, 0, 0)])
        with pytest.raises(ValueError, match="pair_reuse"):
            objective(prob, clash)


class TestCheckFeasible:
    def test_pair_reuse_detected(self):
        prob = problem_from_arrays(np.full((2, 1, 2, 1), 1e-11),
                                   np.zeros((2, 1, 2, 1)))
        rep = check_feasible(prob, Assignment.from_choices([(0, 0, 0),
                                                            (0, 0, 0)]))
        assert not rep.feasible
        assert any(v.startswith("pair_reuse") for v in rep.violations)

    def test_missing_assignment_detected(self):
        prob = problem_from_arrays(np.full((2, 1, 2, 1), 1e-11),
                                   np.zeros((2, 1, 2, 1)))
        rep = check_feasible(prob, Assignment.from_choices([(0, 0, 0), None]))
        assert not rep.feasible
        assert any(v.startswith("single_assignment") for v in rep.violations)

    def test_threshold_violation_reported(self):
        prob = problem_from_arrays([[[[1e-13]]]], [[[[0.0]]]],
                                   threshold=36.3078)
        rep = check_feasible(prob, Assignment.from_choices([(0, 0, 0)]))
        assert not rep.feasible
        assert any(v.startswith("sinr_threshold") for v in rep.violations)

    def test_feasible_assignment_passes(self):
        prob = problem_from_arrays([[[[3.6e-12]]]], [[[[0.0]]]],
                                   threshold=10.0)
        rep = check_feasible(prob, Assignment.from_choices([(0, 0, 0)]))
        assert rep.feasible
        assert rep.violations == ()


class TestExhaustive:
    def test_single_choice(self):
        prob = problem_from_arrays([[[[3.6e-12]]]], [[[[0.0]]]],
                                   threshold=10.0)
        res = solve_exhaustive(prob)
        assert res.feasible
        assert res.assignment.choices == ((0, 0, 0),)
        assert res.objective_value == pytest.approx(36.0, rel=1e-12)

    def test_cap_exceeded(self):
        prob = problem_from_arrays(np.full((8, 4, 4, 4), 1e-12),
                                   np.zeros((8, 4, 4, 4)))
        with pytest.raises(ExhaustiveCapError):
            solve_exhaustive(prob, cap=1000)

    def test_infeasible_reports_certificate(self):
        prob = problem_from_arrays(np.full((2, 2, 1, 1), 1e-13),
                                   np.full((2, 2, 1, 1), 1e-13),
                                   threshold=1e6)
        res = solve_exhaustive(prob)
        assert not res.feasible
        assert "none satisfies" in res.message

    def test_two_users_one_ap_two_wavelengths_share(self):
        p = np.zeros((2, 1, 2, 1))
        p[0, 0, :, 0] = [5e-12, 4e-12]
        p[1, 0, :, 0] = [4e-12, 5e-12]
        prob = problem_from_arrays(p, np.zeros_like(p), threshold=1.0)
        res = solve_exhaustive(prob)
        assert res.feasible
        pairs = {(c[0], c[1]) for c in res.assignment.choices}
        assert pairs == {(0, 0), (0, 1)}

    def test_symmetric_strong_channels_against_oracle(self):
        # Two users, two APs, one wavelength: sharing the wavelength means
        # mutual interference; feasibility depends on the threshold.
        p = np.zeros((2, 2, 1, 1))
        p[0, 0, 0, 0] = p[1, 1, 0, 0] = 1e-11    # own AP
        p[0, 1, 0, 0] = p[1, 0, 0, 0] = 1e-12    # cross power
        s = np.full_like(p, 1e-16)
        # Mutual SINR = 1e-11 / (1e-12 + 1e-13) ~ 9.1: feasible at thr 5.
        prob = problem_from_arrays(p, s, threshold=5.0)
        res = solve_exhaustive(prob)
        want = oracle_enumerate(prob)
        assert res.feasible and want is not None
        assert res.objective_value == pytest.approx(want[0], rel=1e-12)
        # At thr 20 no assignment clears it (only one AP,wavelength pair
        # per user; both users cannot avoid sharing the wavelength).
        prob_hard = problem_from_arrays(p, s, threshold=20.0)
        assert oracle_enumerate(prob_hard) is None
        assert not solve_exhaustive(prob_hard).feasible


class TestBranchAndBound:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        nu = int(rng.integers(1, 4))
        na = int(rng.integers(1, 3))
        nw = int(rng.integers(1, 3))
        nb = int(rng.integers(1, 3))
        if na * nw < nu:
            na, nw = 2, 2
        p = 10 ** rng.uniform(-15, -9, size=(nu, na, nw, nb))
        s = 10 ** rng.uniform(-18, -12, size=(nu, na, nw, nb))
        prob = problem_from_arrays(p, s, threshold=float(10 ** rng.uniform(-1, 1.5)))
        res = solve_bnb(prob)
        want = oracle_enumerate(prob)
        if want is None:
            assert not res.feasible
        else:
            assert res.feasible
            assert res.objective_value == pytest.approx(want[0], rel=1e-12)

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_exhaustive_exactly(self, seed):
        rng = np.random.default_rng(1000 + seed)
        nu = int(rng.integers(1, 5))
        na = int(rng.integers(1, 3))
        nw = int(rng.integers(1, 3))
        nb = int(rng.integers(1, 3))
        if na * nw < nu:
            nu = na * nw
        p = 10 ** rng.uniform(-16, -10, size=(nu, na, nw, nb))
        s = 10 ** rng.uniform(-17, -11, size=(nu, na, nw, nb))
        prob = problem_from_arrays(
            p, s, sigma_rx=float(10 ** rng.uniform(-14, -12)),
            threshold=float(10 ** rng.uniform(-1, 1.8)))
        r_ex = solve_exhaustive(prob)
        r_bb = solve_bnb(prob)
        assert r_ex.feasible == r_bb.feasible
        if r_ex.feasible:
            assert r_ex.objective_value == r_bb.objective_value
            assert r_ex.assignment == r_bb.assignment

    def test_infeasible_certificate(self):
        prob = problem_from_arrays(np.full((2, 2, 1, 1), 1e-13),
                                   np.full((2, 2, 1, 1), 1e-13),
                                   threshold=1e9)
        res = solve_bnb(prob)
        assert not res.feasible
        assert "threshold" in res.message

    def test_solver_dispatch(self):
        prob = problem_from_arrays([[[[3.6e-12]]]], [[[[0.0]]]],
                                   threshold=1.0)
        assert solve(prob, "bnb").feasible
        assert solve(prob, "exhaustive").feasible
        with pytest.raises(ValueError):
            solve(prob, "simulated-annealing")


class TestInvariants:
    def _random_problem(self, seed, sigma_leq_p=False):
        rng = np.random.default_rng(seed)
        nu, na, nw, nb = 3, 2, 2, 2
        p = 10 ** rng.uniform(-15, -9, size=(nu, na, nw, nb))
        s = 10 ** rng.uniform(-18, -12, size=(nu, na, nw, nb))
        if sigma_leq_p:
            s = np.minimum(s, p)
        return problem_from_arrays(p, s, threshold=0.1)

    @pytest.mark.parametrize("k", [2.0 ** 10, 2.0 ** -12])
    def test_scale_covariance_power_of_two_exact(self, k):
        prob = self._random_problem(11)
        scaled = prob.scaled(k)
        r1, r2 = solve_bnb(prob), solve_bnb(scaled)
        assert r1.assignment == r2.assignment
        assert r1.sinr_linear == r2.sinr_linear

    def test_scale_covariance_general(self):
        prob = self._random_problem(12)
        scaled = prob.scaled(3.7)
        r1, r2 = solve_bnb(prob), solve_bnb(scaled)
        assert r1.assignment == r2.assignment
        for a, b in zip(r1.sinr_linear, r2.sinr_linear):
            assert b == pytest.approx(a, rel=1e-12)

    def test_added_interference_never_helps(self):
        prob = self._random_problem(13)
        res = solve_bnb(prob)
        a = res.assignment
        us = 0
        ap, w, b = a.choices[us]
        # Bump the power of a modulated co-wavelength AP at the victim.
        others = {(c[0], c[1]) for u, c in enumerate(a.choices) if u != us}
        for cp in range(prob.n_aps):
            if cp != ap and (cp, w) in others:
                p2 = prob.p_signal.copy()
                p2[us, cp, w, b] *= 10.0
                bumped = problem_from_arrays(p2, prob.sigma_bg,
                                             prob.sigma_rx,
                                             prob.sinr_threshold_linear)
                assert sinr(bumped, a, us) <= sinr(prob, a, us)

    @pytest.mark.parametrize("seed", range(8))
    def test_removing_user_never_hurts_remaining(self, seed):
        # Holds when idle shot noise never exceeds the co-wavelength
        # interference power (the physically typical regime).
        prob = self._random_problem(seed, sigma_leq_p=True)
        full = solve_bnb(prob)
        sub = problem_from_arrays(prob.p_signal[:-1], prob.sigma_bg[:-1],
                                  prob.sigma_rx,
                                  prob.sinr_threshold_linear)
        res_sub = solve_bnb(sub)
        if full.feasible:
            kept = math.fsum(full.sinr_linear[:-1])
            assert res_sub.feasible
            assert res_sub.objective_value >= kept * (1 - 1e-12)

    def test_every_returned_assignment_is_feasible(self):
        for seed in range(6):
            prob = self._random_problem(100 + seed)
            res = solve_bnb(prob)
            if res.feasible:
                assert check_feasible(prob, res.assignment).feasible


class TestHelpers:
    def test_from_named_one_based(self):
        a = Assignment.from_named(("red", "yellow"),
                                  [(1, "yellow", 2), (2, "red", 1)])
        assert a.choices == ((0, 1, 1), (1, 0, 0))

    def test_optimize_branches_matches_bruteforce(self):
        rng = np.random.default_rng(42)
        p = 10 ** rng.uniform(-14, -10, size=(2, 2, 2, 3))
        s = 10 ** rng.uniform(-17, -15, size=(2, 2, 2, 3))
        prob = problem_from_arrays(p, s)
        pairs = [(0, 0), (1, 0)]
        a = optimize_branches(prob, pairs)
        for us in range(2):
            ap, w = pairs[us]
            vals = []
            for b in range(3):
                probe = Assignment.from_choices(
                    [(pa, pw, 0) if u != us else (ap, w, b)
                     for u, (pa, pw) in enumerate(pairs)])
                vals.append(sinr(prob, probe, us))
            assert sinr(prob, a, us) == max(vals)

    def test_selector_matrix(self):
        prob = problem_from_arrays(np.full((2, 2, 2, 2), 1e-12),
                                   np.zeros((2, 2, 2, 2)))
        a = Assignment.from_choices([(0, 1, 1), (1, 0, 0)])
        sel = a.selector(prob)
        assert sel.sum() == 2
        assert sel[0, 0, 1, 1] == 1 and sel[1, 1, 0, 0] == 1

    def test_with_bandwidth_rescales_noise(self):
        from owcplan.radiometry import NoiseParams
        noise = NoiseParams((4.47e-12) ** 2, 5e9)
        p = np.full((1, 1, 1, 1), 1e-11)
        s = np.full((1, 1, 1, 1), 1e-15)
        prob = problem_from_arrays(p, s, sigma_rx=(4.47e-12) ** 2 * 5e9,
                                   noise=noise)
        half = prob.with_bandwidth(2.5e9)
        assert half.sigma_rx == pytest.approx(prob.sigma_rx / 2, rel=1e-12)
        assert half.sigma_bg[0, 0, 0, 0] == pytest.approx(5e-16, rel=1e-12)
        assert half.p_signal[0, 0, 0, 0] == prob.p_signal[0, 0, 0, 0]
