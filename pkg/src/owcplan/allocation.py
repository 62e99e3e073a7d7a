"""Resource allocation: SINR evaluation and exact assignment optimization.

A user is served by exactly one (access point, wavelength, branch) tuple.
Interference at a user's branch comes from every other AP that modulates
the same wavelength; APs that are idle on that wavelength contribute only
background shot noise.  Constraints: each (AP, wavelength) pair serves at
most one user, every user gets exactly one tuple, and every served user's
SINR must reach the configured threshold.

Two exact solvers are provided: a capped exhaustive search (the oracle) and
a depth-first branch-and-bound whose admissible bound combines optimistic
per-choice SINRs with a maximum-weight user/pair matching.  Both use the
same leaf evaluator and the same deterministic tie-break (lexicographically
smallest per-user choice indices), so they agree exactly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channel import ChannelMatrix
from .radiometry import NoiseParams, receiver_noise
from .scene import ScenarioConfig

# Relative slack applied to optimistic-bound comparisons so float rounding
# can never prune the true optimum (bounds are mathematically admissible).
_BOUND_SLACK = 1e-9
_THRESHOLD_SLACK = 1e-12
_NEG = -1e300


class ExhaustiveCapError(ValueError):
    """Search space too large for the exhaustive solver."""


@dataclass(frozen=True)
class AllocationProblem:
    """Precomputed electrical powers and noise for one scenario.

    p_signal[us, ap, w, b]  -- electrical signal power (A^2) of AP `ap` on
                               wavelength `w` at user `us`, branch `b`
    sigma_bg[us, cp, w, b]  -- background shot noise (A^2) from AP `cp` when
                               idle on wavelength `w`
    sigma_rx                -- receiver noise (A^2)
    """

    p_signal: np.ndarray
    sigma_bg: np.ndarray
    sigma_rx: float
    sinr_threshold_linear: float
    wavelengths: tuple[str, ...]
    user_ids: tuple[int, ...]
    noise: NoiseParams | None = None

    def __post_init__(self):
        p = np.asarray(self.p_signal, dtype=float)
        s = np.asarray(self.sigma_bg, dtype=float)
        if p.ndim != 4 or p.shape != s.shape:
            raise ValueError("p_signal and sigma_bg must share a 4-D shape")
        if np.any(p < 0) or np.any(s < 0) or self.sigma_rx < 0:
            raise ValueError("powers and noises must be non-negative")
        if self.sinr_threshold_linear <= 0:
            raise ValueError("SINR threshold must be positive")
        object.__setattr__(self, "p_signal", p)
        object.__setattr__(self, "sigma_bg", s)

    @property
    def n_users(self) -> int:
        return self.p_signal.shape[0]

    @property
    def n_aps(self) -> int:
        return self.p_signal.shape[1]

    @property
    def n_wavelengths(self) -> int:
        return self.p_signal.shape[2]

    @property
    def n_branches(self) -> int:
        return self.p_signal.shape[3]

    @property
    def n_choices(self) -> int:
        return self.n_aps * self.n_wavelengths * self.n_branches

    def choice_tuple(self, c: int) -> tuple[int, int, int]:
        w_b = self.n_wavelengths * self.n_branches
        return c // w_b, (c // self.n_branches) % self.n_wavelengths, c % self.n_branches

    def choice_index(self, ap: int, w: int, b: int) -> int:
        return (ap * self.n_wavelengths + w) * self.n_branches + b

    def scaled(self, k: float) -> "AllocationProblem":
        """Uniformly rescale all powers and noises (SINRs are invariant)."""
        if k <= 0:
            raise ValueError("scale factor must be positive")
        return AllocationProblem(self.p_signal * k, self.sigma_bg * k,
                                 self.sigma_rx * k, self.sinr_threshold_linear,
                                 self.wavelengths, self.user_ids, None)

    def with_bandwidth(self, bandwidth_hz: float) -> "AllocationProblem":
        """Re-derive the noise terms at a different electrical bandwidth.

        Signal and interference powers are bandwidth-independent; receiver
        noise and background shot noise both scale linearly with bandwidth.
        """
        if self.noise is None:
            raise ValueError("problem carries no noise parameterization")
        factor = bandwidth_hz / self.noise.bandwidth_hz
        if factor <= 0:
            raise ValueError("bandwidth must be positive")
        return AllocationProblem(
            self.p_signal, self.sigma_bg * factor, self.sigma_rx * factor,
            self.sinr_threshold_linear, self.wavelengths, self.user_ids,
            self.noise.with_bandwidth(bandwidth_hz))


def build_problem(config: ScenarioConfig, matrix: ChannelMatrix
                  ) -> AllocationProblem:
    """Turn traced optical powers into the electrical allocation inputs."""
    names = matrix.wavelengths
    resp = config.responsivities()
    r = np.array([resp[n] for n in names])
    noise = config.noise_params()
    photo = matrix.po * r[None, None, :, None]          # A
    p_signal = photo ** 2
    sigma_bg = (2.0 * noise.electron_charge * photo
                * noise.optical_factor * noise.bandwidth_hz)
    return AllocationProblem(
        p_signal, sigma_bg, receiver_noise(noise),
        config.sinr_threshold_linear(), tuple(names),
        tuple(st.user_id for st in config.receivers), noise)


# ---------------------------------------------------------------------------
# Assignments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    """One (ap, wavelength, branch) index triple per user (or None)."""

    choices: tuple[tuple[int, int, int] | None, ...]

    @staticmethod
    def from_choices(choices) -> "Assignment":
        return Assignment(tuple(None if c is None else tuple(int(x) for x in c)
                                for c in choices))

    @staticmethod
    def from_named(wavelengths, rows, one_based: bool = True) -> "Assignment":
        """Build from (ap, wavelength-name, branch) rows, 1-based by default."""
        off = 1 if one_based else 0
        names = list(wavelengths)
        return Assignment.from_choices(
            [(ap - off, names.index(w), b - off) for ap, w, b in rows])

    def n_assigned(self) -> int:
        return sum(c is not None for c in self.choices)

    def selector(self, problem: AllocationProblem) -> np.ndarray:
        """Binary selector tensor S[us, ap, w, b]."""
        s = np.zeros((problem.n_users, problem.n_aps, problem.n_wavelengths,
                      problem.n_branches), dtype=np.int8)
        for us, c in enumerate(self.choices):
            if c is not None:
                s[us, c[0], c[1], c[2]] = 1
        return s

    def canonical_key(self, problem: AllocationProblem) -> tuple[int, ...]:
        """Per-user flattened choice indices; the deterministic tie-break."""
        return tuple(-1 if c is None else problem.choice_index(*c)
                     for c in self.choices)

    def modulated_pairs(self) -> set[tuple[int, int]]:
        return {(c[0], c[1]) for c in self.choices if c is not None}


def sinr(problem: AllocationProblem, assignment: Assignment, us: int) -> float:
    """Linear SINR of one user under the given assignment.

    The denominator partitions the other APs: those serving any other user
    on the same wavelength contribute their full electrical power at this
    user's branch; idle APs contribute background shot noise.
    """
    choice = assignment.choices[us]
    if choice is None:
        raise ValueError(f"user index {us} is unassigned")
    ap, w, b = choice
    pair_count: dict[tuple[int, int], int] = {}
    for ui, c in enumerate(assignment.choices):
        if ui != us and c is not None:
            pair_count[(c[0], c[1])] = pair_count.get((c[0], c[1]), 0) + 1
    terms = []
    for cp in range(problem.n_aps):
        if cp == ap:
            continue
        if pair_count.get((cp, w), 0) > 0:
            terms.append(float(problem.p_signal[us, cp, w, b]))
        else:
            terms.append(float(problem.sigma_bg[us, cp, w, b]))
    denominator = problem.sigma_rx + math.fsum(terms)
    return float(problem.p_signal[us, ap, w, b]) / denominator


def _structural_violations(problem: AllocationProblem,
                           assignment: Assignment) -> list[str]:
    violations = []
    pair_users: dict[tuple[int, int], list[int]] = {}
    for us, c in enumerate(assignment.choices):
        if c is None:
            violations.append(
                f"single_assignment: user {problem.user_ids[us]} has no tuple")
            continue
        ap, w, b = c
        if not (0 <= ap < problem.n_aps and 0 <= w < problem.n_wavelengths
                and 0 <= b < problem.n_branches):
            violations.append(
                f"single_assignment: user {problem.user_ids[us]} tuple out of range")
            continue
        pair_users.setdefault((ap, w), []).append(us)
    for (ap, w), users in sorted(pair_users.items()):
        if len(users) > 1:
            ids = [problem.user_ids[u] for u in users]
            violations.append(
                f"pair_reuse: AP {ap} wavelength {problem.wavelengths[w]} "
                f"assigned to users {ids}")
    return violations


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[str, ...]
    sinr_linear: tuple[float, ...] | None


def check_feasible(problem: AllocationProblem, assignment: Assignment
                   ) -> FeasibilityReport:
    """Verdict with the list of violated constraint families."""
    violations = _structural_violations(problem, assignment)
    sinrs = None
    if not any(v.startswith("single_assignment") for v in violations):
        sinrs = tuple(sinr(problem, assignment, us)
                      for us in range(problem.n_users))
        thr = problem.sinr_threshold_linear
        for us, value in enumerate(sinrs):
            if value < thr:
                violations.append(
                    f"sinr_threshold: user {problem.user_ids[us]} at "
                    f"{10 * math.log10(value) if value > 0 else -math.inf:.2f} dB")
    return FeasibilityReport(not violations, tuple(violations), sinrs)


def objective(problem: AllocationProblem, assignment: Assignment) -> float:
    """Sum of all users' SINRs; raises on structurally invalid assignments."""
    violations = _structural_violations(problem, assignment)
    if violations:
        raise ValueError("infeasible assignment: " + "; ".join(violations))
    return math.fsum(sinr(problem, assignment, us)
                     for us in range(problem.n_users))


def optimize_branches(problem: AllocationProblem,
                      pairs: list[tuple[int, int]]) -> Assignment:
    """Pick each user's best branch for a fixed (AP, wavelength) pattern.

    A user's branch affects only their own SINR, so the per-user argmax is
    globally optimal for the given pattern.  Ties go to the lowest index.
    """
    if len(pairs) != problem.n_users:
        raise ValueError("need one (ap, wavelength) pair per user")
    choices = []
    for us, (ap, w) in enumerate(pairs):
        best_b, best_val = 0, -math.inf
        for b in range(problem.n_branches):
            probe = Assignment.from_choices(
                [(pa, pw, 0) if ui != us else (ap, w, b)
                 for ui, (pa, pw) in enumerate(pairs)])
            val = sinr(problem, probe, us)
            if val > best_val:
                best_b, best_val = b, val
        choices.append((ap, w, best_b))
    return Assignment.from_choices(choices)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AllocationResult:
    feasible: bool
    assignment: Assignment | None
    sinr_linear: tuple[float, ...] | None
    objective_value: float | None
    solver: str
    nodes_explored: int
    wall_time_s: float
    message: str = ""

    def sinr_db(self) -> tuple[float, ...]:
        if self.sinr_linear is None:
            raise ValueError("result has no SINR values")
        return tuple(10.0 * math.log10(v) for v in self.sinr_linear)


def _evaluate_leaf(problem: AllocationProblem, choices) -> tuple[list[float], float]:
    """Fast complete-assignment evaluation; pairs must be used at most once.

    Computes the same floats as :func:`sinr` (same term order, compensated
    sums) without building intermediate objects.
    """
    modulated = {(ap, w) for ap, w, _ in choices}
    p = problem.p_signal
    s = problem.sigma_bg
    sinrs = []
    for us, (ap, w, b) in enumerate(choices):
        terms = []
        for cp in range(problem.n_aps):
            if cp == ap:
                continue
            if (cp, w) in modulated:
                terms.append(float(p[us, cp, w, b]))
            else:
                terms.append(float(s[us, cp, w, b]))
        sinrs.append(float(p[us, ap, w, b])
                     / (problem.sigma_rx + math.fsum(terms)))
    return sinrs, math.fsum(sinrs)


# ---------------------------------------------------------------------------
# Exhaustive solver (the oracle)
# ---------------------------------------------------------------------------

def solve_exhaustive(problem: AllocationProblem,
                     cap: int = 2_000_000) -> AllocationResult:
    """Enumerate every assignment below the cap and keep the best.

    Deterministic: assignments are visited in lexicographic per-user choice
    order, so among equal-objective optima the smallest key wins.
    """
    start = time.perf_counter()
    n = problem.n_users
    nc = problem.n_choices
    if nc == 0 or n == 0:
        return AllocationResult(n == 0, Assignment(()), (), 0.0, "exhaustive",
                                0, time.perf_counter() - start)
    if nc ** n > cap:
        raise ExhaustiveCapError(
            f"search space {nc}^{n} exceeds the cap of {cap}")
    thr = problem.sinr_threshold_linear
    choice_tuples = [problem.choice_tuple(c) for c in range(nc)]
    best: tuple[float, tuple, list, list] | None = None  # obj, key, choices, sinrs
    nodes = 0
    stack_choices: list[tuple[int, int, int]] = []
    used: set[tuple[int, int]] = set()

    def recurse(depth: int):
        nonlocal best, nodes
        if depth == n:
            nodes += 1
            sinrs, obj = _evaluate_leaf(problem, stack_choices)
            if all(v >= thr for v in sinrs):
                key = tuple(problem.choice_index(*c) for c in stack_choices)
                if best is None or obj > best[0]:
                    best = (obj, key, list(stack_choices), sinrs)
            return
        for c in range(nc):
            ap, w, b = choice_tuples[c]
            if (ap, w) in used:
                continue
            used.add((ap, w))
            stack_choices.append((ap, w, b))
            recurse(depth + 1)
            stack_choices.pop()
            used.discard((ap, w))

    recurse(0)
    elapsed = time.perf_counter() - start
    if best is None:
        return AllocationResult(
            False, None, None, None, "exhaustive", nodes, elapsed,
            message=(f"enumerated all assignments ({nodes} complete "
                     "candidates); none satisfies the single-use pair, "
                     "one-tuple-per-user and SINR-threshold constraints"))
    obj, _key, choices, sinrs = best
    return AllocationResult(True, Assignment.from_choices(choices),
                            tuple(sinrs), obj, "exhaustive", nodes, elapsed)


# ---------------------------------------------------------------------------
# Branch-and-bound solver
# ---------------------------------------------------------------------------
#
# Structural fact the solver leans on: a user's SINR depends only on WHICH
# (AP, wavelength) pairs are modulated, never on which other user holds
# them, and a user's branch affects only their own SINR.  The search
# therefore branches over pair activations (active/idle); once every pair
# is decided, the optimal user-to-pair matching is a plain assignment
# problem, and best branches follow per user independently.

class _BnBState:
    """Precomputed arrays for the branch-and-bound search."""

    def __init__(self, problem: AllocationProblem):
        self.problem = problem
        n_us, n_ap = problem.n_users, problem.n_aps
        n_w, n_b = problem.n_wavelengths, problem.n_branches
        nc = problem.n_choices
        self.nc = nc
        self.choice_ap = np.repeat(np.arange(n_ap), n_w * n_b)
        self.choice_w = np.tile(np.repeat(np.arange(n_w), n_b), n_ap)
        self.choice_pair = self.choice_ap * n_w + self.choice_w
        # Signal power per (user, flattened choice).
        self.sig = problem.p_signal.reshape(n_us, nc).copy()
        # Optimistic denominator: every other AP contributes the smaller of
        # its full co-wavelength power and its idle shot noise.
        low = np.minimum(problem.p_signal, problem.sigma_bg)  # [us, cp, w, b]
        tot = low.sum(axis=1)                                 # [us, w, b]
        den0 = np.empty((n_us, nc))
        for c in range(nc):
            ap, w, b = problem.choice_tuple(c)
            den0[:, c] = problem.sigma_rx + tot[:, w, b] - low[:, ap, w, b]
        self.den0 = den0
        # Denominator increments that turn the optimistic term for AP cp on
        # wavelength w into its decided value: full power when the pair goes
        # active, idle shot noise when it goes idle.
        self.delta_active: dict[tuple[int, int], np.ndarray] = {}
        self.delta_idle: dict[tuple[int, int], np.ndarray] = {}
        up = np.maximum(problem.p_signal - problem.sigma_bg, 0.0)
        down = np.maximum(problem.sigma_bg - problem.p_signal, 0.0)
        b_of = np.arange(nc) % n_b
        for cp in range(n_ap):
            for w in range(n_w):
                cols = np.nonzero((self.choice_w == w)
                                  & (self.choice_ap != cp))[0]
                da = np.zeros((n_us, nc))
                di = np.zeros((n_us, nc))
                if len(cols):
                    da[:, cols] = up[:, cp, w, b_of[cols]]
                    di[:, cols] = down[:, cp, w, b_of[cols]]
                self.delta_active[(cp, w)] = da
                self.delta_idle[(cp, w)] = di


def _best_branches_exact(problem: AllocationProblem,
                         pairs: list[tuple[int, int]]
                         ) -> tuple[list[tuple[int, int, int]], list[float], float]:
    """Exact per-user branch selection for a fixed (AP, wavelength) pattern.

    A branch affects only its own user's SINR, so per-user argmax (lowest
    index on ties) is the global optimum for the pattern and matches the
    lexicographic tie-break of the exhaustive enumeration.
    """
    modulated = set(pairs)
    choices = []
    sinrs = []
    for us, (ap, w) in enumerate(pairs):
        best_b, best_val = 0, -math.inf
        for b in range(problem.n_branches):
            terms = []
            for cp in range(problem.n_aps):
                if cp == ap:
                    continue
                if (cp, w) in modulated:
                    terms.append(float(problem.p_signal[us, cp, w, b]))
                else:
                    terms.append(float(problem.sigma_bg[us, cp, w, b]))
            val = (float(problem.p_signal[us, ap, w, b])
                   / (problem.sigma_rx + math.fsum(terms)))
            if val > best_val:
                best_b, best_val = b, val
        choices.append((ap, w, best_b))
        sinrs.append(best_val)
    return choices, sinrs, math.fsum(sinrs)


def _exact_pattern_weights(problem: AllocationProblem,
                           active: list[int]) -> np.ndarray:
    """Exact best-branch SINR of every user on every active pair.

    Entries below the threshold are set to a large negative sentinel.  Uses
    the same compensated summation as the public evaluator so values agree
    exactly with the exhaustive solver.
    """
    n_w = problem.n_wavelengths
    thr = problem.sinr_threshold_linear
    modulated = {divmod(p, n_w) for p in active}
    weights = np.full((problem.n_users, len(active)), _NEG)
    for j, pair in enumerate(active):
        ap, w = divmod(pair, n_w)
        for us in range(problem.n_users):
            best_val = -math.inf
            for b in range(problem.n_branches):
                terms = []
                for cp in range(problem.n_aps):
                    if cp == ap:
                        continue
                    if (cp, w) in modulated:
                        terms.append(float(problem.p_signal[us, cp, w, b]))
                    else:
                        terms.append(float(problem.sigma_bg[us, cp, w, b]))
                val = (float(problem.p_signal[us, ap, w, b])
                       / (problem.sigma_rx + math.fsum(terms)))
                best_val = max(best_val, val)
            if best_val >= thr:
                weights[us, j] = best_val
    return weights


def _lex_optimal_matching(weights: np.ndarray, target: float) -> list[int]:
    """Lexicographically smallest optimal matching of users to columns.

    `target` is the optimal total (compensated sum).  Fixes users in order,
    preferring the smallest column index that still completes to the
    optimum; falls back to any optimal completion if float noise prevents
    an exact chain.
    """
    n, m = weights.shape
    free = list(range(m))
    fixed_vals: list[float] = []
    chosen: list[int] = []
    for us in range(n):
        found = False
        for j in sorted(free):
            if weights[us, j] <= _NEG / 2:
                continue
            rest_rows = list(range(us + 1, n))
            rest_cols = [k for k in free if k != j]
            if rest_rows:
                if len(rest_cols) < len(rest_rows):
                    continue
                sub = weights[np.ix_(rest_rows, rest_cols)]
                rr, cc = linear_sum_assignment(sub, maximize=True)
                vals = sub[rr, cc]
                if np.any(vals <= _NEG / 2):
                    continue
                total = math.fsum(fixed_vals + [float(weights[us, j])]
                                  + [float(v) for v in vals])
            else:
                total = math.fsum(fixed_vals + [float(weights[us, j])])
            if total == target:
                free.remove(j)
                chosen.append(j)
                fixed_vals.append(float(weights[us, j]))
                found = True
                break
        if not found:
            rest_rows = list(range(us, n))
            sub = weights[np.ix_(rest_rows, free)]
            rr, cc = linear_sum_assignment(sub, maximize=True)
            j = free[int(cc[list(rr).index(0)])]
            free.remove(j)
            chosen.append(j)
            fixed_vals.append(float(weights[us, j]))
    return chosen


def solve_bnb(problem: AllocationProblem) -> AllocationResult:
    """Exact branch-and-bound over wavelength-activation patterns.

    Depth d decides whether (AP, wavelength) pair d is modulated.  The
    admissible bound at every node is a maximum-weight matching of all
    users onto the non-idle pairs, weighted by optimistic best-branch SINRs
    (undecided interferers contribute the smaller of their interference
    power and idle shot noise).  Complete patterns are scored exactly with
    the same compensated arithmetic as the exhaustive solver, and ties
    resolve to the lexicographically smallest assignment, so both solvers
    agree exactly on every instance both can handle.
    """
    start = time.perf_counter()
    n = problem.n_users
    n_w = problem.n_wavelengths
    n_pairs = problem.n_aps * n_w
    n_b = problem.n_branches
    if n == 0:
        return AllocationResult(True, Assignment(()), (), 0.0, "bnb", 0,
                                time.perf_counter() - start)
    if n_pairs < n or problem.n_choices == 0:
        return AllocationResult(
            False, None, None, None, "bnb", 0, time.perf_counter() - start,
            message=f"only {n_pairs} (AP, wavelength) pairs for {n} users")
    state = _BnBState(problem)
    thr = problem.sinr_threshold_linear
    thr_opt = thr * (1.0 - _THRESHOLD_SLACK)

    best_obj: float | None = None
    best_key: tuple | None = None
    best_choices: list | None = None
    best_sinrs: list | None = None
    nodes = 0

    # 0 = undecided, 1 = active, 2 = idle
    pair_state = np.zeros(n_pairs, dtype=np.int8)

    def matching_bound(den: np.ndarray):
        """Optimistic matching of users onto non-idle pairs, or None."""
        u_pair = (state.sig / den).reshape(n, n_pairs, n_b).max(axis=2)
        allowed = pair_state != 2
        viable = (u_pair >= thr_opt) & allowed[None, :]
        if not viable.any(axis=1).all():
            return None
        idx = np.nonzero(allowed)[0]
        if len(idx) < n:
            return None
        weights = np.where(viable, u_pair, _NEG)[:, idx]
        rows, cols = linear_sum_assignment(weights, maximize=True)
        vals = weights[rows, cols]
        if np.any(vals <= _NEG / 2):
            return None
        return float(vals.sum())

    def evaluate_pattern(active: list[int]):
        """Exact objective for a complete pattern; updates the incumbent."""
        nonlocal best_obj, best_key, best_choices, best_sinrs
        weights = _exact_pattern_weights(problem, active)
        rows, cols = linear_sum_assignment(weights, maximize=True)
        vals = weights[rows, cols]
        if np.any(vals <= _NEG / 2):
            return
        obj = math.fsum(float(v) for v in vals)
        if best_obj is not None and obj < best_obj:
            return
        cols_lex = _lex_optimal_matching(weights, obj)
        pairs = [divmod(active[j], n_w) for j in cols_lex]
        choices, sinrs, obj_exact = _best_branches_exact(problem, pairs)
        if not all(v >= thr for v in sinrs):
            return
        key = tuple(problem.choice_index(*c) for c in choices)
        if (best_obj is None or obj_exact > best_obj
                or (obj_exact == best_obj and key < best_key)):
            best_obj, best_key = obj_exact, key
            best_choices, best_sinrs = choices, sinrs

    def recurse(depth: int, n_active: int, den: np.ndarray):
        nonlocal nodes
        nodes += 1
        remaining = n_pairs - depth
        if n_active > n or n_active + remaining < n:
            return
        bound = matching_bound(den)
        if bound is None:
            return
        if best_obj is not None and bound * (1.0 + _BOUND_SLACK) < best_obj:
            return
        if depth == n_pairs:
            # Counting guards force n_active == n here.
            evaluate_pattern([int(p) for p in np.nonzero(pair_state == 1)[0]])
            return
        pair = depth
        ap, w = divmod(pair, n_w)
        first = 1 if hint_active[pair] else 2
        for decision in (first, 3 - first):
            if decision == 1 and n_active == n:
                continue
            pair_state[pair] = decision
            delta = (state.delta_active if decision == 1
                     else state.delta_idle)[(ap, w)]
            recurse(depth + 1, n_active + (decision == 1), den + delta)
            pair_state[pair] = 0

    # Greedy hint from the root matching: try those pairs active-first.
    hint_active = np.zeros(n_pairs, dtype=bool)
    u0 = (state.sig / state.den0).reshape(n, n_pairs, n_b).max(axis=2)
    w0 = np.where(u0 >= thr_opt, u0, _NEG)
    rows0, cols0 = linear_sum_assignment(w0, maximize=True)
    for r, c in zip(rows0, cols0):
        if w0[r, c] > _NEG / 2:
            hint_active[c] = True

    recurse(0, 0, state.den0.copy())
    elapsed = time.perf_counter() - start
    if best_choices is None:
        return AllocationResult(
            False, None, None, None, "bnb", nodes, elapsed,
            message=("activation-pattern search exhausted without a "
                     "candidate meeting the single-use pair, "
                     "one-tuple-per-user and SINR-threshold constraints"))
    return AllocationResult(True, Assignment.from_choices(best_choices),
                            tuple(best_sinrs), best_obj, "bnb", nodes, elapsed)


def solve(problem: AllocationProblem, solver: str = "bnb",
          cap: int = 2_000_000) -> AllocationResult:
    if solver == "bnb":
        return solve_bnb(problem)
    if solver == "exhaustive":
        return solve_exhaustive(problem, cap=cap)
    raise ValueError(f"unknown solver {solver!r}")
