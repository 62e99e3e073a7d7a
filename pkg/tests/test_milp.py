"""Linearized-model tests: variable counts, substitution coherence, LP export.

The LP parser below is test-side and independent of the exporter; feeding
the parsed model to an off-the-shelf MILP solver cross-checks the whole
formulation against the combinatorial solver.
"""

import io
import re

import numpy as np
import pytest
from scipy.optimize import milp as scipy_milp
from scipy.optimize import Bounds, LinearConstraint
import scipy.sparse as sp

from owcplan.allocation import Assignment, sinr, solve_bnb
from owcplan.milp import build_milp, export_lp, max_attainable_sinr

from test_allocation import problem_from_arrays


def random_problem(seed, shape=(3, 2, 2, 2), threshold=1.0):
    rng = np.random.default_rng(seed)
    p = 10 ** rng.uniform(-14, -10, size=shape)
    s = 10 ** rng.uniform(-17, -14, size=shape)
    return problem_from_arrays(p, s, threshold=threshold)


class TestModelShape:
    def test_variable_counts_office_shape(self):
        prob = problem_from_arrays(np.full((8, 4, 4, 4), 1e-12),
                                   np.zeros((8, 4, 4, 4)))
        model = build_milp(prob)
        counts = model.variable_counts()
        assert counts["S"] == 512
        assert counts["USINR"] == 512
        assert counts["PHI"] == 8 * 7 * 4 * 3 * 4 * 4 * 4 == 43008

    def test_alpha_must_dominate(self):
        prob = random_problem(1)
        bound = max_attainable_sinr(prob)
        with pytest.raises(ValueError):
            build_milp(prob, alpha=bound / 2)
        model = build_milp(prob)
        assert model.alpha > bound

    def test_constraint_families_present(self):
        prob = random_problem(2, shape=(2, 2, 1, 1))
        model = build_milp(prob)
        names = {name.rsplit("_", 1)[0].rstrip("0123456789_")
                 for name, *_ in model.iter_constraints()}
        for family in ("balance", "phi_cap_s", "phi_cap_u", "phi_floor",
                       "pair_once", "assign_once", "threshold"):
            assert any(family in n for n in names)


class TestSubstitution:
    @pytest.mark.parametrize("seed", range(6))
    def test_fixed_selectors_force_closed_form(self, seed):
        prob = random_problem(seed, threshold=0.01)
        res = solve_bnb(prob)
        assert res.feasible
        model = build_milp(prob)
        implied = model.implied_usinr(res.assignment)
        for us, (ap, w, b) in enumerate(res.assignment.choices):
            want = sinr(prob, res.assignment, us)
            got = implied[us, ap, w, b]
            assert got == pytest.approx(want, rel=1e-6)
        # Every unselected tuple is forced to zero.
        sel = res.assignment.selector(prob)
        assert np.all(implied[sel == 0] == 0.0)

    def test_arbitrary_feasible_assignment(self):
        prob = random_problem(99, shape=(2, 2, 2, 2), threshold=0.01)
        a = Assignment.from_choices([(0, 1, 0), (1, 1, 1)])
        model = build_milp(prob)
        implied = model.implied_usinr(a)
        for us, (ap, w, b) in enumerate(a.choices):
            assert implied[us, ap, w, b] == pytest.approx(
                sinr(prob, a, us), rel=1e-6)


# ---------------------------------------------------------------------------
# Independent LP-format parser (subset emitted by the exporter)
# ---------------------------------------------------------------------------

_TERM = re.compile(r"([+-])\s+(?:([0-9.eE+-]+)\s+)?([A-Za-z_][\w]*)")


def parse_lp(text):
    lines = [ln for ln in text.splitlines() if not ln.lstrip().startswith("\\")]
    body = "\n".join(lines)
    sections = {}
    order = ["Maximize", "Subject To", "Bounds", "Binary", "End"]
    pos = [body.index(k) for k in order]
    for i, key in enumerate(order[:-1]):
        sections[key] = body[pos[i] + len(key):pos[i + 1]]

    def parse_expr(expr):
        expr = "+ " + expr.lstrip().lstrip("+").strip() if not expr.lstrip().startswith(("+", "-")) else expr
        terms = []
        for sign, coef, var in _TERM.findall(expr):
            c = float(coef) if coef else 1.0
            terms.append((c if sign == "+" else -c, var))
        return terms

    objective = []
    obj_text = sections["Maximize"].split(":", 1)[1]
    objective = parse_expr(" ".join(obj_text.split()))

    constraints = []
    cons_text = re.sub(r"\n\s{2,}", " ", sections["Subject To"])
    for line in cons_text.splitlines():
        line = line.strip()
        if not line:
            continue
        name, rest = line.split(":", 1)
        m = re.search(r"(<=|>=|=)\s*([0-9.eE+-]+)\s*$", rest)
        sense, rhs = m.group(1), float(m.group(2))
        terms = parse_expr(rest[:m.start()])
        constraints.append((name.strip(), terms, sense, rhs))

    binaries = set(sections["Binary"].split())
    bounded = [ln.strip() for ln in sections["Bounds"].splitlines() if ln.strip()]
    return objective, constraints, binaries, bounded


def solve_parsed_lp(objective, constraints, binaries):
    variables = sorted({v for _, v in objective}
                       | {v for _, terms, _, _ in constraints for _, v in terms})
    index = {v: i for i, v in enumerate(variables)}
    n = len(variables)
    c = np.zeros(n)
    for coef, v in objective:
        c[index[v]] -= coef          # scipy minimizes
    rows, cols, vals, lo, hi = [], [], [], [], []
    for k, (_, terms, sense, rhs) in enumerate(constraints):
        for coef, v in terms:
            rows.append(k)
            cols.append(index[v])
            vals.append(coef)
        if sense == "<=":
            lo.append(-np.inf)
            hi.append(rhs)
        elif sense == ">=":
            lo.append(rhs)
            hi.append(np.inf)
        else:
            lo.append(rhs)
            hi.append(rhs)
    a = sp.csr_matrix((vals, (rows, cols)), shape=(len(constraints), n))
    integrality = np.array([1 if v in binaries else 0 for v in variables])
    ub = np.array([1.0 if v in binaries else np.inf for v in variables])
    res = scipy_milp(c, constraints=LinearConstraint(a, np.array(lo), np.array(hi)),
                     integrality=integrality,
                     bounds=Bounds(np.zeros(n), ub),
                     options={"mip_rel_gap": 0.0, "time_limit": 300})
    return res


class TestExport:
    def test_deterministic_bytes(self):
        prob = random_problem(5, shape=(2, 2, 1, 2))
        model = build_milp(prob)
        buf1, buf2 = io.StringIO(), io.StringIO()
        model.write_lp(buf1)
        model.write_lp(buf2)
        assert buf1.getvalue() == buf2.getvalue()

    def test_single_user_objective_names_usinr(self, tmp_path):
        prob = problem_from_arrays(np.full((1, 1, 2, 1), 1e-12),
                                   np.zeros((1, 1, 2, 1)), threshold=0.1)
        model = build_milp(prob)
        path = tmp_path / "one.lp"
        export_lp(model, path)
        objective, _, binaries, _ = parse_lp(path.read_text())
        names = {v for _, v in objective}
        assert names == {"USINR_0_0_0_0", "USINR_0_0_1_0"}
        assert binaries == {"S_0_0_0_0", "S_0_0_1_0"}

    def test_sections_present_and_parse(self, tmp_path):
        prob = random_problem(6, shape=(2, 2, 2, 1))
        model = build_milp(prob)
        path = tmp_path / "model.lp"
        export_lp(model, path)
        text = path.read_text()
        for section in ("Maximize", "Subject To", "Bounds", "Binary", "End"):
            assert section in text
        objective, constraints, binaries, bounded = parse_lp(text)
        counts = model.variable_counts()
        assert len(objective) == counts["USINR"]
        assert len(binaries) == counts["S"]
        assert len(bounded) == counts["USINR"] + counts["PHI"]

    def test_parsed_model_solved_externally_matches_bnb(self, tmp_path):
        # Small instance end-to-end: export -> independent parse ->
        # off-the-shelf MILP solver -> compare with the exact solver.
        prob = random_problem(7, shape=(2, 2, 2, 1), threshold=0.5)
        reference = solve_bnb(prob)
        assert reference.feasible
        # A tight dominating alpha keeps the big-M numerics well behaved.
        model = build_milp(prob, alpha=10.0 * max_attainable_sinr(prob))
        path = tmp_path / "small.lp"
        export_lp(model, path)
        objective, constraints, binaries, _ = parse_lp(path.read_text())
        res = solve_parsed_lp(objective, constraints, binaries)
        assert res.status == 0
        assert -res.fun == pytest.approx(reference.objective_value, rel=1e-6)
