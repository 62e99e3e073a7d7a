"""Mixed-integer linear program for the allocation problem.

The closed-form SINR balance multiplies the continuous per-tuple SINR
variable by binary selector variables.  Each such bilinear product is
replaced by a non-negative auxiliary variable PHI tied to its factors with
big-M constraints, which makes the model linear and exportable to the
standard LP text format for external solvers.

Variable families (all indices zero-based, in fixed iteration order):

    S_us_ap_w_b                binary selector
    USINR_us_ap_w_b            continuous, >= 0
    PHI_us_ui_ap_cp_w_b_f      continuous, >= 0; stands for
                               USINR[us,ap,w,b] * S[ui,cp,w,f]
                               (us != ui, ap != cp)

Constraint families: ``balance`` (the SINR defining equation per tuple),
``phi_cap_s`` / ``phi_cap_u`` / ``phi_floor`` (the linearization envelope),
``pair_once`` (each (AP, wavelength) serves at most one user),
``assign_once`` (each user gets exactly one tuple) and ``threshold``
(selected tuples must reach the SINR floor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allocation import AllocationProblem, Assignment

_LINE_WIDTH = 200


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class MilpModel:
    problem: AllocationProblem
    alpha: float

    # -- variable names ----------------------------------------------------

    def s_name(self, us, ap, w, b) -> str:
        return f"S_{us}_{ap}_{w}_{b}"

    def usinr_name(self, us, ap, w, b) -> str:
        return f"USINR_{us}_{ap}_{w}_{b}"

    def phi_name(self, us, ui, ap, cp, w, b, f) -> str:
        return f"PHI_{us}_{ui}_{ap}_{cp}_{w}_{b}_{f}"

    def iter_tuples(self):
        p = self.problem
        for us in range(p.n_users):
            for ap in range(p.n_aps):
                for w in range(p.n_wavelengths):
                    for b in range(p.n_branches):
                        yield us, ap, w, b

    def iter_phi_indices(self):
        p = self.problem
        for us in range(p.n_users):
            for ui in range(p.n_users):
                if ui == us:
                    continue
                for ap in range(p.n_aps):
                    for cp in range(p.n_aps):
                        if cp == ap:
                            continue
                        for w in range(p.n_wavelengths):
                            for b in range(p.n_branches):
                                for f in range(p.n_branches):
                                    yield us, ui, ap, cp, w, b, f

    def variable_counts(self) -> dict[str, int]:
        p = self.problem
        n_t = p.n_users * p.n_aps * p.n_wavelengths * p.n_branches
        n_phi = (p.n_users * max(p.n_users - 1, 0)
                 * p.n_aps * max(p.n_aps - 1, 0)
                 * p.n_wavelengths * p.n_branches * p.n_branches)
        return {"S": n_t, "USINR": n_t, "PHI": n_phi}

    # -- constraint rows ----------------------------------------------------

    def balance_row(self, us, ap, w, b):
        """Coefficients of the SINR-defining equality for one tuple.

        Returns (phi_terms, usinr_coef, s_coef) where the row reads
        sum(coef * PHI) + usinr_coef * USINR + s_coef * S = 0.  The row is
        normalized by its total idle-noise level (usinr_coef becomes 1), so
        exported coefficients sit in a solver-friendly range instead of the
        raw squared-photocurrent scale.
        """
        p = self.problem
        raw_phi = []
        sigma_sum = p.sigma_rx
        for cp in range(p.n_aps):
            if cp == ap:
                continue
            sigma_sum += float(p.sigma_bg[us, cp, w, b])
            coef = float(p.p_signal[us, cp, w, b] - p.sigma_bg[us, cp, w, b])
            for ui in range(p.n_users):
                if ui == us:
                    continue
                for f in range(p.n_branches):
                    raw_phi.append(((us, ui, ap, cp, w, b, f), coef))
        phi_terms = [(idx, coef / sigma_sum) for idx, coef in raw_phi]
        return phi_terms, 1.0, -float(p.p_signal[us, ap, w, b]) / sigma_sum

    def iter_constraints(self):
        """Yield (name, terms, sense, rhs); terms are (coef, var) pairs.

        sense is one of '<=', '>=', '='.  Generated lazily so large models
        can be streamed to disk without materializing every row.
        """
        p = self.problem
        for us, ap, w, b in self.iter_tuples():
            phi_terms, usinr_coef, s_coef = self.balance_row(us, ap, w, b)
            terms = [(coef, self.phi_name(*idx)) for idx, coef in phi_terms]
            terms.append((usinr_coef, self.usinr_name(us, ap, w, b)))
            terms.append((s_coef, self.s_name(us, ap, w, b)))
            yield f"balance_{us}_{ap}_{w}_{b}", terms, "=", 0.0
        for idx in self.iter_phi_indices():
            us, ui, ap, cp, w, b, f = idx
            phi = self.phi_name(*idx)
            s_other = self.s_name(ui, cp, w, f)
            usinr = self.usinr_name(us, ap, w, b)
            tag = "_".join(map(str, idx))
            yield f"phi_cap_s_{tag}", [(1.0, phi), (-self.alpha, s_other)], "<=", 0.0
            yield f"phi_cap_u_{tag}", [(1.0, phi), (-1.0, usinr)], "<=", 0.0
            yield (f"phi_floor_{tag}",
                   [(1.0, phi), (-self.alpha, s_other), (-1.0, usinr)],
                   ">=", -self.alpha)
        for ap in range(p.n_aps):
            for w in range(p.n_wavelengths):
                terms = [(1.0, self.s_name(us, ap, w, b))
                         for us in range(p.n_users)
                         for b in range(p.n_branches)]
                yield f"pair_once_{ap}_{w}", terms, "<=", 1.0
        for us in range(p.n_users):
            terms = [(1.0, self.s_name(us, ap, w, b))
                     for ap in range(p.n_aps)
                     for w in range(p.n_wavelengths)
                     for b in range(p.n_branches)]
            yield f"assign_once_{us}", terms, "=", 1.0
        thr = p.sinr_threshold_linear
        for us, ap, w, b in self.iter_tuples():
            yield (f"threshold_{us}_{ap}_{w}_{b}",
                   [(1.0, self.usinr_name(us, ap, w, b)),
                    (-thr, self.s_name(us, ap, w, b))],
                   ">=", 0.0)

    # -- substitution -------------------------------------------------------

    def implied_usinr(self, assignment: Assignment) -> np.ndarray:
        """Solve the balance rows for USINR with the selectors fixed.

        With S fixed, the linearization envelope collapses every PHI to
        USINR * S, so each balance row determines its USINR uniquely.  This
        is the substitution check: the result must equal the closed-form
        SINR on every selected tuple (and zero elsewhere).
        """
        p = self.problem
        s = assignment.selector(p)
        out = np.zeros((p.n_users, p.n_aps, p.n_wavelengths, p.n_branches))
        for us, ap, w, b in self.iter_tuples():
            phi_terms, usinr_coef, s_coef = self.balance_row(us, ap, w, b)
            denom = usinr_coef
            for (u1, ui, a1, cp, w1, b1, f), coef in phi_terms:
                denom += coef * float(s[ui, cp, w1, f])
            rhs = -s_coef * float(s[us, ap, w, b])
            out[us, ap, w, b] = rhs / denom
        return out

    # -- LP text export -----------------------------------------------------

    def write_lp(self, fh) -> None:
        write = fh.write
        write("\\ owcplan allocation MILP export, format version 1\n")
        write(f"\\ alpha = {_fmt(self.alpha)}\n")
        write("Maximize\n")
        terms = [self.usinr_name(*t) for t in self.iter_tuples()]
        _write_wrapped(write, " obj:", [f"+ {t}" for t in terms])
        write("Subject To\n")
        for name, terms, sense, rhs in self.iter_constraints():
            parts = []
            for coef, var in terms:
                if coef >= 0:
                    parts.append(f"+ {_fmt(coef)} {var}")
                else:
                    parts.append(f"- {_fmt(-coef)} {var}")
            _write_wrapped(write, f" {name}:", parts + [f"{sense} {_fmt(rhs)}"])
        write("Bounds\n")
        for t in self.iter_tuples():
            write(f" {self.usinr_name(*t)} >= 0\n")
        for idx in self.iter_phi_indices():
            write(f" {self.phi_name(*idx)} >= 0\n")
        write("Binary\n")
        for t in self.iter_tuples():
            write(f" {self.s_name(*t)}\n")
        write("End\n")


def _write_wrapped(write, head: str, parts: list[str]) -> None:
    line = head
    if not parts:
        write(line + "\n")
        return
    for part in parts:
        if len(line) + 1 + len(part) > _LINE_WIDTH:
            write(line + "\n")
            line = "   " + part
        else:
            line = line + " " + part
    write(line + "\n")


def max_attainable_sinr(problem: AllocationProblem) -> float:
    """Upper bound on any achievable SINR: best signal over receiver noise."""
    if problem.sigma_rx <= 0:
        raise ValueError("receiver noise must be positive to bound the SINR")
    return float(problem.p_signal.max()) / problem.sigma_rx


def build_milp(problem: AllocationProblem, alpha: float | None = None
               ) -> MilpModel:
    """Assemble the linearized model; alpha must dominate every SINR."""
    bound = max_attainable_sinr(problem)
    if alpha is None:
        alpha = 1e6 * bound if bound > 0 else 1.0
    if not math.isfinite(alpha) or alpha <= bound:
        raise ValueError(
            f"alpha {alpha!r} does not dominate the attainable SINR bound {bound!r}")
    return MilpModel(problem, float(alpha))


def export_lp(model: MilpModel, path) -> None:
    """Write the model as deterministic LP-format text."""
    with open(path, "w", encoding="utf-8") as fh:
        model.write_lp(fh)
