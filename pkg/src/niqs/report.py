"""Report documents (JSON-ready dicts) and their text rendering."""

from __future__ import annotations

import json

from .modelfile import encode_complex, encode_matrix, encode_number, encode_vector

REPORT_VERSION = 1


def _header(command: str, an) -> dict:
    lay = an.spec.model.layout
    return {
        "schema_version": REPORT_VERSION,
        "command": command,
        "model": an.spec.name,
        "dims": {"n": lay.n, "m": lay.m, "m_r": lay.m_r},
    }


def _witness_entry(row) -> dict:
    w = row.witness
    entry = {
        "index": row.index,
        "status": row.status,
        "chi": encode_vector(w.chi),
        "psi_d": encode_vector(w.psi_d),
        "c": encode_complex(w.c),
        "abs_c": encode_number(abs(w.c)),
        "residual": encode_number(w.residual),
        "l": None,
        "independence_margin": None,
        "note": row.note,
    }
    if row.decomposition is not None:
        entry["l"] = row.decomposition.l
        entry["independence_margin"] = encode_number(row.margin)
        if row.decomposition.chi_projected:
            entry["c_effective"] = encode_complex(row.decomposition.c)
    return entry


def analysis_report(an) -> dict:
    doc = _header("analyze", an)
    doc["search"] = {
        "starts": an.cfg.starts,
        "seed": an.cfg.seed,
        "tol_witness": encode_number(an.cfg.tol_witness),
        "best_residual": encode_number(an.search.best_residual),
        "grid_fallback_used": an.search.used_grid,
    }
    doc["witnesses"] = [_witness_entry(r) for r in an.witnesses]
    doc["verdict"] = an.verdict
    return doc


def _curve_csv(res) -> str:
    lines = ["abs_alpha,abs_alpha_sq,prob"]
    for a, p in res.curve():
        lines.append(f"{a:.12g},{a * a:.12g},{p:.12g}")
    return "\n".join(lines)


def optimization_report(an, opts, best) -> dict:
    doc = _header("optimize", an)
    doc["verdict"] = an.verdict
    doc["witnesses"] = [{
        "index": o.row.index,
        "c": encode_complex(o.row.witness.c),
        "p_opt": encode_number(o.result.p_opt),
        "alpha_opt": encode_complex(o.result.alpha_opt),
        "abs_alpha_sq": encode_number(o.result.alpha_abs_sq),
        "beta_phase": encode_number(o.result.phase_opt),
        "curve_csv": _curve_csv(o.result),
    } for o in opts]
    doc["best"] = None if best is None else {
        "index": best.row.index,
        "p_opt": encode_number(best.result.p_opt),
        "abs_alpha_sq": encode_number(best.result.alpha_abs_sq),
    }
    return doc


def plan_entry(plan, prob_check=None, audit=None) -> dict:
    entry = {
        "alpha": encode_complex(plan.alpha),
        "beta": encode_complex(plan.beta),
        "c": encode_complex(plan.c),
        "psi_I": encode_vector(plan.psi_I),
        "psi_tilde": encode_vector(plan.psi_tilde),
        "p_e_direction": encode_vector(plan.p_e_direction),
        "delta": encode_complex(plan.delta),
        "prob": encode_number(plan.prob),
        "basis_O": encode_matrix(plan.basis_O),
    }
    if prob_check is not None:
        entry["prob_recomputed"] = encode_number(prob_check)
    if audit is not None:
        entry["audit_max_alternative_prob"] = encode_number(audit)
    return entry


def construct_report(an, row, plan, prob_check, audit) -> dict:
    doc = _header("construct", an)
    doc["verdict"] = an.verdict
    doc["witness_index"] = row.index
    doc["plan"] = plan_entry(plan, prob_check, audit)
    return doc


def _outcome_entry(out, dist) -> dict:
    return {
        "counts": dict(out.counts),
        "empirical_success_rate": encode_number(out.empirical_success_rate),
        "expected_success_rate": encode_number(out.expected_success_rate),
        "mean_success_fidelity": None if out.mean_success_fidelity is None else encode_number(out.mean_success_fidelity),
        "min_success_fidelity": None if out.min_success_fidelity is None else encode_number(out.min_success_fidelity),
        "analytic": {k: encode_number(v) for k, v in dist.items()},
    }


def simulate_report(an, row, sim, trials, seed) -> dict:
    doc = _header("simulate", an)
    doc["verdict"] = an.verdict
    doc["witness_index"] = row.index
    doc["trials"] = trials
    doc["seed"] = seed
    doc["object_state"] = "random-per-trial" if an.spec.object_state is None else encode_vector(an.spec.object_state)
    doc["plan"] = {"alpha": encode_complex(sim["plan"].alpha), "prob": encode_number(sim["plan"].prob)}
    doc["present"] = _outcome_entry(*sim["runs"]["present"])
    doc["absent"] = _outcome_entry(*sim["runs"]["absent"])
    return doc


def to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, float) for x in v):
        re, im = v
        return f"{re:.12g}{im:+.12g}j"
    return str(v)


def to_text(doc: dict, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    for key, val in doc.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.append(to_text(val, indent + 1))
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            for k, item in enumerate(val):
                lines.append(f"{pad}{key}[{k}]:")
                lines.append(to_text(item, indent + 1))
        elif isinstance(val, str) and "\n" in val:
            lines.append(f"{pad}{key}:")
            lines.extend(f"{pad}  {ln}" for ln in val.splitlines())
        elif isinstance(val, list) and val and isinstance(val[0], list) and len(val[0]) == 2 and not isinstance(val[0][0], list):
            lines.append(f"{pad}{key}: [" + ", ".join(_fmt(x) for x in val) + "]")
        elif isinstance(val, list) and val and isinstance(val[0], list):
            lines.append(f"{pad}{key}:")
            lines.extend(f"{pad}  [" + ", ".join(_fmt(x) for x in row) + "]" for row in val)
        else:
            lines.append(f"{pad}{key}: {_fmt(val)}")
    return "\n".join(lines)

