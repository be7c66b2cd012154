"""End-to-end analyses used by the command line: feasibility, plans, optimisation, simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import conditions, projector, simulator
from .errors import AlphaZero, ChiOutsideKbar
from .model import assemble_D, free_evolution
from .modelfile import ModelSpec


@dataclass
class WitnessAnalysis:
    index: int
    witness: conditions.NiqsWitness
    status: str  # feasible | infeasible | rejected
    decomposition: Optional[conditions.KernelDecomposition] = None
    margin: Optional[float] = None
    note: str = ""


@dataclass
class Analysis:
    spec: ModelSpec
    d: object
    frees: object
    search: conditions.SearchResult
    witnesses: list
    cfg: conditions.SearchConfig

    @property
    def feasible(self) -> list:
        return [a for a in self.witnesses if a.status == "feasible"]

    @property
    def verdict(self) -> str:
        if self.feasible:
            return "feasible"
        return "infeasible" if self.witnesses else "infeasible-at-budget"


def search_config(spec: ModelSpec, **overrides) -> conditions.SearchConfig:
    cfg = conditions.SearchConfig(**spec.search)
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def analyze(spec: ModelSpec, cfg: conditions.SearchConfig) -> Analysis:
    d = assemble_D(spec.model)
    frees = free_evolution(spec.model)
    found = conditions.find_witness(d, cfg)
    rows = []
    for k, w in enumerate(found):
        try:
            kd = conditions.kernel_decomposition(d, w)
        except ChiOutsideKbar as exc:
            rows.append(WitnessAnalysis(k, w, "rejected", note=str(exc)))
            continue
        t2 = conditions.theorem2_check(w, kd)
        note = "chi projected onto the kernel complement" if kd.chi_projected else ""
        rows.append(WitnessAnalysis(k, w, "feasible" if t2.feasible else "infeasible", kd,
                                    t2.independence_margin, note))
    return Analysis(spec, d, frees, found, rows, cfg)


@dataclass
class WitnessOptimum:
    row: WitnessAnalysis
    result: projector.OptimizationResult


def optimize(an: Analysis, n_abs: int = 201, n_phase: int = 64) -> list:
    out = []
    m_r = an.spec.model.layout.m_r
    psi_r_p = an.frees.U_D[:m_r, :m_r] @ an.spec.psi_r
    for row in an.feasible:
        res = projector.optimize_alpha(row.witness, row.decomposition, psi_r_p, n_abs=n_abs, n_phase=n_phase)
        out.append(WitnessOptimum(row, res))
    return out


def best_optimum(opts: list) -> WitnessOptimum:
    # ties resolved by witness order
    return max(opts, key=lambda o: (round(o.result.p_opt, 12), -o.row.index))


def plan_for(an: Analysis, row: WitnessAnalysis, alpha: complex) -> tuple:
    probe = projector.probe_for_witness(row.witness, an.frees, an.spec.psi_r, alpha)
    plan = projector.build_plan(row.witness, row.decomposition, probe, an.frees)
    return probe, plan


def choose_alpha(an: Analysis, opt: WitnessOptimum, alpha: Optional[complex]) -> complex:
    if alpha is not None:
        return alpha
    if an.spec.alpha is not None:
        return an.spec.alpha
    a = opt.result.alpha_opt
    if abs(a) <= projector.TOL_ALPHA:
        raise AlphaZero("optimal alpha is zero; no projector can be built there")
    return a


def simulate(an: Analysis, opt: WitnessOptimum, alpha: complex, trials: int, seed: int,
             object_state=None) -> dict:
    probe, plan = plan_for(an, opt.row, alpha)
    out = {}
    for present in (True, False):
        cfg = simulator.TrialConfig(an.spec.model, probe, plan, present, object_state, trials, seed)
        out["present" if present else "absent"] = (simulator.run_trials(cfg),
                                                   simulator.analytic_outcome_distribution(cfg))
    return {"probe": probe, "plan": plan, "runs": out}


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials)
