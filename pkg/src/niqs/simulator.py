"""Monte Carlo interrogation: evolve, watch for decay, measure the probe.

Random numbers come from a counter-based Philox stream keyed by the seed.  Trial
``i`` always consumes the same block of the stream, so chunked or threaded
execution reproduces the serial tallies exactly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import PlanModelMismatch
from .model import InteractionModel, ProbeSpec, free_evolution, no_decay_operator
from .projector import MeasurementPlan

CHUNK = 8192


@dataclass(frozen=True)
class TrialConfig:
    model: InteractionModel
    probe: ProbeSpec
    plan: MeasurementPlan
    object_present: bool = True
    object_state: Optional[np.ndarray] = None  # None: Haar-random per trial
    trials: int = 10_000
    seed: int = 42

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class SimulationOutcome:
    counts: dict
    empirical_success_rate: float
    mean_success_fidelity: Optional[float]
    min_success_fidelity: Optional[float]
    expected_success_rate: float
    trials: int


def outcome_labels(plan: MeasurementPlan) -> list[str]:
    rest = [f"other_{k}" for k in range(2, plan.basis_O.shape[0])]
    return ["decay", "success", "empty_consistent"] + rest


def _check(cfg: TrialConfig):
    lay, plan, probe = cfg.model.layout, cfg.plan, cfg.probe
    if (plan.m_r, plan.m) != (lay.m_r, lay.m) or (len(probe.psi_r), len(probe.psi_d)) != (lay.m_r, lay.m):
        raise PlanModelMismatch("plan, probe and model disagree on the probe dimensions")
    if cfg.object_state is not None and len(cfg.object_state) != lay.n:
        raise PlanModelMismatch("object state dimension differs from the model's n")


class _Propagator:
    """Final undecayed joint state for a batch of object states."""

    def __init__(self, cfg: TrialConfig):
        lay = cfg.model.layout
        self.n, self.m_r, self.m = lay.n, lay.m_r, lay.m
        U_S, U_D = free_evolution(cfg.model)
        self.U_S = U_S
        self.r_part = np.kron((U_D[: lay.m_r, : lay.m_r] @ (cfg.probe.alpha * cfg.probe.psi_r))[:, None], U_S)
        d0 = cfg.probe.beta * cfg.probe.psi_d
        if cfg.object_present:
            self.d_part = no_decay_operator(cfg.model) @ np.kron(d0[:, None], np.eye(lay.n))
        else:
            self.d_part = np.kron((U_D[lay.m_r:, lay.m_r:] @ d0)[:, None], U_S)
        self.basis = cfg.plan.basis_O

    def __call__(self, psi_S: np.ndarray):
        """Rows of psi_S -> (undecayed joint states, outcome amplitudes)."""
        joint = np.concatenate([psi_S @ self.r_part.T, psi_S @ self.d_part.T], axis=1)
        amps = np.einsum("kv,tvs->tks", self.basis.conj(), joint.reshape(len(psi_S), -1, self.n))
        return joint, amps


def _haar_states(u: np.ndarray, n: int) -> np.ndarray:
    # Box-Muller keeps the draw count per trial fixed
    u1, u2 = 1.0 - u[:, :n], u[:, n:2 * n]
    r = np.sqrt(-2.0 * np.log(u1))
    z = r * np.cos(2 * np.pi * u2) + 1j * r * np.sin(2 * np.pi * u2)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _slots(n: int) -> int:
    return 4 * ((2 + 2 * n + 3) // 4)


def _uniforms(seed: int, start: int, count: int, slots: int) -> np.ndarray:
    bg = np.random.Philox(key=seed & (2 ** 64 - 1))
    bg.advance(start * slots // 4)
    return np.random.Generator(bg).random((count, slots))


def _run_chunk(cfg, prop, start, count):
    n = prop.n
    u = _uniforms(cfg.seed, start, count, _slots(n))
    if cfg.object_state is None:
        psi_S = _haar_states(u[:, 2:], n)
    else:
        v = np.asarray(cfg.object_state, dtype=complex)
        psi_S = np.tile(v / np.linalg.norm(v), (count, 1))
    _, amps = prop(psi_S)
    probs = np.sum(np.abs(amps) ** 2, axis=2)
    survive = probs.sum(axis=1)
    decayed = u[:, 0] < 1.0 - survive
    cum = np.cumsum(probs, axis=1) / np.where(survive > 0, survive, 1.0)[:, None]
    outcome = np.minimum((u[:, 1:2] >= cum).sum(axis=1), probs.shape[1] - 1)
    # zero-probability outcomes are never selected
    outcome = np.where(probs[np.arange(count), outcome] > 0, outcome, np.argmax(probs, axis=1))
    labels = np.where(decayed, -1, outcome)
    tally = np.bincount(labels + 1, minlength=probs.shape[1] + 1)
    hit = (labels == 0)
    fids = np.empty(0)
    if hit.any():
        obj = amps[hit, 0, :]
        obj = obj / np.linalg.norm(obj, axis=1, keepdims=True)
        target = psi_S[hit] @ prop.U_S.T
        fids = np.abs(np.sum(target.conj() * obj, axis=1)) ** 2
    return tally, fids


def _threads():
    env = os.environ.get("NIQS_THREADS")
    return max(1, int(env)) if env else 1


def run_trials(cfg: TrialConfig) -> SimulationOutcome:
    _check(cfg)
    prop = _Propagator(cfg)
    chunks = [(s, min(CHUNK, cfg.trials - s)) for s in range(0, cfg.trials, CHUNK)]
    if _threads() > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(_threads()) as ex:
            parts = list(ex.map(lambda c: _run_chunk(cfg, prop, *c), chunks))
    else:
        parts = [_run_chunk(cfg, prop, *c) for c in chunks]
    tally = sum(p[0] for p in parts)
    fids = np.concatenate([p[1] for p in parts])
    labels = outcome_labels(cfg.plan)
    counts = {lab: int(tally[k]) for k, lab in enumerate(labels)}
    return SimulationOutcome(
        counts=counts,
        empirical_success_rate=counts["success"] / cfg.trials,
        mean_success_fidelity=float(np.clip(fids.mean(), 0, 1)) if fids.size else None,
        min_success_fidelity=float(np.clip(fids.min(), 0, 1)) if fids.size else None,
        expected_success_rate=cfg.plan.prob if cfg.object_present else 0.0,
        trials=cfg.trials,
    )


def analytic_outcome_distribution(cfg: TrialConfig) -> dict:
    """Exact Born probabilities of every outcome, decay included.

    With per-trial random object states the Haar average is used, which equals
    the average over the standard object basis.
    """
    _check(cfg)
    prop = _Propagator(cfg)
    if cfg.object_state is None:
        states = np.eye(prop.n, dtype=complex)
    else:
        v = np.asarray(cfg.object_state, dtype=complex)
        states = (v / np.linalg.norm(v))[None, :]
    _, amps = prop(states)
    probs = np.sum(np.abs(amps) ** 2, axis=2).mean(axis=0)
    labels = outcome_labels(cfg.plan)
    out = {"decay": float(max(0.0, 1.0 - probs.sum()))}
    out.update({lab: float(p) for lab, p in zip(labels[1:], probs)})
    return out
