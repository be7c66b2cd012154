"""Success projector, success probability and its optimisation over the probe split.

All probe vectors here live in ``H_D = H_r (+) H_d`` (reference arm first).
Throughout, ``e`` is the direction the probe reaches when the box is empty and
``g = alpha psi_r' + c beta chi`` is the object-independent part of the final
state; the success vector is the normalised component of ``g`` orthogonal to
``e`` and to the remaining complement vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .conditions import KernelDecomposition, NiqsWitness
from .errors import AlphaZero, ModelError
from .model import FreeEvolution, ProbeSpec

TOL_ALPHA = 1e-14
INV_PHI = (math.sqrt(5) - 1) / 2


def embed_r(v: np.ndarray, m: int) -> np.ndarray:
    return np.concatenate([v, np.zeros(m, dtype=complex)])


def embed_d(v: np.ndarray, m_r: int) -> np.ndarray:
    return np.concatenate([np.zeros(m_r, dtype=complex), v])


@dataclass(frozen=True)
class MeasurementPlan:
    psi_I: np.ndarray
    psi_tilde: np.ndarray
    p_e_direction: np.ndarray
    delta: complex
    prob: float
    basis_O: np.ndarray  # rows: outcome vectors; row 0 = psi_I, row 1 = p_e_direction
    alpha: complex
    beta: complex
    c: complex
    chi: np.ndarray
    chi_js: tuple
    psi_r_prime: np.ndarray
    psi_d_prime: np.ndarray
    m_r: int
    m: int

    success_index = 0
    empty_index = 1

    @property
    def dim_D(self) -> int:
        return self.m_r + self.m


@dataclass(frozen=True)
class OptimizationResult:
    alpha_opt: complex
    p_opt: float
    scan: np.ndarray  # columns |alpha|, phase, prob
    phase_opt: float = 0.0  # phase of beta

    @property
    def alpha_abs_sq(self) -> float:
        return abs(self.alpha_opt) ** 2

    def curve(self) -> np.ndarray:
        """Best probability over phase at each scanned |alpha|, shape (k, 2)."""
        a = np.unique(self.scan[:, 0])
        best = [self.scan[self.scan[:, 0] == x, 2].max() for x in a]
        return np.column_stack([a, best])


def probe_for_witness(w: NiqsWitness, frees: FreeEvolution, psi_r, alpha: complex,
                      beta: complex | None = None) -> ProbeSpec:
    """Initial probe whose box-arm part evolves freely into the witness's psi_d."""
    m_r = len(linalg.as_vector(psi_r))
    U_d = frees.U_D[m_r:, m_r:]
    if beta is None:
        beta = math.sqrt(max(0.0, 1.0 - abs(alpha) ** 2))
    return ProbeSpec(alpha, beta, psi_r, U_d.conj().T @ w.psi_d)


def build_plan(w: NiqsWitness, kd: KernelDecomposition, probe: ProbeSpec,
               frees: FreeEvolution, tol_dep: float = linalg.TOL_DEP) -> MeasurementPlan:
    """Construct the success vector by ordered Gram-Schmidt.

    The complement vectors come first, then the empty-box direction, then the
    normalised ``g``; the last output is the success vector.

    Raises
    ------
    AlphaZero
        If the reference-arm amplitude vanishes.
    DependentVector
        If ``g`` lies in the span of its predecessors (no success outcome).
    """
    alpha, beta = probe.alpha, probe.beta
    if abs(alpha) <= TOL_ALPHA:
        raise AlphaZero("alpha = 0: the reference arm is empty")
    m_r, m = len(probe.psi_r), len(probe.psi_d)
    U_D = frees.U_D
    if U_D.shape != (m_r + m, m_r + m):
        raise ModelError("free probe evolution does not match the probe dimensions")
    psi_r_p = U_D[:m_r, :m_r] @ probe.psi_r
    psi_d_p = U_D[m_r:, m_r:] @ probe.psi_d
    if abs(abs(np.vdot(psi_d_p, w.psi_d)) - 1.0) > 1e-8:
        raise ModelError("probe's box-arm state does not evolve into the witness state")
    psi_d_p = w.psi_d
    chi_js = [embed_d(v, m_r) for v in kd.chi_js]
    e = alpha * embed_r(psi_r_p, m) + beta * embed_d(psi_d_p, m_r)
    g = alpha * embed_r(psi_r_p, m) + kd.c * beta * embed_d(kd.chi, m_r)
    gamma = 1.0 / np.linalg.norm(g)
    ortho = linalg.gram_schmidt(chi_js + [e, gamma * g], tol_dep, phase=False)
    psi_tilde = linalg.fix_phase(ortho[-2])
    psi_I = linalg.fix_phase(ortho[-1])
    delta = complex(np.vdot(psi_I, g))
    rest = linalg.gram_schmidt_partial(chi_js, tol_dep)[0]
    basis = linalg.complete_basis([psi_I, e] + rest, m_r + m, tol_dep)
    basis = [basis[0], basis[1]] + [linalg.fix_phase(b) for b in basis[2:]]
    return MeasurementPlan(
        psi_I=psi_I, psi_tilde=psi_tilde, p_e_direction=e, delta=delta,
        prob=float(abs(delta) ** 2), basis_O=np.array(basis), alpha=alpha, beta=beta,
        c=kd.c, chi=kd.chi, chi_js=tuple(kd.chi_js), psi_r_prime=psi_r_p,
        psi_d_prime=psi_d_p, m_r=m_r, m=m,
    )


def success_probability(plan: MeasurementPlan) -> float:
    """Recompute |Delta|^2 as a least-squares distance, independent of the plan's vectors.

    The success amplitude magnitude is the distance from ``g`` to the span of
    the empty-box direction and the remaining complement vectors.
    """
    m_r, m = plan.m_r, plan.m
    e = plan.alpha * embed_r(plan.psi_r_prime, m) + plan.beta * embed_d(plan.psi_d_prime, m_r)
    g = plan.alpha * embed_r(plan.psi_r_prime, m) + plan.c * plan.beta * embed_d(plan.chi, m_r)
    A = np.column_stack([e] + [embed_d(v, m_r) for v in plan.chi_js])
    x, *_ = np.linalg.lstsq(A, g, rcond=None)
    return float(np.linalg.norm(g - A @ x) ** 2)


class ProbabilityModel:
    """Vectorised ``Prob(alpha, beta)`` for a fixed witness and reference state.

    Uses ``|P g|^2`` where ``P`` projects out the complement vectors and the
    empty-box direction, which is the same quantity the Gram-Schmidt
    construction yields.  At ``alpha = 0`` or ``beta = 0`` the formula is
    evaluated directly, giving the continuous extension.
    """

    def __init__(self, kd: KernelDecomposition, psi_d_prime):
        psi_d = linalg.as_vector(psi_d_prime)
        self.c = kd.c
        Q = np.array(kd.chi_js).reshape(-1, len(psi_d))
        # reference arm is orthogonal to every box-arm vector
        self.psi_perp = psi_d - Q.T @ (Q.conj() @ psi_d)
        self.chi = kd.chi if kd.l else np.zeros_like(psi_d)
        self.p = float(np.vdot(self.psi_perp, self.psi_perp).real)
        self.s = complex(np.vdot(self.psi_perp, self.chi))
        self.chi_sq = float(np.vdot(self.chi, self.chi).real)

    def __call__(self, alpha, beta):
        alpha = np.asarray(alpha, dtype=complex)
        beta = np.asarray(beta, dtype=complex)
        a2, b2 = np.abs(alpha) ** 2, np.abs(beta) ** 2
        e_sq = a2 + b2 * self.p
        g_sq = a2 + abs(self.c) ** 2 * b2 * self.chi_sq
        eg = a2 + self.c * b2 * self.s
        with np.errstate(divide="ignore", invalid="ignore"):
            proj = np.where(e_sq > 1e-300, np.abs(eg) ** 2 / e_sq, 0.0)
        # e inside the complement span (possible only at alpha = 0): limit is along psi_r
        limit = e_sq <= 1e-24
        proj = np.where(limit, a2, proj)
        return np.clip(g_sq - proj, 0.0, 1.0)

    def at(self, alpha_abs, phase=0.0):
        alpha_abs = np.asarray(alpha_abs, dtype=float)
        beta = np.sqrt(np.clip(1.0 - alpha_abs ** 2, 0.0, 1.0)) * np.exp(1j * np.asarray(phase))
        return self(alpha_abs, beta)


def golden_section_max(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Maximiser of a unimodal ``f`` on ``[a, b]``."""
    c, d = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return c if fc >= fd else d


def optimize_alpha(w: NiqsWitness, kd: KernelDecomposition, psi_r_prime, psi_d_prime=None,
                   n_abs: int = 201, n_phase: int = 64, passes: int = 2) -> OptimizationResult:
    """Maximise the success probability over |alpha| in [0, 1) and the phase of beta.

    A coarse ``n_abs x n_phase`` grid is refined by alternating golden-section
    searches on each coordinate.  The reference state enters only through its
    norm, because the reference arm is orthogonal to the box arm.
    """
    if abs(np.linalg.norm(linalg.as_vector(psi_r_prime)) - 1.0) > linalg.TOL_NORM:
        raise ModelError("psi_r must be a unit vector")
    pm = ProbabilityModel(kd, w.psi_d if psi_d_prime is None else psi_d_prime)
    # |alpha| = 1 enters only as the continuity limit beta -> 0
    a_grid = np.linspace(0.0, 1.0, n_abs)
    p_grid = np.arange(n_phase) * (2 * np.pi / n_phase)
    A, P = np.meshgrid(a_grid, p_grid, indexing="ij")
    probs = pm.at(A, P)
    scan = np.column_stack([A.ravel(), P.ravel(), probs.ravel()])
    i, j = np.unravel_index(int(np.argmax(probs)), probs.shape)
    x, phi = a_grid[i], p_grid[j]
    da, dp = 1.0 / n_abs, 2 * np.pi / n_phase
    for _ in range(passes):
        lo, hi = max(0.0, x - da), min(1.0 - 1e-15, x + da)
        x = golden_section_max(lambda s: float(pm.at(s, phi)), lo, hi)
        phi = golden_section_max(lambda s: float(pm.at(x, s)), phi - dp, phi + dp) % (2 * np.pi)
    p_best = float(pm.at(x, phi))
    if p_best < probs[i, j]:
        x, phi, p_best = a_grid[i], p_grid[j], float(probs[i, j])
    if float(pm.at(x, 0.0)) >= p_best - 1e-14:
        phi = 0.0  # phase-independent optimum
    return OptimizationResult(complex(x), p_best, scan, float(phi))


def beta_for(alpha_abs: float, phase: float) -> complex:
    return math.sqrt(max(0.0, 1.0 - alpha_abs ** 2)) * complex(math.cos(phase), math.sin(phase))


def constraint_basis(plan: MeasurementPlan, tol: float = linalg.TOL_DEP) -> np.ndarray:
    """Orthonormal rows spanning the probe vectors orthogonal to P_e and every chi_j."""
    dim = plan.dim_D
    blocked = [plan.p_e_direction] + [embed_d(v, plan.m_r) for v in plan.chi_js]
    span = linalg.gram_schmidt_partial(blocked, tol)[0]
    basis = linalg.complete_basis(span, dim, tol)
    return np.array(basis[len(span):]).reshape(-1, dim)


def optimality_audit(plan: MeasurementPlan, w: NiqsWitness, kd: KernelDecomposition,
                     trials: int = 10_000, seed: int = 42) -> float:
    """Largest success probability among random admissible alternative projectors.

    Every sample is a unit probe vector orthogonal to the empty-box direction
    and the complement vectors, so it yields a nondistorting outcome; half the
    samples are ``d psi_I + junk`` mixtures.  The optimal plan bounds them all.
    """
    C = constraint_basis(plan)
    if C.shape[0] == 0:
        return 0.0
    g = plan.alpha * embed_r(plan.psi_r_prime, plan.m) + plan.c * plan.beta * embed_d(plan.chi, plan.m_r)
    rng = np.random.default_rng(seed)
    k = C.shape[0]
    coeffs = rng.standard_normal((trials, k)) + 1j * rng.standard_normal((trials, k))
    coeffs /= np.linalg.norm(coeffs, axis=1, keepdims=True)
    cand = coeffs @ C
    half = trials // 2
    d = rng.uniform(0, 1, half) * np.exp(2j * np.pi * rng.uniform(0, 1, half))
    junk = cand[:half] - np.outer(cand[:half] @ plan.psi_I.conj(), plan.psi_I)
    nj = np.linalg.norm(junk, axis=1, keepdims=True)
    junk = np.divide(junk, nj, out=np.zeros_like(junk), where=nj > 1e-12)
    cand[:half] = d[:, None] * plan.psi_I + np.sqrt(1 - np.abs(d) ** 2)[:, None] * junk
    cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    return float(np.max(np.abs(cand.conj() @ g) ** 2))
