"""Feasibility analysis: witnesses, kernel decomposition, independence test.

A witness is a pair of box-arm vectors ``(chi, psi_d)`` whose partial
contraction ``<chi| D |psi_d>`` is proportional to the object identity.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import linalg
from .errors import ChiOutsideKbar, DecompositionResidual
from .model import ContractionOperator

TOL_WITNESS = 1e-8


@dataclass(frozen=True)
class SearchConfig:
    starts: int = 16
    iterations: int = 400
    seed: int = 42
    tol_witness: float = TOL_WITNESS
    tol_rank: float = linalg.TOL_RANK
    dedup_fidelity: float = 0.999
    grid_fallback: bool = True
    grid_step: float = 0.05
    grid_step_m3: float = 0.2
    grid_polish: int = 8
    threads: int = 1


@dataclass(frozen=True)
class NiqsWitness:
    chi: np.ndarray
    psi_d: np.ndarray
    c: complex
    residual: float


@dataclass(frozen=True)
class SearchResult:
    """Outcome of :func:`find_witness`: accepted witnesses plus the best attempt."""

    witnesses: list
    best_residual: float
    best: NiqsWitness | None = None
    used_grid: bool = False

    def __iter__(self):
        return iter(self.witnesses)

    def __len__(self):
        return len(self.witnesses)

    def __getitem__(self, k):
        return self.witnesses[k]


@dataclass(frozen=True)
class KernelDecomposition:
    q_ops: list
    kbar_basis: list
    l: int
    chi: np.ndarray
    c: complex
    chi_projected: bool = False
    kernel_basis: list = field(default_factory=list)

    @property
    def chi_js(self) -> list:
        """The basis vectors after chi (empty when chi is not part of the basis)."""
        if self.l == 0:
            return []
        return self.kbar_basis[1:]


def witness_residual(d: ContractionOperator, chi, psi_d) -> tuple[complex, float]:
    """Contract D with ``<chi|`` and ``|psi_d>``; return ``(c, |M - c I|_F)``."""
    M = partial_contraction(d, chi, psi_d)
    c = np.trace(M) / d.n
    return complex(c), float(np.linalg.norm(M - c * np.eye(d.n)))


def partial_contraction(d: ContractionOperator, chi, psi_d) -> np.ndarray:
    chi, psi = linalg.as_vector(chi), linalg.as_vector(psi_d)
    return np.einsum("j,jkst,k->st", chi.conj(), d.blocks(), psi)


def _split_blocks(d: ContractionOperator):
    """Trace parts ``t[j, k]`` and traceless remainders ``R[j, k]`` of the blocks."""
    B = d.blocks()
    t = np.einsum("jkss->jk", B) / d.n
    R = B - t[:, :, None, None] * np.eye(d.n)
    return t, R.reshape(d.m, d.m, d.n * d.n)


def _select(R_cols, lin, current, null_tol):
    """Unit v minimising |R_cols v|; among exact minimisers pick the largest |lin . v|."""
    _, s, vh = np.linalg.svd(R_cols)
    cols = R_cols.shape[1]
    rank = int(np.sum(s > null_tol))
    if rank == cols:
        return vh[-1].conj()
    N = vh[rank:].conj()  # rows span the null space
    for target in (lin.conj(), current):
        v = N.T @ (N.conj() @ target)
        nv = np.linalg.norm(v)
        if nv > 1e-12 * max(np.linalg.norm(target), 1e-300):
            return v / nv
    return N[0]


def _canonical(d, chi, psi):
    chi = linalg.fix_phase(chi / np.linalg.norm(chi))
    psi = linalg.fix_phase(psi / np.linalg.norm(psi))
    c, res = witness_residual(d, chi, psi)
    return NiqsWitness(chi, psi, c, res)


def _alternate(d, t, R, chi, psi, cfg, null_tol):
    """Alternating null-space refinement from one start."""
    best = None
    last_c = -1.0
    for _ in range(cfg.iterations):
        # chi step: conj(chi) in ker B(psi), B column j = sum_k psi_k R_jk
        B = np.einsum("jkx,k->xj", R, psi)
        chi = _select(B, t @ psi, chi.conj(), null_tol).conj()
        # psi step: psi in ker B'(chi), B' column k = sum_j conj(chi_j) R_jk
        Bp = np.einsum("jkx,j->xk", R, chi.conj())
        psi = _select(Bp, chi.conj() @ t, psi, null_tol)
        w = _canonical(d, chi, psi)
        if best is None or w.residual < best.residual - 1e-15 or (
                w.residual <= cfg.tol_witness and abs(w.c) > abs(best.c)):
            best = w
        if w.residual <= cfg.tol_witness * 1e-3 and abs(abs(w.c) - last_c) <= 1e-13:
            break
        last_c = abs(w.c)
    return best


def _random_unit(rng, m):
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return v / np.linalg.norm(v)


def _cp_grid(m, step):
    """Points of complex projective space CP^(m-1) on an angular grid."""
    if m == 1:
        return np.ones((1, 1), dtype=complex)
    n_theta = int(np.ceil((np.pi / 2) / step)) + 1
    n_phi = int(np.ceil(2 * np.pi / step))
    thetas = np.linspace(0, np.pi / 2, n_theta)
    phis = np.arange(n_phi) * (2 * np.pi / n_phi)
    pts = []
    if m == 2:
        for th, ph in product(thetas, phis):
            pts.append([np.cos(th), np.exp(1j * ph) * np.sin(th)])
    else:
        for th1, th2, ph1, ph2 in product(thetas, thetas, phis, phis):
            pts.append([np.cos(th1), np.exp(1j * ph1) * np.sin(th1) * np.cos(th2),
                        np.exp(1j * ph2) * np.sin(th1) * np.sin(th2)])
    return np.array(pts, dtype=complex)


def _grid_starts(R, m, cfg):
    """psi grid with the exact inner minimum over chi (smallest singular value)."""
    step = cfg.grid_step if m <= 2 else cfg.grid_step_m3
    psis = _cp_grid(m, step)
    B = np.einsum("jkx,pk->pxj", R, psis)
    smin = np.linalg.svd(B, compute_uv=False)[:, -1]
    order = np.argsort(smin, kind="stable")[: cfg.grid_polish]
    return psis[order]


def _sort_key(w):
    flat = np.concatenate([w.chi, w.psi_d])
    return (-round(abs(w.c), 10), round(w.residual, 14),
            tuple(np.round(flat.real, 10)), tuple(np.round(flat.imag, 10)))


def _dedup(ws, fid):
    out = []
    for w in sorted(ws, key=_sort_key):
        if not any(abs(np.vdot(w.chi, o.chi)) > fid and abs(np.vdot(w.psi_d, o.psi_d)) > fid for o in out):
            out.append(w)
    return out


def _thread_count(cfg):
    env = os.environ.get("NIQS_THREADS")
    return max(1, int(env)) if env else max(1, cfg.threads)


def find_witness(d: ContractionOperator, cfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Search for witness pairs by multi-start alternating refinement.

    Start 0 is the uniform superposition; start ``k > 0`` draws a random pair
    from the substream ``(seed, k)``.  For small problems (m, n <= 3) with no
    witness found, a grid over psi (with the exact inner minimum over chi)
    seeds a second round.  The result is independent of thread scheduling.
    """
    t, R = _split_blocks(d)
    scale = np.linalg.norm(R)
    null_tol = cfg.tol_rank * scale
    m = d.m

    def run(k):
        if k == 0:
            chi = psi = np.ones(m, dtype=complex) / np.sqrt(m)
        else:
            rng = np.random.default_rng([cfg.seed, k])
            chi, psi = _random_unit(rng, m), _random_unit(rng, m)
        return _alternate(d, t, R, chi, psi, cfg, null_tol)

    threads = _thread_count(cfg)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            tried = list(ex.map(run, range(cfg.starts)))
    else:
        tried = [run(k) for k in range(cfg.starts)]

    used_grid = False
    accepted = [w for w in tried if w.residual <= cfg.tol_witness]
    if not accepted and cfg.grid_fallback and m <= 3 and d.n <= 3:
        used_grid = True
        for psi in _grid_starts(R, m, cfg):
            B = np.einsum("jkx,k->xj", R, psi)
            chi = _select(B, t @ psi, np.ones(m, dtype=complex), null_tol).conj()
            tried.append(_alternate(d, t, R, chi, psi, cfg, null_tol))
        accepted = [w for w in tried if w.residual <= cfg.tol_witness]

    best = min(tried, key=lambda w: (w.residual, _sort_key(w)))
    return SearchResult(_dedup(accepted, cfg.dedup_fidelity), float(best.residual), best, used_grid)


def q_operators(d: ContractionOperator, psi_d) -> list[np.ndarray]:
    """``Q_i = Tr_S[D |psi_d, i><psi_d, i| D^dagger]`` for the standard object basis."""
    psi = linalg.as_vector(psi_d)
    out = []
    for i in range(d.n):
        W = (d.matrix @ np.kron(psi, np.eye(d.n)[i])).reshape(d.m, d.n)
        out.append(W @ W.conj().T)
    return out


def kernel_decomposition(d: ContractionOperator, w: NiqsWitness,
                         tol_rank: float = linalg.TOL_RANK,
                         tol_dep: float = linalg.TOL_DEP) -> KernelDecomposition:
    """Kernel K of the Q operators and an orthonormal basis of its complement.

    The basis starts with chi.  When chi has a component in K it is replaced by
    its normalised projection onto the complement and ``c`` is rescaled (the
    contraction along K vanishes, so the pair stays a witness); the returned
    decomposition then has ``chi_projected=True``.
    """
    q = q_operators(d, w.psi_d)
    total = sum(q)
    kbar = linalg.range_basis(total, tol_rank)
    kernel = linalg.null_space(total, tol_rank) if len(kbar) < d.m else []
    l = len(kbar)
    chi, c = w.chi, w.c
    if l == 0:
        # nothing reaches the probe: only c = 0 is consistent
        if abs(c) > np.sqrt(tol_dep):
            raise ChiOutsideKbar(f"K-bar is trivial but c = {c:.3e}")
        return KernelDecomposition(q, [], 0, chi, 0j, False, kernel)
    P = np.array(kbar).T
    chi_in = P @ (P.conj().T @ chi)
    norm_in = np.linalg.norm(chi_in)
    if norm_in <= tol_dep:
        raise ChiOutsideKbar("chi has no component in the complement of the kernel")
    # always project, so sub-tolerance kernel leakage cannot reach the plan
    projected = bool(np.linalg.norm(chi - chi_in) > tol_dep)
    if len(kbar) < d.m:
        chi, c = chi_in / norm_in, c / norm_in
    if abs(c) > 0:
        gap = np.vdot(chi, total @ chi).real - d.n * abs(c) ** 2
        if gap < -max(tol_dep, 1e-8):
            raise ChiOutsideKbar(f"<chi|sum Q|chi> falls short of n|c|^2 by {-gap:.3e}")
    basis, _ = linalg.gram_schmidt_partial([chi] + kbar, tol_dep)
    basis[0] = chi
    return KernelDecomposition(q, basis[:l], l, chi, complex(c), projected, kernel)


@dataclass(frozen=True)
class ActionDecomposition:
    c_term: np.ndarray
    m_states: list
    residual: float


def decompose_action(d: ContractionOperator, w: NiqsWitness, kd: KernelDecomposition,
                     psi_S, tol: float = 1e-9) -> ActionDecomposition:
    """Split ``D |psi_d>|psi_S>`` into the chi term and the remaining components."""
    psi_S = linalg.as_vector(psi_S)
    full = d.matrix @ np.kron(w.psi_d, psi_S)
    c_term = kd.c * np.kron(kd.chi, psi_S) if kd.l else np.zeros_like(full)
    ms = []
    recon = c_term.copy()
    F = full.reshape(d.m, d.n)
    for chi_j in kd.chi_js:
        m_j = chi_j.conj() @ F
        ms.append(m_j)
        recon = recon + np.kron(chi_j, m_j)
    res = float(np.linalg.norm(full - recon))
    if res > tol:
        raise DecompositionResidual(f"reconstruction error {res:.3e}")
    return ActionDecomposition(c_term, ms, res)


@dataclass(frozen=True)
class Theorem2Result:
    feasible: bool
    independence_margin: float


def theorem2_check(w: NiqsWitness, kd: KernelDecomposition, tol_dep: float = linalg.TOL_DEP) -> Theorem2Result:
    """Is ``psi_d - c chi`` outside the span of the remaining complement vectors?"""
    r = w.psi_d - kd.c * kd.chi if kd.l else w.psi_d.copy()
    for chi_j in kd.chi_js:
        r = r - np.vdot(chi_j, r) * chi_j
    for chi_j in kd.chi_js:
        r = r - np.vdot(chi_j, r) * chi_j
    margin = float(np.linalg.norm(r))
    return Theorem2Result(margin > tol_dep, margin)
