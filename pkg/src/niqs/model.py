"""Physical setup of an interrogation and assembly of the no-decay operator D.

Spaces
------
* object: metastable space of dimension ``n`` embedded in an extended space of
  dimension ``n_ext`` (excited / ground levels live in the extra indices);
* probe: ``H_D = H_r (+) H_d`` with ``m_r`` reference-arm and ``m`` box-arm
  coordinates.  The box arm may itself be embedded in an extended space of
  dimension ``m_ext`` (e.g. to hold a vacuum state after absorption).

Interaction dynamics always act on the extended box-arm x object space, in
probe-major order.  Probe-space vectors are laid out reference arm first, box
arm second.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import linalg
from .errors import DimensionError, ModelError, NotAContraction

TOL_CONTRACTION = 1e-10
TOL_UNITARY = 1e-10


@dataclass(frozen=True)
class SpaceLayout:
    n: int
    m: int
    m_r: int
    n_ext: Optional[int] = None
    embed_S: Optional[Sequence[int]] = None
    m_ext: Optional[int] = None
    embed_d: Optional[Sequence[int]] = None

    def __post_init__(self):
        n_ext = self.n if self.n_ext is None else self.n_ext
        m_ext = self.m if self.m_ext is None else self.m_ext
        embed_S = tuple(range(self.n)) if self.embed_S is None else tuple(int(i) for i in self.embed_S)
        embed_d = tuple(range(self.m)) if self.embed_d is None else tuple(int(i) for i in self.embed_d)
        object.__setattr__(self, "n_ext", n_ext)
        object.__setattr__(self, "m_ext", m_ext)
        object.__setattr__(self, "embed_S", embed_S)
        object.__setattr__(self, "embed_d", embed_d)
        if min(self.n, self.m, self.m_r) < 1:
            raise ModelError("n, m and m_r must all be >= 1")
        if n_ext < self.n or m_ext < self.m:
            raise ModelError("extended dimensions must not be smaller than the metastable ones")
        for name, emb, size, full in (("embed_S", embed_S, self.n, n_ext), ("embed_d", embed_d, self.m, m_ext)):
            if len(emb) != size or len(set(emb)) != size or not all(0 <= i < full for i in emb):
                raise ModelError(f"{name} must list {size} distinct indices in [0, {full})")

    @property
    def dim_D(self) -> int:
        return self.m_r + self.m

    @property
    def joint_ext(self) -> int:
        return self.m_ext * self.n_ext

    def joint_indices(self) -> np.ndarray:
        """Indices of H_d (x) H_S inside the extended box-arm x object space."""
        return np.array([j * self.n_ext + s for j in self.embed_d for s in self.embed_S])


@dataclass(frozen=True)
class DirectD:
    D: np.ndarray
    H_S_free: Optional[np.ndarray] = None
    H_D_free: Optional[np.ndarray] = None
    t: float = 0.0


@dataclass(frozen=True)
class UnitaryPair:
    U_full: np.ndarray
    H_S_free: np.ndarray
    H_D_free: np.ndarray
    t: float


@dataclass(frozen=True)
class Segment:
    H_S: np.ndarray
    H_D: np.ndarray
    H_I: np.ndarray
    duration: float


@dataclass(frozen=True)
class HamiltonianSchedule:
    segments: tuple


class FreeEvolution(NamedTuple):
    U_S: np.ndarray
    U_D: np.ndarray


@dataclass(frozen=True)
class ContractionOperator:
    matrix: np.ndarray
    m: int
    n: int

    def block(self, j: int, k: int) -> np.ndarray:
        return block_view(self, j, k)

    def blocks(self) -> np.ndarray:
        """All blocks as an ``(m, m, n, n)`` array indexed ``[j, k, s, t]``."""
        return self.matrix.reshape(self.m, self.n, self.m, self.n).transpose(0, 2, 1, 3)


@dataclass(frozen=True)
class InteractionModel:
    layout: SpaceLayout
    dynamics: object
    hbar: float = 1.0
    name: str = ""
    tol_herm: float = linalg.TOL_HERM
    tol_unitary: float = TOL_UNITARY
    tol_contraction: float = TOL_CONTRACTION

    def __post_init__(self):
        if self.hbar <= 0:
            raise ModelError("hbar must be positive")
        _validate_dynamics(self)


@dataclass(frozen=True)
class ProbeSpec:
    """Initial probe ``alpha |psi_r> + beta |psi_d>`` (before free evolution)."""

    alpha: complex
    beta: complex
    psi_r: np.ndarray
    psi_d: np.ndarray
    tol_norm: float = field(default=linalg.TOL_NORM, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        object.__setattr__(self, "psi_r", linalg.as_vector(self.psi_r))
        object.__setattr__(self, "psi_d", linalg.as_vector(self.psi_d))
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1.0) > self.tol_norm:
            raise ModelError("|alpha|^2 + |beta|^2 must equal 1")
        if self.beta == 0:
            raise ModelError("beta must be nonzero: the probe has to enter the box")
        for name in ("psi_r", "psi_d"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > self.tol_norm:
                raise ModelError(f"{name} must be a unit vector")

    def state(self) -> np.ndarray:
        """The probe state in H_D coordinates."""
        return np.concatenate([self.alpha * self.psi_r, self.beta * self.psi_d])


def _check_square(mat, size, what):
    mat = linalg.as_matrix(mat)
    if mat.shape != (size, size):
        raise DimensionError(f"{what} must be {size}x{size}, got {mat.shape[0]}x{mat.shape[1]}")
    return mat


def _check_free_pair(model, H_S, H_D):
    lay = model.layout
    H_S = _check_square(H_S, lay.n_ext, "H_S_free")
    H_D = _check_square(H_D, lay.m_r + lay.m_ext, "H_D_free")
    for name, h in (("H_S_free", H_S), ("H_D_free", H_D)):
        if not linalg.is_hermitian(h, model.tol_herm):
            raise ModelError(f"{name} is not Hermitian")
    if np.linalg.norm(H_D[: lay.m_r, lay.m_r:]) > model.tol_herm * max(np.linalg.norm(H_D), 1.0):
        raise ModelError("H_D_free must not couple the reference arm to the box arm")


def _validate_dynamics(model: InteractionModel) -> None:
    lay, dyn = model.layout, model.dynamics
    if isinstance(dyn, DirectD):
        _check_square(dyn.D, lay.m * lay.n, "D")
        if (dyn.H_S_free is None) != (dyn.H_D_free is None):
            raise ModelError("direct_D free Hamiltonians must be given together")
        if dyn.H_S_free is not None:
            _check_free_pair(model, dyn.H_S_free, dyn.H_D_free)
        smax = linalg.singular_values(dyn.D)[0]
        if smax > 1 + model.tol_contraction:
            raise NotAContraction(f"sigma_max(D) = {smax:.12g} > 1")
    elif isinstance(dyn, UnitaryPair):
        U = _check_square(dyn.U_full, lay.joint_ext, "U_full")
        if not linalg.is_unitary(U, model.tol_unitary):
            raise ModelError("U_full is not unitary")
        _check_free_pair(model, dyn.H_S_free, dyn.H_D_free)
    elif isinstance(dyn, HamiltonianSchedule):
        if not dyn.segments:
            raise ModelError("hamiltonian_schedule needs at least one segment")
        for k, seg in enumerate(dyn.segments):
            if not seg.duration > 0:
                raise ModelError(f"segment {k}: duration must be positive")
            _check_free_pair(model, seg.H_S, seg.H_D)
            H_I = _check_square(seg.H_I, lay.joint_ext, f"segment {k} H_I")
            if not linalg.is_hermitian(H_I, model.tol_herm):
                raise ModelError(f"segment {k}: H_I is not Hermitian")
    else:
        raise ModelError(f"unknown dynamics {type(dyn).__name__}")


def _box_free_generator(lay: SpaceLayout, H_S: np.ndarray, H_D: np.ndarray) -> np.ndarray:
    H_d = H_D[lay.m_r:, lay.m_r:]
    return np.kron(H_d, np.eye(lay.n_ext)) + np.kron(np.eye(lay.m_ext), H_S)


def _free_segments(model: InteractionModel):
    """(H_S_free, H_D_free, duration) pieces of the free evolution."""
    dyn = model.dynamics
    if isinstance(dyn, HamiltonianSchedule):
        return [(s.H_S, s.H_D, s.duration) for s in dyn.segments]
    if isinstance(dyn, UnitaryPair):
        return [(dyn.H_S_free, dyn.H_D_free, dyn.t)]
    if dyn.H_S_free is not None:
        return [(dyn.H_S_free, dyn.H_D_free, dyn.t)]
    return []


def total_time(model: InteractionModel) -> float:
    return float(sum(piece[2] for piece in _free_segments(model)))


def _extended_propagators(model: InteractionModel):
    """(U_int, U_free) on the extended box-arm x object space."""
    lay, dyn = model.layout, model.dynamics
    dim = lay.joint_ext
    U_int, U_free = np.eye(dim, dtype=complex), np.eye(dim, dtype=complex)
    for H_S, H_D, tau in _free_segments(model):
        U_free = linalg.herm_exp(_box_free_generator(lay, H_S, H_D), -1j * tau / model.hbar) @ U_free
    if isinstance(dyn, HamiltonianSchedule):
        for seg in dyn.segments:
            H = _box_free_generator(lay, seg.H_S, seg.H_D) + seg.H_I
            U_int = linalg.herm_exp(H, -1j * seg.duration / model.hbar) @ U_int
    else:
        U_int = np.asarray(dyn.U_full, dtype=complex)
    return U_int, U_free


def assemble_D(model: InteractionModel) -> ContractionOperator:
    """Compress ``U_int U_free^dagger`` onto H_d (x) H_S."""
    lay, dyn = model.layout, model.dynamics
    if isinstance(dyn, DirectD):
        D = np.array(dyn.D, dtype=complex)
    else:
        U_int, U_free = _extended_propagators(model)
        idx = lay.joint_indices()
        D = (U_int @ U_free.conj().T)[np.ix_(idx, idx)]
        smax = linalg.singular_values(D)[0]
        if smax > 1 + model.tol_contraction:
            raise NotAContraction(f"sigma_max(D) = {smax:.12g} > 1")
    return ContractionOperator(D, lay.m, lay.n)


def no_decay_operator(model: InteractionModel) -> np.ndarray:
    """Map an initial box-arm x object state to its undecayed final component.

    For Hamiltonian or unitary models this is the compressed full evolution; for
    direct-D models it is ``D`` applied after the free evolution.
    """
    lay, dyn = model.layout, model.dynamics
    if isinstance(dyn, DirectD):
        U_S, U_D = free_evolution(model)
        return dyn.D @ np.kron(U_D[lay.m_r:, lay.m_r:], U_S)
    U_int, _ = _extended_propagators(model)
    idx = lay.joint_indices()
    return U_int[np.ix_(idx, idx)]


def block_view(d: ContractionOperator, j: int, k: int) -> np.ndarray:
    """Object-space block ``<j|_d D |k>_d`` (n x n)."""
    if not (0 <= j < d.m and 0 <= k < d.m):
        raise IndexError(f"probe indices ({j}, {k}) out of range for m = {d.m}")
    n = d.n
    return d.matrix[j * n:(j + 1) * n, k * n:(k + 1) * n]


def free_evolution(model: InteractionModel, t: Optional[float] = None) -> FreeEvolution:
    """Free propagators on H_S and on H_D = H_r (+) H_d.

    ``t`` defaults to the model's own interaction time.  The metastable object
    space and the box-arm space must be invariant under the free dynamics; the
    compressed propagators are checked for unitarity.
    """
    lay = model.layout
    pieces = _free_segments(model)
    if t is not None:
        total = sum(p[2] for p in pieces)
        if pieces and total > 0:
            pieces = [(hs, hd, tau * t / total) for hs, hd, tau in pieces]
        elif t != 0 and pieces:
            pieces = [(pieces[0][0], pieces[0][1], t)]
    U_S_ext = np.eye(lay.n_ext, dtype=complex)
    U_D_ext = np.eye(lay.m_r + lay.m_ext, dtype=complex)
    for H_S, H_D, tau in pieces:
        U_S_ext = linalg.herm_exp(H_S, -1j * tau / model.hbar) @ U_S_ext
        U_D_ext = linalg.herm_exp(H_D, -1j * tau / model.hbar) @ U_D_ext
    s_idx = np.array(lay.embed_S)
    d_idx = np.concatenate([np.arange(lay.m_r), lay.m_r + np.array(lay.embed_d)])
    U_S = U_S_ext[np.ix_(s_idx, s_idx)]
    U_D = U_D_ext[np.ix_(d_idx, d_idx)]
    for name, u in (("object", U_S), ("probe", U_D)):
        if not linalg.is_unitary(u, 1e-8):
            raise ModelError(f"free evolution leaks out of the metastable {name} space")
    return FreeEvolution(U_S, U_D)
