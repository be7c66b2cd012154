"""Dense complex linear algebra shared by the analysis modules.

Composite indices are probe-major: the pair ``(j, s)`` of a probe index and an
object index maps to ``j * n + s``.  Orthonormal outputs follow one phase
convention, the first non-negligible entry is real and non-negative.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DependentVector, DimensionError, NotHermitian

TOL_RANK = 1e-10
TOL_DEP = 1e-8
TOL_NORM = 1e-10
TOL_HERM = 1e-10
MAX_DIM = 4096


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"expected a nonempty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DimensionError("matrix has non-finite entries")
    return m


def as_vector(v) -> np.ndarray:
    x = np.asarray(v, dtype=complex).reshape(-1)
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise DimensionError("vector must be nonempty and finite")
    return x


def fix_phase(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate ``v`` so its first entry above ``tol * max|v|`` is real and >= 0."""
    mags = np.abs(v)
    peak = mags.max() if v.size else 0.0
    if peak == 0.0:
        return v
    k = int(np.argmax(mags > tol * peak))
    return v * (np.conj(v[k]) / mags[k])


def kron(a, b, max_dim: int = MAX_DIM) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > max_dim:
        raise DimensionError(f"Kronecker product {rows}x{cols} exceeds max dimension {max_dim}")
    return np.kron(a, b)


def singular_values(a) -> np.ndarray:
    """Singular values of ``a`` in descending order."""
    return np.linalg.svd(as_matrix(a), compute_uv=False)


def null_space(a, tol_rank: float = TOL_RANK) -> list[np.ndarray]:
    """Orthonormal basis of the right null space of ``a``.

    Singular values at or below ``tol_rank * sigma_max`` count as zero.  A zero
    matrix has every direction in its kernel.

    Examples
    --------
    >>> [np.round(v.real, 6) for v in null_space([[1, 1], [1, 1]])]
    [array([ 0.707107, -0.707107])]
    """
    a = as_matrix(a)
    _, s, vh = np.linalg.svd(a)
    cols = a.shape[1]
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol_rank * smax)) if smax > 0 else 0
    return [fix_phase(vh[k].conj()) for k in range(rank, cols)]


def range_basis(a, tol_rank: float = TOL_RANK) -> list[np.ndarray]:
    """Orthonormal basis of the column space of ``a`` (complement of the left kernel)."""
    a = as_matrix(a)
    u, s, _ = np.linalg.svd(a)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol_rank * smax)) if smax > 0 else 0
    return [fix_phase(u[:, k]) for k in range(rank)]


def _orthonormalize(seed, tol_dep, phase):
    vecs = [as_vector(v) for v in seed]
    if len({v.size for v in vecs}) > 1:
        raise DimensionError("gram_schmidt inputs must share one dimension")
    basis: list[np.ndarray] = []
    for idx, v in enumerate(vecs):
        r = v.copy()
        # two passes of classical projection ("twice is enough")
        for _ in range(2):
            for q in basis:
                r = r - np.vdot(q, r) * q
        norm = np.linalg.norm(r)
        if norm <= tol_dep:
            yield idx, None, norm
            continue
        q = r / norm
        basis.append(fix_phase(q) if phase else q)
        yield idx, basis[-1], norm


def gram_schmidt(seed: Sequence, tol_dep: float = TOL_DEP, phase: bool = True) -> list[np.ndarray]:
    """Orthonormalize ``seed`` in order, with re-orthogonalization.

    Parameters
    ----------
    seed : sequence of array_like
        Vectors of one common dimension.
    tol_dep : float
        A vector whose residual norm after projecting out its predecessors is
        at or below this value is dependent.
    phase : bool
        Apply the phase convention to every output vector.  Pass ``False`` to
        keep the phase produced by the projection itself.

    Raises
    ------
    DependentVector
        On the first dependent input, carrying its index.
    """
    out = []
    for idx, q, norm in _orthonormalize(seed, tol_dep, phase):
        if q is None:
            raise DependentVector(idx, norm)
        out.append(q)
    return out


def gram_schmidt_partial(seed: Sequence, tol_dep: float = TOL_DEP,
                         phase: bool = True) -> tuple[list[np.ndarray], list[int]]:
    """Like :func:`gram_schmidt` but returns ``(basis, dependent_indices)``."""
    basis, dependent = [], []
    for idx, q, _ in _orthonormalize(seed, tol_dep, phase):
        if q is None:
            dependent.append(idx)
        else:
            basis.append(q)
    return basis, dependent


def complete_basis(vectors: Sequence, dim: int, tol_dep: float = TOL_DEP) -> list[np.ndarray]:
    """Extend ``vectors`` to an orthonormal basis of C^dim using standard basis vectors in index order."""
    seed = list(vectors) + list(np.eye(dim, dtype=complex))
    basis, _ = gram_schmidt_partial(seed, tol_dep, phase=False)
    return basis[:dim]


def partial_trace_system(op, m: int, n: int) -> np.ndarray:
    """Trace out the object factor of an operator on probe (m) x object (n)."""
    op = as_matrix(op)
    if op.shape != (m * n, m * n):
        raise DimensionError(f"expected {(m * n, m * n)} operator, got {op.shape}")
    return np.einsum("jsks->jk", op.reshape(m, n, m, n))


def is_hermitian(h: np.ndarray, tol: float = TOL_HERM) -> bool:
    scale = np.linalg.norm(h)
    return np.linalg.norm(h - h.conj().T) <= tol * max(scale, 1.0)


def herm_exp(h, scale: complex, tol_herm: float = TOL_HERM) -> np.ndarray:
    """``exp(scale * h)`` for Hermitian ``h`` through its eigendecomposition.

    With a purely imaginary ``scale`` the result is unitary; ``scale = -1j * t / hbar``
    gives the propagator of ``h`` over time ``t``.
    """
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise DimensionError("herm_exp needs a square matrix")
    fro = np.linalg.norm(h)
    if np.linalg.norm(h - h.conj().T) > tol_herm * fro:
        raise NotHermitian(f"|h - h^H|_F = {np.linalg.norm(h - h.conj().T):.3e}")
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(scale * w)) @ v.conj().T


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    return u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol)
