import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from niqs import (DirectD, InteractionModel, SearchConfig, SpaceLayout, assemble_D, decompose_action,
                  find_witness, kernel_decomposition, theorem2_check, witness_residual)
from niqs.conditions import NiqsWitness, q_operators
from niqs.errors import ChiOutsideKbar

from oracles import (contract, mz_D, grid_witness_oracle, planted_contraction, random_contraction,
                     random_unit, traceless_residual)

LP, LM = np.array([1, 0], complex), np.array([0, 1], complex)
MP, MM = LP, LM


def direct(D, m, n):
    return assemble_D(InteractionModel(SpaceLayout(n, m, 1), DirectD(D)))


class TestWitnessResidual:
    def test_mz_balanced(self, mz):
        d, _, _ = mz
        u = np.array([1, 1]) / np.sqrt(2)
        c, res = witness_residual(d, u, u)
        assert c == pytest.approx(0.5) and res == pytest.approx(0, abs=1e-15)

    def test_mz_single_arm(self, mz):
        d, _, _ = mz
        c, res = witness_residual(d, LP, LP)
        # <l+|D|l+> = |m-><m-|, traceless part diag(-1/2, 1/2)
        assert c == pytest.approx(0.5) and res == pytest.approx(1 / np.sqrt(2))

    def test_identity(self):
        c, res = witness_residual(direct(np.eye(4), 2, 2), LP, LP)
        assert c == pytest.approx(1) and res == pytest.approx(0, abs=1e-15)

    def test_matches_block_sum(self, rng):
        D = random_contraction(rng, 6)
        chi, psi = random_unit(rng, 2), random_unit(rng, 2)
        c, res = witness_residual(direct(D, 2, 3), chi, psi)
        M = contract(D, 2, 3, chi, psi)
        assert c == pytest.approx(np.trace(M) / 3)
        assert res == pytest.approx(traceless_residual(D, 2, 3, chi, psi))


class TestFindWitness:
    def test_mz_contains_half(self, mz):
        d, w, _ = mz
        res = find_witness(d)
        assert any(abs(abs(x.c) - 0.5) < 1e-8 for x in res)
        assert abs(w.c) == pytest.approx(0.5, abs=1e-9)
        assert w.residual <= 1e-8
        # the c = 1/2 member is the balanced superposition in both arms
        assert abs(np.vdot(w.chi, np.array([1, 1]) / np.sqrt(2))) ** 2 == pytest.approx(1, abs=1e-8)

    def test_sorted_by_abs_c(self, mz):
        cs = [abs(x.c) for x in find_witness(mz[0])]
        assert cs == sorted(cs, reverse=True)

    def test_zero_contraction(self):
        res = find_witness(direct(np.zeros((4, 4)), 2, 2))
        assert len(res) >= 1 and res[0].residual == 0 and res[0].c == 0

    @pytest.mark.parametrize("m,n", [(2, 2), (2, 3), (3, 2), (3, 3)])
    def test_planted(self, m, n):
        r = np.random.default_rng(100 * m + n)
        D, chi, psi, c = planted_contraction(r, m, n)
        res = find_witness(direct(D, m, n))
        assert len(res) >= 1
        for w in res:
            assert w.residual <= 1e-8
            assert traceless_residual(D, m, n, w.chi, w.psi_d) <= 1e-8
        assert max(abs(w.c) for w in res) >= abs(c) - 1e-8

    def test_generic_has_none(self):
        r = np.random.default_rng(7)
        D = random_contraction(r, 4)
        res = find_witness(direct(D, 2, 2))
        grid_best, polished = grid_witness_oracle(D)
        assert len(res) == 0
        assert polished > 1e3 * SearchConfig().tol_witness
        assert res.best_residual == pytest.approx(polished, rel=1e-6)

    def test_deterministic(self, rng):
        D, *_ = planted_contraction(rng, 3, 2)
        d = direct(D, 3, 2)
        a, b = find_witness(d), find_witness(d)
        assert len(a) == len(b)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.chi, y.chi)
            np.testing.assert_array_equal(x.psi_d, y.psi_d)

    def test_threads_agree(self, rng):
        D, *_ = planted_contraction(rng, 2, 2)
        d = direct(D, 2, 2)
        a, b = find_witness(d, SearchConfig(threads=1)), find_witness(d, SearchConfig(threads=4))
        assert [x.c for x in a] == [y.c for y in b]


class TestKernel:
    def test_mz_q_operators(self, mz):
        d, w, kd = mz
        q = q_operators(d, w.psi_d)
        np.testing.assert_allclose(q[0], 0.5 * np.outer(LM, LM), atol=1e-10)
        np.testing.assert_allclose(q[1], 0.5 * np.outer(LP, LP), atol=1e-10)
        assert kd.l == 2 and not kd.chi_projected

    def test_identity_rank_one(self):
        d = direct(np.eye(4), 2, 2)
        w = NiqsWitness(LP, LP, 1.0, 0.0)
        kd = kernel_decomposition(d, w)
        assert kd.l == 1 and kd.chi_js == []

    def test_q_psd(self, rng):
        D = random_contraction(rng, 9)
        d = direct(D, 3, 3)
        for Q in q_operators(d, random_unit(rng, 3)):
            np.testing.assert_allclose(Q, Q.conj().T, atol=1e-14)
            assert np.linalg.eigvalsh(Q).min() >= -1e-12

    def test_chi_projection(self):
        # D acts only on the l+ column; a chi with an l- part is projected onto l+
        D = np.zeros((4, 4), complex)
        D[:2, :2] = 0.5 * np.eye(2)
        d = direct(D, 2, 2)
        chi = np.array([0.6, 0.8], complex)
        c, res = witness_residual(d, chi, LP)
        kd = kernel_decomposition(d, NiqsWitness(chi, LP, c, res))
        assert kd.chi_projected
        np.testing.assert_allclose(kd.chi, LP, atol=1e-12)
        assert kd.c == pytest.approx(0.5)

    def test_small_leak_removed(self):
        # a kernel component below tolerance is still projected out, without the flag
        D = np.zeros((4, 4), complex)
        D[:2, :2] = 0.5 * np.eye(2)
        d = direct(D, 2, 2)
        chi = np.array([1, 1e-9], complex) / np.sqrt(1 + 1e-18)
        c, res = witness_residual(d, chi, LP)
        kd = kernel_decomposition(d, NiqsWitness(chi, LP, c, res))
        assert not kd.chi_projected
        assert abs(kd.chi[1]) == 0 and kd.c == pytest.approx(0.5, abs=1e-15)

    def test_chi_outside(self):
        D = np.zeros((4, 4), complex)
        D[:2, :2] = 0.5 * np.eye(2)
        d = direct(D, 2, 2)
        with pytest.raises(ChiOutsideKbar):
            kernel_decomposition(d, NiqsWitness(LM, LP, 0.0, 0.0))

    def test_trivial_kbar(self):
        d = direct(np.zeros((4, 4)), 2, 2)
        kd = kernel_decomposition(d, NiqsWitness(LP, LP, 0.0, 0.0))
        assert kd.l == 0 and kd.kbar_basis == []


class TestDecomposeAction:
    def test_mz_m_plus(self, mz):
        d, w, kd = mz
        dec = decompose_action(d, w, kd, MP)
        assert len(dec.m_states) == 1
        # D|psi'>|m+> = |l-,m+>/sqrt2 = (1/2)|chi>|m+> - (1/2)|chi_perp>|m+>, up to chi_1 phase
        chi1 = kd.chi_js[0]
        expected = np.vdot(chi1, LM) / np.sqrt(2) * MP
        np.testing.assert_allclose(dec.m_states[0], expected, atol=1e-12)
        assert np.linalg.norm(dec.m_states[0]) == pytest.approx(0.5)

    def test_random_reconstructs(self, rng):
        D, *_ = planted_contraction(rng, 3, 3)
        d = direct(D, 3, 3)
        w = find_witness(d)[0]
        kd = kernel_decomposition(d, w)
        for _ in range(10):
            assert decompose_action(d, w, kd, random_unit(rng, 3)).residual < 1e-10


class TestIndependenceCheck:
    def test_mach_zehnder(self, mz):
        _, w, kd = mz
        t = theorem2_check(w, kd)
        assert t.feasible and t.independence_margin == pytest.approx(0.5)

    def test_identity_infeasible(self):
        d = direct(np.eye(4), 2, 2)
        w = find_witness(d)[0]
        t = theorem2_check(w, kernel_decomposition(d, w))
        assert not t.feasible and t.independence_margin < 1e-10

    def test_absorber(self):
        d = direct(np.zeros((4, 4)), 2, 2)
        w = NiqsWitness(LP, LP, 0.0, 0.0)
        t = theorem2_check(w, kernel_decomposition(d, w))
        assert t.feasible and t.independence_margin == pytest.approx(1)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 2), (2, 3), (3, 2)]))
@settings(max_examples=15, deadline=None)
def test_witness_invariants(seed, mn):
    m, n = mn
    r = np.random.default_rng(seed)
    D, *_ = planted_contraction(r, m, n)
    d = direct(D, m, n)
    res = find_witness(d, SearchConfig(starts=4, grid_fallback=False))
    for w in res:
        assert abs(w.c) <= 1 + 1e-10
        kd = kernel_decomposition(d, w)
        total = sum(kd.q_ops)
        assert np.vdot(kd.chi, total @ kd.chi).real >= n * abs(kd.c) ** 2 - 1e-8
        P = np.array(kd.kbar_basis).T
        assert np.linalg.norm(kd.chi - P @ (P.conj().T @ kd.chi)) <= 1e-10
        # global phases leave |c| and the residual unchanged
        c2, r2 = witness_residual(d, np.exp(0.3j) * w.chi, np.exp(-1.1j) * w.psi_d)
        assert abs(c2) == pytest.approx(abs(w.c), abs=1e-12)
        assert r2 == pytest.approx(w.residual, abs=1e-12)
