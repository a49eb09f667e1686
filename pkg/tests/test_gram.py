import numpy as np
import pytest
import scipy.linalg as sla

from ncldof.gram import RankDeficientError, compute_gram, dump_spectrum, filter_factors, whiten


def test_identity_features():
    g = compute_gram(np.eye(2), np.array([1.0, 0.0]), 1)
    np.testing.assert_array_equal(g.gram_full, 0.5 * np.eye(2))
    np.testing.assert_array_equal(g.phi_y, [0.5, 0.0])


def test_brute_force_sum(rng):
    phi = rng.normal(size=(4, 6))
    y = rng.normal(size=6)
    g = compute_gram(phi, y, 2)
    brute = sum(np.outer(phi[:, n], phi[:, n]) for n in range(6)) / 6
    np.testing.assert_allclose(g.gram_full, brute, atol=1e-12)
    np.testing.assert_allclose(g.diag_blocks[1], brute[2:, 2:], atol=1e-15)
    np.testing.assert_allclose(g.phi_y, phi @ y / 6, atol=1e-15)


def test_duplicated_row_in_member_raises(rng):
    phi = rng.normal(size=(4, 10))
    phi[3] = phi[2]
    with pytest.raises(RankDeficientError, match="member 1"):
        compute_gram(phi, np.zeros(10), 2)


def test_q_not_multiple_of_h(rng):
    with pytest.raises(ValueError):
        compute_gram(rng.normal(size=(5, 10)), np.zeros(10), 2)


def test_single_member_is_identity(rng):
    wg = whiten(compute_gram(rng.normal(size=(4, 30)), np.zeros(30), 4))
    np.testing.assert_allclose(wg.p_matrix, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(wg.eigenvalues, 1.0, atol=1e-12)


def test_two_identical_members():
    x = np.linspace(-1, 1, 9)[None, :]
    wg = whiten(compute_gram(np.vstack([x, x]), np.zeros(9), 1))
    np.testing.assert_allclose(wg.eigenvalues, [2.0, 0.0], atol=1e-12)
    assert wg.rank_p == 1


def test_whitened_structure(inst):
    wg, g = inst.wg, inst.g
    M, H = wg.M, wg.H
    # oracle: scipy's matrix inverse square root, block by block
    for m in range(M):
        np.testing.assert_allclose(wg.whitener_blocks[m], sla.fractional_matrix_power(g.diag_blocks[m], -0.5).real,
                                   rtol=1e-8, atol=1e-8)
    Wfull = sla.block_diag(*wg.whitener_blocks)
    np.testing.assert_allclose(wg.p_matrix, Wfull @ g.gram_full @ Wfull, atol=1e-10)
    P4 = wg.p_matrix.reshape(M, H, M, H)
    for m in range(M):
        np.testing.assert_allclose(P4[m, :, m, :], np.eye(H), atol=1e-8)
    assert np.all(wg.eigenvalues >= 0) and wg.eigenvalues.max() <= M + 1e-8
    assert abs(wg.eigenvalues.sum() - H * M) <= 1e-6 * H * M
    assert np.all(np.diff(wg.eigenvalues) <= 0)
    V = wg.eigenvectors
    np.testing.assert_allclose(V.T @ V, np.eye(wg.Q), atol=1e-10)
    rec = (V * wg.eigenvalues) @ V.T
    assert np.linalg.norm(rec - wg.p_matrix) <= 1e-8 * np.linalg.norm(wg.p_matrix)
    assert wg.rank_p == np.linalg.matrix_rank(g.gram_full, hermitian=True)


def test_system_pinv_matches_dense_inverse(inst):
    lam = 0.4
    A = inst.wg.M * (1 - lam) * inst.g.diag_full() + lam * inst.g.gram_full
    np.testing.assert_allclose(inst.wg.system_pinv(lam) @ A, np.eye(inst.wg.Q), atol=1e-7)
    rhs = inst.g.phi_y
    np.testing.assert_allclose(A @ inst.wg.solve(rhs, lam), rhs, atol=1e-11)


def test_filter_zero_branch():
    np.testing.assert_array_equal(filter_factors(np.array([2.0, 0.0]), 1.0, 3), [0.5, 0.0])
    np.testing.assert_allclose(filter_factors(np.array([2.0, 0.0]), 0.0, 3), [1 / 3, 1 / 3])


def test_dump_spectrum(tmp_path, small_inst):
    dump_spectrum(small_inst.wg, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "q,rho" and len(lines) == small_inst.wg.Q + 1
