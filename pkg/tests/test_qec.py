import numpy as np
import pytest
from scipy.linalg import sqrtm
from scipy.stats import spearmanr

from pnrqec.channels import KrausSet, compose, dephasing_kraus, identity_kraus, loss_kraus
from pnrqec.codesearch import rotated_pair
from pnrqec.fockspace import DimensionMismatch, FockVector
from pnrqec.qec import (
    CodePair,
    channel_fidelity,
    dephasing_fidelity,
    fidelity,
    fidelity_from_images,
    kl_epsilon,
    kraus_images,
    loss_fidelity,
    qec_matrix,
)


def brute_qec(words, ops):
    K = len(ops)
    M = np.zeros((2 * K, 2 * K), dtype=complex)
    for mu in range(2):
        for nu in range(2):
            for l in range(K):
                for k in range(K):
                    M[mu * K + l, nu * K + k] = words[mu].conj() @ ops[l].conj().T @ ops[k] @ words[nu]
    return M


def brute_fidelity(words, ops):
    """Transpose-channel fidelity built from scratch: sqrtm, then trace out the code index."""
    M = brute_qec(words, ops)
    K = len(ops)
    root = sqrtm(M)
    reduced = sum(root[mu * K : (mu + 1) * K, mu * K : (mu + 1) * K] for mu in range(2))
    return np.sum(np.abs(reduced) ** 2).real / 4


@pytest.fixture(scope="module")
def m2_pair():
    return rotated_pair(2, 2.0)


def test_qec_matrix_identity():
    pair = CodePair(FockVector.fock(0, 3), FockVector.fock(1, 3))
    assert np.allclose(qec_matrix(pair, identity_kraus(3)).entries, np.eye(2))


def test_qec_matrix_lossless():
    pair = CodePair(FockVector.fock(0, 3), FockVector.fock(2, 3))
    M = qec_matrix(pair, loss_kraus(0.0, 3)).entries
    K = 4
    expected = np.zeros((2 * K, 2 * K))
    expected[0, 0] = expected[K, K] = 1.0
    assert np.allclose(M, expected)


def test_qec_matrix_brute_force():
    rng = np.random.default_rng(11)
    ops = rng.normal(size=(3, 5, 5)) + 1j * rng.normal(size=(3, 5, 5))
    w0 = FockVector.from_amplitudes(rng.normal(size=5) + 1j * rng.normal(size=5))
    w1 = FockVector.from_amplitudes(rng.normal(size=5))
    M = qec_matrix(CodePair(w0, w1), KrausSet(ops, "generic")).entries
    assert np.allclose(M, brute_qec([w0.amplitudes, w1.amplitudes], ops))


def test_fidelity_identity_and_lossless(m2_pair):
    N = m2_pair.cutoff
    assert channel_fidelity(qec_matrix(m2_pair, identity_kraus(N))) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(m2_pair, loss_kraus(0.0, N)) == pytest.approx(1.0, abs=1e-9)
    assert channel_fidelity(qec_matrix(m2_pair, loss_kraus(0.0, N))) == pytest.approx(1.0, abs=1e-9)


def test_fock_fixture_dual_implementation():
    N = 6
    pair = CodePair(FockVector.fock(0, N), FockVector.fock(1, N))
    kraus = loss_kraus(0.1, N)
    ref = brute_fidelity([pair.word0.amplitudes, pair.word1.amplitudes], kraus.operators)
    assert channel_fidelity(qec_matrix(pair, kraus)) == pytest.approx(ref, abs=1e-12)
    assert fidelity(pair, kraus) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("gamma", [0.01, 0.1, 0.3])
def test_loss_routes_agree(m2_pair, gamma):
    kraus = loss_kraus(gamma, m2_pair.cutoff)
    ref = brute_fidelity([m2_pair.word0.amplitudes, m2_pair.word1.amplitudes], kraus.operators)
    assert channel_fidelity(qec_matrix(m2_pair, kraus)) == pytest.approx(ref, abs=1e-10)
    assert loss_fidelity(m2_pair.word0, m2_pair.word1, gamma) == pytest.approx(ref, abs=1e-10)
    images = kraus_images(kraus, m2_pair.word0), kraus_images(kraus, m2_pair.word1)
    assert fidelity_from_images(*images) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("gp", [0.01, 0.1])
def test_dephasing_routes_agree(m2_pair, gp):
    kraus = dephasing_kraus(gp, m2_pair.cutoff)
    literal = channel_fidelity(qec_matrix(m2_pair, kraus))
    assert dephasing_fidelity(m2_pair.word0, m2_pair.word1, gp) == pytest.approx(literal, abs=1e-10)
    assert fidelity(m2_pair, kraus) == pytest.approx(literal, abs=1e-10)


def test_composed_channel_route(m2_pair):
    N = m2_pair.cutoff
    both = compose(loss_kraus(0.05, N), dephasing_kraus(0.01, N))
    assert fidelity(m2_pair, both) == pytest.approx(channel_fidelity(qec_matrix(m2_pair, both)), abs=1e-10)


def test_fidelity_bounded_and_swap_invariant(m2_pair):
    F = loss_fidelity(m2_pair.word0, m2_pair.word1, 0.1)
    assert 0.0 < F <= 1.0
    sw = m2_pair.swapped()
    assert loss_fidelity(sw.word0, sw.word1, 0.1) == pytest.approx(F, abs=1e-12)


def test_kl_epsilon_identity(m2_pair):
    # only the residual overlap of the solved pair remains
    eps = kl_epsilon(m2_pair, identity_kraus(m2_pair.cutoff))
    assert eps <= m2_pair.orthogonality_residual + 1e-12
    exact = CodePair(FockVector.fock(0, 3), FockVector.fock(2, 3))
    assert kl_epsilon(exact, identity_kraus(3)) == 0.0


def test_kl_epsilon_hand_computed():
    # K = {I, a} on |0>, |1> at N = 2: the (I, a) block is [[0, 1], [0, 0]] with norm 1,
    # the (a, a) block diag(0, 1) deviates from 1/2 I by 1/2
    a = np.diag([1.0, np.sqrt(2)], k=1)
    kraus = KrausSet(np.stack([np.eye(3), a]), "generic")
    pair = CodePair(FockVector.fock(0, 2), FockVector.fock(1, 2))
    assert kl_epsilon(pair, kraus) == pytest.approx(1.0)


def test_kl_epsilon_tracks_fidelity(m2_pair):
    gammas = np.linspace(0.005, 0.3, 12)
    F = [loss_fidelity(m2_pair.word0, m2_pair.word1, g) for g in gammas]
    eps = [kl_epsilon(m2_pair, loss_kraus(g, m2_pair.cutoff)) for g in gammas]
    assert spearmanr(eps, F).statistic <= -0.9


def test_dimension_checks():
    pair = CodePair(FockVector.fock(0, 3), FockVector.fock(1, 3))
    with pytest.raises(DimensionMismatch):
        qec_matrix(pair, loss_kraus(0.1, 4))
    with pytest.raises(DimensionMismatch):
        CodePair(FockVector.fock(0, 3), FockVector.fock(1, 4))
