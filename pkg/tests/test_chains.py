import math

import numpy as np
import pytest

import chainforge as cf
from conftest import ENGINEERED8_COUPLINGS, SQRT185
from oracles import (
    dense_char_poly,
    dense_spectrum,
    project_single_flip,
    register_hamiltonian,
)


def random_chain(rng, n, with_fields=True):
    couplings = rng.uniform(0.4, 1.8, n - 1)
    fields = rng.uniform(-1.0, 1.0, n) if with_fields else np.zeros(n)
    return cf.ChainSpec(couplings, fields)


# ---------------------------------------------------------------------------
# ChainSpec / JacobiMatrix basics
# ---------------------------------------------------------------------------


def test_chain_spec_validates_lengths():
    with pytest.raises(ValueError):
        cf.ChainSpec([1.0, 1.0], [0.0, 0.0])


def test_zero_coupling_is_reducible():
    with pytest.raises(cf.ReducibleChainError):
        cf.ChainSpec([1.0, 0.0, 1.0], np.zeros(4))


def test_positive_gauge_is_canonical():
    spec = cf.ChainSpec([-1.0, 2.0, -3.0], np.zeros(4))
    assert np.all(spec.couplings > 0)
    np.testing.assert_allclose(spec.couplings, [1.0, 2.0, 3.0])


def test_single_site_chain_allowed():
    spec = cf.ChainSpec([], [0.7])
    assert spec.n_sites == 1


def test_build_hamiltonian_two_site_uniform():
    m = cf.build_hamiltonian(cf.ChainSpec([1.0], [0.0, 0.0]))
    np.testing.assert_allclose(m.to_dense(), [[0.0, 1.0], [1.0, 0.0]])


def test_build_hamiltonian_engineered8(engineered8):
    m = cf.build_hamiltonian(engineered8)
    np.testing.assert_allclose(m.offdiag, ENGINEERED8_COUPLINGS)
    np.testing.assert_allclose(m.diag, 0.0)


def test_build_hamiltonian_example2_chain():
    j = math.sqrt(1.5)
    spec = cf.ChainSpec([1.0, j, 1.0, 1.0, 1.0, j, 1.0], np.zeros(8))
    m = cf.build_hamiltonian(spec)
    assert m.size == 8
    np.testing.assert_allclose(m.offdiag, [1.0, j, 1.0, 1.0, 1.0, j, 1.0])


def test_single_flip_block_matches_register_oracle():
    # oracle: project the full 2^N Pauli Hamiltonian onto the one-flip basis
    rng = np.random.default_rng(11)
    for n in (2, 4, 6, 8):
        spec = random_chain(rng, n)
        h, offset = register_hamiltonian(spec.couplings, spec.fields)
        block = project_single_flip(h, n)
        expected = cf.build_hamiltonian(spec).to_dense() + offset * np.eye(n)
        np.testing.assert_allclose(block, expected, atol=1e-12)


# ---------------------------------------------------------------------------
# mirror symmetry and folding
# ---------------------------------------------------------------------------


def test_mirror_symmetric_uniform():
    assert cf.mirror_symmetric(cf.uniform_chain(6))


def test_mirror_symmetric_engineered8(engineered8):
    assert cf.mirror_symmetric(engineered8)


def test_mirror_symmetric_false():
    assert not cf.mirror_symmetric(cf.ChainSpec([1.0, 2.0], np.zeros(3)))


def test_fold_four_site_uniform():
    plus, minus = cf.fold_symmetric(cf.uniform_chain(4))
    np.testing.assert_allclose(plus.to_dense(), [[0.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(minus.to_dense(), [[0.0, 1.0], [1.0, -1.0]])


def test_fold_two_site_uniform():
    plus, minus = cf.fold_symmetric(cf.uniform_chain(2))
    np.testing.assert_allclose(plus.to_dense(), [[1.0]])
    np.testing.assert_allclose(minus.to_dense(), [[-1.0]])


def test_fold_six_site_union_matches_dense():
    spec = cf.uniform_chain(6)
    plus, minus = cf.fold_symmetric(spec)
    union = np.sort(
        np.concatenate(
            [cf.eigendecompose(plus).eigenvalues, cf.eigendecompose(minus).eigenvalues]
        )
    )
    ref = dense_spectrum(spec.couplings, spec.fields)
    np.testing.assert_allclose(union, ref, atol=1e-12)


def test_fold_requires_symmetry():
    with pytest.raises(cf.NotMirrorSymmetricError):
        cf.fold_symmetric(cf.ChainSpec([1.0, 2.0], np.zeros(3)))


@pytest.mark.parametrize("n", [3, 5, 9])
def test_fold_odd_lengths(n):
    rng = np.random.default_rng(n)
    half = rng.uniform(0.5, 1.5, n // 2)
    couplings = np.concatenate([half, half[::-1]])
    fields_half = rng.uniform(-0.5, 0.5, (n + 1) // 2)
    fields = np.concatenate([fields_half, fields_half[-2::-1]])
    spec = cf.ChainSpec(couplings, fields)
    plus, minus = cf.fold_symmetric(spec)
    assert plus.size == n // 2 + 1 and minus.size == n // 2
    union = np.sort(
        np.concatenate(
            [cf.eigendecompose(plus).eigenvalues, cf.eigendecompose(minus).eigenvalues]
        )
    )
    np.testing.assert_allclose(union, dense_spectrum(spec.couplings, spec.fields), atol=1e-10)


def test_fold_union_and_alternating_labels_random():
    # spectrum union invariant over random even mirror-symmetric chains
    rng = np.random.default_rng(20)
    for _ in range(25):
        n = 2 * rng.integers(2, 15)
        half = rng.uniform(0.4, 1.6, n // 2)
        couplings = np.concatenate([half[:-1], half[::-1]])
        fh = rng.uniform(-0.8, 0.8, n // 2)
        fields = np.concatenate([fh, fh[::-1]])
        spec = cf.ChainSpec(couplings, fields)
        dec = cf.eigendecompose(cf.build_hamiltonian(spec))
        plus, minus = cf.fold_symmetric(spec)
        union = np.sort(
            np.concatenate(
                [cf.eigendecompose(plus).eigenvalues, cf.eigendecompose(minus).eigenvalues]
            )
        )[::-1]
        scale = np.max(np.abs(dec.eigenvalues))
        np.testing.assert_allclose(union, dec.eigenvalues, atol=1e-10 * max(scale, 1))
        assert dec.symmetry_labels is not None
        assert all(
            a != b for a, b in zip(dec.symmetry_labels, dec.symmetry_labels[1:])
        )
        assert dec.symmetry_labels[0] == "+"


# ---------------------------------------------------------------------------
# eigendecompose
# ---------------------------------------------------------------------------


def test_eigendecompose_two_site():
    dec = cf.eigendecompose(cf.JacobiMatrix([0.0, 0.0], [1.0]))
    np.testing.assert_allclose(dec.eigenvalues, [1.0, -1.0])
    s = 1.0 / math.sqrt(2.0)
    np.testing.assert_allclose(np.abs(dec.eigenvectors), [[s, s], [s, s]], atol=1e-15)
    assert dec.symmetry_labels == ("+", "-")


def test_eigendecompose_engineered8_spectrum(engineered8):
    dec = cf.eigendecompose(cf.build_hamiltonian(engineered8))
    ref = SQRT185 * np.array([10, 6, 2, 1, -1, -2, -6, -10], dtype=float)
    np.testing.assert_allclose(dec.eigenvalues, ref, rtol=1e-12)


def test_eigendecompose_uniform40_cosine_spectrum():
    dec = cf.eigendecompose(cf.build_hamiltonian(cf.uniform_chain(40)))
    ref = 2.0 * np.cos(np.pi * np.arange(1, 41) / 41.0)
    np.testing.assert_allclose(dec.eigenvalues, ref, atol=1e-13)


def test_eigendecompose_residuals_and_orthonormality():
    rng = np.random.default_rng(5)
    spec = random_chain(rng, 30)
    m = cf.build_hamiltonian(spec)
    dec = cf.eigendecompose(m)
    dense = m.to_dense()
    scale = np.max(np.abs(dec.eigenvalues))
    for k in range(30):
        v = dec.eigenvectors[:, k]
        res = np.linalg.norm(dense @ v - dec.eigenvalues[k] * v)
        assert res <= 1e-12 * scale
    np.testing.assert_allclose(
        dec.eigenvectors.T @ dec.eigenvectors, np.eye(30), atol=1e-12
    )
    assert np.all(np.diff(dec.eigenvalues) < 0)


def test_gauge_invariance_of_moduli():
    # flipping coupling signs leaves every |eigenvector entry| unchanged
    rng = np.random.default_rng(8)
    base = rng.uniform(0.5, 1.5, 7)
    fields = rng.uniform(-0.5, 0.5, 8)
    signs = rng.choice([-1.0, 1.0], 7)
    dec_pos = cf.eigendecompose(cf.JacobiMatrix(fields, base))
    dec_flip = cf.eigendecompose(cf.JacobiMatrix(fields, base * signs))
    np.testing.assert_allclose(dec_pos.eigenvalues, dec_flip.eigenvalues, atol=1e-12)
    np.testing.assert_allclose(
        np.abs(dec_pos.eigenvectors), np.abs(dec_flip.eigenvectors), atol=1e-10
    )


# ---------------------------------------------------------------------------
# characteristic polynomials
# ---------------------------------------------------------------------------


def test_char_poly_single_site():
    assert cf.char_poly_eval(cf.JacobiMatrix([0.0], []), 3.0) == (3.0, 1.0)


def test_char_poly_folded_block_values():
    plus, _ = cf.fold_symmetric(cf.uniform_chain(4))
    q, p = cf.char_poly_eval(plus, 2.0)
    assert q == pytest.approx(2.0 * (2.0 - 1.0) - 1.0)
    assert p == pytest.approx(2.0 - 1.0)


def test_char_poly_against_dense_determinant():
    rng = np.random.default_rng(13)
    spec = random_chain(rng, 6)
    m = cf.build_hamiltonian(spec)
    for x in rng.uniform(-3, 3, 10):
        q, p = cf.char_poly_eval(m, x)
        q_ref, p_ref = dense_char_poly(spec.fields, spec.couplings, x)
        assert q == pytest.approx(q_ref, rel=1e-10, abs=1e-10)
        assert p == pytest.approx(p_ref, rel=1e-10, abs=1e-10)


def test_char_poly_vanishes_on_spectrum():
    rng = np.random.default_rng(17)
    spec = random_chain(rng, 25)
    m = cf.build_hamiltonian(spec)
    dec = cf.eigendecompose(m)
    scale = np.max(np.abs(dec.eigenvalues))
    for k, lam in enumerate(dec.eigenvalues):
        q, _ = cf.char_poly_eval(m, lam)
        dq = np.prod(lam - np.delete(dec.eigenvalues, k))
        assert abs(q) <= 1e-8 * abs(dq) * scale


def test_char_poly_rescaling_survives_long_chains():
    # raw recurrence values overflow doubles near n ~ 1000 at x outside the band
    spec = cf.uniform_chain(2000)
    m = cf.build_hamiltonian(spec)
    from chainforge.chains import _char_poly_scaled

    q, p, e = _char_poly_scaled(m.diag, m.offdiag, 2.5)
    assert np.isfinite(q) and np.isfinite(p)
    assert e > 0


def test_char_poly_coeffs_match_eval():
    rng = np.random.default_rng(23)
    spec = random_chain(rng, 9)
    m = cf.build_hamiltonian(spec)
    qc, pc = cf.char_poly_coeffs(m)
    for x in rng.uniform(-2, 2, 6):
        q, p = cf.char_poly_eval(m, x)
        assert np.polynomial.polynomial.polyval(x, qc) == pytest.approx(q, rel=1e-9)
        assert np.polynomial.polynomial.polyval(x, pc) == pytest.approx(p, rel=1e-9)


# ---------------------------------------------------------------------------
# engineered transfer chain
# ---------------------------------------------------------------------------


def test_make_pst_chain_two_sites():
    spec = cf.make_pst_chain(2, 0.3)
    np.testing.assert_allclose(spec.couplings, [0.3])


def test_make_pst_chain_four_sites_equally_spaced():
    # scale chosen so the middle coupling is 1
    spec = cf.make_pst_chain(4, 0.5)
    np.testing.assert_allclose(spec.couplings, [math.sqrt(3.0) / 2.0, 1.0, math.sqrt(3.0) / 2.0])
    dec = cf.eigendecompose(cf.build_hamiltonian(spec))
    gaps = np.diff(dec.eigenvalues)
    np.testing.assert_allclose(gaps, gaps[0], rtol=1e-12)


def test_make_pst_chain_binomial_end_weights():
    from scipy.stats import binom

    n = 20
    dec = cf.eigendecompose(cf.build_hamiltonian(cf.make_pst_chain(n, 1.0)))
    weights = dec.eigenvectors[0] ** 2
    ref = binom.pmf(np.arange(n), n - 1, 0.5)
    np.testing.assert_allclose(np.sort(weights), np.sort(ref), atol=1e-12)


# ---------------------------------------------------------------------------
# region partition and chain files
# ---------------------------------------------------------------------------


def test_region_partition_sites():
    part = cf.RegionPartition(8, 3, 3)
    np.testing.assert_array_equal(part.input_sites, [0, 1, 2])
    np.testing.assert_array_equal(part.output_sites, [5, 6, 7])
    np.testing.assert_array_equal(part.bulk_sites, [3, 4])


def test_region_partition_rejects_non_mirror():
    with pytest.raises(ValueError):
        cf.RegionPartition(8, 3, 2)
    with pytest.raises(ValueError):
        cf.RegionPartition(4, 3, 3)


def test_chain_json_roundtrip(tmp_path):
    rng = np.random.default_rng(31)
    spec = random_chain(rng, 12)
    path = tmp_path / "chain.json"
    cf.save_chain(spec, str(path), comment="roundtrip")
    loaded = cf.load_chain(str(path))
    # decimal output must round-trip doubles exactly
    assert np.array_equal(loaded.couplings, spec.couplings)
    assert np.array_equal(loaded.fields, spec.fields)


def test_load_chain_rejects_bad_schema(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"couplings": [1.0]}')
    with pytest.raises(cf.InputError):
        cf.load_chain(str(path))
