import numpy as np

from ncgopt.sampling import generator
from ncgopt.tridiag import smallest_eigenpair, smallest_eigenvalue, tridiag_eigh


def dense(diag, off):
    k = len(diag)
    t = np.diag(diag).astype(float)
    for i in range(k - 1):
        t[i, i + 1] = t[i + 1, i] = off[i]
    return t


def test_against_dense_eigensolver():
    rng = generator(77, stream=5)
    for trial in range(80):
        k = int(rng.integers(1, 41))
        d = rng.standard_normal(k) * 3.0
        e = rng.standard_normal(max(k - 1, 0)) * 2.0
        w, z = tridiag_eigh(d, e)
        ref = np.linalg.eigvalsh(dense(d, e))
        np.testing.assert_allclose(np.sort(w), ref, atol=1e-10 * max(1.0, np.max(np.abs(ref))))
        t = dense(d, e)
        residual = t @ z - z * w[None, :]
        assert np.max(np.abs(residual)) <= 1e-9 * max(1.0, np.max(np.abs(t)))
        # Columns stay orthonormal.
        assert np.max(np.abs(z.T @ z - np.eye(k))) <= 1e-10


def test_values_only_mode_agrees():
    rng = generator(78, stream=5)
    d = rng.standard_normal(17)
    e = rng.standard_normal(16)
    w_only, z_none = tridiag_eigh(d, e, vectors=False)
    w_full, _ = tridiag_eigh(d, e, vectors=True)
    assert z_none is None
    np.testing.assert_allclose(np.sort(w_only), np.sort(w_full), atol=1e-12)


def test_smallest_helpers():
    d = np.array([2.0, -1.0, 4.0])
    e = np.array([0.5, 0.25])
    ref = np.linalg.eigvalsh(dense(d, e))
    assert abs(smallest_eigenvalue(d, e) - ref[0]) <= 1e-12
    val, vec = smallest_eigenpair(d, e)
    assert abs(val - ref[0]) <= 1e-12
    t = dense(d, e)
    assert np.linalg.norm(t @ vec - val * vec) <= 1e-10


def test_constant_diagonal_block():
    # Zero diagonal with couplings exercises the splitting criterion.
    d = np.zeros(6)
    e = np.ones(5)
    w, _ = tridiag_eigh(d, e)
    ref = np.linalg.eigvalsh(dense(d, e))
    np.testing.assert_allclose(np.sort(w), ref, atol=1e-10)
