import numpy as np
import pytest

from audioeeg.linalg import (
    LinearCCA,
    covariances,
    eig_sym,
    inv_sqrt_sym,
)
from audioeeg.validation import NumericError, ValidationError


def two_pass_covariance(x, y):
    """Independent oracle: naive two-pass covariance, loops only."""
    n, dx = x.shape
    dy = y.shape[1]
    mx = [sum(x[i, j] for i in range(n)) / n for j in range(dx)]
    my = [sum(y[i, j] for i in range(n)) / n for j in range(dy)]
    cxy = np.zeros((dx, dy))
    for a in range(dx):
        for b in range(dy):
            cxy[a, b] = sum((x[i, a] - mx[a]) * (y[i, b] - my[b]) for i in range(n)) / (n - 1)
    return cxy


class TestCovariances:
    def test_hand_computed_n2(self):
        x = np.array([[1.0], [-1.0]])
        cov = covariances(x, x, reg=0.0)
        assert cov.cxx[0, 0] == pytest.approx(2.0)
        assert cov.cyy[0, 0] == pytest.approx(2.0)
        assert cov.cxy[0, 0] == pytest.approx(2.0)

    def test_constant_column_gets_only_ridge(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((50, 3))
        x[:, 1] = 4.2
        cov = covariances(x, x, reg=1e-4)
        assert cov.cxx[1, 1] == pytest.approx(1e-4, rel=1e-9)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((1000, 3))
        y = rng.standard_normal((1000, 3))
        cov = covariances(x, y, reg=0.0)
        assert np.abs(cov.cxy - two_pass_covariance(x, y)).max() < 1e-12
        assert np.abs(cov.cxx - two_pass_covariance(x, x)).max() < 1e-12

    def test_cross_term_not_regularized(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((100, 2))
        y = rng.standard_normal((100, 2))
        assert np.allclose(covariances(x, y, reg=1.0).cxy, covariances(x, y, reg=0.0).cxy)

    def test_symmetry_and_errors(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((20, 4))
        cov = covariances(x, x)
        assert np.abs(cov.cxx - cov.cxx.T).max() < 1e-10
        with pytest.raises(ValidationError):
            covariances(x[:1], x[:1])
        with pytest.raises(ValidationError):
            covariances(x, x[:10])
        bad = x.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValidationError):
            covariances(bad, x)


class TestEigSym:
    def test_diagonal(self):
        dec = eig_sym(np.diag([3.0, 1.0]))
        assert dec.eigenvalues == pytest.approx([3.0, 1.0])
        assert np.abs(np.abs(dec.eigenvectors) - np.eye(2)).max() < 1e-12

    def test_classic_2x2(self):
        dec = eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert dec.eigenvalues == pytest.approx([3.0, 1.0])
        r = 1 / np.sqrt(2)
        assert dec.eigenvectors[:, 0] == pytest.approx([r, r])
        assert np.abs(dec.eigenvectors[:, 1]) == pytest.approx([r, r])

    def test_reconstruction_oracle(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((8, 8))
        a = (a + a.T) / 2
        dec = eig_sym(a)
        recon = (dec.eigenvectors * dec.eigenvalues) @ dec.eigenvectors.T
        rel = np.linalg.norm(recon - a) / np.linalg.norm(a)
        assert rel < 1e-8
        ortho = dec.eigenvectors.T @ dec.eigenvectors
        assert np.abs(ortho - np.eye(8)).max() < 1e-10

    def test_eigenvalue_sum_equals_trace(self):
        rng = np.random.default_rng(5)
        for n in (2, 5, 17):
            a = rng.standard_normal((n, n))
            a = (a + a.T) / 2
            dec = eig_sym(a)
            assert dec.eigenvalues.sum() == pytest.approx(np.trace(a), abs=1e-10)

    def test_sign_convention_reproducible(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((6, 6))
        a = (a + a.T) / 2
        v1 = eig_sym(a).eigenvectors
        v2 = eig_sym(a.copy()).eigenvectors
        assert np.array_equal(v1, v2)
        hits = v1[np.argmax(np.abs(v1), axis=0), np.arange(6)]
        assert np.all(hits > 0)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValidationError):
            eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestInvSqrtSym:
    def test_identity(self):
        assert np.allclose(inv_sqrt_sym(np.eye(4)), np.eye(4), atol=1e-12)

    def test_diagonal_powers(self):
        out = inv_sqrt_sym(np.diag([4.0, 9.0]))
        assert out == pytest.approx(np.diag([0.5, 1.0 / 3.0]))

    @pytest.mark.parametrize("n", [2, 8, 33, 64])
    def test_multiplicative_identity_oracle(self, n):
        rng = np.random.default_rng(n)
        b = rng.standard_normal((n, n))
        a = b @ b.T + 0.5 * np.eye(n)
        r = inv_sqrt_sym(a)
        assert np.linalg.norm(r @ a @ r - np.eye(n)) < 1e-8
        assert np.abs(r - r.T).max() < 1e-10

    def test_nonpositive_spectrum_rejected(self):
        with pytest.raises(NumericError):
            inv_sqrt_sym(np.diag([1.0, -2.0]), eigen_floor=-5.0)


class TestLinearCCA:
    def test_self_correlation(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((500, 4))
        model = LinearCCA(n_components=4, reg=1e-6).fit(x, x)
        assert np.all(model.correlations_ >= 0.999)

    def test_independent_views_low_correlation(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((5000, 2))
        y = rng.standard_normal((5000, 2))
        model = LinearCCA(n_components=2, reg=1e-6).fit(x, y)
        assert np.all(model.correlations_ < 0.1)

    def test_shared_gaussian_latent_closed_form(self):
        # x = z + ex, y = z + ey with unit variances: corr = 1/sqrt(2*2) = 0.5
        rng = np.random.default_rng(9)
        n = 20000
        z = rng.standard_normal((n, 1))
        x = z + rng.standard_normal((n, 1))
        y = z + rng.standard_normal((n, 1))
        model = LinearCCA(n_components=1, reg=1e-6).fit(x, y)
        assert abs(model.correlations_[0] - 0.5) < 0.03

    def test_transform_unit_variance_on_fit_data(self):
        rng = np.random.default_rng(10)
        z = rng.standard_normal((400, 3))
        x = z @ rng.standard_normal((3, 5)) + 0.1 * rng.standard_normal((400, 5))
        y = z @ rng.standard_normal((3, 4)) + 0.1 * rng.standard_normal((400, 4))
        model = LinearCCA(n_components=3).fit(x, y)
        for view, data in (("x", x), ("y", y)):
            scores = model.transform(data, view=view)
            assert scores.std(axis=0, ddof=1) == pytest.approx(np.ones(3), abs=1e-6)

    def test_mean_row_maps_to_zero(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((50, 3))
        y = rng.standard_normal((50, 3))
        model = LinearCCA(n_components=2).fit(x, y)
        out = model.transform(x.mean(axis=0)[None, :], view="x")
        assert np.abs(out).max() < 1e-10

    def test_correlations_affine_invariant(self):
        rng = np.random.default_rng(12)
        z = rng.standard_normal((2000, 2))
        x = z @ rng.standard_normal((2, 4)) + rng.standard_normal((2000, 4)) * 0.5
        y = z @ rng.standard_normal((2, 3)) + rng.standard_normal((2000, 3)) * 0.5
        base = LinearCCA(n_components=2, reg=1e-10).fit(x, y).correlations_
        a = rng.standard_normal((4, 4)) + 2 * np.eye(4)
        b = rng.standard_normal((3, 3)) + 2 * np.eye(3)
        moved = LinearCCA(n_components=2, reg=1e-10).fit(x @ a + 1.5, y @ b - 0.7).correlations_
        assert moved == pytest.approx(base, abs=1e-6)

    def test_dimension_checks(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal((30, 2))
        with pytest.raises(ValidationError):
            LinearCCA(n_components=3).fit(x, y)  # k > min(dx, dy)
        model = LinearCCA(n_components=2).fit(x, y)
        with pytest.raises(ValidationError):
            model.transform(y, view="x")
