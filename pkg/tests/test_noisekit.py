import numpy as np
import pytest

from ranklab.errors import InvalidInput, UnsupportedDepth
from ranklab.netcore import Dataset, NetworkWeights, closed_form_gradient
from ranklab.noisekit import (
    NoiseSpec,
    RngStream,
    dropout_forward,
    gaussian_dropout_expected_loss,
    input_noise_expected_loss,
    input_noise_phi,
    output_noise_gradient,
    perturb_gradient,
)


def test_noise_spec_validation():
    NoiseSpec("dropout_bernoulli", 0.3)
    with pytest.raises(InvalidInput):
        NoiseSpec("dropout_bernoulli", 1.0)
    with pytest.raises(InvalidInput):
        NoiseSpec("input_gaussian", 0.0)
    with pytest.raises(InvalidInput):
        NoiseSpec("gradient_gaussian", -0.1)
    with pytest.raises(InvalidInput):
        NoiseSpec("made_up", 0.1)


def test_rng_stream_reproducible():
    a = RngStream(123, 4).generator().standard_normal(10)
    b = RngStream(123, 4).generator().standard_normal(10)
    c = RngStream(123, 5).generator().standard_normal(10)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_perturb_gradient_sigma_zero_identity():
    g = np.arange(6.0).reshape(2, 3)
    out = perturb_gradient(g, 0.0, RngStream(0))
    np.testing.assert_array_equal(out, g)


def test_perturb_gradient_moments():
    """Monte-Carlo moment check: noise mean ~ 0, variance ~ sigma^2."""
    sigma = 0.7
    n = 100_000
    gen = RngStream(1, 0).generator()
    g = np.zeros((2, 2))
    draws = np.array([perturb_gradient(g, sigma, gen) for _ in range(n // 100)])
    # 1000 matrices of 4 entries = 4000 draws per entry position is thin; use flat pool
    flat = sigma * gen.standard_normal(n)  # same generator family, direct pool
    assert abs(draws.mean()) < 3 * sigma / np.sqrt(draws.size)
    assert np.var(flat) == pytest.approx(sigma**2, rel=0.05)
    assert np.var(draws) == pytest.approx(sigma**2, rel=0.05)


def scalar_setup(a=1.0, b=1.0, x=1.0, y=0.0):
    W = NetworkWeights([np.array([[b]]), np.array([[a]])])
    D = Dataset(X=np.array([[x]]), Y=np.array([[y]]))
    return W, D


def test_input_noise_phi_zero_eps():
    W, D = scalar_setup()
    phi = input_noise_phi(W, D, np.zeros((1, 1)), 0)
    np.testing.assert_array_equal(phi, np.zeros((1, 1)))


def test_input_noise_phi_scalar_hand_case():
    # a = b = x = 1, y = 0, eps = 0.1: phi_1 = a(ab(eps*x + x*eps + eps^2) - y*eps) = 0.21
    W, D = scalar_setup()
    phi = input_noise_phi(W, D, np.array([[0.1]]), 0)
    assert phi[0, 0] == pytest.approx(0.21, abs=1e-12)


def test_input_noise_identity_random():
    rng = np.random.default_rng(21)
    dims = [4, 3, 2]
    W = NetworkWeights([rng.standard_normal((3, 4)), rng.standard_normal((2, 3))])
    D = Dataset(X=rng.standard_normal((4, 6)), Y=rng.standard_normal((2, 6)))
    eps = 0.05 * rng.standard_normal((4, 6))
    noisy = Dataset(X=D.X + eps, Y=D.Y)
    for layer in range(2):
        lhs = closed_form_gradient(W, noisy, layer)
        rhs = closed_form_gradient(W, D, layer) + input_noise_phi(W, D, eps, layer)
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs) < 1e-8


def test_output_noise_gradient_zero_eps():
    W, D = scalar_setup(a=2.0, b=0.5, x=1.5, y=1.0)
    base = closed_form_gradient(W, D, 1)
    np.testing.assert_allclose(output_noise_gradient(W, D, np.zeros((1, 1)), 1), base)


def test_output_noise_gradient_linearity():
    rng = np.random.default_rng(22)
    W = NetworkWeights([rng.standard_normal((3, 4)), rng.standard_normal((2, 3))])
    D = Dataset(X=rng.standard_normal((4, 5)), Y=rng.standard_normal((2, 5)))
    eps = rng.standard_normal((2, 5))
    base = closed_form_gradient(W, D, 0)
    d1 = output_noise_gradient(W, D, eps, 0) - base
    d2 = output_noise_gradient(W, D, 2 * eps, 0) - base
    assert np.linalg.norm(d2 - 2 * d1) < 1e-10


def test_output_noise_gradient_scalar_shift():
    # a = b = x = 1, y = 0, eps_y = 0.5 -> gradient shifts by -0.5
    W, D = scalar_setup()
    base = closed_form_gradient(W, D, 0)
    shifted = output_noise_gradient(W, D, np.array([[0.5]]), 0)
    assert (shifted - base)[0, 0] == pytest.approx(-0.5)


def test_output_noise_matches_direct_evaluation():
    rng = np.random.default_rng(23)
    W = NetworkWeights([rng.standard_normal((3, 4)), rng.standard_normal((2, 3))])
    D = Dataset(X=rng.standard_normal((4, 5)), Y=rng.standard_normal((2, 5)))
    eps = 0.3 * rng.standard_normal((2, 5))
    for layer in range(2):
        direct = closed_form_gradient(W, Dataset(X=D.X, Y=D.Y + eps), layer)
        assert np.linalg.norm(output_noise_gradient(W, D, eps, layer) - direct) < 1e-10


def test_dropout_forward_gaussian_sigma_zero():
    rng = np.random.default_rng(24)
    Wk = rng.standard_normal((3, 4))
    Z = rng.standard_normal((4, 5))
    out = dropout_forward(Wk, Z, NoiseSpec("dropout_gaussian", 0.0), RngStream(0))
    np.testing.assert_allclose(out, Wk @ Z)


def test_dropout_forward_requires_dropout_mode():
    with pytest.raises(InvalidInput):
        dropout_forward(np.eye(2), np.eye(2), NoiseSpec("none"), RngStream(0))


def test_dropout_bernoulli_drop_fraction():
    p = 0.3
    n = 100_000
    gen = RngStream(2, 0).generator()
    Z = np.ones((1, n))
    out = dropout_forward(np.ones((1, 1)), Z, NoiseSpec("dropout_bernoulli", p), gen)
    frac = np.mean(out == 0.0)
    se = np.sqrt(p * (1 - p) / n)
    assert abs(frac - p) < 3 * se


def test_dropout_bernoulli_mean():
    p = 0.25
    rng = np.random.default_rng(25)
    Wk = rng.standard_normal((2, 3))
    Z = rng.standard_normal((3, 4))
    gen = RngStream(3, 0).generator()
    spec = NoiseSpec("dropout_bernoulli", p)
    n = 10_000
    acc = np.zeros((2, 4))
    for _ in range(n):
        acc += dropout_forward(Wk, Z, spec, gen)
    mean = acc / n
    target = Wk @ Z * (1 - p)
    # entrywise 3-SE band; per-entry SE bounded by |Wk| |Z| column sums
    scale = np.abs(Wk) @ np.abs(Z)
    assert np.all(np.abs(mean - target) <= 3 * scale * np.sqrt(p * (1 - p) / n) + 1e-12)


def test_gaussian_dropout_expected_loss_sigma_zero():
    rng = np.random.default_rng(26)
    W = NetworkWeights([rng.standard_normal((3, 4)), rng.standard_normal((2, 3))])
    D = Dataset(X=rng.standard_normal((4, 5)), Y=rng.standard_normal((2, 5)))
    R = W[1] @ W[0]
    plain = np.linalg.norm(D.Y - R @ D.X) ** 2
    assert gaussian_dropout_expected_loss(W, D, 0.0) == pytest.approx(plain)


def test_gaussian_dropout_expected_loss_scalar():
    # W2 = 2, W1 = 1, X = 1, Y = 0, sigma = 1: E[(2g)^2] = 4(1 + 1) = 8
    W = NetworkWeights([np.array([[1.0]]), np.array([[2.0]])])
    D = Dataset(X=np.array([[1.0]]), Y=np.array([[0.0]]))
    assert gaussian_dropout_expected_loss(W, D, 1.0) == pytest.approx(8.0)


def test_expected_loss_depth_check():
    W = NetworkWeights([np.eye(2)])
    D = Dataset(X=np.eye(2), Y=np.eye(2))
    with pytest.raises(UnsupportedDepth):
        gaussian_dropout_expected_loss(W, D, 0.5)
    with pytest.raises(UnsupportedDepth):
        input_noise_expected_loss(W, D, 0.25)


def test_dropout_input_noise_closed_forms_coincide():
    rng = np.random.default_rng(27)
    W = NetworkWeights([rng.standard_normal((3, 4)), rng.standard_normal((2, 3))])
    D = Dataset(X=rng.standard_normal((4, 6)), Y=rng.standard_normal((2, 6)))
    for sigma_d in (0.0, 0.1, 0.7, 2.0):
        a = gaussian_dropout_expected_loss(W, D, sigma_d)
        b = input_noise_expected_loss(W, D, sigma_d**2)
        assert a == pytest.approx(b, rel=1e-12)
