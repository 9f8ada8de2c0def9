"""Noise mechanisms: gradient perturbation, input/output data noise, dropout.

Every randomized operation takes an explicit numpy Generator (or an RngStream,
which derives one); identical (seed, stream) pairs reproduce draws bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, UnsupportedDepth
from .linalg import as_matrix
from .netcore import Dataset, _layers, closed_form_gradient, left_right_products, product_matrix

NOISE_MODES = (
    "none",
    "gradient_gaussian",
    "input_gaussian",
    "output_gaussian",
    "dropout_bernoulli",
    "dropout_gaussian",
)

DROPOUT_MODES = ("dropout_bernoulli", "dropout_gaussian")


@dataclass(frozen=True)
class NoiseSpec:
    """Tagged noise mechanism. `param` is the mode's single parameter:

    gradient_gaussian -> sigma, input_gaussian -> beta (E[eps eps^T] = beta I),
    output_gaussian -> sigma_y, dropout_bernoulli -> drop probability p,
    dropout_gaussian -> sigma_d. Ignored for mode "none".
    """

    mode: str = "none"
    param: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in NOISE_MODES:
            raise InvalidInput(f"unknown noise mode {self.mode!r}")
        if self.mode == "dropout_bernoulli" and not 0.0 < self.param < 1.0:
            raise InvalidInput(f"drop probability must lie in (0, 1), got {self.param}")
        if self.mode == "input_gaussian" and self.param <= 0.0:
            raise InvalidInput(f"beta must be positive, got {self.param}")
        if self.mode in ("gradient_gaussian", "output_gaussian", "dropout_gaussian") and self.param < 0.0:
            raise InvalidInput(f"noise scale must be non-negative, got {self.param}")


@dataclass(frozen=True)
class RngStream:
    """Named substream of a seeded RNG; (seed, stream) identifies the draws bit-exactly."""

    seed: int = 0
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise InvalidInput(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def perturb_gradient(grad, sigma: float, rng) -> np.ndarray:
    """grad + E with i.i.d. zero-mean Gaussian entries of standard deviation sigma."""
    grad = as_matrix(grad, "grad")
    if sigma < 0:
        raise InvalidInput(f"sigma must be non-negative, got {sigma}")
    if sigma == 0.0:
        return grad.copy()
    return grad + sigma * _generator(rng).standard_normal(grad.shape)


def input_noise_phi(W, data: Dataset, eps, layer: int) -> np.ndarray:
    """The additive gradient term induced by replacing X with X + eps.

    phi = R_l [R eps X^T + R X eps^T + R eps eps^T - Y eps^T] R_r, so that
    closed_form_gradient at (X + eps, Y) equals the gradient at (X, Y) plus phi.
    """
    eps = as_matrix(eps, "eps")
    if eps.shape != data.X.shape:
        raise InvalidInput(f"eps shape {eps.shape} does not match X shape {data.X.shape}")
    R = product_matrix(W)
    Rl, Rr = left_right_products(W, layer)
    X, Y = data.X, data.Y
    inner = R @ eps @ X.T + R @ X @ eps.T + R @ eps @ eps.T - Y @ eps.T
    return Rl @ inner @ Rr


def output_noise_gradient(W, data: Dataset, eps_y, layer: int) -> np.ndarray:
    """Closed-form gradient evaluated at (X, Y + eps_y); linear in eps_y."""
    eps_y = as_matrix(eps_y, "eps_y")
    if eps_y.shape != data.Y.shape:
        raise InvalidInput(f"eps_y shape {eps_y.shape} does not match Y shape {data.Y.shape}")
    base = closed_form_gradient(W, data, layer)
    Rl, Rr = left_right_products(W, layer)
    return base - Rl @ eps_y @ data.X.T @ Rr


def sample_dropout_mask(shape, spec: NoiseSpec, rng) -> np.ndarray:
    """Multiplicative mask: {0,1} with P(1)=1-p for Bernoulli, N(1, sigma_d^2) for Gaussian."""
    if spec.mode not in DROPOUT_MODES:
        raise InvalidInput(f"not a dropout mode: {spec.mode!r}")
    gen = _generator(rng)
    if spec.mode == "dropout_bernoulli":
        return (gen.random(shape) >= spec.param).astype(np.float64)
    return 1.0 + spec.param * gen.standard_normal(shape)


def dropout_forward(W_k, Z, spec: NoiseSpec, rng) -> np.ndarray:
    """One dropout layer: W_k @ (Z * mask), mask resampled per call."""
    W_k = as_matrix(W_k, "W_k")
    Z = as_matrix(Z, "Z")
    mask = sample_dropout_mask(Z.shape, spec, rng)
    return W_k @ (Z * mask)


def _two_layer_product(W, data: Dataset):
    layers = _layers(W)
    if len(layers) != 2:
        raise UnsupportedDepth(f"closed form is stated for H=2 networks, got H={len(layers)}")
    RX = layers[1] @ layers[0] @ data.X
    residual = float(np.linalg.norm(data.Y - RX) ** 2)
    signal = float(np.linalg.norm(RX) ** 2)
    return residual, signal


def gaussian_dropout_expected_loss(W, data: Dataset, sigma_d: float) -> float:
    """E over Gaussian masks of ||Y - (W_2 * G) W_1 X||_F^2 in closed form.

    Equals ||Y - W_2 W_1 X||_F^2 + sigma_d^2 ||W_2 W_1 X||_F^2 when the mask draws
    one N(1, sigma_d^2) factor per output unit of W_2.
    """
    if sigma_d < 0:
        raise InvalidInput(f"sigma_d must be non-negative, got {sigma_d}")
    residual, signal = _two_layer_product(W, data)
    return residual + sigma_d**2 * signal


def input_noise_expected_loss(W, data: Dataset, beta: float) -> float:
    """E over eps with E[eps eps^T] = beta I of ||Y - W_2 W_1 X (I + eps)||_F^2.

    Closed form ||Y - W_2 W_1 X||_F^2 + beta ||W_2 W_1 X||_F^2; coincides with
    gaussian_dropout_expected_loss at beta = sigma_d^2.
    """
    if beta < 0:
        raise InvalidInput(f"beta must be non-negative, got {beta}")
    residual, signal = _two_layer_product(W, data)
    return residual + beta * signal
