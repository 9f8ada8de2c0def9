"""Numerical certification suite: every rank/noise/dropout claim as a falsifiable check.

Each check runs seeded random trials, records the number of failures and the
worst observed violation, and is deterministic for a fixed RngStream. Reports
serialize to one line: `name trials failures worst_violation pass`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FullRankError
from .linalg import matrix_cosine, numerical_rank, rank_bump, spectral_norm
from .netcore import (
    Activation,
    Dataset,
    NetworkWeights,
    backprop_gradients,
    closed_form_gradient,
    finite_difference_gradient,
)
from .noisekit import (
    NoiseSpec,
    RngStream,
    gaussian_dropout_expected_loss,
    input_noise_expected_loss,
    input_noise_phi,
)
from .trainer import sgd_gradient_stats, stacked_gradient


@dataclass(frozen=True)
class OracleReport:
    name: str
    trials: int
    failures: int
    worst_violation: float
    passed: bool

    def format_line(self) -> str:
        return (
            f"{self.name} {self.trials} {self.failures} "
            f"{self.worst_violation:.6e} {'pass' if self.passed else 'FAIL'}"
        )


def _gen(rng):
    return rng.generator() if isinstance(rng, RngStream) else rng


def _random_rank_matrix(gen, rows, cols, rank, low=-3, high=4, attempts=50):
    """Integer-valued matrix of exact numerical rank `rank`."""
    if rank == 0:
        return np.zeros((rows, cols))
    for _ in range(attempts):
        A = gen.integers(low, high, size=(rows, rank)) @ gen.integers(low, high, size=(rank, cols))
        A = A.astype(np.float64)
        if numerical_rank(A) == rank:
            return A
    raise RuntimeError(f"could not draw a rank-{rank} {rows}x{cols} integer matrix")


def _bump_times(A, k):
    """Apply the rank-bump operator k times, halving eps below sigma_r each round."""
    for _ in range(k):
        s = np.linalg.svd(A, compute_uv=False)
        r = numerical_rank(A)
        eps = 0.5 * s[r - 1] if r > 0 else 1.0
        A = rank_bump(A, eps)
    return A


def check_rank_lemmas(trials: int = 500, max_dim: int = 12, rng=RngStream(0)) -> OracleReport:
    """Rank inequalities for products of bumped matrices.

    Cycles three claims: r(A Bhat) >= r(AB) given r_A >= n-k and r_B = n-k;
    r(Ahat B) >= r(AB) given r_A = n-k; r(Ahat Bhat) >= r(AB) given
    r_A + r_B = n - 2k. Generators self-check every precondition.
    """
    gen = _gen(rng)
    failures = 0
    worst = 0.0
    for trial in range(trials):
        variant = trial % 3
        k = int(gen.integers(1, 3))
        if variant == 2:
            n = int(gen.integers(2 * k + 2, max_dim + 1))
        else:
            n = int(gen.integers(k + 2, max_dim + 1))
        m = int(gen.integers(n, max_dim + 1))
        p = int(gen.integers(n, max_dim + 1))

        if variant == 0:
            r_a = int(gen.integers(n - k, min(m, n) + 1))
            r_b = n - k
            A = _random_rank_matrix(gen, m, n, r_a)
            B = _random_rank_matrix(gen, n, p, r_b)
            assert numerical_rank(A) >= n - k and numerical_rank(B) == n - k
            A_eff, B_eff = A, _bump_times(B, k)
            assert numerical_rank(B_eff) == r_b + k
        elif variant == 1:
            r_a = n - k
            r_b = int(gen.integers(1, min(n, p) + 1))
            A = _random_rank_matrix(gen, m, n, r_a)
            B = _random_rank_matrix(gen, n, p, r_b)
            assert numerical_rank(A) == n - k
            A_eff, B_eff = _bump_times(A, k), B
            assert numerical_rank(A_eff) == r_a + k
        else:
            r_a = int(gen.integers(1, n - 2 * k))
            r_b = n - 2 * k - r_a
            if r_b < 1:
                r_a, r_b = 1, n - 2 * k - 1
            A = _random_rank_matrix(gen, m, n, r_a)
            B = _random_rank_matrix(gen, n, p, r_b)
            assert numerical_rank(A) + numerical_rank(B) == n - 2 * k
            A_eff, B_eff = _bump_times(A, k), _bump_times(B, k)
            assert numerical_rank(A_eff) == r_a + k and numerical_rank(B_eff) == r_b + k

        base = numerical_rank(A @ B)
        bumped = numerical_rank(A_eff @ B_eff)
        if bumped < base:
            failures += 1
            worst = max(worst, float(base - bumped))
    return OracleReport("rank_lemmas", trials, failures, worst, failures == 0)


def check_rank_bump_lemmas(trials: int = 200, rng=RngStream(1)) -> OracleReport:
    """Rank bump raises rank by exactly one at spectral distance eps, with positive
    cosine matching the closed form sqrt(S / (S + eps^2))."""
    gen = _gen(rng)
    failures = 0
    worst = 0.0
    for trial in range(trials):
        rows = int(gen.integers(2, 21))
        cols = int(gen.integers(2, 21))
        r = int(gen.integers(0, min(rows, cols)))
        if r == 0:
            A = np.zeros((rows, cols))
        else:
            A = gen.standard_normal((rows, r)) @ gen.standard_normal((r, cols))
        s = np.linalg.svd(A, compute_uv=False)
        if r > 0:
            frac = 0.9 if trial % 10 == 0 else float(gen.uniform(0.05, 0.8))
            eps = frac * s[r - 1]
        else:
            eps = float(gen.uniform(0.1, 2.0))
        A_hat = rank_bump(A, eps)

        bad = 0.0
        if numerical_rank(A_hat) != r + 1:
            bad = max(bad, abs(numerical_rank(A_hat) - (r + 1)))
        dist_err = abs(spectral_norm(A - A_hat) - eps)
        bad = max(bad, max(0.0, dist_err - 1e-10))
        if r > 0:
            S = float(np.sum(s[:r] ** 2))
            closed = np.sqrt(S / (S + eps**2))
            cos = matrix_cosine(A, A_hat)
            if cos <= 0:
                bad = max(bad, 1.0)
            bad = max(bad, max(0.0, abs(cos - closed) - 1e-12))
        if bad > 0:
            failures += 1
            worst = max(worst, bad)
    # the full-rank path must refuse to bump
    try:
        rank_bump(np.eye(3), 0.5)
        failures += 1
    except FullRankError:
        pass
    return OracleReport("rank_bump_lemmas", trials, failures, worst, failures == 0)


def _random_net(gen, depth_choices=(2, 3, 4), max_width=7):
    H = int(gen.choice(depth_choices))
    dims = [int(gen.integers(2, max_width + 1)) for _ in range(H + 1)]
    layers = [gen.standard_normal((d1, d0)) for d0, d1 in zip(dims[:-1], dims[1:])]
    return NetworkWeights(layers), dims


def check_input_noise_identity(trials: int = 200, rng=RngStream(2)) -> OracleReport:
    """grad at (X + eps) equals grad at X plus the weight-dependent phi term."""
    gen = _gen(rng)
    failures = 0
    worst = 0.0
    for _ in range(trials):
        W, dims = _random_net(gen)
        m = int(gen.integers(2, 9))
        data = Dataset(X=gen.standard_normal((dims[0], m)), Y=gen.standard_normal((dims[-1], m)))
        eps = 0.1 * gen.standard_normal(data.X.shape)
        noisy = Dataset(X=data.X + eps, Y=data.Y)
        for layer in range(len(W)):
            lhs = closed_form_gradient(W, noisy, layer)
            rhs = closed_form_gradient(W, data, layer) + input_noise_phi(W, data, eps, layer)
            rel = np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-30)
            if rel > 1e-8:
                failures += 1
            worst = max(worst, float(rel))
    return OracleReport("input_noise_identity", trials, failures, worst, failures == 0)


def check_dropout_equivalence(mc_samples: int = 100_000, rng=RngStream(3)) -> OracleReport:
    """The dropout and input-noise expected-loss closed forms agree exactly at
    beta = sigma_d^2 and each matches its Monte-Carlo estimate within three
    standard errors.

    Gaussian dropout masks draw one N(1, sigma^2) factor per output unit of W_2,
    the mask family under which the closed form is an identity.
    """
    gen = _gen(rng)
    sigma_d = 0.3
    beta = sigma_d**2
    dims = [5, 4, 3]
    m = 6
    W = NetworkWeights(
        [gen.standard_normal((dims[1], dims[0])), gen.standard_normal((dims[2], dims[1]))]
    )
    data = Dataset(X=gen.standard_normal((dims[0], m)), Y=gen.standard_normal((dims[-1], m)))

    closed_drop = gaussian_dropout_expected_loss(W, data, sigma_d)
    closed_input = input_noise_expected_loss(W, data, beta)

    failures = 0
    worst = 0.0
    exact_gap = abs(closed_drop - closed_input) / max(closed_drop, 1e-30)
    if exact_gap > 1e-12:
        failures += 1
    worst = max(worst, exact_gap)

    W1, W2 = W[0], W[1]
    RX = W2 @ W1 @ data.X

    # MC over per-output-unit Gaussian masks on W_2; (diag(g) W2) Z = g * (W2 Z) row-wise
    g = 1.0 + sigma_d * gen.standard_normal((mc_samples, dims[2]))
    resid = data.Y[None, :, :] - g[:, :, None] * RX[None, :, :]
    losses = np.sum(resid**2, axis=(1, 2))
    se = losses.std(ddof=1) / np.sqrt(mc_samples)
    dev = abs(losses.mean() - closed_drop) / se
    if dev > 3.0:
        failures += 1
    worst = max(worst, dev / 3.0 if dev > 3.0 else 0.0)

    # MC over m x m input noise with E[eps eps^T] = beta I
    eps = np.sqrt(beta / m) * gen.standard_normal((mc_samples, m, m))
    resid2 = (data.Y - RX)[None, :, :] - np.matmul(RX[None, :, :], eps)
    losses2 = np.sum(resid2**2, axis=(1, 2))
    se2 = losses2.std(ddof=1) / np.sqrt(mc_samples)
    dev2 = abs(losses2.mean() - closed_input) / se2
    if dev2 > 3.0:
        failures += 1
    worst = max(worst, dev2 / 3.0 if dev2 > 3.0 else 0.0)

    return OracleReport("dropout_equivalence", mc_samples, failures, worst, failures == 0)


def check_sgd_bound(
    data: Dataset,
    batch_size: int,
    sigma: float,
    delta: float,
    trials: int = 10_000,
    rng=RngStream(4),
) -> OracleReport:
    """Markov bound ||g_hat - g||_2 <= sqrt(d sigma^2 + gamma) / delta holds with
    empirical frequency at least 1 - delta (up to binomial slack)."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    gen = _gen(rng)
    hidden = max(2, min(data.d_x, data.d_y))
    dims = [data.d_x, hidden, data.d_y]
    W = NetworkWeights(
        [0.3 * gen.standard_normal((d1, d0)) for d0, d1 in zip(dims[:-1], dims[1:])]
    )
    gamma_hat, _ = sgd_gradient_stats(W, data, batch_size, trials=1000, rng=gen)
    G = stacked_gradient(W, data)
    d = G.size
    bound = np.sqrt(d * sigma**2 + gamma_hat) / delta
    scale = data.m / batch_size
    violations = 0
    for _ in range(trials):
        g_hat = G + sigma * gen.standard_normal(d)
        idx = gen.choice(data.m, size=batch_size, replace=False)
        g = scale * stacked_gradient(W, Dataset(X=data.X[:, idx], Y=data.Y[:, idx]))
        if np.linalg.norm(g_hat - g) > bound:
            violations += 1
    fraction = violations / trials
    slack = 2.0 * np.sqrt(delta * (1.0 - delta) / trials)
    passed = fraction <= delta + slack
    worst = max(0.0, fraction - delta)
    return OracleReport("sgd_bound", trials, violations, worst, passed)


def check_gradient_paths(trials_per_activation: int = 20, rng=RngStream(5)) -> OracleReport:
    """Closed-form and backprop gradients match central finite differences."""
    gen = _gen(rng)
    failures = 0
    worst = 0.0
    total = 0
    for kind in ("linear", "sigmoid", "tanh"):
        act = Activation(kind, at_output=(kind == "tanh"))
        for _ in range(trials_per_activation):
            total += 1
            W, dims = _random_net(gen, depth_choices=(2, 3), max_width=5)
            m = int(gen.integers(2, 6))
            data = Dataset(
                X=gen.standard_normal((dims[0], m)), Y=gen.standard_normal((dims[-1], m))
            )
            grads = backprop_gradients(W, act, data)
            bad = 0.0
            for layer in range(len(W)):
                fd = finite_difference_gradient(W, act, data, layer)
                rel = np.linalg.norm(grads[layer] - fd) / max(np.linalg.norm(fd), 1e-12)
                bad = max(bad, float(rel))
                if kind == "linear":
                    cf = closed_form_gradient(W, data, layer)
                    cf_rel = np.linalg.norm(grads[layer] - cf) / max(np.linalg.norm(cf), 1e-12)
                    bad = max(bad, 0.0 if cf_rel <= 1e-10 else float(cf_rel))
            if bad > 1e-5:
                failures += 1
            worst = max(worst, bad)
    return OracleReport("gradient_paths", total, failures, worst, failures == 0)
