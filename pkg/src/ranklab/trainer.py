"""Training loops with per-iteration rank-trajectory recording.

One run is strictly sequential; parallelism belongs at the level of seed sweeps,
each with its own RngStream. A fixed (W0, config) pair reproduces the trajectory
bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidInput
from .linalg import DEFAULT_TOLERANCE, RankTolerance, numerical_rank
from .netcore import (
    Activation,
    Dataset,
    NetworkWeights,
    backprop_gradients,
    product_matrix,
    squared_loss,
)
from .noisekit import DROPOUT_MODES, NoiseSpec, RngStream, sample_dropout_mask

DIVERGENCE_BOUND = 1e12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    iterations: int
    batch_size: int = 0  # 0 means full batch
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    rank_tol: RankTolerance = DEFAULT_TOLERANCE
    record_layer_ranks: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise InvalidInput(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.iterations < 0:
            raise InvalidInput(f"iterations must be non-negative, got {self.iterations}")
        if self.batch_size < 0:
            raise InvalidInput(f"batch_size must be non-negative, got {self.batch_size}")


@dataclass(frozen=True)
class TrajectoryRecord:
    iteration: int
    loss: float
    rank_product: int
    layer_ranks: tuple | None = None


@dataclass
class RankTrajectory:
    """Per-iteration record of loss and product-matrix rank (iteration 0 = initial state)."""

    records: list[TrajectoryRecord] = field(default_factory=list)

    @property
    def final_rank(self) -> int:
        return self.records[-1].rank_product

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss

    def ranks(self) -> list[int]:
        return [r.rank_product for r in self.records]

    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    def write_csv(self, fh) -> None:
        """CSV dialect: comma separated, '\\n' endings, full-precision floats."""
        with_layers = self.records and self.records[0].layer_ranks is not None
        header = "iter,loss,rank_product"
        if with_layers:
            header += "".join(f",rank_w{i + 1}" for i in range(len(self.records[0].layer_ranks)))
        fh.write(header + "\n")
        for rec in self.records:
            row = f"{rec.iteration},{rec.loss!r},{rec.rank_product}"
            if with_layers:
                row += "".join(f",{r}" for r in rec.layer_ranks)
            fh.write(row + "\n")


def _record(W, data, act, cfg, iteration) -> TrajectoryRecord:
    layer_ranks = None
    if cfg.record_layer_ranks:
        layer_ranks = tuple(numerical_rank(Wi, cfg.rank_tol) for Wi in W)
    return TrajectoryRecord(
        iteration=iteration,
        loss=squared_loss(W, data, act),
        rank_product=numerical_rank(product_matrix(W), cfg.rank_tol),
        layer_ranks=layer_ranks,
    )


def _iteration_gradients(W, act, data, cfg, gen):
    """Gradients for one update, with the configured noise source applied."""
    mode = cfg.noise.mode
    X, Y = data.X, data.Y
    m = data.m

    if cfg.batch_size > 0:
        if cfg.batch_size > m:
            raise InvalidInput(f"batch_size {cfg.batch_size} exceeds sample count {m}")
        idx = gen.choice(m, size=cfg.batch_size, replace=False)
        X, Y = X[:, idx], Y[:, idx]

    if mode == "input_gaussian":
        eps = np.sqrt(cfg.noise.param / m) * gen.standard_normal(X.shape)
        X = X + eps
    elif mode == "output_gaussian":
        Y = Y + cfg.noise.param * gen.standard_normal(Y.shape)

    batch = Dataset(X=X, Y=Y)
    masks = None
    if mode in DROPOUT_MODES:
        masks = [
            sample_dropout_mask((Wi.shape[0], X.shape[1]), cfg.noise, gen)
            for Wi in list(W)[:-1]
        ]
    grads = backprop_gradients(W, act, batch, masks)

    if cfg.batch_size > 0:
        # Unbiased estimate of the full-batch gradient of the unnormalized loss.
        grads = [g * (m / cfg.batch_size) for g in grads]
    if mode == "gradient_gaussian" and cfg.noise.param > 0:
        grads = [g + cfg.noise.param * gen.standard_normal(g.shape) for g in grads]
    return grads


def train(W0: NetworkWeights, act: Activation, data: Dataset, cfg: TrainConfig):
    """Run cfg.iterations gradient updates; returns (weights, trajectory).

    Records loss and product rank before iteration 0 and after every update.
    Raises DivergenceError (carrying the partial trajectory) when the loss leaves
    [0, 1e12] or turns non-finite.
    """
    W = W0.copy() if isinstance(W0, NetworkWeights) else NetworkWeights(W0).copy()
    gen = RngStream(cfg.seed, 0).generator()
    traj = RankTrajectory()
    traj.records.append(_record(W, data, act, cfg, 0))
    for t in range(cfg.iterations):
        grads = _iteration_gradients(W, act, data, cfg, gen)
        for i in range(len(W.layers)):
            W.layers[i] = W.layers[i] - cfg.learning_rate * grads[i]
        rec = _record(W, data, act, cfg, t + 1)
        traj.records.append(rec)
        if not np.isfinite(rec.loss) or rec.loss > DIVERGENCE_BOUND:
            raise DivergenceError(
                f"loss {rec.loss} diverged at iteration {t + 1}", trajectory=traj
            )
    return W, traj


def stacked_gradient(W, data: Dataset) -> np.ndarray:
    """All linear-network layer gradients flattened into one vector."""
    grads = backprop_gradients(W, Activation("linear"), data)
    return np.concatenate([g.ravel() for g in grads])


def sgd_gradient_stats(W, data: Dataset, batch_size: int, trials: int, rng):
    """Empirical second moment of ||g - G||_2 over random mini-batches.

    g is the mini-batch gradient rescaled by m/batch_size (unbiased for G), both
    stacked over all layers as one vector. Returns (gamma_hat, deviation list).
    """
    if not 0 < batch_size <= data.m:
        raise InvalidInput(f"batch_size must lie in [1, m], got {batch_size}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    G = stacked_gradient(W, data)
    scale = data.m / batch_size
    samples = []
    for _ in range(trials):
        idx = gen.choice(data.m, size=batch_size, replace=False)
        g = scale * stacked_gradient(W, Dataset(X=data.X[:, idx], Y=data.Y[:, idx]))
        samples.append(float(np.sum((g - G) ** 2)))
    return float(np.mean(samples)), samples
