"""Scikit-learn estimator facade over the trainer.

Follows sklearn conventions (rows are samples, fit/predict/get_params), while the
underlying modules keep the column-per-sample layout.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .datagen import low_rank_init
from .linalg import RankTolerance
from .netcore import Activation, Dataset, forward
from .noisekit import NoiseSpec
from .trainer import TrainConfig, train


class NoisyLinearNetworkRegressor(RegressorMixin, BaseEstimator):
    """Multi-layer linear (or sigmoid/tanh) network trained by noisy gradient descent.

    Parameters
    ----------
    hidden_dims : tuple of int
        Widths of the hidden layers (input/output widths come from the data).
    activation : {"linear", "sigmoid", "tanh"}
    activation_at_output : bool
        Apply the nonlinearity at the output layer too.
    noise_mode, noise_param : str, float
        Noise mechanism and its parameter, see noisekit.NoiseSpec.
    learning_rate, n_iter, batch_size : optimizer settings (batch_size 0 = full batch).
    init_rank : int or None
        Rank of the low-rank weight initialization; None means full rank.
    init_scale : float or None
        Entry scale of the initial weights; None means 1/sqrt(fan_in) per layer.
    rank_threshold : float
        Relative singular-value threshold used for the recorded rank trajectory.
    record_layer_ranks : bool
    random_state : int

    Attributes
    ----------
    weights_ : NetworkWeights after training.
    trajectory_ : RankTrajectory recorded during fit.
    """

    def __init__(
        self,
        hidden_dims=(),
        activation="linear",
        activation_at_output=False,
        noise_mode="none",
        noise_param=0.0,
        learning_rate=1e-4,
        n_iter=50,
        batch_size=0,
        init_rank=None,
        init_scale=None,
        rank_threshold=1e-9,
        record_layer_ranks=False,
        random_state=0,
    ):
        self.hidden_dims = hidden_dims
        self.activation = activation
        self.activation_at_output = activation_at_output
        self.noise_mode = noise_mode
        self.noise_param = noise_param
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.batch_size = batch_size
        self.init_rank = init_rank
        self.init_scale = init_scale
        self.rank_threshold = rank_threshold
        self.record_layer_ranks = record_layer_ranks
        self.random_state = random_state

    def _dims(self, n_features, n_outputs):
        return [n_features, *map(int, self.hidden_dims), n_outputs]

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64, ensure_2d=False)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} samples but y has {y.shape[0]}")
        self.n_features_in_ = X.shape[1]
        self._n_outputs = y.shape[1]

        dims = self._dims(X.shape[1], y.shape[1])
        r0 = min(min(d0, d1) for d0, d1 in zip(dims[:-1], dims[1:]))
        if self.init_rank is not None:
            r0 = int(self.init_rank)
        W0 = low_rank_init(dims, r0, scale=self.init_scale, seed=self.random_state)
        cfg = TrainConfig(
            learning_rate=self.learning_rate,
            iterations=self.n_iter,
            batch_size=self.batch_size,
            noise=NoiseSpec(mode=self.noise_mode, param=self.noise_param, seed=self.random_state),
            rank_tol=RankTolerance(self.rank_threshold),
            record_layer_ranks=self.record_layer_ranks,
            seed=self.random_state,
        )
        act = Activation(self.activation, at_output=self.activation_at_output)
        data = Dataset(X=X.T, Y=y.T)
        self.weights_, self.trajectory_ = train(W0, act, data, cfg)
        self.activation_ = act
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        out = forward(self.weights_, self.activation_, X.T).T
        return out[:, 0] if self._n_outputs == 1 else out
