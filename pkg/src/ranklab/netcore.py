"""Network representation, forward pass, squared loss and the three gradient paths.

The model is X -> W_H ... W_1 X with optional elementwise sigmoid/tanh at the
hidden layers (and, per experiment flag, at the output layer). There are no
biases. The loss is the unnormalized squared error 0.5 * ||out - Y||_F^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolated, InvalidInput, UnsupportedActivation
from .linalg import as_matrix, numerical_rank

ACTIVATION_KINDS = ("linear", "sigmoid", "tanh")


@dataclass(frozen=True)
class Activation:
    """Elementwise nonlinearity applied at hidden layers; `at_output` extends it to the output."""

    kind: str = "linear"
    at_output: bool = False

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise InvalidInput(f"unknown activation {self.kind!r}, expected one of {ACTIVATION_KINDS}")

    def apply(self, z):
        if self.kind == "sigmoid":
            return 1.0 / (1.0 + np.exp(-z))
        if self.kind == "tanh":
            return np.tanh(z)
        return z

    def derivative(self, z):
        if self.kind == "sigmoid":
            s = 1.0 / (1.0 + np.exp(-z))
            return s * (1.0 - s)
        if self.kind == "tanh":
            t = np.tanh(z)
            return 1.0 - t * t
        return np.ones_like(z)


LINEAR = Activation("linear")


@dataclass(frozen=True)
class Dataset:
    """Training data: X is d_x x m, Y is d_y x m, columns are samples."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        Y = as_matrix(self.Y, "Y")
        if X.shape[1] != Y.shape[1]:
            raise InvalidInput(f"X has {X.shape[1]} samples but Y has {Y.shape[1]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def d_x(self) -> int:
        return self.X.shape[0]

    @property
    def d_y(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]


class NetworkWeights:
    """Ordered weight matrices W_1..W_H, W_i of shape d_i x d_{i-1}."""

    def __init__(self, layers):
        layers = [as_matrix(W, f"W_{i + 1}") for i, W in enumerate(layers)]
        if not layers:
            raise InvalidInput("a network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].shape[1] != layers[i - 1].shape[0]:
                raise InvalidInput(
                    f"layer shapes do not chain: W_{i} is {layers[i - 1].shape}, "
                    f"W_{i + 1} is {layers[i].shape}"
                )
        self.layers = layers

    @property
    def dims(self):
        """Layer widths d_0..d_H."""
        return [self.layers[0].shape[1]] + [W.shape[0] for W in self.layers]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def copy(self) -> "NetworkWeights":
        return NetworkWeights([W.copy() for W in self.layers])

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, i):
        return self.layers[i]

    def __iter__(self):
        return iter(self.layers)


def _layers(W):
    if isinstance(W, NetworkWeights):
        return W.layers
    return NetworkWeights(W).layers


def product_matrix(W) -> np.ndarray:
    """Ordered product W_H @ ... @ W_1 (shape d_y x d_x)."""
    layers = _layers(W)
    P = layers[0]
    for Wi in layers[1:]:
        P = Wi @ P
    return P


def forward(W, act: Activation, X) -> np.ndarray:
    """Network output for input X."""
    return _forward_pass(_layers(W), act, as_matrix(X, "X"))[0][-1]


def _forward_pass(layers, act, X, masks=None):
    """Returns (post-activation list Z_0..Z_H, pre-activation list A_1..A_H).

    masks, when given, multiply the hidden post-activations (dropout).
    """
    Zs = [X]
    As = []
    H = len(layers)
    for i, Wi in enumerate(layers):
        A = Wi @ Zs[-1]
        As.append(A)
        hidden = i < H - 1
        Z = act.apply(A) if (hidden or act.at_output) else A
        if masks is not None and hidden and masks[i] is not None:
            Z = Z * masks[i]
        Zs.append(Z)
    return Zs, As


def squared_loss(W, data: Dataset, act: Activation = LINEAR) -> float:
    """0.5 * ||out - Y||_F^2 with out the network output on data.X."""
    out = forward(W, act, data.X)
    if out.shape != data.Y.shape:
        raise InvalidInput(f"output shape {out.shape} does not match Y shape {data.Y.shape}")
    return 0.5 * float(np.linalg.norm(out - data.Y) ** 2)


def left_right_products(W, layer: int):
    """(R_l, R_r) for the given 0-based layer: W_{i+1}^T...W_H^T and W_1^T...W_{i-1}^T."""
    layers = _layers(W)
    Rl = np.eye(layers[layer].shape[0])
    for Wi in layers[layer + 1 :]:
        Rl = Rl @ Wi.T
    Rr = np.eye(layers[layer].shape[1])
    for Wi in reversed(layers[:layer]):
        Rr = Wi.T @ Rr
    return Rl, Rr


def closed_form_gradient(W, data: Dataset, layer: int, act: Activation = LINEAR) -> np.ndarray:
    """dL/dW_layer for the linear network: R_l (R X - Y) X^T R_r (layer is 0-based)."""
    if act.kind != "linear":
        raise UnsupportedActivation("closed-form gradient exists for linear activation only")
    layers = _layers(W)
    if not 0 <= layer < len(layers):
        raise InvalidInput(f"layer index {layer} out of range for depth {len(layers)}")
    R = product_matrix(layers)
    E = R @ data.X - data.Y
    Rl, Rr = left_right_products(layers, layer)
    return Rl @ E @ data.X.T @ Rr


def backprop_gradients(W, act: Activation, data: Dataset, masks=None):
    """One gradient matrix per layer via reverse-mode accumulation.

    masks (optional, one per hidden layer or None) multiply the hidden
    activations, so dropout training differentiates through the mask.
    """
    layers = _layers(W)
    Zs, As = _forward_pass(layers, act, data.X, masks)
    H = len(layers)
    delta = Zs[-1] - data.Y
    if act.at_output and act.kind != "linear":
        delta = delta * act.derivative(As[-1])
    grads = [None] * H
    for i in range(H - 1, -1, -1):
        grads[i] = delta @ Zs[i].T
        if i > 0:
            delta = layers[i].T @ delta
            if masks is not None and masks[i - 1] is not None:
                delta = delta * masks[i - 1]
            if act.kind != "linear":
                delta = delta * act.derivative(As[i - 1])
    return grads


def finite_difference_gradient(W, act: Activation, data: Dataset, layer: int, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the loss w.r.t. W_layer. Oracle; small nets only."""
    layers = [Wi.copy() for Wi in _layers(W)]
    target = layers[layer]
    grad = np.zeros_like(target)
    it = np.nditer(target, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = target[idx]
        target[idx] = orig + step
        lp = squared_loss(layers, data, act)
        target[idx] = orig - step
        lm = squared_loss(layers, data, act)
        target[idx] = orig
        grad[idx] = (lp - lm) / (2.0 * step)
    return grad


def optimal_loss(data: Dataset) -> float:
    """Global minimum of the linear-network loss: the least-squares residual.

    Equals 0.5 * ||Y - Y X^T (X X^T)^{-1} X||_F^2; requires X X^T invertible.
    """
    XXt = data.X @ data.X.T
    if numerical_rank(XXt) < data.d_x:
        raise AssumptionViolated("X X^T is numerically singular")
    R_star = np.linalg.solve(XXt, data.X @ data.Y.T).T
    return 0.5 * float(np.linalg.norm(data.Y - R_star @ data.X) ** 2)
