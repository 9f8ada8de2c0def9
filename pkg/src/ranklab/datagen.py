"""Synthetic datasets certifying the full-rank assumptions, plus weight initializers.

Dataset files use a small binary format: an 8-byte magic, three little-endian
uint64 fields (d_x, d_y, m), then X and Y as little-endian float64 in
column-major order. See README for the exact layout.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolated, GenerationFailed, InvalidInput
from .linalg import numerical_rank
from .netcore import Dataset, NetworkWeights

MAGIC = b"RLABDS01"
_HEADER = struct.Struct("<8sQQQ")

# Relative gap below which two singular values count as coinciding (assumption iv).
DISTINCTNESS_GAP = 1e-8


@dataclass(frozen=True)
class AssumptionCertificate:
    """Machine-checked record of the four conditions for full-rank global optimality."""

    min_dim_ok: bool
    sample_ok: bool
    xx_full_rank: bool
    yx_full_rank: bool
    distinct_singulars: bool
    min_singular_gap: float

    @property
    def certified(self) -> bool:
        return (
            self.min_dim_ok
            and self.sample_ok
            and self.xx_full_rank
            and self.yx_full_rank
            and self.distinct_singulars
        )


def verify_assumptions(data: Dataset, dims) -> AssumptionCertificate:
    """Check (i) no-bottleneck widths, (ii) enough samples, (iii) X X^T and Y X^T full
    rank, (iv) distinct singular values of Y X^T (X X^T)^{-1} X."""
    dims = list(dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise InvalidInput(f"dims must be at least [d_x, d_y] of positive widths, got {dims}")
    d_x, d_y, m = data.d_x, data.d_y, data.m
    min_dim_ok = min(dims) == min(dims[0], dims[-1])
    sample_ok = d_x <= m and d_y <= m

    XXt = data.X @ data.X.T
    YXt = data.Y @ data.X.T
    xx_full_rank = numerical_rank(XXt) == d_x
    yx_full_rank = numerical_rank(YXt) == min(d_y, d_x)

    distinct = False
    min_gap = float("nan")
    if xx_full_rank:
        P = YXt @ np.linalg.solve(XXt, data.X)
        s = np.linalg.svd(P, compute_uv=False)
        if s[0] > 0:
            min_gap = float(np.min(np.abs(np.diff(s)))) if len(s) > 1 else float("inf")
            distinct = min_gap > DISTINCTNESS_GAP * s[0]
    return AssumptionCertificate(
        min_dim_ok=min_dim_ok,
        sample_ok=sample_ok,
        xx_full_rank=xx_full_rank,
        yx_full_rank=yx_full_rank,
        distinct_singulars=distinct,
        min_singular_gap=min_gap,
    )


def synth_dataset(d_x: int, d_y: int, m: int, seed: int = 0, max_retries: int = 20) -> Dataset:
    """Standard-Gaussian (X, Y), regenerated until verify_assumptions certifies it."""
    if d_x <= 0 or d_y <= 0 or m <= 0:
        raise InvalidInput("d_x, d_y and m must be positive")
    if d_x > m or d_y > m:
        raise AssumptionViolated(
            f"assumption (ii) requires d_x, d_y <= m, got d_x={d_x}, d_y={d_y}, m={m}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    for _ in range(max_retries):
        data = Dataset(X=rng.standard_normal((d_x, m)), Y=rng.standard_normal((d_y, m)))
        if verify_assumptions(data, [d_x, d_y]).certified:
            return data
    raise GenerationFailed(
        f"no certified dataset after {max_retries} attempts for d_x={d_x}, d_y={d_y}, m={m}"
    )


def low_rank_init(dims, target_rank: int, scale=None, seed: int = 0) -> NetworkWeights:
    """Each W_i as a scaled product of Gaussian factors of inner dimension target_rank.

    With scale=None each layer uses 1/sqrt(fan_in); entries then have standard
    deviation ~ scale regardless of target_rank. target_rank 0 yields zero weights.
    """
    dims = list(dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise InvalidInput(f"dims must be at least [d_x, d_y] of positive widths, got {dims}")
    r0 = int(target_rank)
    if r0 < 0 or any(r0 > min(d1, d0) for d0, d1 in zip(dims[:-1], dims[1:])):
        raise InvalidInput(f"target rank {r0} exceeds a layer dimension in {dims}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    layers = []
    for d0, d1 in zip(dims[:-1], dims[1:]):
        s = (1.0 / np.sqrt(d0)) if scale is None else float(scale)
        if r0 == 0:
            layers.append(np.zeros((d1, d0)))
        else:
            F = rng.standard_normal((d1, r0))
            G = rng.standard_normal((r0, d0))
            layers.append(s * (F @ G) / np.sqrt(r0))
    return NetworkWeights(layers)


def save_dataset(path, data: Dataset) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, data.d_x, data.d_y, data.m))
        fh.write(np.asfortranarray(data.X).tobytes(order="F"))
        fh.write(np.asfortranarray(data.Y).tobytes(order="F"))


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise InvalidInput(f"{path}: truncated header")
        magic, d_x, d_y, m = _HEADER.unpack(header)
        if magic != MAGIC:
            raise InvalidInput(f"{path}: bad magic {magic!r}")
        n_x, n_y = d_x * m, d_y * m
        buf = np.frombuffer(fh.read(8 * (n_x + n_y)), dtype="<f8")
        if buf.size != n_x + n_y:
            raise InvalidInput(f"{path}: truncated payload")
    X = buf[:n_x].reshape((d_x, m), order="F")
    Y = buf[n_x:].reshape((d_y, m), order="F")
    return Dataset(X=X.copy(), Y=Y.copy())
