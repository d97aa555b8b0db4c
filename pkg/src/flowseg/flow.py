"""Straight-path flow matching: interpolation, velocity targets, loss, sampler.

Conventions: tensors are batch-first ``(B, C, H, W)``; times ``t`` are one
scalar per batch element in ``[0, 1]``. All functions are pure and dtype
preserving, so the exactness tests can run them at float64.
"""

from __future__ import annotations

from typing import Protocol

import torch
from torch import Tensor

__all__ = [
    "interpolate",
    "velocity_target",
    "rf_loss",
    "sample_time",
    "euler_sample",
    "VelocityField",
]


class VelocityField(Protocol):
    """Evaluable velocity map; output shape must equal ``x``'s shape."""

    def __call__(
        self,
        x: Tensor,
        t: Tensor,
        image: Tensor | None = None,
        features: list[Tensor] | None = None,
    ) -> Tensor: ...


def _check_same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def _expand_t(t: Tensor | float, like: Tensor) -> Tensor:
    """Broadcast per-batch times over the remaining axes of ``like``."""
    if not torch.is_tensor(t):
        t = torch.as_tensor(t, dtype=like.dtype, device=like.device)
    t = t.to(dtype=like.dtype, device=like.device)
    if t.ndim == 0:
        return t
    if t.shape[0] != like.shape[0]:
        raise ValueError(f"t has batch {t.shape[0]}, tensors have batch {like.shape[0]}")
    return t.reshape(t.shape[0], *([1] * (like.ndim - 1)))


def interpolate(x0: Tensor, x1: Tensor, t: Tensor | float) -> Tensor:
    """Point on the straight path: ``t*x1 + (1-t)*x0``, per batch element."""
    _check_same_shape(x0, x1, "interpolate")
    tb = _expand_t(t, x1)
    return tb * x1 + (1 - tb) * x0


def velocity_target(x0: Tensor, x1: Tensor) -> Tensor:
    """Constant velocity of the straight path, ``x1 - x0``."""
    _check_same_shape(x0, x1, "velocity_target")
    return x1 - x0


def rf_loss(pred_v: Tensor, x0: Tensor, x1: Tensor) -> Tensor:
    """Mean squared error between predicted velocity and ``x1 - x0``.

    The mean runs over every element (batch included), so the loss scale is
    independent of batch size and resolution.
    """
    _check_same_shape(pred_v, x0, "rf_loss")
    _check_same_shape(pred_v, x1, "rf_loss")
    if not (torch.isfinite(pred_v).all() and torch.isfinite(x0).all() and torch.isfinite(x1).all()):
        raise ValueError("rf_loss: non-finite inputs")
    return ((pred_v - (x1 - x0)) ** 2).mean()


def sample_time(
    batch: int,
    generator: torch.Generator | None = None,
    dtype: torch.dtype = torch.float32,
    device: torch.device | str = "cpu",
) -> Tensor:
    """I.i.d. uniform times on [0, 1], one per batch element."""
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    return torch.rand(batch, generator=generator, dtype=dtype, device=device)


def euler_sample(
    v: VelocityField,
    x0: Tensor,
    n_steps: int,
    image: Tensor | None = None,
    features: list[Tensor] | None = None,
) -> Tensor:
    """Integrate ``dx/dt = v(x, t)`` from t=0 to t=1 with forward Euler.

    Uniform left-endpoint grid ``t_k = k/N``; exact for velocity fields that
    are constant along the trajectory (the training target). Raises if the
    state goes non-finite, naming the offending step.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    x = x0
    dt = 1.0 / n_steps
    batch = x0.shape[0]
    for k in range(n_steps):
        t = torch.full((batch,), k / n_steps, dtype=x.dtype, device=x.device)
        vel = v(x, t, image, features)
        if vel.shape != x.shape:
            raise ValueError(
                f"velocity field returned shape {tuple(vel.shape)}, expected {tuple(x.shape)}"
            )
        x = x + dt * vel
        if not torch.isfinite(x).all():
            raise FloatingPointError(f"non-finite state after Euler step {k} (t={k / n_steps:.4f})")
    return x
