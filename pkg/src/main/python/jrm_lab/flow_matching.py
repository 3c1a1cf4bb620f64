"""Rectified flow-matching path, loss, training step and joint Euler sampler"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from jrm_lab.jrm_lab_exception import (CapacityError, DimensionError, InputError, NonFiniteError,
                                       ParameterError)

logger = logging.getLogger(__name__)


def _as_tensor(value, like=None):
    if isinstance(value, torch.Tensor):
        return value
    dtype = like.dtype if isinstance(like, torch.Tensor) else torch.float64
    return torch.as_tensor(np.asarray(value), dtype=dtype)


def _broadcast_level(t, z0: torch.Tensor) -> torch.Tensor:
    t = _as_tensor(t, z0).to(z0.dtype)
    if torch.any(t < 0) or torch.any(t > 1):
        raise ParameterError("Noise level must lie in [0, 1]")
    if t.dim() == 0:
        return t
    if t.dim() > z0.dim() or tuple(t.shape) != tuple(z0.shape[:t.dim()]):
        raise DimensionError("Noise levels must match the leading latent axes")
    return t.reshape(tuple(t.shape) + (1,) * (z0.dim() - t.dim()))


def _check_shapes(first, second):
    if tuple(first.shape) != tuple(second.shape):
        raise DimensionError("Latent shapes do not match: %s vs %s" % (tuple(first.shape), tuple(second.shape)))


def interpolate(z0, eps, t) -> torch.Tensor:
    """z_t = (1 - t) z0 + t eps; t is a scalar or one level per leading index"""
    z0, eps = _as_tensor(z0), _as_tensor(eps)
    _check_shapes(z0, eps)
    t = _broadcast_level(t, z0)
    return (1 - t) * z0 + t * eps


def target_velocity(z0, eps) -> torch.Tensor:
    """v = z0 - eps"""
    z0, eps = _as_tensor(z0), _as_tensor(eps)
    _check_shapes(z0, eps)
    return z0 - eps


@dataclass(frozen=True, eq=False)
class FlowSample:
    """One point on the affine path with its regression target"""
    z0: torch.Tensor
    eps: torch.Tensor
    t: torch.Tensor
    zt: torch.Tensor
    v_target: torch.Tensor

    @classmethod
    def build(cls, z0, eps, t) -> "FlowSample":
        """materialises zt and v_target"""
        z0, eps = _as_tensor(z0), _as_tensor(eps)
        return cls(z0, eps, _as_tensor(t, z0), interpolate(z0, eps, t), target_velocity(z0, eps))


def joint_loss(preds: Sequence[torch.Tensor], targets: Sequence[torch.Tensor]) -> torch.Tensor:
    """Sum over objects of the per-object mean squared error"""
    if len(preds) == 0:
        raise InputError("Joint loss needs at least one object")
    if len(preds) != len(targets):
        raise DimensionError("One target per prediction is required")
    total = 0.0
    for pred, target in zip(preds, targets):
        pred, target = _as_tensor(pred), _as_tensor(target, pred)
        _check_shapes(pred, target)
        total = total + torch.mean((pred - target) ** 2)
    return total


def _stack_tokens(arrays, dtype) -> torch.Tensor:
    return torch.as_tensor(np.stack([np.stack(group) for group in arrays]), dtype=dtype)


def train_step(model, pairs, optimizer, seed: int):
    """One optimizer update on a batch of pairs; t is shared by the objects of a pair, eps is fresh per object.

    Parameters are updated in place; returns (parameters after the update, loss before it).
    """
    param = next(model.parameters())
    generator = torch.Generator().manual_seed(int(seed))
    z0 = _stack_tokens([pair.ground_truth for pair in pairs], param.dtype)
    cond = model.encode_groups([pair.observations for pair in pairs])
    t = torch.rand(len(pairs), generator=generator, dtype=param.dtype)
    eps = torch.randn(z0.shape, generator=generator, dtype=param.dtype)
    zt = interpolate(z0, eps, t)
    v_target = target_velocity(z0, eps)
    pred = model(zt, t, cond)
    loss = joint_loss(list(pred.unbind(1)), list(v_target.unbind(1)))
    if not torch.isfinite(loss):
        raise NonFiniteError("Non-finite training loss (t=%s)" % t.tolist())
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    value = float(loss.detach())
    logger.debug("train_step seed %d: %d pairs, loss %.6f", seed, len(pairs), value)
    return [tensor.detach() for tensor in model.parameters()], value


def sample_joint(model, conditions, steps: int, seed: int, token_shape=None, max_k=None):
    """Euler integration from t=1 to t=0 with z <- z + dt * v; noise drawn object by object.

    conditions is either a list of K condition token sets (one group) or a (B, K, m, width) tensor.
    """
    config = getattr(model, "config", None)
    token_shape = token_shape or (config.token_count, config.token_width)
    max_k = max_k or (config.max_k if config is not None else None)
    if steps < 1:
        raise ParameterError("Sampler needs at least one step")
    as_list = not isinstance(conditions, torch.Tensor)
    cond = torch.stack(list(conditions)).unsqueeze(0) if as_list else conditions
    batch, count = cond.shape[:2]
    if count < 1 or (max_k is not None and count > max_k):
        raise CapacityError("Joint group size must lie between 1 and the model capacity")
    generator = torch.Generator().manual_seed(int(seed))
    noise = [torch.randn((batch,) + tuple(token_shape), generator=generator, dtype=cond.dtype)
             for _ in range(count)]
    z = torch.stack(noise, dim=1)
    dt = 1.0 / steps
    with torch.no_grad():
        for index in range(steps):
            t = torch.full((batch,), 1.0 - index / steps, dtype=cond.dtype)
            z = z + dt * model(z, t, cond)
    return list(z[0].unbind(0)) if as_list else z
