"""Small numerical toolkit: seeded RNG, initializers, Adam, clipping, dropout
and a central-difference gradient checker.

Tensors are plain ``numpy.ndarray`` values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

Rng = np.random.Generator


def make_rng(seed: int, stream: int = 0) -> Rng:
    """PCG64 generator keyed on ``(seed, stream)``.

    Separate streams give independent generators for parallel workers.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


def glorot_uniform_init(fan_in: int, fan_out: int, rng: Rng, shape: tuple[int, ...] | None = None) -> np.ndarray:
    if fan_in < 1 or fan_out < 1:
        raise ValueError("fan_in and fan_out must be >= 1")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape)


def _check_finite(name: str, *arrays: np.ndarray):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"{name}: non-finite values")


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def like(cls, param: np.ndarray, **hyper) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param), **hyper)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    if param.shape != grad.shape or state.first_moment.shape != param.shape:
        raise ValueError(f"shape mismatch: param {param.shape}, grad {grad.shape}")
    _check_finite("adam_step gradient", grad)
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_param = param - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_param, replace(state, first_moment=m, second_moment=v, step_count=t)


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_global_norm(grads: Sequence[np.ndarray], threshold: float) -> list[np.ndarray]:
    """Rescale all gradients jointly so their global L2 norm is <= threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    _check_finite("clip_global_norm", *grads)
    norm = global_norm(grads)
    if norm <= threshold:
        return [np.array(g, copy=True) for g in grads]
    scale = threshold / norm
    return [g * scale for g in grads]


def dropout_mask(shape: tuple[int, ...], rate: float, rng: Rng, dtype=np.float64) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``rate``, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep.astype(dtype) / (1.0 - rate)


def relative_errors(
    loss_and_grad: Callable[[list[np.ndarray]], tuple[float, list[np.ndarray]]],
    params: list[np.ndarray],
    epsilon: float = 1e-5,
) -> list[float]:
    """Max relative error between analytic and central-difference gradients,
    one value per parameter tensor.

    ``loss_and_grad`` must be deterministic; ``params`` are perturbed in place
    and restored.
    """
    _, analytic = loss_and_grad(params)
    errors = []
    for p, g in zip(params, analytic):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        worst = 0.0
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + epsilon
            f_plus = loss_and_grad(params)[0]
            flat[k] = old - epsilon
            f_minus = loss_and_grad(params)[0]
            flat[k] = old
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            err = abs(gflat[k] - numeric) / max(1e-8, abs(gflat[k]) + abs(numeric))
            worst = max(worst, err)
        errors.append(worst)
    return errors


def gradient_check(
    loss_and_grad: Callable[[list[np.ndarray]], tuple[float, list[np.ndarray]]],
    params: list[np.ndarray],
    epsilon: float = 1e-5,
) -> float:
    errs = relative_errors(loss_and_grad, params, epsilon)
    return max(errs) if errs else 0.0
