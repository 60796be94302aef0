"""Dense parameter storage, Xavier initialization, AdaGrad and a gradient checker."""

from __future__ import annotations

import math
from typing import Callable, Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

Grads = Dict[str, np.ndarray]


class ParameterStore:
    """Named float64 tensors with a per-tensor trainable flag.

    Shapes are fixed at registration; assigning an array of a different
    shape raises ``ValueError``.
    """

    def __init__(self):
        self._tensors: Dict[str, np.ndarray] = {}
        self._trainable: Dict[str, bool] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> np.ndarray:
        if name in self._tensors:
            raise KeyError(f"parameter {name!r} already registered")
        arr = np.array(value, dtype=np.float64)
        self._tensors[name] = arr
        self._trainable[name] = bool(trainable)
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        current = self._tensors[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != current.shape:
            raise ValueError(f"shape mismatch for {name!r}: {value.shape} != {current.shape}")
        current[...] = value

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def set_trainable(self, name: str, flag: bool) -> None:
        self._trainable[name] = bool(flag)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {k: v.shape for k, v in self._tensors.items()}

    def as_dict(self) -> Dict[str, np.ndarray]:
        return dict(self._tensors)


def xavier_init(shape, rng_seed=None, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Xavier/Glorot uniform initialization.

    Entries are drawn from U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
    For 1-D shapes fan_in = fan_out = shape[0]; for higher ranks the first
    axis is fan_in and the product of the remaining axes is fan_out.
    """
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if not shape or any(s < 1 for s in shape):
        raise ValueError(f"all dimensions must be >= 1, got {shape}")
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        fan_in = shape[0]
        fan_out = int(np.prod(shape[1:]))
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    if rng is None:
        rng = np.random.default_rng(rng_seed)
    return rng.uniform(-bound, bound, size=shape)


class AdaGrad:
    """AdaGrad with per-tensor squared-gradient accumulators.

    Parameters
    ----------
    learning_rate : float
        Global step size.
    epsilon : float
        Added to the root of the accumulator for numeric stability.
    initial_accumulator : float
        Starting value of every accumulator entry.
    """

    def __init__(self, learning_rate: float = 0.001, epsilon: float = 1e-8,
                 initial_accumulator: float = 0.0):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.learning_rate = float(learning_rate)
        self.epsilon = float(epsilon)
        self.initial_accumulator = float(initial_accumulator)
        self.accumulators: Dict[str, np.ndarray] = {}

    def step(self, params, grads: Mapping[str, np.ndarray]) -> None:
        """Apply one in-place update to every tensor named in ``grads``."""
        for name, g in grads.items():
            p = params[name]
            g = np.asarray(g, dtype=np.float64)
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter "
                                 f"{name!r} of shape {p.shape}")
            acc = self.accumulators.get(name)
            if acc is None:
                acc = np.full(p.shape, self.initial_accumulator, dtype=np.float64)
                self.accumulators[name] = acc
            acc += g * g
            p -= self.learning_rate * g / (np.sqrt(acc) + self.epsilon)


def adagrad_step(params, grads, state: AdaGrad):
    """Functional wrapper around :meth:`AdaGrad.step`; returns ``(params, state)``."""
    state.step(params, grads)
    return params, state


def finite_difference_check(loss_fn: Callable[[], Tuple[float, Grads]], params,
                            names=None, h: float = 1e-5, tolerance: float = 1e-4,
                            max_coords: Optional[int] = None,
                            rng: Optional[np.random.Generator] = None):
    """Compare analytic gradients against central differences.

    ``loss_fn`` is called with no arguments and must read the current values
    of ``params`` (which are perturbed in place). It returns ``(loss, grads)``.
    Relative error per coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``.

    Returns ``(max_relative_error, passed)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    base_loss, grads = loss_fn()
    if not np.isfinite(base_loss):
        raise FloatingPointError("loss is not finite")
    if names is None:
        names = list(grads)
    worst = 0.0
    for name in names:
        p = params[name]
        analytic = np.asarray(grads.get(name, np.zeros_like(p)))
        flat = p.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            rng = rng or np.random.default_rng(0)
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        a_flat = analytic.reshape(-1)
        for i in coords:
            old = flat[i]
            flat[i] = old + h
            lp, _ = loss_fn()
            flat[i] = old - h
            lm, _ = loss_fn()
            flat[i] = old
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise FloatingPointError(f"loss not finite while perturbing {name}[{i}]")
            numeric = (lp - lm) / (2.0 * h)
            a = a_flat[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst, worst < tolerance
