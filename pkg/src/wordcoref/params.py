"""Named parameter registry with seeded initialization."""

import numpy as np

from .autodiff import Parameter


def xavier(rng, shape):
    fan_in, fan_out = shape[0], shape[-1]
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def normal(rng, shape, std=0.1):
    return rng.normal(0.0, std, size=shape)


def zeros(rng, shape):
    return np.zeros(shape)


class ParameterStore:
    def __init__(self):
        self._params = {}

    def create(self, name, shape, init, rng):
        if name in self._params:
            raise ValueError(f"parameter {name!r} already exists")
        p = Parameter(name, init(rng, shape))
        self._params[name] = p
        return p

    def get(self, name):
        return self._params[name]

    def named(self):
        return dict(self._params)

    def all(self):
        return list(self._params.values())

    def select(self, prefixes):
        return [p for name, p in self._params.items()
                if any(name.startswith(pre) for pre in prefixes)]

    def zero_grads(self):
        for p in self._params.values():
            p.zero_grad()

    def to_arrays(self):
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_arrays(self, arrays):
        """Overwrite parameter values; shapes must match exactly."""
        missing = set(self._params) - set(arrays)
        if missing:
            raise ValueError(f"checkpoint is missing tensors: {sorted(missing)}")
        for name, p in self._params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"tensor {name!r}: checkpoint shape {arr.shape} does not "
                    f"match model shape {p.data.shape}")
            p.data = arr.copy()
