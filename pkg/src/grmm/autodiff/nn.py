"""Thin layer containers over the op set; params are explicit name->Tensor maps."""

from __future__ import annotations

import numpy as np

from . import tensor as T


def he_init(rng, shape, fan_in, dtype=None):
    scale = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * scale).astype(dtype or T.DEFAULT_DTYPE)


class Linear:
    def __init__(self, rng, d_in, d_out, name, zero_init=False, dtype=None):
        dt = dtype or T.DEFAULT_DTYPE
        if zero_init:
            w = np.zeros((d_in, d_out), dtype=dt)
        else:
            w = he_init(rng, (d_in, d_out), d_in, dt)
        self.w = T.parameter(w, name=f"{name}.w")
        self.b = T.parameter(np.zeros(d_out, dtype=dt), name=f"{name}.b")

    def __call__(self, x):
        return T.matmul(x, self.w) + self.b

    def params(self):
        return {self.w.name: self.w, self.b.name: self.b}


class Conv2d:
    def __init__(self, rng, c_in, c_out, k, name, stride=1, padding=0, zero_init=False, dtype=None):
        dt = dtype or T.DEFAULT_DTYPE
        fan_in = c_in * k * k
        if zero_init:
            w = np.zeros((c_out, c_in, k, k), dtype=dt)
        else:
            w = he_init(rng, (c_out, c_in, k, k), fan_in, dt)
        self.w = T.parameter(w, name=f"{name}.w")
        self.b = T.parameter(np.zeros(c_out, dtype=dt), name=f"{name}.b")
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return T.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)

    def params(self):
        return {self.w.name: self.w, self.b.name: self.b}


class ConvTranspose2d:
    def __init__(self, rng, c_in, c_out, k, name, stride=2, padding=1, zero_init=False, dtype=None):
        dt = dtype or T.DEFAULT_DTYPE
        fan_in = c_in * k * k
        if zero_init:
            w = np.zeros((c_in, c_out, k, k), dtype=dt)
        else:
            w = he_init(rng, (c_in, c_out, k, k), fan_in, dt)
        self.w = T.parameter(w, name=f"{name}.w")
        self.b = T.parameter(np.zeros(c_out, dtype=dt), name=f"{name}.b")
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return T.conv_transpose2d(x, self.w, self.b, stride=self.stride, padding=self.padding)

    def params(self):
        return {self.w.name: self.w, self.b.name: self.b}


def merge_params(*maps):
    out = {}
    for m in maps:
        dup = set(out) & set(m)
        if dup:
            raise ValueError(f"duplicate parameter names: {sorted(dup)}")
        out.update(m)
    return out
