"""Sparse multivariate polynomials with exact term-wise differentiation.

The JSON form is ``{"vars": n, "terms": [{"exps": [..], "coef": f}, ...]}``.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import ConfigError


class Polynomial:
    def __init__(self, nvars: int, exps, coefs):
        exps = np.asarray(exps, dtype=np.int64).reshape(-1, nvars)
        coefs = np.asarray(coefs, dtype=float).reshape(-1)
        if exps.shape[0] != coefs.shape[0]:
            raise ValueError("one coefficient per exponent row required")
        if np.any(exps < 0):
            raise ValueError("negative exponents")
        # merge duplicate monomials and drop zeros
        merged: dict[tuple, float] = {}
        for e, c in zip(map(tuple, exps), coefs):
            merged[e] = merged.get(e, 0.0) + float(c)
        keys = sorted(k for k, v in merged.items() if v != 0.0)
        self.nvars = int(nvars)
        self.exps = np.array(keys, dtype=np.int64).reshape(-1, nvars)
        self.coefs = np.array([merged[k] for k in keys], dtype=float)
        self._derivs: dict[int, Polynomial] = {}

    @classmethod
    def from_json(cls, obj: dict) -> "Polynomial":
        try:
            n = int(obj["vars"])
            terms = obj["terms"]
            exps = [list(map(int, term["exps"])) for term in terms]
            coefs = [float(term["coef"]) for term in terms]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed polynomial table: {exc}") from exc
        if any(len(e) != n for e in exps):
            raise ConfigError("exponent length does not match 'vars'")
        return cls(n, np.array(exps, dtype=np.int64).reshape(-1, n), coefs)

    def to_json(self) -> dict:
        return {
            "vars": self.nvars,
            "terms": [
                {"exps": [int(v) for v in e], "coef": float(c)}
                for e, c in zip(self.exps, self.coefs)
            ],
        }

    @property
    def is_zero(self) -> bool:
        return self.coefs.size == 0

    @cached_property
    def degree(self) -> int:
        if self.is_zero:
            return -1
        return int(self.exps.sum(axis=1).max())

    def __call__(self, points):
        points = np.asarray(points)
        if points.shape[-1] != self.nvars:
            raise ValueError(f"expected trailing dimension {self.nvars}")
        dtype = np.result_type(points.dtype, float)
        if self.is_zero:
            return np.zeros(points.shape[:-1], dtype=dtype)
        out = np.zeros(points.shape[:-1], dtype=dtype)
        for e, c in zip(self.exps, self.coefs):
            term = np.full(points.shape[:-1], c, dtype=dtype)
            for v, k in enumerate(e):
                if k:
                    term = term * points[..., v] ** k
            out = out + term
        return out

    def deriv(self, var: int) -> "Polynomial":
        if var not in self._derivs:
            mask = self.exps[:, var] > 0
            exps = self.exps[mask].copy()
            coefs = self.coefs[mask] * exps[:, var]
            exps[:, var] -= 1
            self._derivs[var] = Polynomial(self.nvars, exps, coefs)
        return self._derivs[var]

    def partial(self, *vars_: int) -> "Polynomial":
        p = self
        for v in vars_:
            p = p.deriv(v)
        return p

    def grad(self, points):
        return np.stack([self.deriv(v)(points) for v in range(self.nvars)], axis=-1)

    def __repr__(self) -> str:
        return f"Polynomial(nvars={self.nvars}, terms={len(self.coefs)})"
