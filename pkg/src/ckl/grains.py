"""Grains: balls intersected with neighbourhoods of zero sets, and counts of tubes inside them.

Membership uses the first-order distance proxy |P(x)| <= delta * |grad P(x)|,
exact for affine P and accurate to O(delta^2 * curvature) otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateError
from .maximal import ScalingFit, cross_section, fit_scaling, time_samples
from .phases import PhaseSpec
from .polynomials import Polynomial
from .tubes import GridField, Tube, TubeFamily, family_cores

GRAD_FLOOR = 1e-6
GRAM_THRESHOLD = 1e-8
T_SAMPLES = 64
S_SAMPLES = 16


@dataclass(frozen=True)
class SmoothFunction:
    """A defining function given by value and gradient callables on (..., n) arrays."""

    nvars: int
    value: Callable
    gradient: Callable
    label: str = ""

    def __call__(self, points):
        return self.value(points)

    def grad(self, points):
        return self.gradient(points)


def log_surface_function(n: int = 3) -> SmoothFunction:
    """x2 - log x1, whose zero set is the compressing surface M (+inf where x1 <= 0)."""

    def value(p):
        p = np.asarray(p, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = p[..., 1] - np.log(p[..., 0])
        return np.where(p[..., 0] > 0, v, np.inf)

    def gradient(p):
        p = np.asarray(p, float)
        g = np.zeros(p.shape)
        with np.errstate(divide="ignore"):
            g[..., 0] = np.where(p[..., 0] > 0, -1 / p[..., 0], 0.0)
        g[..., 1] = 1.0
        return g

    return SmoothFunction(n, value, gradient, "x2 - log x1")


def _as_function(p):
    if isinstance(p, (Polynomial, SmoothFunction)):
        return p
    if isinstance(p, dict):
        return Polynomial.from_json(p)
    raise ConfigError(f"cannot use {type(p).__name__} as a defining function")


def proxy_inside(funcs: Sequence, points, delta: float) -> np.ndarray:
    """|P_j| <= delta * max(|grad P_j|, GRAD_FLOOR) for every j."""
    points = np.asarray(points, float)
    ok = np.ones(points.shape[:-1], dtype=bool)
    for f in funcs:
        val = np.abs(f(points))
        gnorm = np.maximum(np.linalg.norm(f.grad(points), axis=-1), GRAD_FLOOR)
        ok &= val <= delta * gnorm
    return ok


def _project(funcs, x: np.ndarray, iters: int = 30) -> np.ndarray:
    """Gauss-Newton projection of points onto the common zero set."""
    for _ in range(iters):
        vals = np.stack([f(x) for f in funcs], axis=-1)  # (N, m)
        jac = np.stack([f.grad(x) for f in funcs], axis=-2)  # (N, m, n)
        bad = ~np.all(np.isfinite(vals), axis=-1)
        vals = np.where(bad[:, None], 0.0, vals)
        jac = np.where(bad[:, None, None], 0.0, jac)
        step = np.linalg.pinv(jac) @ vals[..., None]
        x = x - step[..., 0]
        x[bad] = np.nan
    return x


@dataclass
class Grain:
    funcs: list
    delta: float
    rho: float
    center: np.ndarray
    check: bool = True
    min_gram: float = field(default=np.nan, init=False)

    def __post_init__(self):
        self.funcs = [_as_function(f) for f in self.funcs]
        self.center = np.asarray(self.center, float)
        n = len(self.center)
        if not 1 <= self.codim <= n:
            raise ConfigError("codimension must lie in [1, n]")
        if any(f.nvars != n for f in self.funcs):
            raise ConfigError("defining functions must have one variable per coordinate")
        if not 0 < self.delta <= self.rho <= 1:
            raise ConfigError("grains need 0 < delta <= rho <= 1")
        if self.check:
            self.min_gram = self.transversality()
            if not self.min_gram > GRAM_THRESHOLD:
                raise DegenerateError(
                    f"defining gradients are dependent on the zero set (Gram det {self.min_gram:.3g})"
                )

    @property
    def codim(self) -> int:
        return len(self.funcs)

    @property
    def n(self) -> int:
        return len(self.center)

    def transversality(self, samples: int = 64, seed: int = 0) -> float:
        """Smallest Gram determinant of normalized gradients on sampled zero-set points in the ball."""
        rng = np.random.default_rng(seed)
        x = self.center + self.rho * rng.uniform(-1, 1, size=(samples, self.n))
        z = _project(self.funcs, x)
        z = z[np.all(np.isfinite(z), axis=1)]
        z = z[np.linalg.norm(z - self.center, axis=1) <= self.rho]
        z = z[proxy_inside(self.funcs, z, 1e-9)]
        if not len(z):
            raise DegenerateError("no zero-set points found inside the grain ball")
        grads = np.stack([f.grad(z) for f in self.funcs], axis=1)  # (N, m, n)
        grads = grads / np.linalg.norm(grads, axis=-1, keepdims=True)
        gram = np.einsum("kin,kjn->kij", grads, grads)
        return float(np.linalg.det(gram).min())

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, float)
        in_ball = np.linalg.norm(points - self.center, axis=-1) <= self.rho
        return in_ball & proxy_inside(self.funcs, points, self.delta)

    def with_delta(self, delta: float) -> "Grain":
        return Grain(self.funcs, delta, self.rho, self.center, check=False)


def grain_membership(grain: Grain, point) -> bool:
    return bool(grain.contains(point))


def _tube_points(ph: PhaseSpec, cores: np.ndarray, ts: np.ndarray, delta: float, s_samples: int) -> np.ndarray:
    """Sample points (..., nt, ns, n) of tubes with core positions (..., nt, d)."""
    disc = delta * cross_section(ph.dim_y, s_samples)
    xs = cores[..., :, None, :] + disc
    tt = np.broadcast_to(ts[:, None, None], xs.shape[:-1] + (1,))
    return np.concatenate([xs, tt], axis=-1)


def tube_grain_fraction(
    ph: PhaseSpec, tube: Tube, grain: Grain, t_samples: int = T_SAMPLES, s_samples: int = S_SAMPLES
) -> float:
    """Share of the tube's (t, cross-section) samples lying in the grain."""
    fam = TubeFamily(ph, tube.delta, "None", np.atleast_2d(tube.y), np.atleast_2d(tube.omega))
    return float(family_grain_fractions(fam, grain, t_samples, s_samples)[0])


def family_grain_fractions(
    family: TubeFamily, grain: Grain, t_samples: int = T_SAMPLES, s_samples: int = S_SAMPLES
) -> np.ndarray:
    if t_samples < 64:
        raise ConfigError("t_samples must be at least 64")
    if grain.n != family.phase.n:
        raise ConfigError("grain and phase live in different dimensions")
    ts = time_samples(family.phase.rho, t_samples)
    out = np.empty(len(family))
    chunk = max(1, (1 << 20) // (t_samples * s_samples))
    for a in range(0, len(family), chunk):
        sub = family.subset(np.arange(a, min(a + chunk, len(family))))
        pts = _tube_points(family.phase, family_cores(sub, ts), ts, family.delta, s_samples)
        out[a : a + len(sub)] = grain.contains(pts).reshape(len(sub), -1).mean(axis=1)
    return out


def nonconcentration_count(family: TubeFamily, grain: Grain, lam: float, t_samples: int = T_SAMPLES) -> int:
    """#{T : |T cap G| >= lam |T|}."""
    if lam > 1:
        return 0
    return int(np.sum(family_grain_fractions(family, grain, t_samples) >= lam))


# -- neighbourhood volumes ----------------------------------------------------------------

@dataclass
class VolumeFit:
    deltas: np.ndarray
    measures: np.ndarray
    fit: ScalingFit


def neighbourhood_measure(funcs: Sequence, delta: float, box, h: float) -> float:
    funcs = [_as_function(f) for f in funcs]
    g = GridField.from_function(*box, h, lambda p: proxy_inside(funcs, p, delta).astype(np.float32))
    return g.union_measure()


def neighborhood_volume_fit(funcs: Sequence, deltas: Sequence[float], box, cells_per_delta: float = 2.0) -> VolumeFit:
    """Lattice measure of the proxy neighbourhood per delta and its log-log slope (~ codimension)."""
    measures = np.array([neighbourhood_measure(funcs, d, box, d / cells_per_delta) for d in deltas])
    return VolumeFit(np.asarray(deltas, float), measures, fit_scaling(list(zip(deltas, measures))))


def sphere_polynomial(n: int = 3, radius: float = 0.5) -> Polynomial:
    exps = np.vstack([2 * np.eye(n, dtype=int), np.zeros((1, n), int)])
    return Polynomial(n, exps, [1.0] * n + [-radius**2])


def hyperplane_polynomial(normal, offset: float) -> Polynomial:
    """normal . x - offset, scaled so that |grad| = 1."""
    normal = np.asarray(normal, float)
    norm = np.linalg.norm(normal)
    n = len(normal)
    exps = np.vstack([np.eye(n, dtype=int), np.zeros((1, n), int)])
    return Polynomial(n, exps, list(normal / norm) + [-offset / norm])


def circle_polynomials(radius: float = 0.5) -> list[Polynomial]:
    """x1^2 + x2^2 - r^2 and x3: a circle in R^3 (codimension 2)."""
    disc = Polynomial(3, [[2, 0, 0], [0, 2, 0], [0, 0, 0]], [1.0, 1.0, -radius**2])
    return [disc, Polynomial(3, [[0, 0, 1]], [1.0])]
