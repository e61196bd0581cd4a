"""The explicit compressed Kakeya family and its Jacobian degeneration.

The counterexample phase sends every tube with direction y in Y0 and centre
omega(y) = (y1/y2, log(y1/y2)) into the surface M = {x2 = log x1}.  This module
checks that containment, measures the neighbourhood of M, fits the resulting
maximal-function lower bound, and evaluates the quadratic (in t) expansion of
the Jacobian of (y, t) -> gamma_{y, omega(y)}(t).  A single-scale fan of
tubes for the star phase that lies in a 2-surface is also provided.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .curves import solve_psi
from .errors import DomainError
from .maximal import ScalingFit, fit_scaling, operator_norm_lower
from .phases import PhaseSpec, phase
from .surfaces import surface_m_distance
from .tubes import Y0_LOWER, Y0_RADIUS, GridField, in_y0, log_ratio_omega, y0_lattice

DEFAULT_LADDER = tuple(2.0**-k for k in range(4, 9))
FD_STEP = 1e-5
# boundary slack for Y0: covers lattice rounding and finite-difference stencils
Y0_SLACK = 1e-4


def counterexample_omega(y) -> np.ndarray:
    """Centre map of the compressed family; raises DomainError outside Y0."""
    y = np.asarray(y, float)
    if y.shape[-1:] != (2,):
        raise DomainError("y must have two coordinates")
    ok = (y[..., 0] >= Y0_LOWER - Y0_SLACK) & (y[..., 1] >= Y0_LOWER - Y0_SLACK)
    ok &= np.linalg.norm(y, axis=-1) <= Y0_RADIUS + Y0_SLACK
    if not np.all(ok):
        raise DomainError("y lies outside Y0 = {y1, y2 >= 1/2, |y| <= 9/10}")
    return log_ratio_omega(y)


def sample_y0(rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform samples of Y0 by rejection from its bounding square."""
    out = np.empty((0, 2))
    while len(out) < count:
        cand = rng.uniform(Y0_LOWER, Y0_RADIUS, size=(2 * count, 2))
        out = np.concatenate([out, cand[in_y0(cand)]])
    return out[:count]


# -- containment --------------------------------------------------------------------

@dataclass
class ContainmentReport:
    max_deviation: float  # max |x2 - log x1|
    max_closed_form_error: float  # against x = (y1/y2 - t y1, log(y1/y2 - t y1))
    samples: int

    def to_json(self) -> dict:
        return {
            "max_deviation": self.max_deviation,
            "max_closed_form_error": self.max_closed_form_error,
            "samples": self.samples,
        }


def verify_surface_containment(samples: int = 10_000, tol: float = 1e-10, seed: int = 0, rho: float = 0.5) -> ContainmentReport:
    ph = phase("Counterexample", 3, rho=rho)
    rng = np.random.default_rng(seed)
    ys = sample_y0(rng, samples)
    ts = rng.uniform(-rho, rho, samples)
    dev = closed = 0.0
    for t, y in zip(ts, ys):
        x = solve_psi(ph, counterexample_omega(y), t, y, tol).x
        dev = max(dev, abs(x[1] - math.log(x[0])))
        u = y[0] / y[1] - t * y[0]
        closed = max(closed, abs(x[0] - u), abs(x[1] - math.log(u)))
    return ContainmentReport(float(dev), float(closed), samples)


# -- neighbourhood volume -----------------------------------------------------------

def _scan_box(rho: float):
    ys = y0_lattice(0.01)
    ts = np.linspace(-rho, rho, 33)
    x1 = ys[:, None, 0] / ys[:, None, 1] - ts[None, :] * ys[:, None, 0]
    lo = np.array([x1.min() - 0.05, np.log(x1.min()) - 0.05, -rho])
    hi = np.array([x1.max() + 0.05, np.log(x1.max()) + 0.05, rho])
    return lo, hi


def surface_neighbourhood_oracle(delta: float, rho: float = 0.5) -> float:
    """2 delta x (length of the log curve in the scan box) x |I|."""
    lo, hi = _scan_box(rho)
    u = np.linspace(lo[0], hi[0], 20_001)
    inside = (np.log(u) >= lo[1]) & (np.log(u) <= hi[1])
    speed = np.sqrt(1 + 1 / u**2) * inside
    length = float(np.sum(0.5 * (speed[1:] + speed[:-1]) * np.diff(u)))
    return 2 * delta * length * 2 * rho


@dataclass
class VolumeScan:
    deltas: np.ndarray
    measures: np.ndarray
    oracle: np.ndarray
    box_volume: float
    fit: ScalingFit


def compression_volume_scan(deltas: Sequence[float] = DEFAULT_LADDER, rho: float = 0.5) -> VolumeScan:
    """Lattice measure of N_delta(M) in a fixed box, with the log-log slope in delta."""
    lo, hi = _scan_box(rho)
    measures = []
    for delta in deltas:
        g = GridField.from_function(
            lo, hi, delta / 4, lambda p, d=delta: (surface_m_distance(p) < d).astype(float), constant_axes=(2,)
        )
        measures.append(g.union_measure())
    measures = np.array(measures)
    oracle = np.array([surface_neighbourhood_oracle(d, rho) for d in deltas])
    fit = fit_scaling(list(zip(deltas, measures)))
    return VolumeScan(np.asarray(deltas, float), measures, oracle, float(np.prod(hi - lo)), fit)


@dataclass
class CompressionLadder:
    deltas: np.ndarray
    ratios: dict  # p -> array of ||K g||_1 / ||g||_p
    fits: dict  # p -> ScalingFit

    def rows(self):
        for p, r in self.ratios.items():
            for d, v in zip(self.deltas, r):
                yield {"p": p, "delta": float(d), "ratio": float(v)}


def compression_lower_bound(
    ps: Sequence[float] = (2, 3),
    deltas: Sequence[float] = DEFAULT_LADDER,
    threads: int = 1,
) -> CompressionLadder:
    """||K^delta chi_{N_delta M}||_{L^1(Y0)} / ||chi_{N_delta M}||_{L^p} along a delta ladder.

    If K^delta were bounded with the universal loss, the ratio could not
    grow; for this family it behaves like delta^{-1/p}.
    """
    ph = phase("Counterexample", 3)
    ratios: dict = {p: [] for p in ps}
    for delta in deltas:
        # the maximal function does not depend on p; compute it once per delta
        base = operator_norm_lower(ph, delta, 1.0, 1.0, "NeighborhoodOfSurface", threads=threads)
        num = base.numerator
        g_measure = base.denominator  # ||chi||_1 = measure of the support
        for p in ps:
            ratios[p].append(num / g_measure ** (1.0 / p))
    ratios = {p: np.array(v) for p, v in ratios.items()}
    fits = {p: fit_scaling(list(zip(deltas, r))) for p, r in ratios.items()}
    return CompressionLadder(np.asarray(deltas, float), ratios, fits)


# -- Jacobian degeneration -----------------------------------------------------------

def _derivative(f: Callable, y: np.ndarray, k: int, step: float) -> np.ndarray:
    """Richardson-extrapolated central difference of f along coordinate k."""
    e = np.zeros(y.shape[-1])
    e[k] = 1.0

    def central(hh):
        return (f(y + hh * e) - f(y - hh * e)) / (2 * hh)

    return (4 * central(step / 2) - central(step)) / 3


def _jacobian_matrix(f: Callable, y, step: float) -> np.ndarray:
    """D f, shape (..., 2, 2) with rows the components of f."""
    y = np.asarray(y, float)
    cols = [_derivative(f, y, k, step) for k in range(2)]
    return np.stack(cols, axis=-1)


@dataclass
class JacobianCoefficients:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __iter__(self):
        return iter((self.A, self.B, self.C))

    def quadratic(self, t):
        return self.A * t**2 + self.B * t + self.C


def jacobian_coefficients(omega_map: Callable, y, step: float = FD_STEP) -> JacobianCoefficients:
    """Coefficients of (1 - t y2) J Phi(y, t) = A t^2 + B t + C for the counterexample phase.

    A = 1 + y2 d2 w2, B = -(d1 w1 + d2 w2 + y2 J w), C = J w.
    """
    y = np.asarray(y, float)
    D = _jacobian_matrix(omega_map, y, step)
    jw = D[..., 0, 0] * D[..., 1, 1] - D[..., 0, 1] * D[..., 1, 0]
    y2 = y[..., 1]
    A = 1 + y2 * D[..., 1, 1]
    B = -(D[..., 0, 0] + D[..., 1, 1] + y2 * jw)
    return JacobianCoefficients(A, B, jw)


def curve_map_jacobian(omega_map: Callable, y, t, step: float = FD_STEP, ph: PhaseSpec | None = None) -> np.ndarray:
    """det D_y (omega(y) - d_y psi(t; y)), i.e. J Phi for Phi(y, t) = (gamma_{y,omega(y)}(t), t)."""
    ph = phase("Counterexample", 3) if ph is None else ph
    t = np.asarray(t, float)

    def gamma(yy):
        return omega_map(yy) - ph.psi_y(t, yy)

    D = _jacobian_matrix(gamma, y, step)
    return D[..., 0, 0] * D[..., 1, 1] - D[..., 0, 1] * D[..., 1, 0]


def companion_residual(omega_map: Callable, y, t, step: float = FD_STEP) -> np.ndarray:
    """|J Phi (1 - t y2) - (A t^2 + B t + C)| with J Phi from finite differences."""
    y = np.asarray(y, float)
    t = np.asarray(t, float)
    coeffs = jacobian_coefficients(omega_map, y, step)
    jphi = curve_map_jacobian(omega_map, y, t, step)
    return np.abs(jphi * (1 - t * y[..., 1]) - coeffs.quadratic(t))


def identity_map(y):
    return np.asarray(y, float)


def random_polynomial_map(seed: int = 0, degree: int = 3) -> Callable:
    """A seeded smooth map R^2 -> R^2 with cubic polynomial components."""
    rng = np.random.default_rng(seed)
    exps = [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]
    coef = rng.standard_normal((2, len(exps)))

    def omega(y):
        y = np.asarray(y, float)
        mons = np.stack([y[..., 0] ** i * y[..., 1] ** j for i, j in exps], axis=-1)
        return mons @ coef.T

    return omega


# -- star fan ----------------------------------------------------------------------

def star_fan_deviations(ybar1: float, c: float, delta: float, ts, omega1_offsets=None, rho: float = 0.5) -> np.ndarray:
    """|x2 - t x1 - (c - t ybar1)| along the tubes (ybar1, y2), omega = (offset, c).

    Directions y2 run over the delta-lattice with (ybar1, y2) inside the
    frequency ball.  Returns shape (tubes, len(ts)).
    """
    ph = phase("BourgainStar", 3, rho=rho)
    if abs(ybar1) >= rho:
        raise DomainError("|ybar1| must be below rho")
    reach = math.sqrt(rho**2 - ybar1**2)
    k = np.arange(-math.floor(reach / delta), math.floor(reach / delta) + 1)
    y2s = k * delta
    y2s = y2s[np.hypot(ybar1, y2s) < rho]
    offsets = np.zeros(len(y2s)) if omega1_offsets is None else np.asarray(omega1_offsets, float)
    out = np.empty((len(y2s), len(ts)))
    for i, (y2, off) in enumerate(zip(y2s, offsets)):
        omega = np.array([off, c])
        for j, t in enumerate(ts):
            x = solve_psi(ph, omega, t, np.array([ybar1, y2])).x
            out[i, j] = abs(x[1] - t * x[0] - (c - t * ybar1))
    return out


def star_fan_witness(ybar1: float, c: float, delta: float, samples: int = 65, rho: float = 0.5) -> float:
    """Max deviation of the fan from the plane x2 - t x1 = c - t ybar1."""
    ts = np.linspace(-rho, rho, samples)
    return float(star_fan_deviations(ybar1, c, delta, ts, rho=rho).max())
