"""Sublevel-set measures, the van der Corput bound, and empirical kappa fits."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import ConfigError, PreconditionError, ZeroPolynomialError
from .hypotheses import FunctionFamily, minor_pairs
from .maximal import fit_scaling
from .phases import PhaseSpec, exponent_table

DEFAULT_SIGMAS = tuple(2.0**-k for k in range(2, 21))
DEFAULT_T_POINTS = 2**15
DEFAULT_Y_SAMPLES = 512
NON_POWER_LAW_RESIDUAL = 0.5
RIDGE = 1e-12
RESOLVED_CELLS = 8


def vdc_constant(k: int) -> float:
    """4 (k!/2)^{1/k}: the sharp van der Corput constant (attained by Chebyshev polynomials)."""
    return 4.0 * (math.factorial(k) / 2.0) ** (1.0 / k)


# -- measures ----------------------------------------------------------------------

def cell_grid(lo: float, hi: float, points: int) -> tuple[np.ndarray, float]:
    h = (hi - lo) / points
    return lo + (np.arange(points) + 0.5) * h, h


def sublevel_measure(F: Callable, sigma: float, t_range=(-1.0, 1.0), t_points: int = DEFAULT_T_POINTS, y_range=None, y_points: int = 256) -> float:
    """Cell volume times the number of cell centres with |F| < sigma.

    ``F`` takes t (and y when ``y_range`` is given) as broadcasting arrays.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    ts, ht = cell_grid(*t_range, t_points)
    if y_range is None:
        vals = np.broadcast_to(F(ts), ts.shape)
        return float(np.count_nonzero(np.abs(vals) < sigma) * ht)
    ys, hy = cell_grid(*y_range, y_points)
    vals = np.broadcast_to(F(ts[:, None], ys[None, :]), (len(ts), len(ys)))
    return float(np.count_nonzero(np.abs(vals) < sigma) * ht * hy)


def linear_sublevel_measure(values: np.ndarray, t: np.ndarray, sigma: float) -> float:
    """Measure of {|u| < sigma} for the piecewise-linear interpolant of samples u(t).

    Exact for piecewise-linear u and accurate far below the grid spacing otherwise.
    """
    a, b = values[:-1], values[1:]
    width = np.diff(t)
    slope = b - a
    flat = slope == 0
    safe = np.where(flat, 1.0, slope)
    s1 = (-sigma - a) / safe
    s2 = (sigma - a) / safe
    lo = np.clip(np.minimum(s1, s2), 0.0, 1.0)
    hi = np.clip(np.maximum(s1, s2), 0.0, 1.0)
    frac = np.where(flat, (np.abs(a) < sigma).astype(float), hi - lo)
    return float(np.sum(frac * width))


@dataclass
class VdcResult:
    k: int
    sigmas: np.ndarray
    measures: np.ndarray
    ratios: np.ndarray

    @property
    def worst_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def constant(self) -> float:
        return vdc_constant(self.k)


def van_der_corput_check(
    u: Callable,
    k: int,
    interval=(-1.0, 1.0),
    sigmas: Sequence[float] = tuple(10.0**-j for j in range(1, 7)),
    points: int = 2**18 + 1,
    derivative: Callable | None = None,
) -> VdcResult:
    """Ratios |{|u| < sigma}| / sigma^{1/k} after checking u^{(k)} >= 1 on a grid.

    Without ``derivative`` the k-th derivative is taken by a Cauchy integral,
    so ``u`` must then accept complex arguments.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    lo, hi = interval
    check = np.linspace(lo, hi, 513)
    if derivative is not None:
        dk = np.asarray(derivative(check), float)
    else:
        radius = min(0.1, (hi - lo) / 4)
        fam = FunctionFamily.from_functions([u], radius=radius)
        dk = fam.derivatives(check, k)[..., k, 0]
    if np.any(dk < 1 - 1e-9):
        raise PreconditionError(f"u^({k}) drops to {dk.min():.3g} < 1 on the interval")
    t = np.linspace(lo, hi, points)
    vals = np.asarray(u(t), float)
    sig = np.asarray(sigmas, float)
    meas = np.array([linear_sublevel_measure(vals, t, s) for s in sig])
    return VdcResult(k, sig, meas, meas / sig ** (1.0 / k))


# -- polynomial derivative floor ---------------------------------------------------

@lru_cache(maxsize=1)
def poly_floor_constants() -> dict[int, float]:
    text = resources.files("ckl").joinpath("data/poly_floor_constants.json").read_text()
    raw = json.loads(text)
    return {int(d): float(c) for d, c in raw["c_d"].items()}


def min_abs_on_interval(coef: np.ndarray) -> float:
    """min over [-1, 1] of |Q| for Q with ascending coefficients ``coef``."""
    coef = np.asarray(coef, float)
    # leading terms below round-off of the largest one only destabilize the root solve
    big = np.abs(coef).max(initial=0.0)
    keep = np.nonzero(np.abs(coef) > 1e-14 * big)[0]
    coef = coef[: keep[-1] + 1] if keep.size else coef[:0]
    if coef.size == 0:
        return 0.0
    if coef.size == 1:
        return abs(coef[0])
    roots = npoly.polyroots(coef)
    real = roots[np.abs(roots.imag) < 1e-12].real
    if np.any((real >= -1) & (real <= 1)):
        return 0.0
    crit = npoly.polyroots(npoly.polyder(coef)) if coef.size > 2 else np.array([])
    cand = [-1.0, 1.0] + [c.real for c in np.atleast_1d(crit) if abs(c.imag) < 1e-12 and -1 <= c.real <= 1]
    return float(np.min(np.abs(npoly.polyval(np.array(cand), coef))))


@dataclass
class PolyFloor:
    k: int
    floor: float
    rhs: float
    c_d: float
    jet_norm: float


def derivative_jet_norm(coef: np.ndarray, s: float) -> float:
    """(sum_i |P^{(i)}(s)|^2)^{1/2}."""
    total = 0.0
    c = np.asarray(coef, float)
    while c.size:
        total += npoly.polyval(s, c) ** 2
        c = npoly.polyder(c) if c.size > 1 else np.array([])
    return math.sqrt(total)


def poly_floor_raw(coef, s: float) -> tuple[int, float, float]:
    """(k, floor, jet norm) with k maximizing min_{[-1,1]} |P^{(k)}| (ties: smallest k)."""
    c = np.trim_zeros(np.asarray(coef, float), "b")
    best_k, best = 0, -1.0
    k = 0
    q = c
    while q.size:
        f = min_abs_on_interval(q)
        if f > best:
            best_k, best = k, f
        q = npoly.polyder(q) if q.size > 1 else np.array([])
        k += 1
    return best_k, best, derivative_jet_norm(c, s)


def poly_derivative_floor(P, s: float) -> PolyFloor:
    """Pick k with min_{t in [-1,1]} |P^{(k)}(t)| as large as possible.

    ``P`` holds ascending coefficients.  The recorded constant c_d gives
    floor >= c_d * (sum_i |P^{(i)}(s)|^2)^{1/2}.
    """
    coef = np.trim_zeros(np.asarray(P, float), "b")
    if coef.size == 0 or not np.any(coef):
        raise ZeroPolynomialError("P is identically zero")
    deg = coef.size - 1
    if deg > 20:
        raise ValueError("degree must be at most 20")
    if not -1 <= s <= 1:
        raise ValueError("s must lie in [-1, 1]")
    k, floor, jet = poly_floor_raw(coef, s)
    c_d = poly_floor_constants()[deg]
    return PolyFloor(k, floor, c_d * jet, c_d, jet)


# -- adversarial coefficients ------------------------------------------------------

def adversarial_mu(f_vals, g_vals, ridge: float = RIDGE) -> np.ndarray:
    """Ridge least squares min |f - sum_j mu_j g_j|^2; batched over leading axes.

    ``f_vals`` is (..., N) and ``g_vals`` is (..., N, m).
    """
    f_vals = np.asarray(f_vals, float)
    g_vals = np.asarray(g_vals, float)
    gram = np.einsum("...ni,...nj->...ij", g_vals, g_vals)
    rhs = np.einsum("...ni,...n->...i", g_vals, f_vals)
    m = g_vals.shape[-1]
    return np.linalg.solve(gram + ridge * np.eye(m), rhs[..., None])[..., 0]


# -- ensembles -----------------------------------------------------------------------

@dataclass
class Ensemble:
    """f and g_1..g_m as functions of (t, y) with y in a box [-r, r]^N or a ball."""

    name: str
    f: Callable
    gs: Sequence[Callable]
    y_dim: int = 1
    t_range: tuple = (-0.5, 0.5)
    y_radius: float = 0.5
    y_shape: str = "box"

    @property
    def m(self) -> int:
        return len(self.gs)

    @property
    def t_measure(self) -> float:
        return self.t_range[1] - self.t_range[0]

    @property
    def y_measure(self) -> float:
        if self.y_shape == "box":
            return (2 * self.y_radius) ** self.y_dim
        d = self.y_dim
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.y_radius**d

    def sample_y(self, rng, count: int) -> np.ndarray:
        if self.y_shape == "box":
            return rng.uniform(-self.y_radius, self.y_radius, size=(count, self.y_dim))
        out = np.empty((0, self.y_dim))
        while len(out) < count:
            cand = rng.uniform(-self.y_radius, self.y_radius, size=(2 * count + 8, self.y_dim))
            out = np.concatenate([out, cand[np.linalg.norm(cand, axis=1) < self.y_radius]])
        return out[:count]

    def evaluate(self, t, y):
        """f (..., ) and stacked g (..., m) at broadcast (t, y)."""
        fv = np.broadcast_to(self.f(t, y), np.broadcast_shapes(np.shape(t), np.shape(y)[:-1]))
        gv = np.stack([np.broadcast_to(g(t, y), fv.shape) for g in self.gs], axis=-1)
        return fv, gv


def builtin_ensemble(name: str) -> Ensemble:
    if name == "t2_ty":
        return Ensemble(name, lambda t, y: t**2, [lambda t, y: t * y[..., 0]])
    if name == "slice_example":
        return Ensemble(name, lambda t, y: t**2, [lambda t, y: t**2 * y[..., 0] ** 2 + t * y[..., 0] ** 3])
    if name == "star_minors":
        return phase_ensemble(PhaseSpec("BourgainStar"), target="one")
    raise ConfigError(f"unknown ensemble {name!r}")


def phase_ensemble(ph: PhaseSpec, target: str = "one") -> Ensemble:
    """Minor family of d_yy phi along the curves with omega = 0.

    ``target="one"`` tests the constant 1 against all minors (the Nikodym form);
    ``target="det"`` tests the full minor against the proper ones (the Kakeya form).
    """
    from .hypotheses import hessian_along_curve, _minors

    size = exponent_table(ph.n).d_crit
    alpha = tuple(range(size))
    pairs = minor_pairs(alpha, alpha, include_full=(target == "one"))
    full = [(alpha, alpha)]

    def minor(pair):
        def g(t, y):
            t = np.asarray(t)  # complex t is used for Taylor coefficients
            shape = np.broadcast_shapes(t.shape, np.shape(y)[:-1])
            omega = np.zeros(shape + (ph.dim_y,))
            hess = hessian_along_curve(ph, np.broadcast_to(t, shape), np.broadcast_to(y, shape + (ph.dim_y,)), omega)
            return _minors(hess, [pair])[..., 0]

        return g

    if target == "one":
        f = lambda t, y: np.ones(np.broadcast_shapes(np.shape(t), np.shape(y)[:-1]))  # noqa: E731
    elif target == "det":
        f = minor(full[0])
    else:
        raise ConfigError("target must be 'one' or 'det'")
    return Ensemble(
        f"{ph.kind}_minors_{target}",
        f,
        [minor(p) for p in pairs],
        y_dim=ph.dim_y,
        t_range=(-ph.rho, ph.rho),
        y_radius=ph.rho,
        y_shape="ball",
    )


# -- kappa experiments -------------------------------------------------------------

@dataclass
class SublevelProfile:
    sigmas: np.ndarray
    measures: np.ndarray
    fitted_kappa: float
    fitted_C: float
    mode: str
    ensemble: str = ""
    max_log_residual: float = 0.0
    non_power_law: bool = False
    reaches_full_interval: bool = False
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "ensemble": self.ensemble,
            "mode": self.mode,
            "sigmas": [float(s) for s in self.sigmas],
            "measures": [float(m) for m in self.measures],
            "fitted_kappa": self.fitted_kappa,
            "fitted_C": self.fitted_C,
            "max_log_residual": self.max_log_residual,
            "non_power_law": self.non_power_law,
            "reaches_full_interval": self.reaches_full_interval,
        }


def mu_grid(m: int, seed: int, span: float = 2.0) -> np.ndarray:
    """Fixed constant adversaries: a 9-point grid per coordinate for m <= 2, else 64 seeded draws."""
    if m <= 2:
        axis = np.linspace(-span, span, 9)
        return np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    return np.random.default_rng(seed).uniform(-span, span, size=(64, m))


def taylor_cancellers(f_coef: np.ndarray, g_coef: np.ndarray, rows: int) -> np.ndarray:
    """mu making chosen Taylor coefficients of f - sum mu_j g_j vanish at t = 0.

    ``f_coef`` is (Y, K) and ``g_coef`` is (Y, K, m); one candidate per choice
    of m rows among the first ``rows``.  Singular choices give NaN.
    """
    m = g_coef.shape[-1]
    out = []
    for rset in combinations(range(rows), m):
        a = g_coef[:, list(rset), :]
        b = f_coef[:, list(rset)]
        det = np.linalg.det(a)
        ok = np.abs(det) > 1e-12 * np.maximum(1.0, np.max(np.abs(a), axis=(1, 2)) ** m)
        sol = np.full((len(a), m), np.nan)
        if np.any(ok):
            sol[ok] = np.linalg.solve(a[ok], b[ok][..., None])[..., 0]
        out.append(sol)
    return np.stack(out, axis=1) if out else np.empty((len(f_coef), 0, m))


def _slice_counts(absF: np.ndarray, sigmas_sorted: np.ndarray) -> np.ndarray:
    """Per row, the number of entries below each sigma; (Y, L)."""
    L = len(sigmas_sorted)
    rows, cols = absF.shape
    # bin j holds values in [sigma_{j-1}, sigma_j); entries below sigma_j are bins <= j
    idx = np.searchsorted(sigmas_sorted, absF, side="right")
    flat = idx + (L + 1) * np.arange(rows)[:, None]
    counts = np.bincount(flat.ravel(), minlength=rows * (L + 1)).reshape(rows, L + 1)
    return np.cumsum(counts, axis=1)[:, :L]


def _ensemble_taylor(ens: Ensemble, ys: np.ndarray, order: int):
    """Taylor coefficients at t = 0 of f and each g_j, by finite Cauchy sums on |t| = r."""
    r = min(0.25, ens.t_measure / 4)
    nodes = max(64, 4 * (order + 1))
    z = r * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    try:
        fv, gv = ens.evaluate(z[None, :], ys[:, None, :])
    except (TypeError, ValueError):
        return None
    scale = r ** -np.arange(order + 1)
    fc = (np.fft.fft(np.asarray(fv, complex), axis=-1)[:, : order + 1] / nodes).real * scale
    gc = (np.fft.fft(np.asarray(gv, complex), axis=-2)[:, : order + 1, :] / nodes).real * scale[:, None]
    return fc, gc


def kappa_experiment(
    ens: Ensemble | str,
    mode: str = "Averaged",
    sigmas: Sequence[float] = DEFAULT_SIGMAS,
    y_samples: int = DEFAULT_Y_SAMPLES,
    t_points: int = DEFAULT_T_POINTS,
    seed: int = 0,
) -> SublevelProfile:
    """Worst-case sublevel measures against a pool of adversarial coefficients.

    For every sampled y the pool holds the least-squares mu(y), its scalings by
    1/2 and 2, Taylor-cancelling choices at t = 0, and fixed constants
    (``mu_grid``).  Per (y, sigma) the most damaging member is kept, so the
    measures dominate those of every pool member.  Averaged mode integrates
    over y (Monte Carlo); Slice mode takes the supremum over sampled y.
    """
    if isinstance(ens, str):
        ens = builtin_ensemble(ens)
    if mode not in ("Averaged", "Slice"):
        raise ConfigError("mode must be Averaged or Slice")
    sig = np.sort(np.asarray(sigmas, float))
    if np.any(sig <= 0):
        raise ValueError("sigmas must be positive")
    rng = np.random.default_rng(seed)
    ys = ens.sample_y(rng, y_samples)
    ts, ht = cell_grid(*ens.t_range, t_points)
    fv, gv = ens.evaluate(ts[None, :], ys[:, None, :])
    fv = np.asarray(fv, float)
    gv = np.asarray(gv, float)
    m = ens.m

    mu_ls = adversarial_mu(fv, gv)
    pool = [mu_ls, 0.5 * mu_ls, 2.0 * mu_ls]
    coefs = _ensemble_taylor(ens, ys, m + 2)
    if coefs is not None:
        cancel = taylor_cancellers(*coefs, rows=m + 2)
        pool.extend(cancel[:, j, :] for j in range(cancel.shape[1]))
    pool.extend(np.broadcast_to(c, (len(ys), m)) for c in mu_grid(m, seed))

    best = np.zeros((len(ys), len(sig)), dtype=np.int64)
    for mu in pool:
        mu = np.where(np.isfinite(mu), mu, 0.0)
        absF = np.abs(fv - np.einsum("ynj,yj->yn", gv, mu))
        np.maximum(best, _slice_counts(absF, sig), out=best)
    slice_meas = best * ht  # (Y, L)

    if mode == "Averaged":
        measures = ens.y_measure * slice_meas.mean(axis=0)
        full = ens.y_measure * ens.t_measure
        quantum = ens.y_measure * ht / len(ys)
    else:
        measures = slice_meas.max(axis=0)
        full = ens.t_measure
        quantum = ht
    reaches_full = bool(np.any(slice_meas >= ens.t_measure * (1 - 1e-9)))

    order = np.argsort(-sig)
    sig_desc, meas_desc = sig[order], measures[order]
    # rungs below a few grid cells only measure the discretization
    resolved = meas_desc >= RESOLVED_CELLS * quantum
    if resolved.sum() >= 3:
        fit = fit_scaling(list(zip(sig_desc[resolved], meas_desc[resolved])))
        kappa, C, resid = fit.slope, math.exp(fit.intercept), fit.max_residual
    else:
        kappa, C, resid = math.inf, 0.0, 0.0
    return SublevelProfile(
        sig_desc,
        meas_desc,
        kappa,
        C,
        mode,
        ens.name,
        resid,
        bool(resid > NON_POWER_LAW_RESIDUAL),
        reaches_full,
        {"pool_size": len(pool), "domain_measure": full, "y_samples": len(ys), "t_points": t_points,
         "resolved_rungs": int(resolved.sum())},
    )
