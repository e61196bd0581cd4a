"""Discrete Kakeya and Nikodym maximal operators and log-log exponent fits."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .curves import curve_x
from .errors import ConfigError, DegenerateFitError
from .phases import PhaseSpec
from .surfaces import hyperplane_distance, surface_m_distance
from .tubes import (
    GridField,
    Y0_AREA,
    TubeFamily,
    ball_lattice,
    ball_measure,
    log_ratio_omega,
    rasterize_multiplicity,
    y0_lattice,
)

T_SAMPLES = 64
S_SAMPLES = 16
# sample points evaluated per chunk when averaging over many tubes
CHUNK_POINTS = 1 << 21
GOLDEN_ANGLE = math.pi * (3 - math.sqrt(5))


@dataclass
class ScalingFit:
    points: list
    slope: float
    intercept: float
    max_residual: float

    def to_json(self) -> dict:
        return {
            "points": [[float(a), float(b)] for a, b in self.points],
            "slope": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
        }


def fit_scaling(pairs) -> ScalingFit:
    """Least-squares line through (log scale, log value): value ~ scale**slope."""
    pts = [(float(a), float(b)) for a, b in pairs]
    if len(pts) < 3:
        raise ValueError("need at least three (scale, value) pairs")
    arr = np.array(pts)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("scales and values must be positive and finite")
    lx, ly = np.log(arr[:, 0]), np.log(arr[:, 1])
    if np.ptp(lx) == 0:
        raise DegenerateFitError("all scales are equal")
    design = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = np.abs(ly - (slope * lx + intercept))
    return ScalingFit(pts, float(slope), float(intercept), float(resid.max()))


def cross_section(d: int, count: int = S_SAMPLES) -> np.ndarray:
    """Deterministic, roughly uniform points in the unit (d)-ball."""
    if d == 1:
        return ((np.arange(count) + 0.5) / count * 2 - 1)[:, None]
    if d == 2:
        j = np.arange(count)
        r = np.sqrt((j + 0.5) / count)
        return np.stack([r * np.cos(j * GOLDEN_ANGLE), r * np.sin(j * GOLDEN_ANGLE)], axis=1)
    pts = np.empty((0, d))
    halton = qmc.Halton(d=d, scramble=False)
    while len(pts) < count:
        cand = 2 * halton.random(4 * count) - 1
        pts = np.concatenate([pts, cand[np.linalg.norm(cand, axis=1) < 1]])
    return pts[:count]


def time_samples(rho: float, count: int = T_SAMPLES) -> np.ndarray:
    return -rho + (np.arange(count) + 0.5) * (2 * rho / count)


def tube_averages(ph: PhaseSpec, g: GridField, ys, omegas, delta: float, nt: int = T_SAMPLES, ns: int = S_SAMPLES) -> np.ndarray:
    """Sampled averages of |g| over the tubes T_{y_i, omega_i}."""
    ys = np.atleast_2d(np.asarray(ys, float))
    omegas = np.atleast_2d(np.asarray(omegas, float))
    ys, omegas = np.broadcast_arrays(ys, omegas)
    ts = time_samples(ph.rho, nt)
    disc = delta * cross_section(ph.dim_y, ns)
    out = np.empty(len(ys))
    step = max(1, CHUNK_POINTS // (nt * ns))
    for a in range(0, len(ys), step):
        yy, ww = ys[a : a + step], omegas[a : a + step]
        core = curve_x(ph, ww[:, None, :], ts[None, :], yy[:, None, :])  # (P, nt, d)
        xs = core[:, :, None, :] + disc[None, None, :, :]
        tt = np.broadcast_to(ts[None, :, None, None], xs.shape[:-1] + (1,))
        vals = np.abs(g.lookup(np.concatenate([xs, tt], axis=-1)))
        out[a : a + step] = vals.reshape(len(yy), -1).mean(axis=1)
    return out


@dataclass
class MaximalResult:
    points: np.ndarray  # lattice of evaluation points (directions or centres)
    values: np.ndarray
    argmax: np.ndarray  # optimizing centre (Kakeya) or direction (Nikodym)
    cell_measure: float  # quadrature weight of each evaluation point

    def lp_norm(self, s: float) -> float:
        if math.isinf(s):
            return float(self.values.max())
        return float((self.cell_measure * np.sum(self.values**s)) ** (1 / s))


def _candidates(lattice, seed, window: int, spacing: float):
    if seed is None:
        return lattice
    d = len(seed)
    k = np.arange(-window, window + 1) * spacing
    grid = np.stack(np.meshgrid(*([k] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return seed[None, :] + grid


def _region(ph, default_lattice: bool, region_measure, spacing: float, count: int) -> float:
    if region_measure is not None:
        return float(region_measure)
    if default_lattice:
        return ball_measure(ph.dim_y, ph.rho)
    return spacing**ph.dim_y * count


def _maximal(ph, delta, g, outer, inner_lattice, seeds, window, inner_spacing, kakeya: bool, threads: int, region: float):
    def one(i):
        cands = _candidates(inner_lattice, None if seeds is None else seeds[i], window, inner_spacing)
        fixed = np.broadcast_to(outer[i], cands.shape)
        vals = tube_averages(ph, g, fixed, cands, delta) if kakeya else tube_averages(ph, g, cands, fixed, delta)
        j = int(np.argmax(vals))
        return vals[j], cands[j]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(len(outer))))
    else:
        results = [one(i) for i in range(len(outer))]
    values = np.array([r[0] for r in results])
    arg = np.array([r[1] for r in results]).reshape(len(outer), -1)
    # equal weights summing to the measure of the evaluation region
    return MaximalResult(np.asarray(outer), values, arg, region / len(outer))


def kakeya_maximal(
    ph: PhaseSpec,
    delta: float,
    g: GridField,
    y_grid_spacing: float | None = None,
    omega_search_spacing: float | None = None,
    *,
    ys=None,
    omega_seeds=None,
    region_measure: float | None = None,
    window: int = 1,
    threads: int = 1,
) -> MaximalResult:
    """K^delta g(y) = max over lattice centres of the tube average of |g|.

    With ``omega_seeds`` the search is restricted to a (2*window+1)^d patch of
    the centre lattice around each seed, which still gives a lower bound.
    Norms over the directions use equal weights summing to ``region_measure``
    (default: the measure of Y_phi, or spacing**(n-1) per point for custom ``ys``).
    """
    y_sp = delta if y_grid_spacing is None else y_grid_spacing
    w_sp = delta / 2 if omega_search_spacing is None else omega_search_spacing
    if y_sp > delta or w_sp > delta:
        raise ConfigError("lattice spacings must not exceed delta")
    ys_arr = ball_lattice(ph.dim_y, ph.rho, y_sp) if ys is None else np.asarray(ys, float)
    count = len(ys_arr)
    seeds = None if omega_seeds is None else np.asarray(omega_seeds, float)
    lattice = ball_lattice(ph.dim_y, ph.rho, w_sp) if seeds is None else None
    region = _region(ph, ys is None, region_measure, y_sp, count)
    return _maximal(ph, delta, g, ys_arr, lattice, seeds, window, w_sp, True, threads, region)


def nikodym_maximal(
    ph: PhaseSpec,
    delta: float,
    g: GridField,
    omega_grid_spacing: float | None = None,
    y_search_spacing: float | None = None,
    *,
    omegas=None,
    y_seeds=None,
    region_measure: float | None = None,
    window: int = 1,
    threads: int = 1,
) -> MaximalResult:
    """N^delta g(omega) = max over lattice directions of the tube average of |g|."""
    w_sp = delta if omega_grid_spacing is None else omega_grid_spacing
    y_sp = delta / 2 if y_search_spacing is None else y_search_spacing
    if y_sp > delta or w_sp > delta:
        raise ConfigError("lattice spacings must not exceed delta")
    om_arr = ball_lattice(ph.dim_y, ph.rho, w_sp) if omegas is None else np.asarray(omegas, float)
    count = len(om_arr)
    seeds = None if y_seeds is None else np.asarray(y_seeds, float)
    lattice = ball_lattice(ph.dim_y, ph.rho, y_sp) if seeds is None else None
    region = _region(ph, omegas is None, region_measure, w_sp, count)
    return _maximal(ph, delta, g, om_arr, lattice, seeds, window, y_sp, False, threads, region)


# -- operator-norm lower bounds ---------------------------------------------

def tube_box(ph: PhaseSpec, ys, omegas, pad: float):
    """Axis-aligned box containing every tube with the given directions and centres."""
    ts = np.linspace(-ph.rho, ph.rho, 33)
    ys = np.asarray(ys, float)
    omegas = np.asarray(omegas, float)
    cores = curve_x(ph, omegas[:, None, None, :], ts[None, None, :], ys[None, :, None, :])
    lo = cores.min(axis=(0, 1, 2)) - pad
    hi = cores.max(axis=(0, 1, 2)) + pad
    return np.append(lo, -ph.rho), np.append(hi, ph.rho)


def _domain_box(ph: PhaseSpec, delta: float):
    coarse = ball_lattice(ph.dim_y, ph.rho, ph.rho / 4)
    # include boundary points of the ball so extreme curves are covered
    d = ph.dim_y
    rim = np.concatenate([np.eye(d), -np.eye(d)]) * ph.rho * (1 - 1e-9)
    pts = np.concatenate([coarse, rim])
    return tube_box(ph, pts, pts, delta + 0.05)


@dataclass
class NormLowerBound:
    ratio: float
    numerator: float
    denominator: float
    suite: str
    details: dict = field(default_factory=dict)


SUITES = ("NeighborhoodOfSurface", "SingleTube", "RandomFields", "Constant")


def parse_suite(suite) -> tuple[str, int]:
    text = str(suite)
    if text.startswith("RandomFields"):
        inner = text[len("RandomFields"):].strip("() ")
        return "RandomFields", int(inner) if inner else 0
    if text not in SUITES:
        raise ConfigError(f"unknown test suite {suite!r}")
    return text, 0


def surface_field(ph: PhaseSpec, delta: float, h: float | None = None):
    """Indicator of the delta-neighbourhood of the compressing surface, with its box.

    For the counterexample phase this is M = {x2 = log x1}; for other phases a
    coordinate hyperplane {x_{n-1} = 0} that contains a one-parameter set of tubes.
    """
    h = delta / 4 if h is None else h
    if ph.kind == "Counterexample":
        ys = y0_lattice(delta)
        box = tube_box(ph, ys, log_ratio_omega(ys), 2 * delta)
        func = lambda p: (surface_m_distance(p) < delta).astype(float)  # noqa: E731
    else:
        box = _domain_box(ph, delta)
        normal = np.zeros(ph.n)
        normal[ph.n - 2] = 1.0
        func = lambda p: (hyperplane_distance(p, normal, 0.0) < delta).astype(float)  # noqa: E731
    return GridField.from_function(*box, h, func, constant_axes=(ph.n - 1,))


def operator_norm_lower(
    ph: PhaseSpec,
    delta: float,
    p: float,
    s: float,
    test_suite="SingleTube",
    operator: str = "Kakeya",
    threads: int = 1,
) -> NormLowerBound:
    """max over the suite of ||M g||_{L^s} / ||g||_{L^p} for M = K^delta or N^delta."""
    if p < 1 or s < 1:
        raise ValueError("p and s must be >= 1")
    if operator not in ("Kakeya", "Nikodym"):
        raise ConfigError("operator must be Kakeya or Nikodym")
    suite, seed = parse_suite(test_suite)
    kakeya = operator == "Kakeya"
    outer_kw: dict = {}
    if suite == "NeighborhoodOfSurface":
        fields = [surface_field(ph, delta)]
        if ph.kind == "Counterexample" and kakeya:
            ys = y0_lattice(delta)
            outer_kw = {"ys": ys, "omega_seeds": log_ratio_omega(ys), "region_measure": Y0_AREA}
    elif suite == "SingleTube":
        fam = TubeFamily(ph, delta, "None", np.zeros((1, ph.dim_y)), np.zeros((1, ph.dim_y)))
        fields = [rasterize_multiplicity(fam, delta / 4)]
    elif suite == "Constant":
        box = _domain_box(ph, delta)
        g = GridField.box(*box, delta / 4, dtype=float, constant_axes=tuple(range(ph.n)))
        g.values[...] = 1.0
        fields = [g]
    else:
        rng = np.random.default_rng(seed)
        box = _domain_box(ph, delta)
        fields = []
        for _ in range(3):
            g = GridField.box(*box, delta, dtype=float)
            g.values[...] = rng.random(g.values.shape)
            fields.append(g)

    best = None
    for g in fields:
        op = kakeya_maximal if kakeya else nikodym_maximal
        res = op(ph, delta, g, threads=threads, **outer_kw)
        num = res.lp_norm(s)
        den = g.lp_norm(p)
        ratio = num / den if den > 0 else 0.0
        if best is None or ratio > best.ratio:
            best = NormLowerBound(
                ratio,
                num,
                den,
                str(test_suite),
                {"min_value": float(res.values.min()), "mean_value": float(res.values.mean()), "points": len(res.values)},
            )
    return best
