"""Trapezoid-rule evaluation of S^lambda and U^lambda and lambda-ladder norm fits.

The rescaled phase is phi^lambda(x, t; y) = lambda * phi(x / lambda, t / lambda; y).
For translation-invariant phases and tensor amplitudes on a spatial lattice the
y-integral factorizes: for each t the kernel exp(i <x, y>) is applied one axis
at a time as a dense matrix product.  Other inputs use direct summation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, MemoryBudgetError, NyquistError
from .maximal import ScalingFit, fit_scaling
from .phases import PhaseSpec
from .tubes import cell_budget

NYQUIST_FACTOR = 8  # y-grid spacing must not exceed 1 / (8 lambda)
SPATIAL_SPACING = 0.5
BUMP_POWER = 4
LAMBDA_RANGE = (4.0, 64.0)
LADDER_RANGE = (8.0, 64.0)
DIRECT_CHUNK = 1 << 22


def bump(s) -> np.ndarray:
    """(1 - s^2)^4 on |s| < 1, zero outside."""
    s = np.asarray(s, float)
    return np.clip(1 - s * s, 0.0, None) ** BUMP_POWER


@dataclass(frozen=True)
class AmplitudeSpec:
    """a(x, t; y) = b(|x| / rho) b(t / rho) b(|y| / rho) with b(s) = (1 - s^2)^4.

    The three factors are supported in the balls that make up D^n_rho.
    CapRestricted multiplies the y-factor by b(|y - center| / radius).
    """

    kind: str = "TensorBump"
    rho: float = 0.5
    center: tuple | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("TensorBump", "CapRestricted"):
            raise ConfigError(f"unknown amplitude kind {self.kind!r}")
        if not 0 < self.rho <= 1:
            raise ConfigError("amplitude rho must lie in (0, 1]")
        if self.kind == "CapRestricted":
            if self.center is None or self.radius is None or self.radius <= 0:
                raise ConfigError("CapRestricted needs a center and a positive radius")
            if np.linalg.norm(self.center) + self.radius > self.rho:
                raise ConfigError("the cap must lie inside the ball of radius rho")

    def half_width(self, d: int) -> float:
        """Half-width of the coordinate cube containing the x- and y-supports."""
        return self.rho

    def x_factor(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return bump(np.linalg.norm(x, axis=-1) / self.rho)

    def t_factor(self, t) -> np.ndarray:
        return bump(np.asarray(t, float) / self.rho)

    def y_factor(self, y) -> np.ndarray:
        y = np.asarray(y, float)
        out = bump(np.linalg.norm(y, axis=-1) / self.rho)
        if self.kind == "CapRestricted":
            out = out * bump(np.linalg.norm(y - np.asarray(self.center, float), axis=-1) / self.radius)
        return out

    def __call__(self, x, t, y):
        return self.x_factor(x) * self.t_factor(t) * self.y_factor(y)

    @property
    def sup(self) -> float:
        return 1.0


@dataclass
class YGrid:
    """Trapezoid nodes on the cube carrying the y-factor of the amplitude."""

    axis: np.ndarray
    d: int

    @classmethod
    def for_lambda(cls, amp: AmplitudeSpec, d: int, lam: float, refine: int = 1) -> "YGrid":
        L = amp.half_width(d)
        target = 1.0 / (NYQUIST_FACTOR * lam * refine)
        cells = int(math.ceil(2 * L / target))
        return cls(np.linspace(-L, L, cells + 1), d)

    @property
    def h(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def weights_1d(self) -> np.ndarray:
        w = np.full(len(self.axis), self.h)
        w[[0, -1]] *= 0.5
        return w

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    def weights(self) -> np.ndarray:
        w = self.weights_1d
        out = w
        for _ in range(self.d - 1):
            out = np.multiply.outer(out, w)
        return out


@dataclass
class SpatialLattice:
    """Product lattice of spatial points: x-axes for x_1..x_{n-1} and a t-axis."""

    x_axes: list
    t_axis: np.ndarray
    spacing: float

    @classmethod
    def default(cls, amp: AmplitudeSpec, n: int, lam: float, spacing: float = SPATIAL_SPACING) -> "SpatialLattice":
        """Spacing-1/2 lattice over the support of a^lambda (inside B(0, lambda))."""
        d = n - 1
        L = lam * amp.half_width(d)
        T = lam * amp.rho
        k = np.arange(-math.floor(L / spacing), math.floor(L / spacing) + 1)
        j = np.arange(-math.floor(T / spacing), math.floor(T / spacing) + 1)
        return cls([k * spacing] * d, j * spacing, spacing)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.x_axes) + (len(self.t_axis),)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** (len(self.x_axes) + 1)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.x_axes, self.t_axis, indexing="ij")
        return np.stack(mesh, axis=-1)


@dataclass
class OscField:
    values: np.ndarray  # complex, lattice-shaped or (P,)
    lam: float
    lattice: SpatialLattice | None = None
    points: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def lq_norm(self, q: float, radius: float | None = None) -> float:
        """Riemann-sum L^q norm over the lattice, optionally restricted to B(0, radius)."""
        if self.lattice is None:
            raise ConfigError("norms need a lattice field")
        vals = np.abs(self.values)
        if radius is not None:
            pts = self.lattice.points()
            vals = np.where(np.linalg.norm(pts, axis=-1) <= radius, vals, 0.0)
        vol = self.lattice.cell_volume
        if math.isinf(q):
            return float(vals.max())
        return float((np.sum(vals**q) * vol) ** (1.0 / q))


def _check_lambda(lam: float) -> None:
    if not LAMBDA_RANGE[0] <= lam <= LAMBDA_RANGE[1]:
        raise ConfigError(f"lambda must lie in [{LAMBDA_RANGE[0]:g}, {LAMBDA_RANGE[1]:g}]")


def _grid_values(f, grid: YGrid) -> np.ndarray:
    if callable(f):
        return np.asarray(f(grid.points()), complex)
    vals = np.asarray(f, complex)
    if vals.shape != (len(grid.axis),) * grid.d:
        raise ConfigError(f"f must have shape {(len(grid.axis),) * grid.d} on the y-grid")
    return vals


def _separable_ti(ph: PhaseSpec, amp: AmplitudeSpec, lam: float, fw: np.ndarray, grid: YGrid, lat: SpatialLattice):
    """sum_y exp(i<x,y> + i lam psi(t/lam; y)) a(y) w(y) f(y), times the x/t factors."""
    d = grid.d
    ys = grid.points()
    kernels = [np.exp(1j * np.multiply.outer(ax, grid.axis)) for ax in lat.x_axes]  # (Nx_k, Ny)
    xfac = amp.x_factor(np.stack(np.meshgrid(*lat.x_axes, indexing="ij"), axis=-1) / lam)
    out = np.empty(lat.shape, complex)
    for j, t in enumerate(lat.t_axis):
        g = fw * np.exp(1j * lam * ph.psi(t / lam, ys))
        for k in range(d):
            # contract y-axis k (currently leading) with x-axis k, moving the result last
            g = np.tensordot(g, kernels[k], axes=([0], [1]))
        out[..., j] = g * xfac * amp.t_factor(t / lam)
    return out


def _direct(ph: PhaseSpec, amp: AmplitudeSpec, lam: float, fw: np.ndarray, grid: YGrid, pts: np.ndarray):
    ys = grid.points().reshape(-1, grid.d)
    fw = fw.reshape(-1)
    keep = fw != 0
    ys, fw = ys[keep], fw[keep]
    flat = pts.reshape(-1, pts.shape[-1])
    out = np.zeros(len(flat), complex)
    step = max(1, DIRECT_CHUNK // max(1, len(ys)))
    for a in range(0, len(flat), step):
        p = flat[a : a + step]
        x = p[:, None, :-1] / lam
        t = p[:, None, -1] / lam
        phase = lam * np.asarray(ph.value(x, t, ys[None, :, :]), float)
        amp_xt = amp.x_factor(p[:, :-1] / lam) * amp.t_factor(p[:, -1] / lam)
        out[a : a + step] = amp_xt * (np.exp(1j * phase) @ fw)
    return out.reshape(pts.shape[:-1])


def _apply(ph, amp, lam, f, spatial_points, grid, operator: str) -> OscField:
    _check_lambda(lam)
    amp = AmplitudeSpec(rho=ph.rho) if amp is None else amp
    d = ph.dim_y
    grid = YGrid.for_lambda(amp, d, lam) if grid is None else grid
    if grid.h > 1.0 / (NYQUIST_FACTOR * lam) * (1 + 1e-12):
        raise NyquistError(f"y-grid spacing {grid.h:.4g} exceeds 1/(8 lambda) = {1 / (NYQUIST_FACTOR * lam):.4g}")
    if len(grid.axis) ** d > cell_budget():
        raise MemoryBudgetError("y-grid exceeds the lattice cap")
    fv = _grid_values(f, grid)
    fw = fv * amp.y_factor(grid.points()) * grid.weights()
    l1 = float(np.sum(np.abs(fw)))
    meta = {"operator": operator, "y_spacing": grid.h, "y_nodes": len(grid.axis) ** d, "l1_af": l1}
    if spatial_points is None:
        spatial_points = SpatialLattice.default(amp, ph.n, lam)
    if isinstance(spatial_points, SpatialLattice):
        lat = spatial_points
        if ph.translation_invariant:
            vals = _separable_ti(ph, amp, lam, fw, grid, lat)
        else:
            vals = _direct(ph, amp, lam, fw, grid, lat.points())
        return OscField(vals, lam, lattice=lat, meta=meta)
    pts = np.asarray(spatial_points, float)
    if pts.shape[-1] != ph.n:
        raise ConfigError(f"spatial points need {ph.n} coordinates")
    return OscField(_direct(ph, amp, lam, fw, grid, pts), lam, points=pts, meta=meta)


def apply_extension(ph: PhaseSpec, amplitude: AmplitudeSpec | None, lam: float, f, spatial_points=None, grid: YGrid | None = None) -> OscField:
    """S^lambda f at the given points (a SpatialLattice or an array (..., n))."""
    return _apply(ph, amplitude, lam, f, spatial_points, grid, "extension")


def apply_propagator(ph: PhaseSpec, amplitude: AmplitudeSpec | None, lam: float, fhat, spatial_points=None, grid: YGrid | None = None) -> OscField:
    """U^lambda f from the frequency-side data fhat (the amplitude confines xi to B_rho)."""
    return _apply(ph, amplitude, lam, fhat, spatial_points, grid, "propagator")


def inverse_fourier(fhat, grid: YGrid, lat: SpatialLattice) -> np.ndarray:
    """f(x) = (2 pi)^{-d} int exp(i <x, xi>) fhat(xi) d xi on the x-axes of the lattice."""
    fw = _grid_values(fhat, grid) * grid.weights()
    for k in range(grid.d):
        kernel = np.exp(1j * np.multiply.outer(lat.x_axes[k], grid.axis))
        fw = np.tensordot(fw, kernel, axes=([0], [1]))
    return fw / (2 * math.pi) ** grid.d


def quadrature_gate(ph: PhaseSpec, amplitude: AmplitudeSpec | None, lam: float, f: Callable, spatial_points=None) -> float:
    """Largest change, relative to max |field|, when the y-grid density doubles."""
    amp = AmplitudeSpec(rho=ph.rho) if amplitude is None else amplitude
    coarse = apply_extension(ph, amp, lam, f, spatial_points, YGrid.for_lambda(amp, ph.dim_y, lam))
    fine = apply_extension(ph, amp, lam, f, spatial_points, YGrid.for_lambda(amp, ph.dim_y, lam, refine=2))
    scale = max(np.abs(fine.values).max(), 1e-300)
    return float(np.abs(fine.values - coarse.values).max() / scale)


# -- test suites ----------------------------------------------------------------------

SUITE_NAMES = ("ConstantOne", "CapFunctions", "RandomSigns")


def parse_suite(suite) -> list[tuple[str, int]]:
    items = [suite] if isinstance(suite, str) else list(suite)
    out = []
    for item in items:
        text = str(item).strip()
        if text.startswith("RandomSigns"):
            inner = text[len("RandomSigns"):].strip("() ")
            out.append(("RandomSigns", int(inner) if inner else 0))
        elif text in ("ConstantOne", "CapFunctions"):
            out.append((text, 0))
        else:
            raise ConfigError(f"unknown oscillatory test suite {item!r}")
    return out


def suite_functions(name: str, seed: int, lam: float, amp: AmplitudeSpec, d: int) -> list[tuple[str, Callable]]:
    """Input functions on the y-side: labels and callables on (..., d) arrays."""
    L = amp.half_width(d)
    r = lam**-0.5
    if name == "ConstantOne":
        return [("one", lambda y: np.ones(np.shape(y)[:-1]))]
    if name == "CapFunctions":
        centres = [np.zeros(d), np.eye(d)[0] * 0.5 * L]
        return [
            (f"cap{i}", lambda y, c=c: bump(np.linalg.norm(np.asarray(y) - c, axis=-1) / r))
            for i, c in enumerate(centres)
        ]
    # random signs on cells of side lambda^{-1/2}
    cells = int(math.ceil(2 * L / r))
    signs = np.random.default_rng(seed).choice([-1.0, 1.0], size=(cells,) * d)

    def f(y):
        idx = np.clip(np.floor((np.asarray(y) + L) / r).astype(int), 0, cells - 1)
        return signs[tuple(idx[..., k] for k in range(d))]

    return [(f"signs{seed}", f)]


@dataclass
class NormScaling:
    lambdas: np.ndarray
    ratios: np.ndarray
    per_function: dict  # label -> list of ratios per lambda
    fit: ScalingFit
    mode: str
    q: float

    def rows(self):
        for lam, r in zip(self.lambdas, self.ratios):
            yield {"lambda": float(lam), "q": self.q, "norm_ratio": float(r)}


def norm_scaling_experiment(
    ph: PhaseSpec,
    q: float,
    lambdas: Sequence[float] = (8, 16, 32),
    test_suite=("ConstantOne", "CapFunctions", "RandomSigns(0)"),
    mode: str = "Hormander",
    input_norm: str = "L2",
    amplitude: AmplitudeSpec | None = None,
) -> NormScaling:
    """Best ratio over the suite per lambda, and its log-log slope in lambda.

    Hormander: ||S^lambda f||_{L^q(B_lambda)} / ||f|| with ||f|| the L^2 (or
    L^infinity) norm on the y-grid.  LocalSmoothing: ||U^lambda f||_{L^q} /
    ||f||_{L^q}, with f recovered from fhat on the spatial x-lattice.
    """
    if not 2 <= q <= 6:
        raise ConfigError("q must lie in [2, 6]")
    if any(not LADDER_RANGE[0] <= lam <= LADDER_RANGE[1] for lam in lambdas):
        raise ConfigError("ladder values must lie in [8, 64]")
    if mode not in ("Hormander", "LocalSmoothing"):
        raise ConfigError("mode must be Hormander or LocalSmoothing")
    if input_norm not in ("L2", "Linf"):
        raise ConfigError("input_norm must be L2 or Linf")
    amp = AmplitudeSpec(rho=ph.rho) if amplitude is None else amplitude
    d = ph.dim_y
    suites = parse_suite(test_suite)
    per: dict = {}
    best = []
    for lam in lambdas:
        grid = YGrid.for_lambda(amp, d, lam)
        lat = SpatialLattice.default(amp, ph.n, lam)
        top = 0.0
        for name, seed in suites:
            for label, f in suite_functions(name, seed, lam, amp, d):
                fv = np.asarray(f(grid.points()), complex)
                if not np.any(fv):
                    continue  # ratios are undefined for f = 0
                if mode == "Hormander":
                    field_ = apply_extension(ph, amp, lam, fv, lat, grid)
                    num = field_.lq_norm(q, radius=lam)
                    if input_norm == "L2":
                        den = math.sqrt(float(np.sum(np.abs(fv) ** 2 * grid.weights())))
                    else:
                        den = float(np.abs(fv).max())
                else:
                    field_ = apply_propagator(ph, amp, lam, fv, lat, grid)
                    num = field_.lq_norm(q)
                    fx = inverse_fourier(fv, grid, lat)
                    den = float((np.sum(np.abs(fx) ** q) * lat.spacing**d) ** (1.0 / q))
                ratio = num / den
                per.setdefault(label, []).append(ratio)
                top = max(top, ratio)
        best.append(top)
    ratios = np.array(best)
    fit = fit_scaling(list(zip(lambdas, ratios)))
    return NormScaling(np.asarray(lambdas, float), ratios, per, fit, mode, float(q))
