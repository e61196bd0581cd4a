"""Phase functions phi(x, t; y), their derivatives, and the universal exponents.

All evaluators broadcast over leading axes: ``x`` and ``y`` carry a trailing
axis of length ``n - 1`` and ``t`` carries none.  Closed forms accept complex
input so that Taylor coefficients in ``t`` can be taken by contour integrals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, DegenerateError, DomainError, SingularityError
from .polynomials import Polynomial

KINDS = ("ConstCoeff", "BourgainStar", "Counterexample", "TranslationInvariantPoly", "Custom")

ALIASES = {
    "const": "ConstCoeff",
    "constcoeff": "ConstCoeff",
    "const_coeff": "ConstCoeff",
    "star": "BourgainStar",
    "bourgainstar": "BourgainStar",
    "bourgain_star": "BourgainStar",
    "counterexample": "Counterexample",
    "translationinvariantpoly": "TranslationInvariantPoly",
    "tipoly": "TranslationInvariantPoly",
    "custom": "Custom",
}

# below this |t| the counterexample potential is summed as a power series
SERIES_CUTOFF = 1e-4


def canonical_kind(name: str) -> str:
    if name in KINDS:
        return name
    key = name.lower().replace("-", "_")
    if key in ALIASES:
        return ALIASES[key]
    raise ConfigError(f"unknown phase kind {name!r}")


def _is_real(*arrays) -> bool:
    return not any(np.iscomplexobj(a) for a in arrays)


class _TranslationInvariant:
    """phi(x, t; y) = <x, y> + psi(t; y)."""

    translation_invariant = True

    def __init__(self, n: int):
        self.n = n
        self.d = n - 1

    # psi and its derivatives are supplied by subclasses
    def psi(self, t, y):
        raise NotImplementedError

    def psi_y(self, t, y):
        raise NotImplementedError

    def psi_yy(self, t, y):
        raise NotImplementedError

    def psi_ty(self, t, y):
        raise NotImplementedError

    def psi_tyy(self, t, y):
        raise NotImplementedError

    def value(self, x, t, y):
        return np.sum(np.asarray(x) * y, axis=-1) + self.psi(t, y)

    def grad_y(self, x, t, y):
        return np.asarray(x) + self.psi_y(t, y)

    def hess_yy(self, x, t, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))[:-1]
        h = self.psi_yy(t, y)
        return np.broadcast_to(h, np.broadcast_shapes(shape + (self.d, self.d), h.shape))

    def hess_xy(self, x, t, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(t), np.shape(y)[:-1])
        return np.broadcast_to(np.eye(self.d), shape + (self.d, self.d))

    def mixed(self, x, t, y):
        # rows are the (x, t) derivatives, columns the y derivatives
        pt = self.psi_ty(t, y)
        shape = np.broadcast_shapes(np.shape(x)[:-1], pt.shape[:-1])
        eye = np.broadcast_to(np.eye(self.d), shape + (self.d, self.d))
        return np.concatenate([eye, np.broadcast_to(pt, shape + (self.d,))[..., None, :]], axis=-2)

    def third(self, x, t, y):
        ptyy = self.psi_tyy(t, y)
        shape = np.broadcast_shapes(np.shape(x)[:-1], ptyy.shape[:-2])
        out = np.zeros(shape + (self.n, self.d, self.d), dtype=ptyy.dtype)
        out[..., -1, :, :] = ptyy
        return out


class _ConstCoeff(_TranslationInvariant):
    def psi(self, t, y):
        return t * np.sum(y * y, axis=-1)

    def psi_y(self, t, y):
        return 2.0 * np.asarray(t)[..., None] * y

    def psi_yy(self, t, y):
        t = np.asarray(t)
        shape = np.broadcast_shapes(t.shape, np.shape(y)[:-1])
        return 2.0 * np.broadcast_to(t, shape)[..., None, None] * np.eye(self.d)

    def psi_ty(self, t, y):
        t = np.asarray(t)
        return np.broadcast_to(2.0 * np.asarray(y), np.broadcast_shapes(t.shape, np.shape(y)[:-1]) + (self.d,))

    def psi_tyy(self, t, y):
        shape = np.broadcast_shapes(np.shape(t), np.shape(y)[:-1])
        return np.broadcast_to(2.0 * np.eye(self.d), shape + (self.d, self.d))


class _BourgainStar(_TranslationInvariant):
    """psi = (1/2) <A(t) y, y> with A(t) = [[0, t], [t, t^2]] repeated on the diagonal."""

    def __init__(self, n: int):
        if n % 2 == 0:
            raise ConfigError("BourgainStar requires odd n")
        super().__init__(n)

    def _blocks(self, t, y, deriv: bool):
        t = np.asarray(t)
        shape = np.broadcast_shapes(t.shape, np.shape(y)[:-1])
        tt = np.broadcast_to(t, shape)
        dtype = np.result_type(tt.dtype, float)
        a = np.zeros(shape + (self.d, self.d), dtype=dtype)
        for b in range(0, self.d, 2):
            if deriv:
                a[..., b, b + 1] = 1.0
                a[..., b + 1, b] = 1.0
                a[..., b + 1, b + 1] = 2.0 * tt
            else:
                a[..., b, b + 1] = tt
                a[..., b + 1, b] = tt
                a[..., b + 1, b + 1] = tt * tt
        return a

    def psi(self, t, y):
        a = self._blocks(t, y, False)
        return 0.5 * np.einsum("...i,...ij,...j->...", y, a, y)

    def psi_y(self, t, y):
        return np.einsum("...ij,...j->...i", self._blocks(t, y, False), y)

    def psi_yy(self, t, y):
        return self._blocks(t, y, False)

    def psi_ty(self, t, y):
        return np.einsum("...ij,...j->...i", self._blocks(t, y, True), y)

    def psi_tyy(self, t, y):
        return self._blocks(t, y, True)


def _counterexample_series(t, y2, terms: int):
    # sum_{j>=2} t^{j-1} y2^j / (j (j-1))
    t = np.asarray(t)
    out = np.zeros(np.broadcast_shapes(t.shape, np.shape(y2)), dtype=np.result_type(t, y2, float))
    for j in range(terms + 1, 1, -1):
        out = out + t ** (j - 1) * y2 ** j / (j * (j - 1))
    return out


class _Counterexample(_TranslationInvariant):
    """psi = t y1^2 / 2 + sum_{j>=2} t^{j-1} y2^j / (j(j-1)),  n = 3."""

    def __init__(self, n: int):
        if n != 3:
            raise ConfigError("the Counterexample phase is defined for n = 3 only")
        super().__init__(n)

    @staticmethod
    def _one_minus(t, y2):
        w = 1.0 - t * y2
        if _is_real(w) and np.any(w <= 0):
            raise SingularityError("1 - t*y2 <= 0 for the Counterexample phase")
        return w

    def psi(self, t, y):
        t = np.asarray(t)
        y1, y2 = y[..., 0], y[..., 1]
        self._one_minus(t, y2)
        small = np.abs(t) < SERIES_CUTOFF
        safe_t = np.where(small, 1.0, t)
        z = safe_t * y2
        closed = (z + (1.0 - z) * np.log1p(-z)) / safe_t
        series = _counterexample_series(t, y2, 12)
        return 0.5 * t * y1 * y1 + np.where(small, series, closed)

    def psi_series(self, t, y, terms: int = 200):
        t = np.asarray(t)
        return 0.5 * t * y[..., 0] ** 2 + _counterexample_series(t, y[..., 1], terms)

    def psi_y(self, t, y):
        t = np.asarray(t)
        w = self._one_minus(t, y[..., 1])
        return np.stack(np.broadcast_arrays(t * y[..., 0], -np.log(w)), axis=-1)

    def psi_yy(self, t, y):
        t = np.asarray(t)
        w = self._one_minus(t, y[..., 1])
        a, b = np.broadcast_arrays(t, t / w)
        out = np.zeros(a.shape + (2, 2), dtype=np.result_type(a, b))
        out[..., 0, 0] = a
        out[..., 1, 1] = b
        return out

    def psi_ty(self, t, y):
        t = np.asarray(t)
        w = self._one_minus(t, y[..., 1])
        return np.stack(np.broadcast_arrays(y[..., 0] + 0.0 * t, y[..., 1] / w), axis=-1)

    def psi_tyy(self, t, y):
        t = np.asarray(t)
        w = self._one_minus(t, y[..., 1])
        b = 1.0 / (w * w)
        a = np.ones_like(b)
        out = np.zeros(b.shape + (2, 2), dtype=b.dtype)
        out[..., 0, 0] = a
        out[..., 1, 1] = b
        return out


class _TIPoly(_TranslationInvariant):
    """psi given as a polynomial in the variables (t, y_1, ..., y_{n-1})."""

    def __init__(self, n: int, params: dict):
        super().__init__(n)
        try:
            table = params["psi"]
        except KeyError as exc:
            raise ConfigError("TranslationInvariantPoly needs params.psi") from exc
        poly = Polynomial.from_json(table)
        if poly.nvars != n:
            raise ConfigError(f"psi must have {n} variables (t, y_1..y_{n - 1})")
        if poly.coefs.size and np.any(poly.exps[:, 0] == 0):
            raise ConfigError("psi(0; y) must vanish: every term needs a positive power of t")
        self.poly = poly

    def _pts(self, t, y):
        t = np.asarray(t)
        shape = np.broadcast_shapes(t.shape, np.shape(y)[:-1])
        dtype = np.result_type(t, y, float)
        tt = np.broadcast_to(t, shape)[..., None].astype(dtype)
        yy = np.broadcast_to(y, shape + (self.d,)).astype(dtype)
        return np.concatenate([tt, yy], axis=-1)

    def psi(self, t, y):
        return self.poly(self._pts(t, y))

    def psi_y(self, t, y):
        pts = self._pts(t, y)
        return np.stack([self.poly.partial(1 + i)(pts) for i in range(self.d)], axis=-1)

    def _hess(self, t, y, extra: tuple):
        pts = self._pts(t, y)
        out = np.empty(pts.shape[:-1] + (self.d, self.d), dtype=pts.dtype)
        for i in range(self.d):
            for j in range(self.d):
                out[..., i, j] = self.poly.partial(*extra, 1 + i, 1 + j)(pts)
        return out

    def psi_yy(self, t, y):
        return self._hess(t, y, ())

    def psi_ty(self, t, y):
        pts = self._pts(t, y)
        return np.stack([self.poly.partial(0, 1 + i)(pts) for i in range(self.d)], axis=-1)

    def psi_tyy(self, t, y):
        return self._hess(t, y, (0,))


class _Custom:
    """phi given as a polynomial in (x_1..x_{n-1}, t, y_1..y_{n-1})."""

    translation_invariant = False

    def __init__(self, n: int, params: dict):
        self.n = n
        self.d = n - 1
        try:
            table = params["phi"]
        except KeyError as exc:
            raise ConfigError("Custom phase needs params.phi") from exc
        poly = Polynomial.from_json(table)
        if poly.nvars != 2 * n - 1:
            raise ConfigError(f"phi must have {2 * n - 1} variables (x, t, y)")
        self.poly = poly

    def _pts(self, x, t, y):
        x, y, t = np.asarray(x), np.asarray(y), np.asarray(t)
        shape = np.broadcast_shapes(x.shape[:-1], t.shape, y.shape[:-1])
        dtype = np.result_type(x, t, y, float)
        return np.concatenate(
            [
                np.broadcast_to(x, shape + (self.d,)).astype(dtype),
                np.broadcast_to(t, shape)[..., None].astype(dtype),
                np.broadcast_to(y, shape + (self.d,)).astype(dtype),
            ],
            axis=-1,
        )

    def _yv(self, i):
        return self.n + i

    def value(self, x, t, y):
        return self.poly(self._pts(x, t, y))

    def grad_y(self, x, t, y):
        pts = self._pts(x, t, y)
        return np.stack([self.poly.partial(self._yv(i))(pts) for i in range(self.d)], axis=-1)

    def _table(self, pts, rows, cols, extra=()):
        out = np.empty(pts.shape[:-1] + (len(rows), len(cols)), dtype=pts.dtype)
        for a, r in enumerate(rows):
            for b, c in enumerate(cols):
                out[..., a, b] = self.poly.partial(*extra, r, c)(pts)
        return out

    def hess_yy(self, x, t, y):
        ys = [self._yv(i) for i in range(self.d)]
        return self._table(self._pts(x, t, y), ys, ys)

    def hess_xy(self, x, t, y):
        ys = [self._yv(i) for i in range(self.d)]
        return self._table(self._pts(x, t, y), list(range(self.d)), ys)

    def mixed(self, x, t, y):
        ys = [self._yv(i) for i in range(self.d)]
        return self._table(self._pts(x, t, y), list(range(self.n)), ys)

    def third(self, x, t, y):
        pts = self._pts(x, t, y)
        ys = [self._yv(i) for i in range(self.d)]
        return np.stack([self._table(pts, ys, ys, (k,)) for k in range(self.n)], axis=-3)


@dataclass
class PhaseSpec:
    """A phase function together with its domain radius.

    ``rho`` is the radius of the direction, centre and time sets Y, Omega, I.
    """

    kind: str
    n: int = 3
    params: dict[str, Any] = field(default_factory=dict)
    rho: float = 0.5

    def __post_init__(self):
        self.kind = canonical_kind(self.kind)
        self.n = int(self.n)
        if not 2 <= self.n <= 5:
            raise ConfigError("dimension n must lie in [2, 5]")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must lie in (0, 1]")
        if self.kind == "ConstCoeff":
            impl = _ConstCoeff(self.n)
        elif self.kind == "BourgainStar":
            impl = _BourgainStar(self.n)
        elif self.kind == "Counterexample":
            impl = _Counterexample(self.n)
        elif self.kind == "TranslationInvariantPoly":
            impl = _TIPoly(self.n, self.params)
        else:
            impl = _Custom(self.n, self.params)
        self._impl = impl

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {"kind": self.kind, "n": self.n, "params": self.params, "rho": self.rho}

    @classmethod
    def from_json(cls, obj: dict) -> "PhaseSpec":
        if not isinstance(obj, dict):
            raise ConfigError("phase must be a JSON object")
        extra = set(obj) - {"kind", "n", "params", "rho"}
        if extra:
            raise ConfigError(f"unknown phase fields: {sorted(extra)}")
        if "kind" not in obj:
            raise ConfigError("phase needs a 'kind'")
        return cls(
            kind=obj["kind"],
            n=obj.get("n", 3),
            params=obj.get("params", {}) or {},
            rho=obj.get("rho", 0.5),
        )

    # -- evaluators ----------------------------------------------------------
    @property
    def translation_invariant(self) -> bool:
        return self._impl.translation_invariant

    @property
    def dim_y(self) -> int:
        return self.n - 1

    def value(self, x, t, y):
        return self._impl.value(x, t, y)

    def grad_y(self, x, t, y):
        return self._impl.grad_y(x, t, y)

    def hess_yy(self, x, t, y):
        return self._impl.hess_yy(x, t, y)

    def hess_xy(self, x, t, y):
        """Entry [i, j] is d^2 phi / dx_i dy_j."""
        return self._impl.hess_xy(x, t, y)

    def mixed(self, x, t, y):
        """Entry [k, j] is d^2 phi / d(x,t)_k dy_j; shape (..., n, n-1)."""
        return self._impl.mixed(x, t, y)

    def third(self, x, t, y):
        """Entry [k, i, j] is d^3 phi / d(x,t)_k dy_i dy_j."""
        return self._impl.third(x, t, y)

    def psi(self, t, y):
        """The t-dependent part psi(t; y) of a translation-invariant phase."""
        self._require_ti()
        return self._impl.psi(t, y)

    def psi_y(self, t, y):
        """d_y psi for translation-invariant kinds (the curve offset)."""
        self._require_ti()
        return self._impl.psi_y(t, y)

    def psi_yy(self, t, y):
        self._require_ti()
        return self._impl.psi_yy(t, y)

    def _require_ti(self):
        if not self.translation_invariant:
            raise ConfigError(f"{self.kind} phase is not translation-invariant")

    def check_domain(self, x, t, y) -> None:
        """Reject malformed or non-finite input.

        Polynomial phases are entire, so any finite point is admissible; the
        counterexample's only obstruction (1 - t*y2 <= 0) is reported by the
        evaluators as a SingularityError.
        """
        x, t, y = np.asarray(x, float), np.asarray(t, float), np.asarray(y, float)
        if x.shape[-1:] != (self.dim_y,) or y.shape[-1:] != (self.dim_y,):
            raise DomainError(f"x and y must have length {self.dim_y}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise DomainError("non-finite input")


def phase(kind: str, n: int = 3, rho: float = 0.5, **params) -> PhaseSpec:
    return PhaseSpec(kind=kind, n=n, params=params, rho=rho)


@dataclass
class PhaseJet:
    value: float
    grad_y: np.ndarray
    hess_yy: np.ndarray
    hess_xy: np.ndarray
    gauss: np.ndarray


def _wedge(vectors):
    # generalized cross product of the n-1 columns of ``vectors`` (..., n, n-1)
    n = vectors.shape[-2]
    rows = np.swapaxes(vectors, -1, -2)
    out = np.empty(vectors.shape[:-1], dtype=vectors.dtype)
    for k in range(n):
        e = np.zeros(vectors.shape[:-2] + (1, n), dtype=vectors.dtype)
        e[..., 0, k] = 1.0
        out[..., k] = np.linalg.det(np.concatenate([rows, e], axis=-2))
    return out


def gauss_map(ph: PhaseSpec, x, t, y, check: bool = True):
    if check:
        ph.check_domain(x, t, y)
    g0 = _wedge(np.asarray(ph.mixed(np.asarray(x, float), np.asarray(t, float), np.asarray(y, float)), float))
    norm = np.linalg.norm(g0, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise DegenerateError("|G0| < 1e-12: the mixed derivative columns are dependent")
    g = g0 / norm
    flip = g[..., -1:] < 0
    return np.where(flip, -g, g)


def eval_jet(ph: PhaseSpec, x, t, y) -> PhaseJet:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    t = float(t)
    ph.check_domain(x, t, y)
    return PhaseJet(
        value=float(ph.value(x, t, y)),
        grad_y=np.asarray(ph.grad_y(x, t, y), float),
        hess_yy=np.array(ph.hess_yy(x, t, y), float),
        hess_xy=np.array(ph.hess_xy(x, t, y), float),
        gauss=gauss_map(ph, x, t, y, check=False),
    )


@dataclass
class NondegeneracyReport:
    samples: int
    min_det_hess_xy: float
    min_det_curvature: float
    H1_ok: bool
    H2_ok: bool

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "min_det_hess_xy": self.min_det_hess_xy,
            "min_det_curvature": self.min_det_curvature,
            "H1_ok": self.H1_ok,
            "H2_ok": self.H2_ok,
        }


def sample_domain(ph: PhaseSpec, samples: int, seed: int = 0):
    """Scrambled Sobol points in the product of balls B_rho x (-rho, rho) x B_rho."""
    d = ph.dim_y
    sob = qmc.Sobol(d=2 * d + 1, scramble=True, seed=seed)
    kept = []
    total = 0
    while total < samples:
        m = max(6, math.ceil(math.log2(max(4 * samples, 64))))
        pts = (2.0 * sob.random_base2(m) - 1.0) * ph.rho * (1 - 1e-9)
        ok = (np.linalg.norm(pts[:, :d], axis=1) < ph.rho) & (np.linalg.norm(pts[:, d + 1 :], axis=1) < ph.rho)
        kept.append(pts[ok])
        total += int(ok.sum())
    pts = np.concatenate(kept)[:samples]
    return pts[:, :d], pts[:, d], pts[:, d + 1 :]


def curvature_det(ph: PhaseSpec, x, t, y):
    """det of d^2_yy <d_(x,t) phi(.; y), G(x, t; y0)> at y = y0."""
    g = gauss_map(ph, x, t, y, check=False)
    third = np.asarray(ph.third(x, t, y), float)
    form = np.einsum("...k,...kij->...ij", g, third)
    return np.linalg.det(form)


def verify_nondegeneracy(ph: PhaseSpec, samples: int = 1024, seed: int = 0, threshold: float = 1e-8) -> NondegeneracyReport:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x, t, y = sample_domain(ph, samples, seed)
    det_xy = np.linalg.det(np.asarray(ph.hess_xy(x, t, y), float))
    det_curv = curvature_det(ph, x, t, y)
    m1 = float(np.min(np.abs(det_xy)))
    m2 = float(np.min(np.abs(det_curv)))
    return NondegeneracyReport(
        samples=int(samples),
        min_det_hess_xy=m1,
        min_det_curvature=m2,
        H1_ok=m1 > threshold,
        H2_ok=m2 > threshold,
    )


# -- exponent tables ---------------------------------------------------------

def _exact(v):
    # floats stay floats (infinity included); integers and fractions become exact
    if isinstance(v, float):
        return v
    return Fraction(v)


def _half(v):
    return 0.5 if isinstance(v, float) else Fraction(1, 2)


@dataclass(frozen=True)
class ExponentTable:
    n: int

    @property
    def p_crit(self) -> Fraction:
        return Fraction(self.n + 1, 2)

    @property
    def q_crit(self) -> Fraction:
        return Fraction(2 * (self.n + 1), self.n - 1)

    @property
    def d_crit(self) -> int:
        return (self.n + 1) // 2 if self.n % 2 else (self.n + 2) // 2

    @property
    def m_crit(self) -> int:
        return self.n - self.d_crit

    def beta(self, p):
        p = _exact(p)
        if p < 1:
            raise ValueError("p must be >= 1")
        if isinstance(p, float) and math.isinf(p):
            return 0.0
        if p <= self.p_crit:
            return self.n / p - 1
        return (self.n - 1) / (2 * p)

    def s(self, p):
        p = _exact(p)
        if p < 1:
            raise ValueError("p must be >= 1")
        if p == 1 or (isinstance(p, float) and math.isinf(p)):
            return math.inf
        if p <= self.p_crit:
            return (self.n - 1) * p / (p - 1)
        return 2 * p

    def alpha_H(self, q):
        q = _exact(q)
        if q < 2:
            raise ValueError("q must be >= 2")
        half = _half(q)
        if q >= self.q_crit:
            return 0 * half
        return half - Fraction(self.n + 1, 2) * (half - 1 / q)

    def alpha_LS(self, q):
        q = _exact(q)
        # 1/inf is 0.0 in float arithmetic
        return self.alpha_H(q) + (self.n - 1) * (_half(q) - 1 / q)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p_crit": str(self.p_crit),
            "q_crit": str(self.q_crit),
            "d_crit": self.d_crit,
            "m_crit": self.m_crit,
            "beta(p_crit)": str(self.beta(self.p_crit)),
            "s(p_crit)": str(self.s(self.p_crit)),
            "alpha_H(2)": str(self.alpha_H(2)),
            "alpha_H(q_crit)": str(self.alpha_H(self.q_crit)),
            "alpha_LS(q_crit)": str(self.alpha_LS(self.q_crit)),
        }


def exponent_table(n: int) -> ExponentTable:
    if n < 2:
        raise ValueError("n must be >= 2")
    return ExponentTable(int(n))
