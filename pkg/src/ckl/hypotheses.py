"""Linear (in)dependence of analytic families and the non-compression checks.

Taylor coefficients are taken by the discrete Cauchy integral on a small
circle in the complex t-plane, so every evaluator must accept complex input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .curves import newton_curve
from .errors import ConfigError
from .phases import PhaseSpec, exponent_table

DEFAULT_TOL = 1e-8
CHEBYSHEV_POINTS = 257
DEFAULT_RADIUS = 0.25


# -- analytic families ---------------------------------------------------------

@dataclass
class FunctionFamily:
    """m analytic functions of t evaluated together: ``evaluator(t)`` -> (..., m)."""

    evaluator: Callable
    labels: tuple
    radius: float = DEFAULT_RADIUS

    @classmethod
    def from_functions(cls, funcs: Sequence[Callable], labels=None, radius: float = DEFAULT_RADIUS) -> "FunctionFamily":
        funcs = list(funcs)

        def evaluate(t):
            t = np.asarray(t)
            return np.stack([np.broadcast_to(f(t), t.shape) for f in funcs], axis=-1)

        labels = tuple(labels) if labels is not None else tuple(f"g{j + 1}" for j in range(len(funcs)))
        return cls(evaluate, labels, radius)

    @property
    def m(self) -> int:
        return len(self.labels)

    def __call__(self, t):
        return self.evaluator(t)

    def scaled_taylor(self, s, order: int) -> np.ndarray:
        """Coefficients of u^i in g_j(s + radius*u); shape (..., order+1, m)."""
        s = np.asarray(s, float)
        nodes = max(64, 4 * (order + 1))
        z = np.exp(2j * np.pi * np.arange(nodes) / nodes)
        vals = np.asarray(self.evaluator(s[..., None] + self.radius * z), complex)
        coef = np.fft.fft(vals, axis=-2)[..., : order + 1, :] / nodes
        return coef.real

    def taylor(self, s, order: int) -> np.ndarray:
        """b_{ij}(s) = g_j^{(i)}(s) / i!, shape (..., order+1, m)."""
        scale = self.radius ** -np.arange(order + 1)
        return self.scaled_taylor(s, order) * scale[:, None]

    def derivatives(self, s, order: int) -> np.ndarray:
        fact = np.array([math.factorial(i) for i in range(order + 1)], float)
        return self.taylor(s, order) * fact[:, None]


def wronskian(funcs: FunctionFamily, t) -> np.ndarray:
    """det [g_j^{(i)}(t)]_{0 <= i < m, 1 <= j <= m}."""
    return np.linalg.det(funcs.derivatives(t, funcs.m - 1))


def relative_wronskian(funcs: FunctionFamily, t) -> np.ndarray:
    """|W| divided by the Hadamard bound (product of column norms); lies in [0, 1]."""
    mat = funcs.derivatives(t, funcs.m - 1)
    bound = np.prod(np.linalg.norm(mat, axis=-2), axis=-1)
    det = np.abs(np.linalg.det(mat))
    return np.where(bound > 0, det / np.where(bound > 0, bound, 1.0), 0.0)


def wronskian_vanishes(funcs: FunctionFamily, ts, tol: float = DEFAULT_TOL) -> bool:
    return bool(np.all(relative_wronskian(funcs, np.asarray(ts, float)) < tol))


def _numeric_rank(mat: np.ndarray, tol: float) -> np.ndarray:
    # columns are normalized first so that rank does not depend on their scale
    norms = np.linalg.norm(mat, axis=-2, keepdims=True)
    mat = mat / np.where(norms > 0, norms, 1.0)
    sv = np.linalg.svd(mat, compute_uv=False)
    top = sv[..., :1]
    return np.sum(sv > tol * np.where(top > 0, top, np.inf), axis=-1)


def taylor_rank(funcs: FunctionFamily, s, d: int, tol: float = DEFAULT_TOL):
    """Numerical rank of the (d+1) x m coefficient matrix at s."""
    if d < funcs.m - 1:
        raise ValueError("d must be at least m - 1")
    r = _numeric_rank(funcs.scaled_taylor(s, d), tol)
    return int(r) if np.ndim(r) == 0 else r


# -- minors of the y-Hessian along curves ----------------------------------------

def index_sets(k: int, size: int):
    return [tuple(c) for c in combinations(range(k), size)]


def minor_pairs(alpha: tuple, beta: tuple, include_full: bool):
    """All (alpha', beta') with alpha' in P(alpha), beta' in P(beta), 0 < |alpha'| = |beta'|."""
    out = []
    top = len(alpha) if include_full else len(alpha) - 1
    for size in range(1, top + 1):
        for a in combinations(alpha, size):
            for b in combinations(beta, size):
                out.append((a, b))
    return out


def _minors(hess, pairs):
    cols = []
    for a, b in pairs:
        block = hess[..., list(a), :][..., :, list(b)]
        cols.append(np.linalg.det(block))
    return np.stack(cols, axis=-1)


def hessian_along_curve(ph: PhaseSpec, t, y, omega=None):
    """d_yy phi at (Psi(omega; t; y), t; y); at x = 0 when ``omega`` is None."""
    t = np.asarray(t)
    y = np.asarray(y)
    if ph.translation_invariant:
        return ph.psi_yy(t, y)
    if omega is None:
        x = np.zeros(np.broadcast_shapes(t.shape, y.shape[:-1]) + (ph.dim_y,))
    else:
        x = newton_curve(ph, omega, t, y)[0]
    return ph.hess_yy(x, t, y)


def minor_family(ph: PhaseSpec, y, pairs, omega=None, radius: float = DEFAULT_RADIUS) -> FunctionFamily:
    """Functions t -> det[d_yy phi]_{a,b} at fixed y (and omega), batched over y's leading axes."""
    y = np.asarray(y, float)
    om = None if omega is None else np.asarray(omega, float)

    def align(arr, t):
        # a batch (S, k) of parameters meets t of shape (S, N): insert the N axis
        extra = t.ndim - (arr.ndim - 1)
        return arr.reshape(arr.shape[:-1] + (1,) * extra + arr.shape[-1:]) if extra > 0 and arr.ndim > 1 else arr

    def evaluate(t):
        t = np.asarray(t)
        ww = None if om is None else align(om, t)
        return _minors(hessian_along_curve(ph, t, align(y, t), ww), pairs)

    labels = tuple(f"[{''.join(str(i + 1) for i in a)}|{''.join(str(j + 1) for j in b)}]" for a, b in pairs)
    return FunctionFamily(evaluate, labels, radius)


def chebyshev_grid(half_width: float, count: int = CHEBYSHEV_POINTS) -> np.ndarray:
    k = np.arange(count)
    return half_width * np.cos(np.pi * (k + 0.5) / count)


def _span_residual(target, basis, tol):
    """Relative distance from ``target`` (..., N) to the column span of ``basis`` (..., N, m)."""
    norms = np.linalg.norm(basis, axis=-2, keepdims=True)
    basis = basis / np.where(norms > 0, norms, 1.0)
    u, sv, _ = np.linalg.svd(basis, full_matrices=False)
    keep = sv > tol * np.maximum(sv[..., :1], 1e-300)
    coeff = np.einsum("...nk,...n->...k", u, target) * keep
    proj = np.einsum("...nk,...k->...n", u, coeff)
    tnorm = np.linalg.norm(target, axis=-1)
    res = np.linalg.norm(target - proj, axis=-1)
    return np.where(tnorm > 0, res / np.where(tnorm > 0, tnorm, 1.0), 0.0)


def _lstsq_witness(target, basis):
    sol, *_ = np.linalg.lstsq(basis, target, rcond=None)
    return sol


# -- reports -------------------------------------------------------------------

@dataclass
class HypothesisReport:
    hypothesis: str
    samples: int
    exceptional_fraction: float
    per_sample_residuals: np.ndarray = field(repr=False)
    verdict: str
    rank: int | None = None
    rank_constant: bool | None = None
    seed: int = 0
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "hypothesis": self.hypothesis,
            "verdict": self.verdict,
            "exceptional_fraction": float(self.exceptional_fraction),
            "rank": None if self.rank is None else int(self.rank),
            "rank_constant": self.rank_constant,
            "samples": int(self.samples),
            "seed": int(self.seed),
        }


def band_verdict(fraction: float) -> str:
    if fraction < 0.01:
        return "Holds"
    if fraction > 0.99:
        return "Fails"
    return "Inconclusive"


def _sample_ball(rng, count: int, dim: int, radius: float) -> np.ndarray:
    out = np.empty((0, dim))
    while len(out) < count:
        cand = rng.uniform(-radius, radius, size=(2 * count + 8, dim))
        out = np.concatenate([out, cand[np.linalg.norm(cand, axis=1) < radius]])
    return out[:count]


def _kakeya_dependence(ph: PhaseSpec, ys: np.ndarray, alpha, beta, tol: float):
    """Residual test and Taylor-rank cross-check for f = full minor vs proper minors."""
    full = [(tuple(alpha), tuple(beta))]
    proper = minor_pairs(tuple(alpha), tuple(beta), include_full=False)
    ts = chebyshev_grid(ph.rho)
    fam = minor_family(ph, ys[:, None, :], full + proper)
    vals = np.real(fam(ts[None, :]))  # (Y, N, 1 + m)
    resid = _span_residual(vals[..., 0], vals[..., 1:], tol)
    dependent = resid < tol

    # rank cross-check at s = 0: dependence iff adding f does not raise the rank
    order = 2 * (len(proper) + 1)
    coef = minor_family(ph, ys, full + proper).scaled_taylor(np.zeros(len(ys)), order)
    r_all = _numeric_rank(coef, tol)
    r_sub = _numeric_rank(coef[..., 1:], tol)
    rank_dependent = r_all == r_sub
    return resid, dependent, rank_dependent, vals, ts


def check_hypothesis_I(
    ph: PhaseSpec,
    d: int | None = None,
    y_samples: int = 10_000,
    t_points: int = CHEBYSHEV_POINTS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> HypothesisReport:
    """Monte-Carlo estimate of the exceptional set Z_K over Y_phi.

    ``d`` is the minor size; it defaults to the critical dimension d_crit(n).
    The best (alpha, beta) pair is reported.
    """
    if not ph.translation_invariant:
        raise ConfigError("Hypothesis I is stated for translation-invariant phases")
    if t_points != CHEBYSHEV_POINTS:
        raise ConfigError(f"the dependence test uses {CHEBYSHEV_POINTS} Chebyshev points")
    size = exponent_table(ph.n).d_crit if d is None else int(d)
    if not 1 <= size <= ph.dim_y:
        raise ConfigError("minor size must lie in [1, n-1]")
    rng = np.random.default_rng(seed)
    ys = _sample_ball(rng, y_samples, ph.dim_y, ph.rho)
    best = None
    for alpha in index_sets(ph.dim_y, size):
        for beta in index_sets(ph.dim_y, size):
            resid, dep, rank_dep, vals, _ = _kakeya_dependence(ph, ys, alpha, beta, tol)
            frac = float(dep.mean())
            if best is None or frac < best[0]:
                best = (frac, alpha, beta, resid, dep, rank_dep, vals)
    frac, alpha, beta, resid, dep, rank_dep, vals = best
    agreement = float(np.mean(dep == rank_dep))
    details = {"alpha": [a + 1 for a in alpha], "beta": [b + 1 for b in beta], "rank_agreement": agreement}
    if dep.any():
        i = int(np.argmax(dep))
        details["witness_y"] = ys[i].tolist()
        details["witness_mu"] = _lstsq_witness(vals[i, :, 0], vals[i, :, 1:]).tolist()
    return HypothesisReport("KakeyaI", len(ys), frac, resid, band_verdict(frac), seed=seed, details=details)


def check_weak_hypothesis_I(ph: PhaseSpec, tol: float = DEFAULT_TOL) -> HypothesisReport:
    """The same dependence test at the single direction y = 0 (n = 3 form: entries only)."""
    if not ph.translation_invariant:
        raise ConfigError("Hypothesis w-I is stated for translation-invariant phases")
    ys = np.zeros((1, ph.dim_y))
    full = tuple(range(ph.dim_y))
    resid, dep, rank_dep, vals, _ = _kakeya_dependence(ph, ys, full, full, tol)
    frac = float(dep.mean())
    details = {"rank_agreement": float(np.mean(dep == rank_dep))}
    if dep.any():
        details["witness_mu"] = _lstsq_witness(vals[0, :, 0], vals[0, :, 1:]).tolist()
    return HypothesisReport("WeakI", 1, frac, resid, band_verdict(frac), details=details)


def _taylor_poly_values(coef: np.ndarray, s: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Evaluate sum_i coef[..., i, j] (t - s)^i on ``ts``; returns (..., N, m)."""
    powers = (ts[None, :] - s[:, None])[..., None] ** np.arange(coef.shape[-2])  # (S, N, d+1)
    return np.einsum("snk,skj->snj", powers, coef)


def check_hypothesis_II(
    ph: PhaseSpec,
    d: int = 2,
    D: int | None = None,
    samples: int = 2000,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    extra_functions: Sequence[Callable] = (),
) -> HypothesisReport:
    """Part a) on sampled (omega, y, s) and part b) rank constancy on sampled (omega, t, y).

    ``extra_functions`` (callables of t) are appended to the minor family, which
    is how the checker is exercised on families that trivially contain 1.
    """
    if d < 2:
        raise ConfigError("the truncation degree d must be at least 2")
    size = exponent_table(ph.n).d_crit
    rng = np.random.default_rng(seed)
    ys = _sample_ball(rng, samples, ph.dim_y, ph.rho)
    omegas = _sample_ball(rng, samples, ph.dim_y, ph.rho)
    ss = rng.uniform(-ph.rho, ph.rho, samples)
    t_rank = rng.uniform(-ph.rho, ph.rho, samples)
    t_rank[0] = 0.0
    ts = chebyshev_grid(1.0)

    best = None
    for alpha in index_sets(ph.dim_y, size):
        for beta in index_sets(ph.dim_y, size):
            pairs = minor_pairs(alpha, beta, include_full=True)
            base = minor_family(ph, ys, pairs, omega=omegas)
            if extra_functions:
                extras = FunctionFamily.from_functions(extra_functions)
                fam = FunctionFamily(lambda t, b=base, e=extras: np.concatenate([b(t), e(t)], axis=-1), base.labels + extras.labels)
            else:
                fam = base
            m = fam.m
            rows = 2 * (m + 1) if D is None else int(D)
            if rows < d:
                raise ConfigError("D must be at least d")

            # part a): is the constant 1 in the span of the degree-d Taylor polynomials?
            coef = fam.taylor(ss, d)
            polys = _taylor_poly_values(coef, ss, ts)
            resid = _span_residual(np.ones((samples, len(ts))), polys, tol)
            exceptional = resid < tol
            frac = float(exceptional.mean())
            coef_big = fam.taylor(ss, rows)
            resid_big = _span_residual(np.ones((samples, len(ts))), _taylor_poly_values(coef_big, ss, ts), tol)
            frac_big = float((resid_big < tol).mean())

            # part b): rank of the derivative matrix, with a doubling check
            ranks = _numeric_rank(fam.scaled_taylor(t_rank, rows - 1), tol)
            ranks2 = _numeric_rank(fam.scaled_taylor(t_rank, 2 * rows - 1), tol)
            cand = (frac, alpha, beta, resid, ranks, ranks2, frac_big)
            if best is None or frac < best[0]:
                best = cand
    frac, alpha, beta, resid, ranks, ranks2, frac_big = best
    rank_constant = bool(np.all(ranks == ranks[0]))
    part_a = band_verdict(frac) if frac > 0 else "Holds"
    if frac == 0 and rank_constant:
        verdict = "Holds"
    elif not rank_constant or (frac > 0.99 and frac_big > 0.99):
        verdict = "Fails"
    else:
        verdict = "Inconclusive"
    details = {
        "alpha": [a + 1 for a in alpha],
        "beta": [b + 1 for b in beta],
        "part_a": part_a,
        "part_a_fraction_at_D": frac_big,
        "rank_stable_under_doubling": bool(np.all(ranks == ranks2)),
        "d": d,
    }
    return HypothesisReport(
        "NikodymII", samples, frac, resid, verdict, int(ranks[0]), rank_constant, seed, details
    )


# -- seeded analytic families for the Wronskian/rank consistency check ------------

def seeded_analytic_family(seed: int, dependent: bool, m: int = 3) -> FunctionFamily:
    """m entire functions built from exponentials, sines and polynomials.

    The members are random combinations of m+2 distinct basis functions; when
    ``dependent`` the last member is replaced by a random combination of the others.
    """
    rng = np.random.default_rng(seed)
    rates = rng.uniform(0.5, 2.5, m + 2) * np.arange(1, m + 3)  # distinct frequencies
    kinds = rng.integers(0, 3, m + 2)
    shifts = rng.uniform(-1, 1, m + 2)

    def basis(t):
        t = np.asarray(t)
        cols = []
        for k, a, c in zip(kinds, rates, shifts):
            if k == 0:
                cols.append(np.exp(a * t) + c)
            elif k == 1:
                cols.append(np.sin(a * t + c))
            else:
                cols.append((t + c) ** (int(a) + 1))
        return np.stack(cols, axis=-1)

    mix = rng.standard_normal((m + 2, m))
    if dependent:
        mix[:, -1] = mix[:, :-1] @ rng.standard_normal(m - 1)

    def evaluate(t):
        return basis(t) @ mix

    kind = "dependent" if dependent else "independent"
    return FunctionFamily(evaluate, tuple(f"{kind}{seed}_{j}" for j in range(m)))


@dataclass
class BocherCheck:
    wronskian_zero: bool
    rank_deficient: bool
    max_relative_wronskian: float
    ranks: np.ndarray

    @property
    def agree(self) -> bool:
        return self.wronskian_zero == self.rank_deficient


def bocher_check(funcs: FunctionFamily, half_width: float = 0.5, points: int = 33, tol: float = DEFAULT_TOL) -> BocherCheck:
    """Compare identically vanishing Wronskian with Taylor-rank deficiency (d = 2m) on a grid."""
    ts = np.linspace(-half_width, half_width, points)
    rel = relative_wronskian(funcs, ts)
    ranks = np.atleast_1d(taylor_rank(funcs, ts, 2 * funcs.m, tol))
    return BocherCheck(
        wronskian_zero=bool(np.all(rel < tol)),
        rank_deficient=bool(np.all(ranks < funcs.m)),
        max_relative_wronskian=float(rel.max()),
        ranks=ranks,
    )
