"""Core curves gamma_{y,omega}(t): the x solving d_y phi(x, t; y) = omega."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoConvergenceError, SingularJacobianError
from .phases import PhaseSpec

MAX_ITER = 50
DEFAULT_TOL = 1e-10


@dataclass
class CurvePoint:
    x: np.ndarray
    t: float
    residual: float


def _check(ph: PhaseSpec, omega, t, y):
    omega, y = np.asarray(omega, float), np.asarray(y, float)
    if omega.shape[-1:] != (ph.dim_y,) or y.shape[-1:] != (ph.dim_y,):
        raise DomainError(f"omega and y must have length {ph.dim_y}")
    if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite input")


def newton_curve(ph: PhaseSpec, omega, t, y, tol: float = DEFAULT_TOL):
    """Damped Newton on x -> d_y phi(x, t; y) - omega, batched over leading axes.

    Returns ``(x, residual)``.  Starts from x = omega; a step that fails to
    reduce the residual is halved up to 30 times.  Complex input is allowed
    (the phases are analytic), which lets callers take contour integrals in t.
    """
    dtype = np.result_type(np.asarray(omega), np.asarray(t), np.asarray(y), float)
    omega = np.asarray(omega, dtype)
    t = np.asarray(t, dtype)
    y = np.asarray(y, dtype)
    shape = np.broadcast_shapes(omega.shape[:-1], t.shape, y.shape[:-1])
    omega = np.broadcast_to(omega, shape + (ph.dim_y,))
    t = np.broadcast_to(t, shape)
    y = np.broadcast_to(y, shape + (ph.dim_y,))

    x = omega.copy()
    r = ph.grad_y(x, t, y) - omega
    res = np.linalg.norm(r, axis=-1)
    for _ in range(MAX_ITER):
        if np.all(res <= tol):
            return x, res
        jac = np.swapaxes(np.asarray(ph.hess_xy(x, t, y), dtype), -1, -2)
        if np.any(np.abs(np.linalg.det(jac)) < 1e-12):
            raise SingularJacobianError("|det d_xy phi| < 1e-12 during the curve solve")
        step = -np.linalg.solve(jac, r[..., None])[..., 0]
        scale = np.ones(shape)
        trial, r_trial, res_trial = x, r, res
        for _ in range(30):
            trial = x + scale[..., None] * step
            r_trial = ph.grad_y(trial, t, y) - omega
            res_trial = np.linalg.norm(r_trial, axis=-1)
            worse = (res_trial > res) & (res > tol)
            if not np.any(worse):
                break
            scale = np.where(worse, scale / 2, scale)
        done = res <= tol
        x = np.where(done[..., None], x, trial)
        r = np.where(done[..., None], r, r_trial)
        res = np.where(done, res, res_trial)
    if np.all(res <= tol):
        return x, res
    raise NoConvergenceError(f"curve solve did not reach tol={tol} in {MAX_ITER} iterations")


def curve_x(ph: PhaseSpec, omega, t, y, tol: float = DEFAULT_TOL):
    """Batched gamma_{y,omega}(t), using the closed form when the phase allows it."""
    if ph.translation_invariant:
        return np.asarray(omega) - ph.psi_y(np.asarray(t), np.asarray(y))
    return newton_curve(ph, omega, t, y, tol)[0]


def solve_psi(ph: PhaseSpec, omega, t: float, y, tol: float = DEFAULT_TOL, method: str = "auto") -> CurvePoint:
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check(ph, omega, t, y)
    omega = np.asarray(omega, float)
    y = np.asarray(y, float)
    if method == "auto" and ph.translation_invariant:
        x = omega - ph.psi_y(float(t), y)
        res = float(np.linalg.norm(ph.grad_y(x, float(t), y) - omega))
    elif method in ("auto", "newton"):
        x, res = newton_curve(ph, omega, float(t), y, tol)
        res = float(res)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CurvePoint(x=np.asarray(x, float), t=float(t), residual=res)


def curve_point(ph: PhaseSpec, y, omega, t: float) -> np.ndarray:
    cp = solve_psi(ph, omega, t, y, DEFAULT_TOL)
    return np.append(cp.x, cp.t)


def tube_membership(ph: PhaseSpec, y, omega, delta: float, point) -> bool:
    point = np.asarray(point, float)
    x, t = point[:-1], float(point[-1])
    if abs(t) > ph.rho:
        raise DomainError("t outside I_phi")
    core = solve_psi(ph, omega, t, y).x
    return bool(np.linalg.norm(x - core) < delta)
