"""Curved delta-tubes, separated families, and lattice fields.

A lattice field stores cell-centre samples over an axis-aligned box in
(x_1, ..., x_{n-1}, t).  An axis of length 1 in ``values`` means the field is
constant along it; measures account for the full lattice shape.
"""
from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .curves import curve_x
from .errors import ConfigError, EmptyFamilyError, MemoryBudgetError
from .phases import PhaseSpec

DEFAULT_CELL_BUDGET = 200_000_000

# the compact frequency region on which the counterexample centre map is used
Y0_LOWER = 0.5
Y0_RADIUS = 0.9


def _y0_area() -> float:
    r2 = Y0_RADIUS**2
    a, b = Y0_LOWER, math.sqrt(r2 - Y0_LOWER**2)
    prim = lambda u: 0.5 * (u * math.sqrt(r2 - u * u) + r2 * math.asin(u / Y0_RADIUS))  # noqa: E731
    return prim(b) - prim(a) - Y0_LOWER * (b - a)


Y0_AREA = _y0_area()


def ball_measure(dim: int, radius: float) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * radius**dim


def cell_budget() -> int:
    raw = os.environ.get("CKL_CELL_BUDGET")
    return int(float(raw)) if raw else DEFAULT_CELL_BUDGET


def log_ratio_omega(y):
    """omega(y) = (y1/y2, log(y1/y2)); defined for y1, y2 > 0."""
    y = np.asarray(y, float)
    r = y[..., 0] / y[..., 1]
    return np.stack([r, np.log(r)], axis=-1)


def in_y0(y) -> np.ndarray:
    y = np.asarray(y, float)
    return (y[..., 0] >= Y0_LOWER) & (y[..., 1] >= Y0_LOWER) & (np.linalg.norm(y, axis=-1) <= Y0_RADIUS)


@dataclass(frozen=True)
class Tube:
    y: tuple
    omega: tuple
    delta: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError("tube width must lie in (0, 1)")


@dataclass(frozen=True)
class CentreRule:
    kind: str = "FixedZero"
    seed: int = 0

    @classmethod
    def parse(cls, value) -> "CentreRule":
        if isinstance(value, CentreRule):
            return value
        if isinstance(value, dict):
            return cls(kind=value.get("kind", "FixedZero"), seed=int(value.get("seed", 0)))
        text = str(value).strip()
        if text.startswith("RandomSeeded"):
            inner = text[len("RandomSeeded"):].strip("() ")
            return cls("RandomSeeded", int(inner) if inner else 0)
        if text in ("FixedZero", "CounterexampleOmega"):
            return cls(text)
        raise ConfigError(f"unknown centre rule {value!r}")


SEPARATIONS = ("Direction", "Centre", "None")


@dataclass
class TubeFamily:
    phase: PhaseSpec
    delta: float
    separation: str
    ys: np.ndarray  # (T, n-1)
    omegas: np.ndarray  # (T, n-1)

    def __len__(self) -> int:
        return self.ys.shape[0]

    @property
    def tubes(self) -> list[Tube]:
        return [Tube(tuple(y), tuple(w), self.delta) for y, w in zip(self.ys, self.omegas)]

    def subset(self, mask) -> "TubeFamily":
        return TubeFamily(self.phase, self.delta, self.separation, self.ys[mask], self.omegas[mask])

    @classmethod
    def from_tubes(cls, ph: PhaseSpec, tubes, separation: str = "None") -> "TubeFamily":
        tubes = list(tubes)
        if not tubes:
            raise EmptyFamilyError("no tubes supplied")
        delta = tubes[0].delta
        if any(t.delta != delta for t in tubes):
            raise ConfigError("all tubes in a family share one width")
        return cls(ph, delta, separation, np.array([t.y for t in tubes], float), np.array([t.omega for t in tubes], float))

    def min_gap(self, which: str) -> float:
        pts = self.ys if which == "y" else self.omegas
        if len(pts) < 2:
            return math.inf
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        dist[np.diag_indices(len(pts))] = np.inf
        return float(dist.min())


def ball_lattice(dim: int, radius: float, spacing: float) -> np.ndarray:
    """Lattice points k*spacing strictly inside the open ball of the given radius."""
    k = int(math.floor(radius / spacing))
    axis = np.arange(-k, k + 1) * spacing
    pts = np.array(list(product(axis, repeat=dim)), float).reshape(-1, dim)
    return pts[np.linalg.norm(pts, axis=1) < radius]


def y0_lattice(spacing: float) -> np.ndarray:
    """Lattice anchored at (1/2, 1/2) covering the region Y_o."""
    k = int(math.floor((Y0_RADIUS - Y0_LOWER) / spacing)) + 1
    axis = Y0_LOWER + np.arange(k) * spacing
    pts = np.array(list(product(axis, repeat=2)), float)
    return pts[in_y0(pts)]


def build_family(ph: PhaseSpec, delta: float, separation: str = "Direction", centre_rule="FixedZero") -> TubeFamily:
    if not 0 < delta <= 0.25:
        raise ConfigError("delta must lie in (0, 1/4]")
    if separation not in SEPARATIONS:
        raise ConfigError(f"separation must be one of {SEPARATIONS}")
    rule = CentreRule.parse(centre_rule)
    rng = np.random.default_rng(rule.seed)
    d = ph.dim_y
    spacing = 2 * delta

    def random_ball(count):
        # uniform in the ball of radius rho (rejection from the cube)
        out = np.empty((0, d))
        while len(out) < count:
            cand = rng.uniform(-ph.rho, ph.rho, size=(2 * count + 8, d))
            out = np.concatenate([out, cand[np.linalg.norm(cand, axis=1) < ph.rho]])
        return out[:count]

    if rule.kind == "CounterexampleOmega":
        if ph.kind != "Counterexample":
            raise ConfigError("CounterexampleOmega applies to the Counterexample phase only")
        if separation == "Centre":
            raise ConfigError("the counterexample centre map has rank one; use Direction separation")
        ys = y0_lattice(spacing)
        omegas = log_ratio_omega(ys) if len(ys) else np.empty((0, d))
    elif separation == "Centre":
        omegas = ball_lattice(d, ph.rho, spacing)
        ys = np.zeros_like(omegas) if rule.kind == "FixedZero" else random_ball(len(omegas))
    else:
        ys = ball_lattice(d, ph.rho, spacing)
        omegas = np.zeros_like(ys) if rule.kind == "FixedZero" else random_ball(len(ys))
    if len(ys) == 0:
        raise EmptyFamilyError("no lattice point fits in the domain")
    return TubeFamily(ph, float(delta), separation, ys, omegas)


def tube_volume(n: int, delta: float, rho: float) -> float:
    """|B^{n-1}(delta)| * |I_phi| for a tube over the full time interval."""
    return ball_measure(n - 1, delta) * 2 * rho


@dataclass
class GridField:
    lo: np.ndarray
    h: float
    shape: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, float)
        self.shape = tuple(int(s) for s in self.shape)
        if self.values.ndim != len(self.shape):
            raise ValueError("values rank must match the lattice rank")
        for v, s in zip(self.values.shape, self.shape):
            if v not in (1, s):
                raise ValueError("each values axis must be full length or 1")

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.h * np.array(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def multiplicity(self) -> int:
        # how many lattice cells each stored value stands for
        return int(np.prod([s // v for s, v in zip(self.shape, self.values.shape)]))

    @classmethod
    def box(cls, lo, hi, h: float, dtype=np.int32, constant_axes=()) -> "GridField":
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        shape = tuple(int(math.ceil((b - a) / h - 1e-9)) for a, b in zip(lo, hi))
        stored = tuple(1 if k in constant_axes else s for k, s in enumerate(shape))
        if int(np.prod(stored, dtype=np.float64)) > cell_budget():
            raise MemoryBudgetError(f"lattice of {int(np.prod(stored, dtype=np.float64))} cells exceeds the cap {cell_budget()}")
        return cls(lo, float(h), shape, np.zeros(stored, dtype=dtype))

    @classmethod
    def from_function(cls, lo, hi, h: float, func, constant_axes=()) -> "GridField":
        """Sample ``func(points)`` at cell centres; ``points`` has a trailing axis of length n."""
        g = cls.box(lo, hi, h, dtype=float, constant_axes=constant_axes)
        axes = g.axes(stored=True)
        # evaluate one slab at a time along the first axis to bound memory
        for i, a0 in enumerate(axes[0]):
            mesh = np.meshgrid(np.array([a0]), *axes[1:], indexing="ij")
            pts = np.stack(mesh, axis=-1)[0]
            g.values[i] = func(pts)
        return g

    def axes(self, stored: bool = False):
        out = []
        for k, s in enumerate(self.shape):
            if stored and self.values.shape[k] == 1:
                out.append(np.array([self.lo[k] + 0.5 * self.h * s]))
            else:
                out.append(self.lo[k] + (np.arange(s) + 0.5) * self.h)
        return out

    def lookup(self, points) -> np.ndarray:
        """Nearest-cell values at ``points`` (..., n); zero outside the box."""
        points = np.asarray(points, float)
        idx = np.floor((points - self.lo) / self.h).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < np.array(self.shape)), axis=-1)
        idx = np.where(np.array(self.values.shape) == 1, 0, idx)
        idx = np.clip(idx, 0, np.array(self.values.shape) - 1)
        vals = self.values[tuple(idx[..., k] for k in range(self.n))]
        return np.where(inside, vals, 0)

    def union_measure(self) -> float:
        return float(np.count_nonzero(self.values)) * self.multiplicity * self.cell_volume

    def lp_norm(self, p: float) -> float:
        v = np.abs(self.values.astype(float))
        if math.isinf(p):
            return float(v.max()) if v.size else 0.0
        if p < 1:
            raise ValueError("p must be >= 1")
        return float((self.multiplicity * self.cell_volume * np.sum(v**p)) ** (1.0 / p))

    def total(self) -> float:
        return float(self.multiplicity * self.cell_volume * np.sum(self.values, dtype=np.float64))

    def dense(self) -> np.ndarray:
        return np.broadcast_to(self.values, self.shape)

    # -- persistence ---------------------------------------------------------
    def save_binary(self, path) -> None:
        """Header: <i8 n, <f8 lo[n], <f8 hi[n], <f8 h; then row-major <i4 counts."""
        with open(path, "wb") as fh:
            fh.write(struct.pack("<q", self.n))
            fh.write(np.asarray(self.lo, "<f8").tobytes())
            fh.write(np.asarray(self.hi, "<f8").tobytes())
            fh.write(struct.pack("<d", self.h))
            fh.write(np.ascontiguousarray(self.dense(), dtype="<i4").tobytes())

    @classmethod
    def load_binary(cls, path) -> "GridField":
        with open(path, "rb") as fh:
            (n,) = struct.unpack("<q", fh.read(8))
            lo = np.frombuffer(fh.read(8 * n), "<f8")
            hi = np.frombuffer(fh.read(8 * n), "<f8")
            (h,) = struct.unpack("<d", fh.read(8))
            shape = tuple(int(round((b - a) / h)) for a, b in zip(lo, hi))
            values = np.frombuffer(fh.read(), "<i4").reshape(shape).astype(np.int32)
        return cls(lo.copy(), h, shape, values)

    def save_csv(self, path) -> None:
        dense = self.dense()
        idx = np.argwhere(dense != 0)
        axes = self.axes()
        with open(path, "w") as fh:
            fh.write(",".join([f"c{k}" for k in range(self.n)] + ["value"]) + "\n")
            for row in idx:
                coords = [f"{axes[k][row[k]]:.10g}" for k in range(self.n)]
                fh.write(",".join(coords + [str(dense[tuple(row)])]) + "\n")


def union_measure(g: GridField) -> float:
    return g.union_measure()


def lp_norm(g: GridField, p: float) -> float:
    return g.lp_norm(p)


def family_cores(family: TubeFamily, ts) -> np.ndarray:
    """Core curve positions, shape (T, len(ts), n-1)."""
    ts = np.asarray(ts, float)
    return curve_x(family.phase, family.omegas[:, None, :], ts[None, :], family.ys[:, None, :])


def family_box(family: TubeFamily, pad: float):
    ts = np.linspace(-family.phase.rho, family.phase.rho, 65)
    cores = family_cores(family, ts)
    lo = cores.min(axis=(0, 1)) - pad
    hi = cores.max(axis=(0, 1)) + pad
    return np.append(lo, -family.phase.rho), np.append(hi, family.phase.rho)


def rasterize_multiplicity(family: TubeFamily, h: float | None = None, box=None) -> GridField:
    """Count, at every cell centre, the tubes whose delta-neighbourhood contains it."""
    delta = family.delta
    h = delta / 4 if h is None else float(h)
    if h > delta / 2:
        raise ConfigError("lattice spacing must be at most delta/2")
    if box is None:
        box = family_box(family, delta + 2 * h)
    g = GridField.box(*box, h)
    d = family.phase.dim_y
    t_axis = g.axes()[-1]
    t_keep = np.abs(t_axis) <= family.phase.rho
    t_idx = np.nonzero(t_keep)[0]
    ts = t_axis[t_idx]
    m = int(math.ceil(delta / h)) + 1
    offsets = np.array(list(product(range(-m, m + 1), repeat=d)), np.int64)  # (K, d)
    shape_x = np.array(g.shape[:-1])
    for y, w in zip(family.ys, family.omegas):
        core = curve_x(family.phase, w, ts, y)  # (Nt, d)
        base = np.floor((core - g.lo[:-1]) / h).astype(np.int64)  # (Nt, d)
        cells = base[:, None, :] + offsets[None, :, :]  # (Nt, K, d)
        centres = g.lo[:-1] + (cells + 0.5) * h
        hit = np.linalg.norm(centres - core[:, None, :], axis=-1) < delta
        hit &= np.all((cells >= 0) & (cells < shape_x), axis=-1)
        ti, ki = np.nonzero(hit)
        sel = cells[ti, ki]
        # every (cell, slab) pair is distinct within one tube, so fancy += counts exactly
        g.values[tuple(sel[:, k] for k in range(d)) + (t_idx[ti],)] += 1
    return g
