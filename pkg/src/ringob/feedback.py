"""Two-loop intensity feedback: operating points of the closed cavity system,
their stability classification and the physical round-trip iteration.

The closed system is r_j = I_j_in * (1 - R_j * eta_j(I1_in, I2_in)) - I_j_0,
j = 1, 2, which keeps the equations regular at R_j = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MARGINAL_BAND = 1e-6


class NoSolution(RuntimeError):
    """No Newton start converged for the given input point."""

    def __init__(self, inp, skipped: int = 0):
        super().__init__(
            f"no operating point found for inputs ({inp.I1_0:g}, {inp.I2_0:g}); "
            f"{skipped} seeds skipped on evaluation failure"
        )
        self.skipped = skipped


@dataclass
class CavityParams:
    """Mirror reflectivities of the two feedback loops."""

    R1: float = 0.6
    R2: float = 0.6

    def __post_init__(self):
        for name, r in (("R1", self.R1), ("R2", self.R2)):
            if not (0.0 <= r < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {r}")


@dataclass
class InputPoint:
    I1_0: float
    I2_0: float

    def __post_init__(self):
        for name, v in (("I1_0", self.I1_0), ("I2_0", self.I2_0)):
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative")


@dataclass
class SolverConfig:
    """Tuning knobs of the multi-start damped Newton root finder."""

    seed_grid: int = 24          # seeds per axis (log spaced)
    newton_max_iter: int = 40
    damping: float = 0.5         # step-halving factor of the backtracking line search
    tol: float = 1e-10           # residual tolerance, relative to max(I_0, 1)
    dedup_radius: float = 1e-4   # relative per-coordinate root identity radius
    fd_step: float = 1e-4        # relative central-difference step for d(eta)/dI
    fd_floor: float = 1e-8       # absolute floor of the difference step
    seed_low_factor: float = 1e-3
    bound_margin: float = 1.05

    def __post_init__(self):
        values = [
            self.seed_grid, self.newton_max_iter, self.damping, self.tol,
            self.dedup_radius, self.fd_step, self.fd_floor,
            self.seed_low_factor, self.bound_margin,
        ]
        if any(v <= 0 for v in values):
            raise ValueError("all SolverConfig fields must be positive")
        if self.dedup_radius <= self.tol:
            raise ValueError("dedup_radius must exceed the convergence tolerance")


@dataclass
class OperatingPoint:
    """One converged solution of the feedback system with its stability verdict.

    `norm` is the published linearized-feedback norm ||L||_2; the stability
    verdict is taken from the spectral radius of the round-trip iteration
    Jacobian, which is what the dynamics actually obeys (the norm is only a
    sufficient criterion and over-reports instability for the strongly
    cross-coupled roots of this model). Both numbers are carried.
    """

    I1_in: float
    I2_in: float
    eta1: float
    eta2: float
    I1_out: float
    I2_out: float
    stability: str          # "stable" | "unstable"
    marginal: bool
    norm: float             # spectral norm of the linearized feedback matrix L
    residual: float
    gain: bool = False
    jacobian_norm: float = float("nan")    # spectral norm of the iteration-map Jacobian
    jacobian_radius: float = float("nan")  # spectral radius of the iteration-map Jacobian


@dataclass
class IterationResult:
    """Outcome of the round-trip intensity iteration."""

    status: str             # "converged" | "diverged" | "cycling" | "max_steps"
    point: tuple[float, float]
    steps: int

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def residual(inp: InputPoint, cav: CavityParams, candidate, response) -> np.ndarray:
    """Residual 2-vector of the closed feedback system at a candidate point."""
    pts = np.asarray(candidate, dtype=float).reshape(1, 2)
    r, _, ok = _residual_batch(pts, inp, cav, response)
    if not ok[0]:
        raise NoSolution(inp, skipped=1)
    return r[0]


def _residual_batch(pts, inp, cav, response):
    e1, e2, ok = response.etas(pts[:, 0], pts[:, 1])
    r1 = pts[:, 0] * (1.0 - cav.R1 * e1) - inp.I1_0
    r2 = pts[:, 1] * (1.0 - cav.R2 * e2) - inp.I2_0
    return np.stack([r1, r2], axis=1), np.stack([e1, e2], axis=1), ok


def _merge_close(pts: np.ndarray, radius: float) -> np.ndarray:
    """Drop points within relative `radius` of an earlier point (order stable)."""
    n = len(pts)
    if n == 0:
        return np.empty((0, 2))
    if n > 256:
        # conservative pre-merge on rounded log coordinates (first-seen order)
        keys = np.floor(np.log(np.maximum(np.abs(pts), 1e-300)) / max(radius, 1e-12) / 4.0)
        _, first = np.unique(keys, axis=0, return_index=True)
        pts = pts[np.sort(first)]
        n = len(pts)
        if n > 2048:
            return pts
    scale = np.maximum(np.maximum(np.abs(pts[:, None, :]), np.abs(pts[None, :, :])), 1e-30)
    close = np.all(np.abs(pts[:, None, :] - pts[None, :, :]) <= radius * scale, axis=2)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        if keep[i]:
            later = close[i].copy()
            later[: i + 1] = False
            keep &= ~later
    return pts[keep]


def _seed_grid(inp: InputPoint, cav: CavityParams, cfg: SolverConfig, widen: float = 1.0):
    lo = np.array([
        max(inp.I1_0 * cfg.seed_low_factor, 1e-9),
        max(inp.I2_0 * cfg.seed_low_factor, 1e-9),
    ])
    hi = np.array([
        max(inp.I1_0, 1e-6) / (1.0 - cav.R1) * cfg.bound_margin * widen,
        max(inp.I2_0, 1e-6) / (1.0 - cav.R2) * cfg.bound_margin * widen,
    ])
    a1 = np.geomspace(lo[0], hi[0], cfg.seed_grid)
    a2 = np.geomspace(lo[1], hi[1], cfg.seed_grid)
    g1, g2 = np.meshgrid(a1, a2, indexing="ij")
    return np.stack([g1.ravel(), g2.ravel()], axis=1), lo, hi


def _newton_roots(inp, cav, cfg, response, seeds, lo, hi):
    """Batched multi-start damped Newton. Returns (roots, skipped_count)."""
    scale = max(inp.I1_0, inp.I2_0, 1.0)
    tol = cfg.tol * scale
    pts = np.array(seeds, dtype=float)
    pts = np.clip(pts, lo * 0.1, hi * 10.0)
    converged: list[np.ndarray] = []
    skipped = 0

    for it in range(cfg.newton_max_iter):
        if pts.shape[0] == 0:
            break
        n = pts.shape[0]
        h1 = np.maximum(cfg.fd_step * pts[:, 0], cfg.fd_floor)
        h2 = np.maximum(cfg.fd_step * pts[:, 1], cfg.fd_floor)
        stacked = np.concatenate([
            pts,
            pts + np.stack([h1, np.zeros(n)], axis=1),
            pts - np.stack([h1, np.zeros(n)], axis=1),
            pts + np.stack([np.zeros(n), h2], axis=1),
            pts - np.stack([np.zeros(n), h2], axis=1),
        ])
        r_all, _, ok_all = _residual_batch(stacked, inp, cav, response)
        ok = ok_all[:n] & ok_all[n:2*n] & ok_all[2*n:3*n] & ok_all[3*n:4*n] & ok_all[4*n:]
        skipped += int(n - ok.sum())
        r0 = r_all[:n]

        done = ok & (np.abs(r0).max(axis=1) < tol)
        for p in pts[done]:
            converged.append(p.copy())
        active = ok & ~done
        if not active.any():
            break

        J = np.empty((n, 2, 2))
        J[:, :, 0] = (r_all[n:2*n] - r_all[2*n:3*n]) / (2.0 * h1)[:, None]
        J[:, :, 1] = (r_all[3*n:4*n] - r_all[4*n:]) / (2.0 * h2)[:, None]

        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        solvable = active & (np.abs(det) > 1e-300) & np.all(np.isfinite(J.reshape(n, 4)), axis=1)
        idx = np.nonzero(solvable)[0]
        if idx.size == 0:
            break
        step = np.empty((idx.size, 2))
        d = det[idx]
        step[:, 0] = -(J[idx, 1, 1] * r0[idx, 0] - J[idx, 0, 1] * r0[idx, 1]) / d
        step[:, 1] = -(J[idx, 0, 0] * r0[idx, 1] - J[idx, 1, 0] * r0[idx, 0]) / d

        base = pts[idx]
        norm0 = np.abs(r0[idx]).max(axis=1)
        # evaluate all damping candidates in one stacked call, take the first
        # (least damped) one that decreases the residual norm
        lams = cfg.damping ** np.arange(6)
        trials = np.clip(
            base[None, :, :] + lams[:, None, None] * step[None, :, :],
            (lo * 1e-3)[None, None, :],
            (hi * 10.0)[None, None, :],
        )
        r_t, _, ok_t = _residual_batch(trials.reshape(-1, 2), inp, cav, response)
        norm_t = np.where(ok_t, np.abs(r_t).max(axis=1), np.inf).reshape(len(lams), idx.size)
        improving = norm_t < norm0[None, :]
        choice = np.where(improving.any(axis=0), improving.argmax(axis=0), len(lams) - 1)
        pts = trials[choice, np.arange(idx.size)]
        if it >= 1:
            pts = _merge_close(pts, cfg.dedup_radius)

    roots = _merge_close(np.array(converged), cfg.dedup_radius) if converged else np.empty((0, 2))
    return roots, skipped


def spectral_norm(M: np.ndarray) -> float:
    """Largest singular value of a 2x2 real matrix, in closed form."""
    a, b, c, d = (float(x) for x in np.asarray(M).ravel())
    s = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = max(s * s - 4.0 * det * det, 0.0)
    return float(np.sqrt(0.5 * (s + np.sqrt(disc))))


def spectral_radius(M: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a 2x2 real matrix, in closed form."""
    a, b, c, d = (float(x) for x in np.asarray(M).ravel())
    tr = a + d
    det = a * d - b * c
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        r = np.sqrt(disc)
        return float(max(abs(tr + r), abs(tr - r)) / 2.0)
    return float(np.sqrt(det))


def classify(norm: float) -> tuple[str, bool]:
    """Stability label from the linearized-feedback norm; near-unit norms are marginal."""
    marginal = abs(norm - 1.0) < MARGINAL_BAND
    if marginal:
        return "unstable", True
    return ("stable" if norm < 1.0 else "unstable"), False


def stability_matrix(point, inp: InputPoint, cav: CavityParams, cfg: SolverConfig, response):
    """Linearized feedback matrix L and the iteration-map Jacobian J at a root.

    d(eta)/dI by central differences; L follows the published linearization
    with the [1 + R_j eta_j]^2 denominator, J is the Jacobian of the
    round-trip map kept for diagnostics.
    """
    I1, I2 = float(point[0]), float(point[1])
    h1 = max(cfg.fd_step * I1, cfg.fd_floor)
    h2 = max(cfg.fd_step * I2, cfg.fd_floor)
    pts = np.array([
        [I1, I2],
        [I1 + h1, I2], [I1 - h1, I2],
        [I1, I2 + h2], [I1, I2 - h2],
    ])
    e1, e2, ok = response.etas(pts[:, 0], pts[:, 1])
    if not ok.all():
        raise NoSolution(inp, skipped=int((~ok).sum()))
    etas = np.stack([e1, e2], axis=1)
    deta = np.empty((2, 2))
    deta[:, 0] = (etas[1] - etas[2]) / (2.0 * h1)
    deta[:, 1] = (etas[3] - etas[4]) / (2.0 * h2)

    R = np.array([cav.R1, cav.R2])
    I0 = np.array([inp.I1_0, inp.I2_0])
    Iin = np.array([I1, I2])
    eta0 = etas[0]
    L = (I0 * R / (1.0 + R * eta0) ** 2)[:, None] * deta
    J = np.diag(R * eta0) + (R * Iin)[:, None] * deta
    return L, J, eta0


def _make_operating_point(point, inp, cav, cfg, response) -> OperatingPoint:
    L, J, etas = stability_matrix(point, inp, cav, cfg, response)
    norm = spectral_norm(L)
    # verdict from the dynamics-faithful quantity, published norm reported alongside
    radius = spectral_radius(J)
    stability, marginal = classify(radius)
    r = residual(inp, cav, point, response)
    I1, I2 = float(point[0]), float(point[1])
    return OperatingPoint(
        I1_in=I1,
        I2_in=I2,
        eta1=float(etas[0]),
        eta2=float(etas[1]),
        I1_out=float(etas[0]) * I1,
        I2_out=float(etas[1]) * I2,
        stability=stability,
        marginal=marginal,
        norm=norm,
        residual=float(np.abs(r).max()),
        gain=bool(etas[0] > 1.0 or etas[1] > 1.0),
        jacobian_norm=spectral_norm(J),
        jacobian_radius=radius,
    )


def find_all_solutions(
    inp: InputPoint,
    cav: CavityParams,
    cfg: SolverConfig,
    response,
    extra_seeds: Sequence[tuple[float, float]] | None = None,
) -> list[OperatingPoint]:
    """All operating points for one input pair, sorted by (I1_in, I2_in).

    Damped Newton is launched from every node of a log-spaced seed grid (plus
    optional warm-start seeds); converged roots are deduplicated, re-verified
    and classified. Raises NoSolution when nothing converges.
    """
    if cav.R1 == 0.0 and cav.R2 == 0.0:
        # feedback absent: internal intensities equal the inputs exactly
        pt = np.array([inp.I1_0, inp.I2_0])
        return [_make_operating_point(pt, inp, cav, cfg, response)]

    seeds, lo, hi = _seed_grid(inp, cav, cfg)
    # probe for gain: physical buildup bound assumes eta <= 1
    _, etas_probe, ok_probe = _residual_batch(seeds[:: max(len(seeds) // 32, 1)], inp, cav, response)
    if ok_probe.any() and np.nanmax(etas_probe[ok_probe]) > 1.0 + 1e-9:
        seeds, lo, hi = _seed_grid(inp, cav, cfg, widen=10.0)

    if extra_seeds is not None and len(extra_seeds):
        seeds = np.concatenate([np.asarray(extra_seeds, dtype=float).reshape(-1, 2), seeds])

    roots, skipped = _newton_roots(inp, cav, cfg, response, seeds, lo, hi)
    if roots.shape[0] == 0:
        raise NoSolution(inp, skipped=skipped)

    scale = max(inp.I1_0, inp.I2_0, 1.0)
    ops = []
    for pt in roots:
        op = _make_operating_point(pt, inp, cav, cfg, response)
        if op.residual < 10.0 * cfg.tol * scale:
            ops.append(op)
    if not ops:
        raise NoSolution(inp, skipped=skipped)
    ops.sort(key=lambda op: (op.I1_in, op.I2_in))
    return ops


def iterate_map(
    inp: InputPoint,
    cav: CavityParams,
    response,
    start: tuple[float, float],
    max_steps: int = 2000,
    tol: float = 1e-12,
) -> IterationResult:
    """Physical round-trip iteration I_j <- I_j_0 + R_j eta_j(I) I_j.

    The dynamics proxy of the model: converges to stable operating points,
    escapes unstable ones.
    """
    cur = np.array(start, dtype=float)
    if np.any(cur <= 0):
        raise ValueError("start intensities must be positive")
    prev = None
    bound = 1e12 * max(inp.I1_0, inp.I2_0, 1.0)
    for step in range(1, max_steps + 1):
        e1, e2, ok = response.etas([cur[0]], [cur[1]])
        if not ok[0]:
            return IterationResult("diverged", (float(cur[0]), float(cur[1])), step)
        nxt = np.array([
            inp.I1_0 + cav.R1 * float(e1[0]) * cur[0],
            inp.I2_0 + cav.R2 * float(e2[0]) * cur[1],
        ])
        if not np.all(np.isfinite(nxt)) or np.any(nxt > bound):
            return IterationResult("diverged", (float(nxt[0]), float(nxt[1])), step)
        sc = np.maximum(np.abs(nxt), 1e-30)
        change = float(np.max(np.abs(nxt - cur) / sc))
        if change < tol:
            return IterationResult("converged", (float(nxt[0]), float(nxt[1])), step)
        if prev is not None:
            cyc = float(np.max(np.abs(nxt - prev) / sc))
            if cyc < tol and change >= tol:
                return IterationResult("cycling", (float(nxt[0]), float(nxt[1])), step)
        prev = cur
        cur = nxt
    return IterationResult("max_steps", (float(cur[0]), float(cur[1])), max_steps)
