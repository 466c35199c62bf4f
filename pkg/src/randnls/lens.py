"""Lens transform between harmonic and free Schrodinger equations.

If ``v`` solves

    i v_tau + Delta v - |x|^2 v = sign * c(tau) |v|^(r-1) v,
    c(tau) = 2 (cos^2 2 tau)^alpha,  alpha = (d/4)(r-1) - 1,

on ``0 <= tau < pi/4``, then

    u(t, x) = 2^(1/(r-1)) (1+4t^2)^(-d/4) v(arctan(2t)/2, x / sqrt(1+4t^2))
              * exp(i |x|^2 t / (1+4t^2))

solves ``i u_t + Delta u = sign * |u|^(r-1) u`` with ``u(0) = 2^(1/(r-1)) v(0)``.
The map factors as ``2^(1/(r-1)) D_2 L_0 D_{1/2}`` with ``D_beta v(t) = v(beta t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import CapabilityError, UsageError
from .propagation import (
    TimeGrid,
    Trajectory,
    nonlinearity,
    picard_solve,
    propagator,
)


@dataclass(frozen=True)
class LensParams:
    d: int
    r: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.r < 3 or self.r % 2 != 1:
            raise ValueError("nonlinearity degree must be odd and >= 3")

    @property
    def alpha(self):
        return self.d * (self.r - 1) / 4.0 - 1.0

    @property
    def amplitude(self):
        return 2.0 ** (1.0 / (self.r - 1))

    def coupling(self, tau):
        """Nonlinear coefficient of the harmonic problem at time ``tau``."""
        tau = np.asarray(tau, dtype=float)
        if self.alpha == 0:
            return np.full(tau.shape, 2.0)
        return 2.0 * (np.cos(2 * tau) ** 2) ** self.alpha


def source_time(t):
    """Harmonic-side time ``arctan(2t)/2`` paired with free-side time ``t``."""
    return 0.5 * np.arctan(2 * np.asarray(t, dtype=float))


def target_horizon(tau):
    """Largest free-side time reachable from a harmonic horizon ``tau``."""
    if not 0 < tau < math.pi / 4:
        raise ValueError("harmonic horizon must lie in (0, pi/4)")
    return 0.5 * math.tan(2 * tau)


# ---------------------------------------------------------------------------
# snapshot transforms


def _dilate_samples(samples, grid, scale):
    """Cubic-spline values of ``u(scale * x)`` on the grid, zero outside it."""
    out = np.asarray(samples, dtype=complex)
    x = grid.axis
    target = scale * x
    inside = np.abs(target) <= grid.half_width
    for axis in range(grid.d):
        lead = out.ndim - grid.d + axis
        spline = CubicSpline(x, out, axis=lead)
        out = spline(np.where(inside, target, 0.0))
        shape = [1] * out.ndim
        shape[lead] = x.size
        out = out * inside.reshape(shape)
    return out


def lens_forward(samples, t, grid):
    """``(L_0 u)(t, x) = (1+t^2)^(-d/4) u(x / sqrt(1+t^2)) exp(i |x|^2 t / (2(1+t^2)))``.

    ``samples`` is the source snapshot at source time ``arctan t``.
    """
    if t == 0:
        return np.array(samples, dtype=complex)
    s2 = 1.0 + t * t
    pulled = _dilate_samples(samples, grid, 1.0 / math.sqrt(s2))
    phase = np.exp(1j * grid.radius_squared * t / (2 * s2))
    return s2 ** (-grid.d / 4) * pulled * phase


def time_dilate(v, beta, horizon=None):
    """``(D_beta v)(t) = v(beta t)`` by linear interpolation between snapshots.

    The result keeps the node count and lives on ``[0, horizon]``, by
    default ``T / beta``; ``beta * horizon`` may not exceed the source horizon.
    """
    if not beta > 0:
        raise ValueError("dilation factor must be positive")
    horizon = v.times.T / beta if horizon is None else float(horizon)
    if beta * horizon > v.times.T * (1 + 1e-12):
        raise UsageError("dilated nodes leave the source horizon")
    times = TimeGrid(horizon, v.times.M)
    pos = np.clip(beta * horizon / v.times.T * np.arange(times.size), 0, v.times.M)
    lo = np.minimum(np.floor(pos).astype(int), v.times.M - 1)
    frac = (pos - lo)[:, None]
    c = v.coefficients
    return Trajectory(times, (1 - frac) * c[lo] + frac * c[lo + 1], v.basis)


# ---------------------------------------------------------------------------
# harmonic problem with coupling


def solve_harmonic_weighted(f, params, T, tol=1e-10, sign=1, M_t=256, max_iter=80):
    """Solve the harmonic problem with coupling ``c(tau)`` from ``2^(-1/(r-1)) f``."""
    if f.basis.potential.kind != "harmonic":
        raise CapabilityError("the lens transform needs the harmonic basis")
    if f.basis.d != params.d:
        raise ValueError("basis dimension does not match the lens parameters")
    if not 0 < T < math.pi / 4:
        raise ValueError("harmonic horizon must lie in (0, pi/4)")
    datum = f * (1.0 / params.amplitude)
    coupling = 2.0 if params.alpha == 0 else params.coupling
    return picard_solve(datum, None, params.r, sign, 0.0, T, tol, max_iter, M_t,
                        coupling=coupling)


# ---------------------------------------------------------------------------
# composition


@dataclass(frozen=True, eq=False)
class GridTrajectory:
    """Grid samples ``u(t_m, x)`` on uniform time nodes."""

    times: np.ndarray
    samples: np.ndarray
    grid: object

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])


def _interaction_spline(v):
    # e^{i tau H} v(tau) varies on the slow nonlinear time scale only
    w = v.coefficients * np.conj(propagator(v.basis.energies, v.times.nodes))
    return CubicSpline(v.times.nodes, w, axis=0)


def compose_lens(v, params, t_nodes=None):
    """Image ``u = 2^(1/(r-1)) D_2 L_0 D_{1/2} v`` on free-side nodes ``t_nodes``.

    Snapshots between harmonic nodes are interpolated by a cubic spline of
    ``e^{i tau H} v(tau)``; the spatial pull-back evaluates the Hermite
    expansion exactly at the dilated points. ``t_nodes`` defaults to the
    image of the harmonic grid's node count on ``[0, tan(2T)/2]``.
    """
    basis = v.basis
    if basis.potential.kind != "harmonic":
        raise CapabilityError("the lens transform needs the harmonic basis")
    if t_nodes is None:
        t_nodes = np.linspace(0.0, target_horizon(v.times.T), v.times.size)
    t_nodes = np.asarray(t_nodes, dtype=float)
    tau = source_time(t_nodes)
    if tau.max() > v.times.T * (1 + 1e-12) or tau.min() < 0:
        raise UsageError("free-side nodes need harmonic times beyond the solved horizon")
    spline = _interaction_spline(v)
    d = basis.d
    r2 = basis.grid.radius_squared
    out = np.empty((t_nodes.size,) + basis.grid.shape, dtype=complex)
    for m, (t, s) in enumerate(zip(t_nodes, tau)):
        if t == 0:
            # the datum relation is exact: no interpolation, no dilation
            out[m] = params.amplitude * basis.synthesize_array(v.coefficients[0])
            continue
        coeffs = spline(s) * propagator(basis.energies, s)
        s2 = 1.0 + 4.0 * t * t
        pulled = basis.evaluate_scaled(coeffs, 1.0 / math.sqrt(s2))
        out[m] = params.amplitude * s2 ** (-d / 4) * pulled * np.exp(1j * r2 * t / s2)
    return GridTrajectory(t_nodes, out, basis.grid)


def linear_lens_image(f, t_nodes, amplitude=1.0):
    """Lens image of the exact harmonic flow ``e^{-i tau H} f``."""
    basis = f.basis
    d = basis.d
    r2 = basis.grid.radius_squared
    out = np.empty((len(t_nodes),) + basis.grid.shape, dtype=complex)
    for m, t in enumerate(t_nodes):
        s = source_time(t)
        coeffs = f.coefficients * propagator(basis.energies, s)
        s2 = 1.0 + 4.0 * t * t
        pulled = basis.evaluate_scaled(coeffs, 1.0 / math.sqrt(s2))
        out[m] = amplitude * s2 ** (-d / 4) * pulled * np.exp(1j * r2 * t / s2)
    return GridTrajectory(np.asarray(t_nodes, dtype=float), out, basis.grid)


# ---------------------------------------------------------------------------
# residual


_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def periodic_laplacian(samples, grid):
    """Fourier Laplacian over the trailing grid axes on ``[-L, L)^d``.

    The final point of every axis duplicates the first under periodicity and
    is dropped before transforming; the returned array has the reduced shape.
    """
    d = grid.d
    inner = (Ellipsis,) + (slice(None, -1),) * d
    u = samples[inner]
    n = grid.points_per_axis - 1
    xi = 2 * np.pi * np.fft.fftfreq(n, d=grid.spacing)
    xi2 = xi**2
    for _ in range(d - 1):
        xi2 = np.add.outer(xi2, xi**2)
    axes = tuple(range(u.ndim - d, u.ndim))
    return np.fft.ifftn(-xi2 * np.fft.fftn(u, axes=axes), axes=axes), inner


def free_nls_residual(u, r=3, sign=1, mask=None):
    """Relative residual of ``i u_t + Delta u = sign |u|^(r-1) u``.

    Fourth-order centred differences in time, Fourier Laplacian in space.
    Returns the maximum over interior nodes of ``||R||_2 / ||u||_2``, with the
    norms optionally weighted by ``mask``.
    """
    if u.times.size < 5:
        raise ValueError("need at least 5 time nodes")
    steps = np.diff(u.times)
    if not np.allclose(steps, steps[0], rtol=1e-10, atol=0):
        raise UsageError("time nodes must be uniform")
    lap, inner = periodic_laplacian(u.samples, u.grid)
    core = u.samples[inner]
    dt = u.dt
    worst = 0.0
    w = None if mask is None else np.asarray(mask)[inner[1:]]
    for m in range(2, u.times.size - 2):
        ut = np.tensordot(_D1, core[m - 2:m + 3], axes=1) / dt
        res = 1j * ut + lap[m]
        if sign:
            res = res - sign * nonlinearity(core[m], r)
        a, b = np.abs(res) ** 2, np.abs(core[m]) ** 2
        if w is not None:
            a, b = a * w, b * w
        den = math.sqrt(b.sum())
        if den > 0:
            worst = max(worst, math.sqrt(a.sum()) / den)
    return worst
