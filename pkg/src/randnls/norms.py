"""Sobolev and Lebesgue norms, spectral projectors, and eigenfunction bounds.

Sobolev orders act through the multiplier ``w_n(s) = (1 + mu_n^2)^(s/4)``,
the eigenvalue of ``<H>^(s/2)`` with ``<H> = (1 + H^2)^(1/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import CapabilityError, EmptyBandError
from .spectral import SpectralField


def sobolev_weight(energies, s):
    """``(1 + mu^2)^(s/4)`` elementwise."""
    mu = np.asarray(energies, dtype=float)
    return (1.0 + mu * mu) ** (s / 4.0)


def hs_norm(field, s):
    """``(sum |alpha_n|^2 (1 + mu_n^2)^(s/2))^(1/2)``."""
    a = np.abs(field.coefficients) ** 2
    return float(math.sqrt(np.sum(a * sobolev_weight(field.basis.energies, 2 * s))))


def hs_norms(coeffs, energies, s):
    """Row-wise H^s norms for a stack of coefficient vectors."""
    w2 = sobolev_weight(energies, 2 * s)
    return np.sqrt(np.sum(np.abs(coeffs) ** 2 * w2, axis=-1))


def lq_norm(samples, q, grid):
    """Quadrature ``L^q`` norm over the trailing grid axes.

    ``q = inf`` is the grid maximum. Leading axes are treated as a batch, in
    which case an array of norms is returned.
    """
    if q < 1:
        raise ValueError(f"L^q norm needs q >= 1, got {q}")
    samples = np.asarray(samples)
    if math.isinf(q):
        u = np.abs(samples)
        out = u.max(axis=tuple(range(u.ndim - grid.d, u.ndim)))
    else:
        out = np.tensordot(abs_power(samples, q), grid.cell_weights, axes=grid.d) ** (1.0 / q)
    return float(out) if np.ndim(out) == 0 else out


def abs_power(u, q):
    """``|u|^q``, by repeated squaring of ``|u|^2`` when ``q`` is an even integer."""
    if np.iscomplexobj(u):
        m2 = u.real * u.real + u.imag * u.imag
    else:
        m2 = u * u
    if q == 2:
        return m2
    half = q / 2
    if half == int(half) and half <= 64:
        n = int(half)
        result, base = None, m2
        while n:
            if n & 1:
                result = base if result is None else result * base
            n >>= 1
            if n:
                base = base * base
        return result
    return m2**half


def wsq_norm(field, s, q):
    """``|| <H>^(s/2) f ||_{L^q}`` by multiplier, synthesis, and quadrature."""
    basis = field.basis
    c = field.coefficients * sobolev_weight(basis.energies, s)
    return lq_norm(basis.synthesize_array(c), q, basis.grid)


# ---------------------------------------------------------------------------
# exponent tables


def q_star(d):
    """Critical exponent ``2(d+3)/(d+1)`` of the k = 2 table."""
    return 2.0 * (d + 3) / (d + 1)


def _inv(q):
    return 0.0 if math.isinf(q) else 1.0 / q


TABLES = ("1d", "k2")


def _pick_table(k, d, table):
    if table is None:
        table = "1d" if d == 1 else "k2"
    if table not in TABLES:
        raise ValueError(f"unknown exponent table {table!r}")
    if table == "1d" and d != 1:
        raise CapabilityError(f"the one-dimensional table does not apply in dimension {d}")
    if table == "k2" and k != 2:
        raise CapabilityError(f"no exponent table for k = {k} in dimension {d}")
    return table


def theta_branches(k, d, table=None):
    """Branch formulas of an exponent table as ``(upper_breakpoint, fn)`` pairs.

    The last breakpoint is ``inf``. Exposed so branch continuity can be
    checked by evaluating neighbouring branches at their shared breakpoint.
    """
    table = _pick_table(k, d, table)
    if table == "1d":
        return [
            (4.0, lambda q: (2.0 / k) * (0.5 - _inv(q))),
            (math.inf, lambda q: 0.5 - (2.0 / 3.0) * (1 - _inv(q)) * (1 - 1.0 / k)),
        ]
    upper = math.inf if d <= 2 else 2.0 * d / (d - 2)
    branches = [
        (q_star(d), lambda q: 0.5 - _inv(q)),
        (upper, lambda q: 1.0 / 3.0 - (d / 3.0) * (0.5 - _inv(q))),
    ]
    if d > 2:
        branches.append((math.inf, lambda q: 1.0 - d * (0.5 - _inv(q))))
    return branches


def theta_endpoint(k, d, table=None):
    """``(q, theta)`` at the logarithmic endpoint, before subtracting eta."""
    if _pick_table(k, d, table) == "1d":
        return 4.0, 1.0 / (2 * k)
    return q_star(d), 1.0 / (d + 3)


def theta_reference(q, k, d, eta=0.0, table=None):
    """Exponent ``theta(q, k, d)`` bounding ``||phi_n||_{L^q} <~ lambda_n^(-theta)``.

    Tabulated for ``d = 1`` (any ``k >= 2``) and for ``k = 2`` (any ``d``).
    ``eta`` is subtracted at the logarithmic endpoint only. When ``d = 1`` and
    ``k = 2`` both tables apply; ``table`` selects one ("1d" or "k2"), and the
    default is the one-dimensional table.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    if k < 2:
        raise ValueError("need k >= 2")
    if not q >= 2:
        raise ValueError(f"q must lie in [2, inf], got {q}")
    table = _pick_table(k, d, table)
    q_end, value = theta_endpoint(k, d, table)
    if q == q_end:
        return value - eta
    for upper, fn in theta_branches(k, d, table):
        # branches are closed on the right (only the third k = 2 branch has a
        # finite closed end that is not an endpoint)
        if q <= upper:
            return float(fn(q))
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    stderr: float
    max_residual: float

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "stderr": self.stderr,
            "max_residual": self.max_residual,
        }


def linear_fit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("need at least three points for a fit")
    res = stats.linregress(x, y)
    resid = y - (res.slope * x + res.intercept)
    return LinearFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        r_squared=float(res.rvalue**2),
        stderr=float(res.stderr),
        max_residual=float(np.max(np.abs(resid))),
    )


def loglog_fit(x, y):
    return linear_fit(np.log(x), np.log(y))


@dataclass(frozen=True)
class DecayFit:
    """Fitted exponent of ``||phi_n||_{L^q}`` against ``lambda_n``."""

    theta: float
    intercept: float
    max_residual: float
    stderr: float
    q: float
    modes: np.ndarray
    frequencies: np.ndarray
    norms: np.ndarray

    def rows(self):
        return zip(self.modes.tolist(), self.frequencies.tolist(), self.norms.tolist())


def mode_lq_norms(basis, q, modes):
    """``||phi_n||_{L^q}`` for 1-based mode numbers."""
    idx = np.asarray(modes) - 1
    out = np.empty(idx.size)
    chunk = max(1, 2**22 // basis.grid.size)
    for start in range(0, idx.size, chunk):
        sel = idx[start:start + chunk]
        out[start:start + chunk] = lq_norm(basis.mode_samples(sel), q, basis.grid)
    return out


def eigenfunction_decay_fit(basis, q, n_range):
    """Negated log-log slope of ``||phi_n||_q`` against ``lambda_n`` on ``n_range``.

    ``n_range`` is an inclusive pair of 1-based mode numbers.
    """
    n_lo, n_hi = n_range
    if not 1 <= n_lo <= n_hi <= basis.N:
        raise ValueError(f"window {n_range} outside 1..{basis.N}")
    if n_hi - n_lo + 1 < 16:
        raise ValueError("decay fits need a window of at least 16 modes")
    modes = np.arange(n_lo, n_hi + 1)
    norms = mode_lq_norms(basis, q, modes)
    lam = basis.frequencies[modes - 1]
    fit = loglog_fit(lam, norms)
    return DecayFit(
        theta=-fit.slope,
        intercept=fit.intercept,
        max_residual=fit.max_residual,
        stderr=fit.stderr,
        q=q,
        modes=modes,
        frequencies=lam,
        norms=norms,
    )


# ---------------------------------------------------------------------------
# spectral projectors


def band_index(energies):
    """Band label ``N`` with ``N <= mu < N + 1``."""
    return np.floor(np.asarray(energies)).astype(np.int64)


def bands(basis):
    """Mapping from band label to the 0-based member indices, ascending."""
    labels = band_index(basis.energies)
    uniq, first = np.unique(labels, return_index=True)
    order = np.argsort(labels, kind="stable")
    groups = np.split(order, np.searchsorted(labels[order], uniq[1:]))
    return {int(N): g for N, g in zip(uniq, groups)}


def spectral_projector(field, N):
    """Keep the coefficients whose energy lies in ``[N, N+1)``."""
    keep = band_index(field.basis.energies) == N
    return field.with_coefficients(np.where(keep, field.coefficients, 0.0))


def decay_weight(grid, nu):
    """``Psi(x) = <x>^(-1/2 - nu)`` on the grid."""
    return (1.0 + grid.radius_squared) ** (-(0.5 + nu) / 2.0)


def band_samples(basis, coeffs, members):
    """Grid samples of ``sum_{n in members} c_n phi_n``."""
    c = np.asarray(coeffs)[members]
    if basis.d == 1:
        rows = basis.factors[basis.indices[members, 0]]
        if np.iscomplexobj(c):
            return c.real @ rows + 1j * (c.imag @ rows)
        return c @ rows
    return np.tensordot(c, basis.mode_samples(members), axes=1)


@dataclass(frozen=True)
class ProjectorDecayTable:
    nu: float
    bands: np.ndarray
    ratios: np.ndarray

    def fit(self, n_range=None):
        mask = np.ones(self.bands.size, dtype=bool)
        if n_range is not None:
            mask = (self.bands >= n_range[0]) & (self.bands <= n_range[1])
        if mask.sum() < 3:
            raise EmptyBandError("too few nonempty bands in the fit window")
        return loglog_fit(self.bands[mask], self.ratios[mask])


def weighted_projector_decay(basis, nu, f, N_range):
    """``||Psi P_N f|| / ||P_N f||`` for every nonempty band ``N`` in ``N_range``."""
    if nu <= 0:
        raise ValueError("weight slack nu must be positive")
    lo, hi = N_range
    psi = decay_weight(basis.grid, nu)
    coeffs = f.coefficients
    out_N, out_r = [], []
    for N, members in bands(basis).items():
        if N < lo or N > hi:
            continue
        denom = float(np.linalg.norm(coeffs[members]))
        if denom == 0:
            continue
        u = band_samples(basis, coeffs, members)
        out_N.append(N)
        out_r.append(lq_norm(psi * u, 2, basis.grid) / denom)
    if not out_N:
        raise EmptyBandError(f"no nonempty band in {N_range}")
    return ProjectorDecayTable(nu=nu, bands=np.array(out_N), ratios=np.array(out_r))


def uniform_field(basis):
    """Unit coefficients on every mode, so every band is populated."""
    return SpectralField(np.ones(basis.N, dtype=complex), basis)
