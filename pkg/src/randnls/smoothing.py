"""Local smoothing of the linear flow versus weighted spectral-projector decay.

The smoothing functional is

    S_gamma(f) = ( int_0^{2 pi} || Psi <H>^(gamma/2) e^{-itH} f ||_2^2 dt )^(1/2)

with ``Psi = <x>^(-1/2 - nu)``. A bound ``S_gamma(f) <= C ||f||_2`` holds
exactly when ``||Psi P_N||`` decays like ``N^(-gamma/2)``; the functions here
measure both sides and compare the exponents.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import norms
from .errors import EmptyBandError
from .randomization import RandomLaw, variates
from .spectral import SpectralField


@dataclass(frozen=True)
class SmoothingSpec:
    """Gain ``gamma`` and weight slack ``nu``.

    ``indicator_radius`` swaps the weight for the indicator of a centred ball.
    """

    gamma: float
    nu: float = 0.5
    indicator_radius: Optional[float] = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gain must be nonnegative")
        if not self.nu > 0:
            raise ValueError("weight slack must be positive")

    def weight(self, grid):
        if self.indicator_radius is not None:
            return (grid.radius_squared <= self.indicator_radius**2).astype(float)
        return norms.decay_weight(grid, self.nu)

    def with_gamma(self, gamma):
        return SmoothingSpec(gamma, self.nu, self.indicator_radius)


def weighted_gram(basis, members, weight):
    """``<Psi phi_m, Psi phi_n>`` over the given 0-based modes."""
    members = np.asarray(members)
    rows = basis.mode_samples(members).reshape(members.size, -1)
    w = (weight**2 * basis.grid.cell_weights).ravel()
    return (rows * w) @ rows.T


def _time_integral(c, energies, gram, M_t):
    t = np.linspace(0.0, 2 * np.pi, M_t + 1)
    ct = c[None, :] * np.exp(-1j * np.multiply.outer(t, energies))
    integrand = np.einsum("ti,ij,tj->t", ct.conj(), gram, ct).real
    h = t[1] - t[0]
    return h * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))


def smoothing_integral(f, spec, M_t=256, flow="H"):
    """``S_gamma(f)`` by trapezoid in time and a weighted Gram matrix in space.

    ``flow="A"`` propagates with the integer-part energies instead of ``mu``.
    """
    if M_t < 64:
        raise ValueError("use at least 64 time nodes")
    basis = f.basis
    support = np.flatnonzero(f.coefficients)
    if support.size == 0:
        return 0.0
    mu = basis.energies[support]
    c = f.coefficients[support] * norms.sobolev_weight(mu, spec.gamma)
    gram = weighted_gram(basis, support, spec.weight(basis.grid))
    energies = np.floor(mu) if flow == "A" else mu
    if flow not in ("H", "A"):
        raise ValueError("flow must be 'H' or 'A'")
    return math.sqrt(max(_time_integral(c, energies, gram, M_t), 0.0))


def weighted_mode_norms(basis, weight, modes=None):
    """``||Psi phi_n||_2`` for the selected (0-based) modes."""
    modes = np.arange(basis.N) if modes is None else np.asarray(modes)
    w = weight**2 * basis.grid.cell_weights
    out = np.empty(modes.size)
    chunk = max(1, 2**22 // basis.grid.size)
    for start in range(0, modes.size, chunk):
        s = basis.mode_samples(modes[start:start + chunk])
        axes = tuple(range(1, s.ndim))
        out[start:start + chunk] = np.sqrt(np.sum(s * s * w, axis=axes))
    return out


@dataclass
class BandProbe:
    """Single-band smoothing ratios ``S_gamma(f_N) / ||f_N||``."""

    gamma: float
    bands: np.ndarray
    ratios: np.ndarray

    def variation(self):
        """Growth of the running maximum across the band range."""
        running = np.maximum.accumulate(self.ratios)
        return float(running[-1] / running[0] - 1.0)

    def fit(self):
        return norms.loglog_fit(self.bands, self.ratios)


def band_probe(basis, spec, N_range, M_t=256, _mode_norms=None):
    """Worst single-band ratio in every nonempty band of ``N_range``.

    In a band with several modes, the probe is the top eigenvector of the
    weighted band Gram matrix.
    """
    lo, hi = N_range
    weight = spec.weight(basis.grid)
    out_N, out_r = [], []
    for N, members in norms.bands(basis).items():
        if N < lo or N > hi:
            continue
        if members.size == 1:
            n = members[0]
            wn = norms.sobolev_weight(basis.energies[n], spec.gamma)
            psi_norm = (
                _mode_norms[n] if _mode_norms is not None
                else weighted_mode_norms(basis, weight, [n])[0]
            )
            # the time integrand is constant for a single mode
            ratio = math.sqrt(2 * math.pi) * wn * psi_norm
        else:
            gram = weighted_gram(basis, members, weight)
            _, vecs = np.linalg.eigh(gram)
            c = np.zeros(basis.N, dtype=complex)
            c[members] = vecs[:, -1]
            ratio = smoothing_integral(SpectralField(c, basis), spec, M_t)
        out_N.append(N)
        out_r.append(ratio)
    if not out_N:
        raise EmptyBandError(f"no nonempty band in {N_range}")
    return BandProbe(spec.gamma, np.array(out_N), np.array(out_r))


@dataclass
class BatteryResult:
    max_ratio: float
    random_ratios: np.ndarray
    probe: BandProbe


def smoothing_ratio_battery(basis, spec, M_f, seed, N_range=None, M_t=128, max_support=96):
    """Largest ``S_gamma(f) / ||f||`` over random and single-band fields.

    Random fields have complex-Gaussian coefficients on a window of at most
    ``max_support`` consecutive modes at a random offset inside ``N_range``.
    """
    if M_f < 50:
        raise ValueError("use at least 50 random fields")
    if N_range is None:
        N_range = (0, int(basis.energies.max()))
    labels = norms.band_index(basis.energies)
    pool = np.flatnonzero((labels >= N_range[0]) & (labels <= N_range[1]))
    rng = seed.generator()
    ratios = np.empty(M_f)
    width = min(max_support, pool.size)
    for i in range(M_f):
        start = int(rng.integers(0, pool.size - width + 1))
        modes = pool[start:start + width]
        c = np.zeros(basis.N, dtype=complex)
        c[modes] = variates(RandomLaw.GAUSSIAN, rng, (width,))
        c /= np.linalg.norm(c)
        ratios[i] = smoothing_integral(SpectralField(c, basis), spec, M_t)
    probe = band_probe(basis, spec, N_range, M_t)
    return BatteryResult(float(max(ratios.max(), probe.ratios.max())), ratios, probe)


# ---------------------------------------------------------------------------
# integer-part operator


@dataclass(frozen=True, eq=False)
class IntegerPartOperator:
    """``A phi_n = floor(mu_n) phi_n``."""

    basis: object
    energies: np.ndarray

    def flow(self, f, t):
        return f.with_coefficients(f.coefficients * np.exp(-1j * self.energies * t))

    def perturbation(self, f):
        """``(H - A) f``."""
        return f.with_coefficients(f.coefficients * (self.basis.energies - self.energies))

    def max_gap(self):
        return float(np.max(self.basis.energies - self.energies))


def integer_part_operator(basis):
    return IntegerPartOperator(basis, np.floor(basis.energies))


def band_parseval(f, spec):
    """``2 pi sum_N || Psi sum_{n in band N} w_n alpha_n phi_n ||^2``.

    Equals ``S_gamma(f)^2`` under the flow of the integer-part operator.
    """
    basis = f.basis
    weight = spec.weight(basis.grid)
    c = f.coefficients * norms.sobolev_weight(basis.energies, spec.gamma)
    total = 0.0
    for members in norms.bands(basis).values():
        if not np.any(c[members]):
            continue
        u = norms.band_samples(basis, c, members)
        total += norms.lq_norm(weight * u, 2, basis.grid) ** 2
    return 2 * math.pi * total


# ---------------------------------------------------------------------------
# equivalence


@dataclass
class EquivalenceReport:
    k: float
    nu: float
    projector_fit: norms.LinearFit
    gamma_decay: float
    gamma_smoothing: float
    gamma_grid: np.ndarray
    variations: np.ndarray
    over_gain: float
    over_gain_fit: norms.LinearFit
    probe_range: tuple
    fit_range: tuple
    probes: list = field(default_factory=list, repr=False)

    @property
    def agree(self):
        return abs(self.gamma_decay - self.gamma_smoothing) <= 0.1

    def to_dict(self):
        return {
            "k": self.k,
            "nu": self.nu,
            "projector_slope": self.projector_fit.slope,
            "gamma_decay": self.gamma_decay,
            "gamma_smoothing": self.gamma_smoothing,
            "gamma_grid": self.gamma_grid.tolist(),
            "variations": self.variations.tolist(),
            "over_gain": self.over_gain,
            "over_gain_slope": self.over_gain_fit.slope,
            "probe_range": list(self.probe_range),
            "fit_range": list(self.fit_range),
            "agree": self.agree,
        }


STABLE_VARIATION = 0.25


def equivalence_report(basis, nu, N_range, M_t=256, gamma_grid=None, fit_range=(50, 400),
                       over_gain=None):
    """Compare the decay exponent of ``||Psi P_N||`` with the smoothing gain.

    (a) ``gamma_decay = -2 * slope`` of the projector ratios over ``fit_range``;
    (b) ``gamma_smoothing`` is the largest gain on ``gamma_grid`` whose
    single-band ratios over ``N_range`` grow by less than 25% (running
    maximum); (c) the fitted growth slope at ``over_gain`` (default ``2/k``).
    """
    k = basis.potential.k
    if gamma_grid is None:
        gamma_grid = np.round(np.arange(0.05, 1.5 + 1e-9, 0.05), 10)
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    table = norms.weighted_projector_decay(basis, nu, norms.uniform_field(basis), fit_range)
    pfit = table.fit()
    base = SmoothingSpec(0.0, nu)
    labels = norms.band_index(basis.energies)
    in_range = np.flatnonzero((labels >= N_range[0]) & (labels <= N_range[1]))
    mode_norms = np.zeros(basis.N)
    mode_norms[in_range] = weighted_mode_norms(basis, base.weight(basis.grid), in_range)

    variations, probes = [], []
    best = 0.0
    for gamma in gamma_grid:
        probe = band_probe(basis, base.with_gamma(gamma), N_range, M_t, mode_norms)
        probes.append(probe)
        v = probe.variation()
        variations.append(v)
        if v < STABLE_VARIATION:
            best = max(best, float(gamma))
    if over_gain is None:
        over_gain = 2.0 / k
    ofit = band_probe(basis, base.with_gamma(over_gain), N_range, M_t, mode_norms).fit()
    return EquivalenceReport(
        k=k,
        nu=nu,
        projector_fit=pfit,
        gamma_decay=-2 * pfit.slope,
        gamma_smoothing=best,
        gamma_grid=gamma_grid,
        variations=np.array(variations),
        over_gain=over_gain,
        over_gain_fit=ofit,
        probe_range=tuple(N_range),
        fit_range=tuple(fit_range),
        probes=probes,
    )
