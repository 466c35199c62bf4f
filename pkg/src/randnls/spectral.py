"""Eigenbases of ``H = -Delta + V`` sampled on uniform tensor grids.

Two constructions are provided:

* the harmonic oscillator ``V = |x|^2`` in any dimension, built from the
  three-term Hermite recurrence (energies ``2|m| + d`` are exact integers);
* a smoothed power potential ``V = (1 + |x|^2)^(k/2)`` in one dimension,
  discretised by second-order central differences and solved as a symmetric
  tridiagonal eigenproblem.

Functions are carried as coefficient vectors (:class:`SpectralField`) against
an :class:`EigenBasis`; :func:`synthesize` and :func:`project` move between
coefficients and grid samples.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, optimize
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import (
    BasisMismatchError,
    CapabilityError,
    DomainTooSmallError,
    NumericError,
    ResolutionError,
)

RECOMMENDED_MARGIN = 1.2
DRIFT_TOLERANCE = 1e-6
AIRY_PAD = 4.0


# ---------------------------------------------------------------------------
# grids and potentials


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform symmetric tensor grid on ``[-L, L]^d`` with trapezoid weights.

    Every axis carries the same points, so only one axis is stored.
    """

    d: int
    axis: np.ndarray
    axis_weights: np.ndarray
    half_width: float

    def __post_init__(self):
        self.axis.setflags(write=False)
        self.axis_weights.setflags(write=False)

    @property
    def axes(self):
        return (self.axis,) * self.d

    @property
    def weights(self):
        return (self.axis_weights,) * self.d

    @property
    def points_per_axis(self):
        return self.axis.size

    @property
    def shape(self):
        return (self.axis.size,) * self.d

    @property
    def size(self):
        return self.axis.size ** self.d

    @property
    def spacing(self):
        return float(self.axis[1] - self.axis[0])

    @cached_property
    def cell_weights(self):
        """Full tensor of quadrature weights, shaped like a grid function."""
        w = self.axis_weights
        out = w
        for _ in range(self.d - 1):
            out = np.multiply.outer(out, w)
        out = np.asarray(out)
        out.setflags(write=False)
        return out

    @cached_property
    def radius_squared(self):
        """``|x|^2`` evaluated on the grid."""
        x2 = self.axis**2
        out = x2
        for _ in range(self.d - 1):
            out = np.add.outer(out, x2)
        out = np.asarray(out)
        out.setflags(write=False)
        return out

    @cached_property
    def digest(self):
        h = hashlib.sha1()
        h.update(f"grid:{self.d}:{self.axis.size}".encode())
        h.update(np.ascontiguousarray(self.axis).tobytes())
        h.update(np.ascontiguousarray(self.axis_weights).tobytes())
        return h.hexdigest()

    def integrate(self, values):
        """Quadrature of ``values`` over the trailing ``d`` grid axes."""
        return np.tensordot(values, self.cell_weights, axes=self.d)

    def same_as(self, other):
        return self is other or self.digest == other.digest


def build_grid(d, points_per_axis, N_max, margin=RECOMMENDED_MARGIN, half_width=None):
    """Uniform grid on ``[-L, L]^d`` with ``L = margin * sqrt(2 N_max + d)``.

    ``N_max`` is the highest total Hermite degree to be resolved; the half
    width is the classical turning point of that shell, scaled by ``margin``.
    An explicit ``half_width`` overrides the harmonic rule (used for steeper
    potentials, see :func:`grid_for_potential`).
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    if points_per_axis < 2:
        raise ValueError("need at least two points per axis")
    if margin < 1:
        raise DomainTooSmallError(
            f"margin {margin} < 1 leaves the highest mode unresolved"
        )
    if half_width is None:
        half_width = margin * math.sqrt(2 * N_max + d)
    L = float(half_width)
    x = np.linspace(-L, L, points_per_axis)
    # exact symmetry about 0
    x = 0.5 * (x - x[::-1])
    h = 2 * L / (points_per_axis - 1)
    w = np.full(points_per_axis, h)
    w[0] = w[-1] = h / 2
    return Grid(d=d, axis=x, axis_weights=w, half_width=L)


def recommended_points(max_degree, minimum=16):
    """Points per axis for a basis whose 1D factors reach ``max_degree``.

    Four points per active 1D mode, rounded up to ``2^j + 1``.
    """
    target = max(4 * (max_degree + 1), minimum)
    return 2 ** math.ceil(math.log2(target)) + 1


@dataclass(frozen=True)
class PotentialSpec:
    """Confining potential: ``|x|^2`` (harmonic) or ``(1+|x|^2)^(k/2)``."""

    kind: str = "harmonic"
    k: float = 2.0

    def __post_init__(self):
        if self.kind not in ("harmonic", "smoothed-power"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.k < 2:
            raise ValueError("growth exponent must satisfy k >= 2")
        if self.kind == "harmonic" and self.k != 2:
            raise ValueError("the harmonic potential has k = 2")

    @classmethod
    def harmonic(cls):
        return cls("harmonic", 2.0)

    @classmethod
    def smoothed_power(cls, k):
        return cls("smoothed-power", float(k))

    def from_radius_squared(self, r2):
        r2 = np.asarray(r2, dtype=float)
        if self.kind == "harmonic":
            return r2
        return (1.0 + r2) ** (self.k / 2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.from_radius_squared(x * x)

    def on_grid(self, grid):
        return self.from_radius_squared(grid.radius_squared)

    def to_dict(self):
        return {"kind": self.kind, "k": self.k}


def wkb_energy(potential, n):
    """Bohr-Sommerfeld estimate of the n-th (1-based) 1D energy."""
    target = math.pi * (n - 0.5)

    def action(mu):
        xt = turning_point(potential, mu)
        val, _ = integrate.quad(lambda x: math.sqrt(max(mu - potential(x), 0.0)), -xt, xt)
        return val - target

    hi = 2.0 * n + 2.0
    while action(hi) < 0:
        hi *= 2
    return optimize.brentq(action, float(potential(0.0)) + 1e-12, hi, xtol=1e-10)


def turning_point(potential, energy):
    """Positive root of ``V(x) = energy`` in one dimension."""
    if potential.kind == "harmonic":
        return math.sqrt(max(energy, 0.0))
    base = energy ** (2.0 / potential.k) - 1.0
    return math.sqrt(max(base, 0.0))


def _padded_half_width(turning, margin):
    # low modes have wide Airy tails relative to their turning point, so the
    # multiplicative margin alone is not enough there
    return max(margin * turning, turning + AIRY_PAD)


def grid_for_potential(potential, N, points_per_axis, margin=RECOMMENDED_MARGIN):
    """1D grid reaching past the turning point of mode N.

    The half width is ``max(margin * x_N, x_N + 4)`` with ``x_N`` the
    semiclassical turning point.
    """
    if margin < 1:
        raise DomainTooSmallError(f"margin {margin} < 1")
    mu = wkb_energy(potential, N)
    L = _padded_half_width(turning_point(potential, mu), margin)
    return build_grid(1, points_per_axis, 0, margin=margin, half_width=L)


def certified_points(N):
    """Base point count for the finite-difference solver at N modes.

    Sixteen points per mode and at least 513, rounded up to ``2^j + 1`` so
    that the two refinements used for certification nest.
    """
    return 2 ** math.ceil(math.log2(max(16 * (N + 1), 512))) + 1


def recommended_grid(d, N, margin=RECOMMENDED_MARGIN, points_per_axis=None):
    """Grid on which the first N harmonic modes are orthonormal to ~1e-12."""
    degree = harmonic_shell_degree(d, N)
    L = _padded_half_width(math.sqrt(2 * degree + d), margin)
    if points_per_axis is None:
        points_per_axis = recommended_points(degree, minimum=64)
        spacing_limit = math.pi / (1.25 * math.sqrt(2 * degree + 1))
        while 2 * L / (points_per_axis - 1) > spacing_limit:
            points_per_axis = 2 * points_per_axis - 1
    return build_grid(d, points_per_axis, degree, margin=margin, half_width=L)


# ---------------------------------------------------------------------------
# the basis


FORMAT_VERSION = "randnls-basis/1"


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Eigenpairs ``H phi_n = mu_n phi_n`` sampled on a grid.

    Mode ``n`` (stored at row ``n - 1``) is the tensor product of 1D factor
    rows ``factors[indices[n-1, i]]`` along axis ``i``. In one dimension with a
    general potential ``indices`` is the identity and ``factors`` holds the
    eigenvectors directly.
    """

    grid: Grid
    potential: PotentialSpec
    energies: np.ndarray
    factors: np.ndarray
    indices: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.energies, self.factors, self.indices):
            arr.setflags(write=False)

    @property
    def d(self):
        return self.grid.d

    @property
    def N(self):
        return self.energies.size

    @property
    def frequencies(self):
        """``lambda_n = sqrt(mu_n)``."""
        return np.sqrt(self.energies)

    @cached_property
    def basis_id(self):
        h = hashlib.sha1()
        h.update(FORMAT_VERSION.encode())
        h.update(self.grid.digest.encode())
        h.update(repr(self.potential.to_dict()).encode())
        h.update(np.ascontiguousarray(self.energies).tobytes())
        h.update(np.ascontiguousarray(self.indices).tobytes())
        h.update(np.ascontiguousarray(self.factors).tobytes())
        return h.hexdigest()[:16]

    @cached_property
    def _identity_1d(self):
        return self.d == 1 and np.array_equal(self.indices[:, 0], np.arange(self.N))

    def mode_samples(self, modes=None):
        """Samples of the selected (0-based) modes, shape ``(len, *grid.shape)``."""
        idx = self.indices if modes is None else self.indices[np.asarray(modes)]
        out = self.factors[idx[:, 0]]
        for axis in range(1, self.d):
            f = self.factors[idx[:, axis]]
            out = out[..., None] * f.reshape((f.shape[0],) + (1,) * axis + (f.shape[1],))
        return out

    @property
    def samples(self):
        """Eigenfunction samples as an ``N x grid.size`` matrix (materialised)."""
        if self._identity_1d:
            return self.factors
        return self.mode_samples().reshape(self.N, -1)

    def gram(self):
        W = self.grid.cell_weights
        if self.d == 1:
            S = self.samples
            return (S * W) @ S.T
        # tensor structure: G = prod over axes of the 1D factor Gram
        g1 = (self.factors * self.grid.axis_weights) @ self.factors.T
        G = np.ones((self.N, self.N))
        for axis in range(self.d):
            ii = self.indices[:, axis]
            G *= g1[np.ix_(ii, ii)]
        return G

    # coefficient <-> tensor layout for d >= 2
    @cached_property
    def _tensor_shape(self):
        return (self.factors.shape[0],) * self.d

    def _to_tensor(self, coeffs):
        lead = coeffs.shape[:-1]
        A = np.zeros(lead + self._tensor_shape, dtype=coeffs.dtype)
        A[(Ellipsis,) + tuple(self.indices.T)] = coeffs
        return A

    def _from_tensor(self, A):
        return A[(Ellipsis,) + tuple(self.indices.T)]

    def synthesize_array(self, coeffs):
        """Grid samples of ``sum_n c_n phi_n`` for coefficients shaped ``(..., N)``."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-1] != self.N:
            raise BasisMismatchError(
                f"coefficient length {coeffs.shape[-1]} != basis size {self.N}"
            )
        if self._identity_1d:
            return _real_right_matmul(coeffs, self.factors)
        if self.d == 1:
            return _real_right_matmul(coeffs, self.factors[self.indices[:, 0]])
        A = self._to_tensor(coeffs)
        for _ in range(self.d):
            # contract the leading mode axis, append the grid axis at the end
            A = _real_right_matmul(np.moveaxis(A, -self.d, -1), self.factors)
        return A

    def project_array(self, samples):
        """Quadrature inner products ``sum_i f(x_i) phi_n(x_i) w_i``."""
        samples = np.asarray(samples)
        if samples.shape[samples.ndim - self.d:] != self.grid.shape:
            raise BasisMismatchError(
                f"samples of shape {samples.shape} do not live on grid {self.grid.shape}"
            )
        if self.d == 1:
            table = self.factors if self._identity_1d else self.factors[self.indices[:, 0]]
            return _real_right_matmul(samples * self.grid.axis_weights, table.T)
        B = samples * self.grid.cell_weights
        weighted_t = self.factors.T
        for _ in range(self.d):
            B = _real_right_matmul(np.moveaxis(B, -self.d, -1), weighted_t)
        return self._from_tensor(B)

    def factor_values(self, points):
        """1D factor functions evaluated at arbitrary points (harmonic only)."""
        if self.potential.kind != "harmonic":
            raise CapabilityError("off-grid evaluation needs the analytic Hermite basis")
        return hermite_functions(self.factors.shape[0], points)

    def evaluate_scaled(self, coeffs, scale):
        """Evaluate ``sum c_n phi_n(scale * x)`` on the basis grid points.

        ``coeffs`` may carry leading batch axes. Used by the lens transform,
        whose spatial pull-back is a pure dilation of every axis.
        """
        table = self.factor_values(scale * self.grid.axis)
        coeffs = np.asarray(coeffs)
        if self.d == 1:
            return _real_right_matmul(coeffs, table[self.indices[:, 0]])
        A = self._to_tensor(coeffs)
        for _ in range(self.d):
            A = _real_right_matmul(np.moveaxis(A, -self.d, -1), table)
        return A


def _real_right_matmul(a, b):
    """``a @ b`` contracting the last axis of ``a``; ``b`` is a real 2D table.

    Operands are flattened to contiguous 2D blocks so a single GEMM runs per
    real component.
    """
    a = np.asarray(a)
    lead = a.shape[:-1]
    if not np.iscomplexobj(a):
        return (np.ascontiguousarray(a).reshape(-1, a.shape[-1]) @ b).reshape(lead + (b.shape[1],))
    out = np.empty(lead + (b.shape[1],), dtype=complex)
    flat = out.reshape(-1, b.shape[1])
    flat.real = np.ascontiguousarray(a.real).reshape(-1, a.shape[-1]) @ b
    flat.imag = np.ascontiguousarray(a.imag).reshape(-1, a.shape[-1]) @ b
    return out


# ---------------------------------------------------------------------------
# harmonic oscillator


def hermite_functions(n_functions, x):
    """Normalised Hermite functions ``h_0 .. h_{n-1}`` at points ``x``.

    Stable recurrence ``h_{m+1} = sqrt(2/(m+1)) x h_m - sqrt(m/(m+1)) h_{m-1}``.
    """
    x = np.asarray(x, dtype=float)
    H = np.empty((n_functions, x.size))
    H[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n_functions > 1:
        H[1] = math.sqrt(2.0) * x * H[0]
    for m in range(1, n_functions - 1):
        H[m + 1] = math.sqrt(2.0 / (m + 1)) * x * H[m] - math.sqrt(m / (m + 1)) * H[m - 1]
    return H


def harmonic_indices(d, N):
    """First N multi-indices ordered by ``|m|`` then lexicographically."""
    out = []
    degree = 0
    while len(out) < N:
        shell = [m for m in itertools.product(range(degree + 1), repeat=d) if sum(m) == degree]
        shell.sort()
        out.extend(shell)
        degree += 1
    return np.array(out[:N], dtype=np.int64).reshape(N, d)


def harmonic_shell_degree(d, N):
    """Highest total degree ``|m|`` among the first N harmonic modes."""
    return int(harmonic_indices(d, N).sum(axis=1).max())


def build_harmonic_basis(d, N, grid):
    """Hermite tensor basis of ``-Delta + |x|^2`` (energies ``2|m| + d``)."""
    if N < 1:
        raise ValueError("need at least one mode")
    if grid.d != d:
        raise BasisMismatchError(f"grid dimension {grid.d} != {d}")
    idx = harmonic_indices(d, N)
    energies = (2 * idx.sum(axis=1) + d).astype(float)
    wavenumber = np.sqrt(energies)
    nyquist = math.pi / grid.spacing
    bad = np.nonzero((wavenumber > grid.half_width * (1 + 1e-12)) | (wavenumber >= nyquist))[0]
    if bad.size:
        n = int(bad[0]) + 1
        raise ResolutionError(
            f"mode {n} (energy {energies[bad[0]]:g}) is not resolved by a grid of half "
            f"width {grid.half_width:g} and spacing {grid.spacing:g}",
            mode=n,
        )
    K = int(idx.max()) + 1
    factors = hermite_functions(K, grid.axis)
    return EigenBasis(
        grid=grid,
        potential=PotentialSpec.harmonic(),
        energies=energies,
        factors=factors,
        indices=idx,
        info={"construction": "hermite-recurrence"},
    )


# ---------------------------------------------------------------------------
# general 1D potential


def fd_hamiltonian(potential, grid):
    """Diagonal and off-diagonal of the Dirichlet central-difference operator.

    Unknowns are the interior grid points; the two boundary samples are zero.
    """
    h = grid.spacing
    xi = grid.axis[1:-1]
    diag = 2.0 / h**2 + potential(xi)
    off = np.full(xi.size - 1, -1.0 / h**2)
    return diag, off


def _fd_energies(potential, L, points, N, vectors=False):
    grid = build_grid(1, points, 0, half_width=L)
    diag, off = fd_hamiltonian(potential, grid)
    try:
        return eigh_tridiagonal(
            diag, off, eigvals_only=not vectors, select="i", select_range=(0, N - 1)
        )
    except LinAlgError as exc:
        raise NumericError(f"tridiagonal eigensolve failed: {exc}") from exc


def build_general_basis_1d(potential, N, grid, certify=True):
    """Lowest N eigenpairs of ``-d^2/dx^2 + V`` by central differences.

    Eigenvectors live on ``grid`` (zero at the walls ``+-L``). Energies are
    Richardson-extrapolated from the grid and its two successive refinements;
    certification requires the extrapolated energies from (h, h/2) and
    (h/2, h/4) to agree to ``DRIFT_TOLERANCE`` relative.
    """
    if potential.kind != "smoothed-power":
        raise CapabilityError("the finite-difference solver expects a smoothed-power potential")
    if grid.d != 1:
        raise CapabilityError("general potentials are supported in one dimension only")
    P = grid.points_per_axis
    if N > P // 4:
        raise ResolutionError(f"N = {N} exceeds grid size / 4 = {P // 4}", mode=P // 4 + 1)

    diag, off = fd_hamiltonian(potential, grid)
    try:
        mu_h, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, N - 1))
    except LinAlgError as exc:
        raise NumericError(f"tridiagonal eigensolve failed: {exc}") from exc
    if mu_h.size != N:
        raise NumericError(f"eigensolver returned {mu_h.size} of {N} pairs")

    phi = np.zeros((N, P))
    phi[:, 1:-1] = vecs.T
    phi /= np.sqrt((phi**2) @ grid.axis_weights)[:, None]
    _fix_signs(phi)

    info = {"construction": "central-differences", "discrete_energies": mu_h.tolist()}
    energies = mu_h.copy()
    if certify:
        L = grid.half_width
        mu_2 = _fd_energies(potential, L, 2 * P - 1, N)
        mu_4 = _fd_energies(potential, L, 4 * P - 3, N)
        coarse = (4 * mu_2 - mu_h) / 3
        fine = (4 * mu_4 - mu_2) / 3
        drift = np.abs(fine - coarse) / np.abs(fine)
        info["drift"] = float(drift.max())
        bad = np.nonzero(drift >= DRIFT_TOLERANCE)[0]
        if bad.size:
            n = int(bad[0]) + 1
            raise ResolutionError(
                f"energy of mode {n} drifts by {drift[bad[0]]:.3g} under grid doubling",
                mode=n,
            )
        energies = fine
    if np.any(np.diff(energies) <= 0):
        raise NumericError("energies are not strictly increasing")
    return EigenBasis(
        grid=grid,
        potential=potential,
        energies=energies,
        factors=phi,
        indices=np.arange(N, dtype=np.int64)[:, None],
        info=info,
    )


def certified_basis_1d(potential, N, margin=RECOMMENDED_MARGIN, points=None, max_points=2**17 + 1):
    """:func:`build_general_basis_1d` on a grid doubled until the drift test passes."""
    points = points or certified_points(N)
    while True:
        grid = grid_for_potential(potential, N, points, margin)
        try:
            return build_general_basis_1d(potential, N, grid)
        except ResolutionError:
            if 2 * points - 1 > max_points:
                raise
            points = 2 * points - 1


def _fix_signs(phi, threshold=1e-6):
    # leftmost significant sample of mode n carries the sign (-1)^(n-1),
    # which is the sign pattern of the Hermite functions
    for row, v in enumerate(phi):
        j = int(np.argmax(np.abs(v) > threshold * np.abs(v).max()))
        want = 1.0 if row % 2 == 0 else -1.0
        if np.sign(v[j]) != want:
            v *= -1.0


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex coefficients ``alpha_n`` of ``f = sum alpha_n phi_n``."""

    coefficients: np.ndarray
    basis: EigenBasis

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.basis.N,):
            raise BasisMismatchError(
                f"coefficients of shape {c.shape} do not match basis size {self.basis.N}"
            )
        object.__setattr__(self, "coefficients", c)

    @property
    def basis_id(self):
        return self.basis.basis_id

    def l2_norm(self):
        return float(np.linalg.norm(self.coefficients))

    def with_coefficients(self, coeffs):
        return SpectralField(np.asarray(coeffs, dtype=complex), self.basis)

    def __add__(self, other):
        check_same_basis(self.basis, other.basis)
        return self.with_coefficients(self.coefficients + other.coefficients)

    def __sub__(self, other):
        check_same_basis(self.basis, other.basis)
        return self.with_coefficients(self.coefficients - other.coefficients)

    def __mul__(self, scalar):
        return self.with_coefficients(scalar * self.coefficients)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, basis):
        return cls(np.zeros(basis.N, dtype=complex), basis)

    @classmethod
    def unit(cls, basis, n):
        """The eigenfunction ``phi_n`` (1-based)."""
        c = np.zeros(basis.N, dtype=complex)
        c[n - 1] = 1.0
        return cls(c, basis)


def check_same_basis(a, b):
    if a is not b and a.basis_id != b.basis_id:
        raise BasisMismatchError("fields are bound to different bases")


def project(samples, basis):
    """Spectral coefficients of grid samples against ``basis``."""
    samples = np.asarray(samples)
    if samples.shape != basis.grid.shape:
        raise BasisMismatchError(
            f"samples of shape {samples.shape} are not on the basis grid {basis.grid.shape}"
        )
    return SpectralField(basis.project_array(samples.astype(complex, copy=False)), basis)


def synthesize(field):
    """Grid samples ``u(x_i) = sum alpha_n phi_n(x_i)``."""
    return field.basis.synthesize_array(field.coefficients)


# ---------------------------------------------------------------------------
# persistence


def basis_to_arrays(basis):
    """Arrays and JSON metadata of the on-disk basis container."""
    meta = {
        "format": FORMAT_VERSION,
        "basis_id": basis.basis_id,
        "d": basis.d,
        "N": basis.N,
        "half_width": basis.grid.half_width,
        "potential": basis.potential.to_dict(),
        "info": {k: v for k, v in basis.info.items() if k != "discrete_energies"},
    }
    arrays = {
        "energies": np.ascontiguousarray(basis.energies, dtype=np.float64),
        "factors": np.ascontiguousarray(basis.factors, dtype=np.float64),
        "indices": np.ascontiguousarray(basis.indices, dtype=np.int64),
        "axis": np.ascontiguousarray(basis.grid.axis, dtype=np.float64),
        "axis_weights": np.ascontiguousarray(basis.grid.axis_weights, dtype=np.float64),
    }
    return arrays, meta


def basis_from_arrays(arrays, meta):
    if meta.get("format") != FORMAT_VERSION:
        raise BasisMismatchError(f"unsupported basis container {meta.get('format')!r}")
    grid = Grid(
        d=int(meta["d"]),
        axis=np.array(arrays["axis"]),
        axis_weights=np.array(arrays["axis_weights"]),
        half_width=float(meta["half_width"]),
    )
    pot = meta["potential"]
    basis = EigenBasis(
        grid=grid,
        potential=PotentialSpec(pot["kind"], float(pot["k"])),
        energies=np.array(arrays["energies"]),
        factors=np.array(arrays["factors"]),
        indices=np.array(arrays["indices"]),
        info=dict(meta.get("info", {})),
    )
    if basis.basis_id != meta["basis_id"]:
        raise BasisMismatchError("basis container failed its integrity check")
    return basis
