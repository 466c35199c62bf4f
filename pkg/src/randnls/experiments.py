"""Experiment dispatch, basis caching and report emission."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, acceptance, io, lens, norms, propagation, randomization, smoothing, spectral
from .config import ExperimentConfig
from .errors import BasisMismatchError, CapabilityError, UsageError
from .randomization import RandomLaw, Seed
from .spectral import SpectralField

log = logging.getLogger(__name__)

REPORT_FORMAT = "randnls-report/1"

# fixed generator streams, one per experiment, so runs never share draws
_STREAMS = {"khinchin": 11, "randomize": 12, "strichartz": 13, "tail": 14, "solve": 15}


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    wall_time: float
    results: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    assertions: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.assertions.values())

    def versions(self):
        return {
            "library": __version__,
            "report": REPORT_FORMAT,
            "basis": spectral.FORMAT_VERSION,
            "field": io.FIELD_FORMAT,
            "trajectory": io.TRAJECTORY_FORMAT,
        }

    def body(self):
        """Everything except the wall time; deterministic given the config."""
        return {
            "config": self.config.to_dict(),
            "versions": self.versions(),
            "results": self.results,
            "tables": {name: {"header": list(h), "rows": len(rows)}
                       for name, (h, rows) in self.tables.items()},
            "assertions": self.assertions,
            "passed": self.passed,
        }

    def to_dict(self):
        return dict(self.body(), wall_time=self.wall_time)


class _Context:
    """Per-run state handed to the experiment functions."""

    def __init__(self, config):
        self.config = config
        self.results = {}
        self.tables = {}
        self.assertions = {}

    def table(self, name, header, rows):
        self.tables[name] = (tuple(header), [tuple(r) for r in rows])

    def seed(self, sub=None):
        stream = _STREAMS[self.config.experiment]
        if sub is not None:
            # sub-streams sit above every experiment stream
            stream = 1000 * stream + 1 + sub
        return Seed(self.config.seed, stream)

    def law(self):
        return RandomLaw.parse(self.config.law)


# ---------------------------------------------------------------------------
# bases and the on-disk cache


def _potential(k):
    return spectral.PotentialSpec.harmonic() if k == 2 else spectral.PotentialSpec.smoothed_power(k)


def _grid(cfg, N):
    pot = _potential(cfg.k)
    if pot.kind == "harmonic":
        return spectral.recommended_grid(cfg.d, N, cfg.margin, cfg.points)
    if cfg.d != 1:
        raise CapabilityError("general potentials are supported in one dimension only")
    return spectral.grid_for_potential(pot, N, cfg.points or spectral.certified_points(N), cfg.margin)


def _build(cfg, N, grid):
    pot = _potential(cfg.k)
    if pot.kind == "harmonic":
        return spectral.build_harmonic_basis(cfg.d, N, grid)
    if cfg.points:
        return spectral.build_general_basis_1d(pot, N, grid)
    return spectral.certified_basis_1d(pot, N, cfg.margin)


def _matches(basis, grid, N, potential):
    if basis.N != N or basis.potential != potential:
        return False
    if potential.kind == "harmonic":
        return basis.grid.same_as(grid)
    # the certified solver may have refined the requested grid
    return basis.grid.half_width == grid.half_width


def cache_path(cache_dir, d, k, N, grid):
    return Path(cache_dir) / f"basis-d{d}-k{k:g}-N{N}-{grid.digest[:16]}.npz"


def get_basis(cfg, N):
    """Basis for ``(d, k, N)``, reusing ``cfg.cache`` when set.

    A cached file whose contents do not match its key is rebuilt with a warning.
    """
    grid = _grid(cfg, N)
    if not cfg.cache:
        return _build(cfg, N, grid)
    path = cache_path(cfg.cache, cfg.d, cfg.k, N, grid)
    if path.exists():
        try:
            basis = io.load_basis(path)
            if not _matches(basis, grid, N, _potential(cfg.k)):
                raise BasisMismatchError("cached basis does not match its key")
            return basis
        except (BasisMismatchError, ValueError, KeyError, OSError) as exc:
            log.warning("rebuilding cached basis %s: %s", path.name, exc)
    basis = _build(cfg, N, grid)
    io.save_basis(basis, path)
    return basis


# ---------------------------------------------------------------------------
# experiments


def _need(cfg, *keys):
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise UsageError(f"{cfg.experiment} needs: {', '.join(missing)}")


def _output_paths(cfg, default_name):
    """``(report_dir, container_path)``; an ``out`` ending in ``.npz`` names the container."""
    out = Path(cfg.out)
    if cfg.output:
        return out, Path(cfg.output)
    if out.suffix == ".npz":
        return out.parent, out
    return out, out / default_name


def _basis_summary(basis):
    return {
        "basis_id": basis.basis_id,
        "d": basis.d,
        "N": basis.N,
        "potential": basis.potential.to_dict(),
        "points_per_axis": basis.grid.points_per_axis,
        "half_width": basis.grid.half_width,
        "drift": basis.info.get("drift"),
    }


def exp_basis(ctx):
    cfg = ctx.config
    basis = get_basis(cfg, cfg.N or 128)
    _, path = _output_paths(cfg, "basis.npz")
    io.save_basis(basis, path)
    ctx.results.update(_basis_summary(basis), container=str(path))
    ctx.table("energies", ("n", "energy"),
              zip(range(1, basis.N + 1), basis.energies.tolist()))


def exp_decay_fit(ctx):
    cfg = ctx.config
    _need(cfg, "q")
    N = cfg.N or cfg.n_max or 512
    basis = get_basis(cfg, N)
    window = (cfg.n_min or max(1, N // 8), cfg.n_max or N)
    fit = norms.eigenfunction_decay_fit(basis, cfg.q, window)
    ctx.results.update(
        theta=fit.theta,
        stderr=fit.stderr,
        ci=[fit.theta - 1.96 * fit.stderr, fit.theta + 1.96 * fit.stderr],
        window=list(window),
        max_residual=fit.max_residual,
        reference=_maybe_theta(cfg.q, cfg.k, cfg.d, cfg.eta),
        basis=_basis_summary(basis),
    )
    ctx.table("decay", ("n", "lambda", "lq_norm", "q", "k", "d"),
              ((n, lam, v, cfg.q, cfg.k, cfg.d) for n, lam, v in fit.rows()))


def _maybe_theta(q, k, d, eta):
    try:
        return norms.theta_reference(q, k, d, eta)
    except CapabilityError:
        return None


def exp_theta(ctx):
    cfg = ctx.config
    _need(cfg, "q")
    table = "1d" if cfg.d == 1 else "k2"
    ctx.results.update(theta=norms.theta_reference(cfg.q, cfg.k, cfg.d, cfg.eta), table=table)
    if cfg.d == 1 and cfg.k == 2:
        ctx.results["theta_k2_table"] = norms.theta_reference(cfg.q, 2, 1, cfg.eta, table="k2")


def exp_projector_decay(ctx):
    cfg = ctx.config
    basis = get_basis(cfg, cfg.N or (1024 if cfg.k == 2 else 400))
    lo = cfg.n_min if cfg.n_min is not None else 50
    hi = cfg.n_max if cfg.n_max is not None else int(basis.energies[-1])
    table = norms.weighted_projector_decay(basis, cfg.nu, norms.uniform_field(basis), (lo, hi))
    fit = table.fit()
    ctx.results.update(fit=fit.to_dict(), gamma=-2 * fit.slope, reference_slope=-1 / (2 * cfg.k),
                       window=[lo, hi], nu=cfg.nu, basis=_basis_summary(basis))
    ctx.table("projector", ("N", "ratio"), zip(table.bands.tolist(), table.ratios.tolist()))


def exp_khinchin(ctx):
    cfg = ctx.config
    N, K = cfg.N or 32, cfg.draws or 10
    M, r = cfg.M or 200_000, cfg.r
    seed = ctx.seed()
    rng = ctx.seed(0).generator()
    c = rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))
    est = randomization.khinchin_ratio(c, ctx.law(), r, M, seed, threads=cfg.threads)
    ctx.results.update(
        max_ratio=float(est.ratio.max()),
        estimate=est.to_dict(),
        manifest={"seed": seed.to_dict(), "law": ctx.law().value, "N": N, "M": M,
                  "version": __version__},
    )
    ctx.table("khinchin", ("vector", "ratio", "stderr"),
              zip(range(K), est.ratio.tolist(), est.stderr.tolist()))


def _default_datum(basis, sigma):
    n = np.arange(1, basis.N + 1)
    return SpectralField(basis.frequencies ** (-sigma) / n, basis)


def exp_randomize(ctx):
    cfg = ctx.config
    seed = ctx.seed()
    if cfg.input:
        coeffs, meta = io.load_field(cfg.input)
        basis = get_basis(cfg, coeffs.size)
        if meta["basis_id"] != basis.basis_id:
            raise BasisMismatchError(
                f"{cfg.input} was built on basis {meta['basis_id']}, not {basis.basis_id}")
        f = SpectralField(coeffs, basis)
    else:
        basis = get_basis(cfg, cfg.N or 128)
        f = _default_datum(basis, cfg.sigma or 0.0)
    g = randomization.draw(ctx.law(), basis.N, seed)
    fw = randomization.randomize(f, g)
    _, path = _output_paths(cfg, "field.npz")
    io.save_field(path, fw.coefficients, basis.basis_id,
                  lineage={"source": cfg.input, "draw": g.manifest()})
    s = cfg.sigma or 0.0
    ctx.results.update(container=str(path), manifest=g.manifest(),
                       hs_norm_in=norms.hs_norm(f, s), hs_norm_out=norms.hs_norm(fw, s))


def _strichartz_setup(cfg):
    p = cfg.p if cfg.p is not None else 8.0
    q = cfg.q if cfg.q is not None else 4.0
    sigma = cfg.sigma if cfg.sigma is not None else 0.3
    basis = get_basis(cfg, cfg.N or 128)
    return basis, p, q, sigma, cfg.T if cfg.T is not None else 0.5


def exp_strichartz(ctx):
    cfg = ctx.config
    basis, p, q, sigma, T = _strichartz_setup(cfg)
    f = _default_datum(basis, sigma)
    M = cfg.M or 1000
    vals = propagation.strichartz_ensemble(f, ctx.law(), M, ctx.seed(), p, q, sigma, T,
                                           cfg.M_t or 16, threads=cfg.threads)
    times = propagation.TimeGrid(T, cfg.M_t or 16)
    order = propagation.gain_order(q, sigma, basis)
    det = float(propagation._strichartz_batch(f.coefficients[None, :], basis, times, p, q, order)[0])
    ctx.results.update(
        p=p, q=q, sigma=sigma, T=T, M=M,
        gain_order=order,
        deterministic=det,
        median=float(np.median(vals)),
        mean=float(vals.mean()),
        quantiles={str(a): float(np.quantile(vals, a)) for a in (0.01, 0.5, 0.99)},
        hs_norm=norms.hs_norm(f, sigma),
    )
    ctx.table("strichartz", ("draw", "norm"), enumerate(vals.tolist()))


def exp_tail(ctx):
    cfg = ctx.config
    basis, p, q, sigma, T = _strichartz_setup(cfg)
    f = _default_datum(basis, sigma)
    grid = None
    if cfg.lambda_min is not None or cfg.lambda_max is not None:
        _need(cfg, "lambda_min", "lambda_max")
        grid = np.linspace(cfg.lambda_min, cfg.lambda_max, cfg.n_lambda)
    table = propagation.tail_probability(f, ctx.law(), grid, p, q, sigma, T, cfg.M or 50_000,
                                         ctx.seed(), cfg.M_t or 16, threads=cfg.threads)
    ctx.results.update(table.to_dict(), p=p, q=q, sigma=sigma, T=T)
    ctx.assertions["tail probability nonincreasing"] = bool(np.all(np.diff(table.probability) <= 0))
    ctx.table("tail", ("lambda", "probability", "ci_low", "ci_high", "count"), table.rows())


def exp_solve(ctx):
    cfg = ctx.config
    N = cfg.N or (2048 if cfg.d == 2 else 256)
    basis = get_basis(cfg, N)
    sigma = cfg.sigma if cfg.sigma is not None else -0.05
    s = cfg.s
    if s is None:
        s = sigma + (norms.theta_reference(norms.q_star(cfg.d), 2, cfg.d) if cfg.k == 2 else 0.0)
    T = cfg.T if cfg.T is not None else 0.05
    tol = cfg.tol if cfg.tol is not None else 1e-9
    M_t = cfg.M_t or 32
    f = acceptance.supercritical_datum(basis, sigma)
    det = propagation.xst_norm(propagation.linear_trajectory(f, propagation.TimeGrid(T, M_t)), s)
    rows, first = [], None
    for m in range(cfg.draws or 1):
        g = randomization.draw(ctx.law(), N, ctx.seed(m))
        _, rep = propagation.picard_solve(f, g, cfg.r, cfg.sign, s, T, tol, cfg.max_iter, M_t)
        if first is None:
            first = rep
        rows.append((m, rep.converged, rep.iterations, rep.contraction_factor, rep.residual,
                     rep.linear_norm, rep.reason))
    converged = sum(r[1] for r in rows)
    ctx.results.update(s=s, sigma=sigma, T=T, N=N, deterministic_linear_norm=det,
                       median_linear_norm=float(np.median([r[5] for r in rows])),
                       converged=converged, first_draw=first.to_dict())
    if cfg.output and first.correction is not None:
        io.save_trajectory(cfg.output, first.correction)
        ctx.results["trajectory"] = cfg.output
    ctx.assertions["every draw converged"] = converged == len(rows)
    ctx.table("solve", ("draw", "converged", "iterations", "contraction", "residual",
                        "linear_norm", "reason"), rows)


def exp_lens_check(ctx):
    cfg = ctx.config
    params = lens.LensParams(cfg.d, cfg.r)
    T_free = cfg.T if cfg.T is not None else 0.2
    tol = cfg.tol if cfg.tol is not None else 1e-9
    N = cfg.N or 64
    basis = spectral.build_harmonic_basis(
        cfg.d, N, spectral.recommended_grid(cfg.d, N, cfg.margin, cfg.points or (513 if cfg.d == 1 else None)))
    f = spectral.project(np.exp(-basis.grid.radius_squared / 2), basis)
    nodes = cfg.n_lambda if cfg.n_lambda > 40 else 401
    t_nodes = np.linspace(0.0, T_free, nodes)
    linear = lens.linear_lens_image(f, t_nodes)
    mass = norms.lq_norm(linear.samples, 2, basis.grid)
    iso = float(np.max(np.abs(mass / f.l2_norm() - 1)))
    tau = float(lens.source_time(T_free))
    v, rep = lens.solve_harmonic_weighted(f, params, tau, tol=tol, sign=cfg.sign, M_t=cfg.M_t or 400)
    ctx.results.update(linear_residual=lens.free_nls_residual(linear, cfg.r, 0),
                       linear_isometry_defect=iso, solver=rep.to_dict())
    ctx.assertions["harmonic problem converged"] = rep.converged
    if rep.converged:
        u = lens.compose_lens(v, params, t_nodes)
        v0 = spectral.synthesize(v.snapshot(0))
        ctx.results.update(
            nonlinear_residual=lens.free_nls_residual(u, cfg.r, cfg.sign),
            datum_exact=bool(np.array_equal(u.samples[0], params.amplitude * v0)),
            datum_vs_f=float(np.max(np.abs(u.samples[0] - spectral.synthesize(f)))),
        )
        ctx.assertions["datum relation exact"] = ctx.results["datum_exact"]


def exp_smoothing(ctx):
    cfg = ctx.config
    basis = get_basis(cfg, cfg.N or (4096 if cfg.k == 2 else 400))
    lo = cfg.n_min if cfg.n_min is not None else 50
    hi = cfg.n_max if cfg.n_max is not None else int(basis.energies[-1])
    rep = smoothing.equivalence_report(basis, cfg.nu, (lo, hi), cfg.M_t or 256, cfg.gamma_grid)
    ctx.results.update(rep.to_dict(), basis=_basis_summary(basis))
    rows = [(g, N, r) for g, probe in zip(rep.gamma_grid.tolist(), rep.probes)
            for N, r in zip(probe.bands.tolist(), probe.ratios.tolist())]
    ctx.table("smoothing", ("gamma", "N", "ratio"), rows)
    ctx.assertions["decay and smoothing gains agree"] = rep.agree


def exp_suite(ctx):
    cfg = ctx.config
    if cfg.criteria is None:
        numbers = [c[0] for c in acceptance.CRITERIA]
    else:
        numbers = [int(c) for c in cfg.criteria]
        if not numbers:
            raise UsageError("suite needs at least one criterion")
        known = {c[0] for c in acceptance.CRITERIA}
        bad = sorted(set(numbers) - known)
        if bad:
            raise UsageError(f"unknown criteria: {bad}")
    results = acceptance.run_all(numbers, cfg.seed)
    for res in results:
        log.info(res.line())
        key = f"criterion {res.number}: {res.name}"
        ctx.assertions[key] = res.passed
        ctx.results[str(res.number)] = {k: v for k, v in res.to_dict().items() if k != "seconds"}
    ctx.results["failed"] = [r.number for r in results if not r.passed]
    ctx.table("suite", ("criterion", "name", "passed"),
              ((r.number, r.name, r.passed) for r in results))


DISPATCH = {
    "basis": exp_basis,
    "decay-fit": exp_decay_fit,
    "theta": exp_theta,
    "projector-decay": exp_projector_decay,
    "khinchin": exp_khinchin,
    "randomize": exp_randomize,
    "strichartz": exp_strichartz,
    "tail": exp_tail,
    "solve": exp_solve,
    "lens-check": exp_lens_check,
    "smoothing": exp_smoothing,
    "suite": exp_suite,
}


def run(config, write=True):
    """Run one experiment and, if ``write``, emit its JSON report and CSV tables."""
    try:
        fn = DISPATCH[config.experiment]
    except KeyError:
        raise UsageError(f"unknown experiment {config.experiment!r}") from None
    ctx = _Context(config)
    start = time.perf_counter()
    fn(ctx)
    report = ExperimentReport(config, time.perf_counter() - start, ctx.results, ctx.tables,
                              ctx.assertions)
    if write:
        write_report(report)
    return report


def write_report(report):
    out, _ = _output_paths(report.config, "unused")
    stem = report.config.experiment
    for name, (header, rows) in report.tables.items():
        io.write_csv(out / f"{stem}-{name}.csv", header, rows)
    io.write_json(out / f"{stem}.json", report.to_dict())
    return out / f"{stem}.json"

