"""Command-line entry point.

Every subcommand writes ``report.json`` plus plot-ready CSVs into ``--out``.
Options may also come from ``--config FILE``, an INI file whose section
names match subcommands (keys are option names without the leading
dashes); command-line flags win over the file.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
import time
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .cluster_filter import (
    BootstrapSpec,
    FilterThresholds,
    assemble,
    bootstrap_spectra,
    filter_partition,
    mean_rho,
    overlay_spectrum,
)
from .errors import NumericalError, ValidationError
from .factor_model import (
    BlockModel,
    FactorModelConfig,
    analytic_spectrum_block,
    analytic_spectrum_strong_clusters,
    block_correlation,
    gamma_for_rho,
    simulate,
    theoretical_correlation,
)
from .io import (
    SCHEMA_VERSION,
    ingest_returns,
    read_values,
    tickers_for,
    write_density_csv,
    write_report,
    write_values_csv,
)
from .linalg import DensityCurve, histogram, pearson_estimator, sample_bulks, standardize, sym_eigen
from .rmt import (
    DegenerateSpectrum,
    MPParams,
    SolverConfig,
    density_from_spectrum,
    mp_density,
    mp_edges,
    mp_fit,
)
from .stats import cdf_from_density, jarque_bera, ks_test, lilliefors, normal_cdf, normal_fit

log = logging.getLogger("corrspec")

# options that never enter the report, so reruns compare byte for byte
_NOT_ECHOED = {"command", "config", "out", "workers", "handler"}


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = text.split(":")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}") from None


def _pairs(text: str) -> list[tuple[float, float]]:
    return [_pair(t) for t in text.replace(";", ",").split(",") if t.strip()]


class _Spec:
    """Option defaults held outside argparse so a config file can sit in between."""

    def __init__(self) -> None:
        self.defaults: dict[str, dict[str, Any]] = {}
        self.converters: dict[str, dict[str, Callable[[str], Any]]] = {}

    def add(self, p: argparse.ArgumentParser, cmd: str, flag: str, *, default: Any = None,
            type: Callable[[str], Any] = str, flag_only: bool = False, many: bool = False,
            **kw: Any) -> None:
        dest = flag.lstrip("-").replace("-", "_")
        self.defaults.setdefault(cmd, {})[dest] = default
        if flag_only:
            p.add_argument(flag, action="store_true", default=None, **kw)
            conv = lambda s: s.strip().lower() in ("1", "true", "yes", "on")
        elif many:
            p.add_argument(flag, type=_pairs, action="extend", default=None, **kw)
            conv = _pairs
        else:
            p.add_argument(flag, type=type, default=None, **kw)
            conv = type
        self.converters.setdefault(cmd, {})[dest] = conv

    def resolve(self, cmd: str, ns: argparse.Namespace, section: dict[str, str]) -> None:
        for dest, default in self.defaults[cmd].items():
            if getattr(ns, dest, None) is not None:
                continue
            key = next((k for k in (dest, dest.replace("_", "-")) if k in section), None)
            if key is not None:
                try:
                    value = self.converters[cmd][dest](section[key])
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise ValidationError(f"config key {key!r}: {exc}") from None
            else:
                value = default
            setattr(ns, dest, value)
        unknown = set(k.replace("-", "_") for k in section) - set(self.defaults[cmd])
        if unknown:
            raise ValidationError(f"unknown config key(s) for {cmd}: {sorted(unknown)}")


# -- shared pieces -------------------------------------------------------------

def _clusters(args) -> tuple[tuple[int, float], ...]:
    out = [(int(n), g) for n, g in (args.cluster or [])]
    out += [(int(n), gamma_for_rho(r)) for n, r in (args.cluster_rho or [])]
    return tuple(out)


def _model(args) -> FactorModelConfig:
    return FactorModelConfig(args.n_assets, args.n_obs, _clusters(args), args.common_mode, args.seed)


def _spectrum(pairs) -> DegenerateSpectrum:
    if not pairs:
        raise ValidationError("need at least one --spectrum VALUE:WEIGHT")
    return DegenerateSpectrum.from_counts(pairs)


def _curve_summary(curve: DensityCurve) -> dict:
    return {"mass": curve.mass, "first_moment": curve.moment(1),
            "edges": [list(e) for e in curve.edges]}


def _bulks(values) -> list[dict]:
    return [{"lo": b.lo, "hi": b.hi, "count": b.count, "mean": b.mean} for b in sample_bulks(values)]


def _load(args):
    r, panel = ingest_returns(args.input, args.kind)
    return r, panel


def _thresholds(args) -> FilterThresholds:
    for name in ("rho_u", "rho_d1", "rho_d2"):
        if getattr(args, name) is None:
            raise ValidationError(f"--{name.replace('_', '-')} is required")
    return FilterThresholds(args.rho_u, args.rho_d1, args.rho_d2)


def _lambda2(text: str) -> float | str:
    return text if text == "empirical" else float(text)


# -- subcommands -----------------------------------------------------------------

def cmd_simulate(args, out: str) -> dict:
    cfg = _model(args)
    if args.sims < 1:
        raise ValidationError("--sims must be >= 1")
    drop = args.exclude_largest
    if drop is None:
        drop = len(cfg.clusters) + (1 if cfg.common_mode > 0 else 0)
    kept, largest = [], []
    for s in range(args.sims):
        r = simulate(cfg, replicate=s, workers=args.workers)
        eig = np.asarray(sym_eigen(pearson_estimator(standardize(r))).eigenvalues)
        largest.append(eig[::-1][:max(drop, 1)].tolist())
        kept.append(eig[:eig.size - drop])
    pooled = np.concatenate(kept)
    curve = histogram(pooled, args.bins)
    write_values_csv(os.path.join(out, "eigs_simulate.csv"), pooled)
    write_density_csv(os.path.join(out, "density_simulate.csv"), curve)
    return {"q": cfg.q, "excluded_per_sim": drop, "largest": largest, "bulks": _bulks(pooled)}


def cmd_theory(args, out: str) -> dict:
    if args.block:
        model = BlockModel(tuple((int(n), r) for n, r in args.block), args.n_background or 0)
        eig = sym_eigen(block_correlation(model)).eigenvalues
        closed = analytic_spectrum_block(model)
        label = "closed_form"
    else:
        cfg = _model(args)
        eig = sym_eigen(theoretical_correlation(cfg)).eigenvalues
        closed = analytic_spectrum_strong_clusters(cfg)
        label = "strong_cluster_limit"
    write_values_csv(os.path.join(out, "eigs_theory.csv"), eig)
    return {"eigenvalues": eig, label: [list(e) for e in closed.entries]}


def cmd_solve(args, out: str) -> dict:
    spec = _spectrum(args.spectrum)
    grid = None
    if args.lo is not None or args.hi is not None:
        if args.lo is None or args.hi is None:
            raise ValidationError("--lo and --hi go together")
        grid = np.linspace(args.lo, args.hi, args.grid_points)
    curve = density_from_spectrum(spec, args.q, SolverConfig(args.epsilon, grid))
    write_density_csv(os.path.join(out, "density_solved.csv"), curve)
    return {"spectrum": [list(e) for e in spec.entries],
            "max_roundtrip_residual": curve.meta["max_roundtrip_residual"], **_curve_summary(curve)}


def cmd_mp(args, out: str) -> dict:
    p = MPParams(args.q, args.sigma)
    lo, hi = mp_edges(p)
    x = np.linspace(max(lo, 1e-12), hi, args.grid_points)
    rho = np.asarray(mp_density(x, p))
    curve = DensityCurve(x, rho, float(np.trapezoid(rho, x)))
    write_density_csv(os.path.join(out, "density_mp.csv"), curve)
    return {"edges": [lo, hi], "mass": curve.mass}


def cmd_fit_mp(args, out: str) -> dict:
    vals = read_values(args.input)
    fit = mp_fit(vals, bins=args.bins)
    lo, hi = mp_edges(fit.params)
    x = np.linspace(max(lo, 1e-12), hi, 1001)
    rho = np.asarray(mp_density(x, fit.params))
    write_density_csv(os.path.join(out, "density_fit.csv"), DensityCurve(x, rho, float(np.trapezoid(rho, x))))
    return {"q": fit.params.q, "sigma": fit.params.sigma, "residual": fit.residual,
            "converged": fit.converged, "iterations": fit.iterations}


def cmd_estimate(args, out: str) -> dict:
    r, panel = _load(args)
    c = pearson_estimator(standardize(r))
    eig = np.asarray(sym_eigen(c).eigenvalues)
    write_values_csv(os.path.join(out, "eigs_estimate.csv"), eig)
    write_density_csv(os.path.join(out, "density_estimate.csv"), histogram(eig, args.bins))
    return {"n_assets": r.n_assets, "n_obs": r.n_obs, "q": c.rect_ratio,
            "dropped": [list(d) for d in panel.dropped], "largest": eig[::-1][:5]}


def _partition(args):
    r, panel = _load(args)
    c = pearson_estimator(standardize(r))
    part = filter_partition(c, _thresholds(args), args.min_size, args.max_size)
    if part is None:
        raise ValidationError("no cluster satisfies the thresholds")
    return r, panel, c, part


def _partition_report(c, part, tickers) -> dict:
    a = np.asarray(c.matrix)
    cu, cd = list(part.cluster_idx), list(part.background_idx)
    rep = {"cluster": tickers_for(cu, tickers), "background": tickers_for(cd, tickers),
           "mean_rho_cluster": mean_rho(c, cu)}
    if cd:
        rep["mean_cross"] = float(a[np.ix_(cu, cd)].mean())
    if len(cd) >= 2:
        rep["mean_rho_background"] = mean_rho(c, cd)
    return rep


def cmd_filter(args, out: str) -> dict:
    r, panel, c, part = _partition(args)
    eig = sym_eigen(assemble(c, part)).eigenvalues
    overlay = overlay_spectrum(part, c, args.large_eig_count, args.lambda2)
    curve = density_from_spectrum(overlay, part.n_total / r.n_obs)
    write_values_csv(os.path.join(out, "eigs_filter.csv"), eig)
    write_density_csv(os.path.join(out, "density_overlay.csv"), curve)
    return {**_partition_report(c, part, r.tickers), "eigenvalues": eig,
            "overlay": [list(e) for e in overlay.entries]}


def cmd_bootstrap(args, out: str) -> dict:
    r, panel, c, part = _partition(args)
    spec = BootstrapSpec(args.iterations, args.keep_background, args.reshuffle, args.seed)
    res = bootstrap_spectra(r, part, spec, bins=args.bins, workers=args.workers)
    n_sub = part.n_cluster + res.meta["keep_background"]
    overlay = overlay_spectrum(part, c, args.large_eig_count, args.lambda2, n_total=n_sub)
    curve = density_from_spectrum(overlay, n_sub / r.n_obs)
    write_values_csv(os.path.join(out, "eigs_bootstrap.csv"), res.pooled())
    write_density_csv(os.path.join(out, "density_bootstrap.csv"), res.density)
    write_density_csv(os.path.join(out, "density_overlay.csv"), curve)
    return {**_partition_report(c, part, r.tickers), "iterations": spec.iterations,
            "keep_background": res.meta["keep_background"],
            "overlay": [list(e) for e in overlay.entries], "bulks": _bulks(res.pooled())}


def cmd_test(args, out: str) -> dict:
    vals = read_values(args.input)
    wanted = [t.strip() for t in args.tests.split(",") if t.strip()]
    reports = {}
    for name in wanted:
        if name == "jb":
            reports[name] = jarque_bera(vals).as_dict()
        elif name == "lilliefors":
            reports[name] = lilliefors(vals).as_dict()
        elif name == "ks":
            if args.against == "normal":
                mean, sd = normal_fit(vals)
                cdf = normal_cdf(mean, sd)
            elif args.against == "mp":
                if args.q is None:
                    raise ValidationError("--q is required for --against mp")
                p = MPParams(args.q, args.sigma)
                lo, hi = mp_edges(p)
                x = np.linspace(max(lo, 1e-12), hi, 20001)
                rho = np.asarray(mp_density(x, p))
                cdf = cdf_from_density(DensityCurve(x, rho, float(np.trapezoid(rho, x))))
            elif args.against == "spectrum":
                if args.q is None:
                    raise ValidationError("--q is required for --against spectrum")
                cdf = cdf_from_density(density_from_spectrum(_spectrum(args.spectrum), args.q))
            else:
                raise ValidationError(f"unknown --against {args.against!r}")
            reports[name] = ks_test(vals, cdf).as_dict()
        else:
            raise ValidationError(f"unknown test {name!r} (choose from ks, jb, lilliefors)")
    mean, sd = normal_fit(vals)
    return {"sample_size": int(vals.size), "mean": mean, "sd": sd, "tests": reports}


# -- parser ------------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, _Spec]:
    spec = _Spec()
    parser = argparse.ArgumentParser(prog="corrspec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"corrspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler, help: str) -> tuple[argparse.ArgumentParser, Callable]:
        p = sub.add_parser(name, help=help)
        p.set_defaults(handler=handler)
        p.add_argument("--config", default=None, help="INI file; section [%s]" % name)
        p.add_argument("--out", default=".", help="output directory")
        opt = lambda *a, **k: spec.add(p, name, *a, **k)
        opt("--seed", type=int, default=0)
        return p, opt

    def model_opts(opt, n_obs=True):
        opt("--n-assets", type=int, default=500)
        if n_obs:
            opt("--n-obs", type=int, default=2000)
        opt("--cluster", many=True, help="SIZE:GAMMA, repeatable or comma separated")
        opt("--cluster-rho", many=True, help="SIZE:RHO, coupling set for correlation RHO")
        opt("--common-mode", type=float, default=0.0)

    def input_opts(opt):
        opt("--input", default=None, required=False)
        opt("--kind", default="prices", help="prices or returns")

    def filter_opts(opt):
        opt("--rho-u", type=float)
        opt("--rho-d1", type=float)
        opt("--rho-d2", type=float)
        opt("--min-size", type=int, default=2)
        opt("--max-size", type=int)
        opt("--large-eig-count", type=int, default=1)
        opt("--lambda2", type=_lambda2, default=1.0, help="number or 'empirical'")

    p, opt = command("simulate", cmd_simulate, "Monte Carlo spectra of a cluster factor model")
    model_opts(opt)
    opt("--sims", type=int, default=1)
    opt("--bins", type=int, default=200)
    opt("--exclude-largest", type=int, help="isolated eigenvalues left out of the histogram")
    opt("--workers", type=int, default=1)

    p, opt = command("theory-spectrum", cmd_theory, "exact spectrum of a model correlation")
    model_opts(opt)
    opt("--block", many=True, help="SIZE:RHO equicorrelated block")
    opt("--n-background", type=int)

    p, opt = command("solve-density", cmd_solve, "dressed density of a degenerate spectrum")
    opt("--spectrum", many=True, help="VALUE:WEIGHT, repeatable")
    opt("--q", type=float, default=0.25)
    opt("--epsilon", type=float, default=1e-6)
    opt("--grid-points", type=int, default=4001)
    opt("--lo", type=float)
    opt("--hi", type=float)

    p, opt = command("mp", cmd_mp, "closed-form Marchenko-Pastur density")
    opt("--q", type=float, default=0.25)
    opt("--sigma", type=float, default=1.0)
    opt("--grid-points", type=int, default=2001)

    p, opt = command("fit-mp", cmd_fit_mp, "fit (q, sigma) to an eigenvalue file")
    opt("--input")
    opt("--bins", type=int, default=100)

    p, opt = command("estimate", cmd_estimate, "correlation spectrum of a price or return panel")
    input_opts(opt)
    opt("--bins", type=int, default=100)

    p, opt = command("filter", cmd_filter, "extract cluster and background from a panel")
    input_opts(opt)
    filter_opts(opt)

    p, opt = command("bootstrap", cmd_bootstrap, "bootstrap (and reshuffle) background spectra")
    input_opts(opt)
    filter_opts(opt)
    opt("--iterations", type=int, default=100)
    opt("--keep-background", type=int)
    opt("--reshuffle", flag_only=True, default=False)
    opt("--bins", type=int, default=100)
    opt("--workers", type=int, default=1)

    p, opt = command("test", cmd_test, "normality and KS tests on a sample file")
    opt("--input")
    opt("--tests", default="ks,jb,lilliefors")
    opt("--against", default="normal", help="normal, mp or spectrum (KS reference)")
    opt("--q", type=float)
    opt("--sigma", type=float, default=1.0)
    opt("--spectrum", many=True)
    return parser, spec


def _read_config(path: str | None, section: str) -> dict[str, str]:
    if path is None:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ValidationError(f"cannot read config file {path}")
    return dict(cp[section]) if cp.has_section(section) else {}


def run(argv: Sequence[str] | None = None) -> dict:
    parser, spec = build_parser()
    args = parser.parse_args(argv)
    spec.resolve(args.command, args, _read_config(args.config, args.command))
    for name in ("input",):
        if name in spec.defaults[args.command] and getattr(args, name) is None:
            raise ValidationError(f"--{name} is required for {args.command}")
    os.makedirs(args.out, exist_ok=True)
    echo = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    t0 = time.perf_counter()
    results = args.handler(args, args.out)
    elapsed = time.perf_counter() - t0
    report = {"schema_version": SCHEMA_VERSION, "version": __version__, "command": args.command,
              "seed": args.seed, "config": echo, "results": results}
    write_report(os.path.join(args.out, "report.json"), report)
    # wall time lives apart from the report so reports stay byte-identical
    write_report(os.path.join(args.out, "timing.json"), {"command": args.command, "seconds": elapsed})
    return report


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        run(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
