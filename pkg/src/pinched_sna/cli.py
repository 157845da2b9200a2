"""Command line: decay | sna | certify | verify.

Exit codes: 0 success, 1 configuration error, 2 a certification or
verification check failed, 3 degenerate result (collapsed attractor, no
usable decay data).
"""

from __future__ import annotations

import argparse
import logging
import sys as _sys
from pathlib import Path

import numpy as np

from . import __version__
from .attractor import sample_physical_measure
from .bounds import ConditionConstants, kappa_zero
from .certify import ConstantSearchError, GridSpec, certify, search_constants
from .config import ConfigError, ExperimentConfig, RunManifest
from .ftle import FitError, decay_series, fit_decay
from .verify import VerifySettings, verify

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_DEGENERATE = 0, 1, 2, 3

# graph values this small everywhere mean phi_depth has collapsed onto the zero line
COLLAPSE_LEVEL = 1e-12

log = logging.getLogger("pinched_sna")


def _prepare(config: ExperimentConfig, command: str) -> tuple[Path, RunManifest]:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(config.to_ini())
    manifest = RunManifest(command, config.digest(), __version__, config=config.to_ini())
    manifest.record(out / "config.ini")
    return out, manifest


def _finish(out: Path, manifest: RunManifest, code: int) -> int:
    manifest.write(out)
    return code


def cmd_decay(config: ExperimentConfig, workers: int = 1) -> int:
    """Sample the physical measure, tabulate p_N and fit its exponential decay."""
    out, manifest = _prepare(config, "decay")
    sys = config.system()
    with manifest.stage("sample"):
        sample = sample_physical_measure(sys, config.n_samples, config.depth, config.sampler, config.seed, workers)
    with manifest.stage("series"):
        series = decay_series(sys, sample, config.N_list, config.threshold, workers)
    series.write_csv(out / "series.csv")
    manifest.record(out / "series.csv")
    with (out / "plotdata.dat").open("w") as fh:
        fh.write("# N log10(p)\n")
        for e in series.entries:
            if e.p > 0:
                fh.write(f"{e.N} {np.log10(e.p):.17g}\n")
    manifest.record(out / "plotdata.dat")

    k0 = kappa_zero(sys.D) if sys.D == 1 else None
    if float(np.max(sample.xs)) < COLLAPSE_LEVEL:
        msg = (
            f"attractor collapsed: max phi_{config.depth} = {np.max(sample.xs):.3e} < {COLLAPSE_LEVEL:g}; "
            f"kappa = {config.kappa:g}" + (f" is below kappa_0 = {k0:.6g}" if k0 and config.kappa < k0 else "")
            + "; the upper boundary graph is the zero line"
        )
        (out / "diagnostic.txt").write_text(msg + "\n")
        manifest.record(out / "diagnostic.txt")
        log.error(msg)
        return _finish(out, manifest, EXIT_DEGENERATE)
    try:
        with manifest.stage("fit"):
            fit = fit_decay(series, config.N_min)
    except FitError as exc:
        msg = f"decay fit impossible: {exc}; increase sampling.n"
        (out / "diagnostic.txt").write_text(msg + "\n")
        manifest.record(out / "diagnostic.txt")
        log.error(msg)
        return _finish(out, manifest, EXIT_DEGENERATE)
    (out / "fit.txt").write_text(fit.to_text())
    manifest.record(out / "fit.txt")
    log.info("slope %.6g, R^2 %.4f over N in %s", fit.slope, fit.r_squared, fit.fit_range)
    return _finish(out, manifest, EXIT_DEGENERATE if fit.degenerate else EXIT_OK)


def cmd_sna(config: ExperimentConfig, workers: int = 1) -> int:
    """Write (theta, phi_depth(theta)) samples of the upper boundary graph."""
    out, manifest = _prepare(config, "sna")
    sys = config.system()
    with manifest.stage("sample"):
        sample = sample_physical_measure(sys, config.n_samples, config.depth, config.sampler, config.seed, workers)
    sample.write_csv(out / "graph.csv")
    manifest.record(out / "graph.csv")
    return _finish(out, manifest, EXIT_OK)


def _grid(config: ExperimentConfig) -> GridSpec:
    return GridSpec(dioph_horizon=config.horizon)


def cmd_certify(config: ExperimentConfig, workers: int = 1) -> int:
    """Certify explicit constants, or search for them along the kappa sweep."""
    out, manifest = _prepare(config, "certify")
    grid = _grid(config)
    if config.constants is not None:
        with manifest.stage("certify"):
            report = certify(config.system(), config.constants, grid)
        constants = config.constants
        (out / "certification.txt").write_text(report.to_text())
        manifest.record(out / "certification.txt")
        if report.passed:
            (out / "constants.json").write_text(constants.to_json())
            manifest.record(out / "constants.json")
        return _finish(out, manifest, EXIT_OK if report.passed else EXIT_CHECK)

    kappas = config.kappa_sweep or (config.kappa,)
    tried = []
    with manifest.stage("search"):
        for kappa in kappas:
            sys = config.system(kappa)
            try:
                constants, report = search_constants(sys, config.d, grid)
            except ConstantSearchError as exc:
                tried.append(f"# kappa {kappa:.17g}: no constants, blocking condition {exc.blocking}")
                continue
            text = "\n".join(tried + [report.to_text()])
            (out / "certification.txt").write_text(text if text.endswith("\n") else text + "\n")
            (out / "constants.json").write_text(constants.to_json())
            manifest.record(out / "certification.txt")
            manifest.record(out / "constants.json")
            log.info("certified at kappa = %g", kappa)
            return _finish(out, manifest, EXIT_OK)
    (out / "certification.txt").write_text("\n".join(tried + ["# verdict: FAIL (no kappa on the sweep certified)"]) + "\n")
    manifest.record(out / "certification.txt")
    return _finish(out, manifest, EXIT_CHECK)


def _load_constants(config: ExperimentConfig) -> ConditionConstants:
    if config.constants is not None:
        return config.constants
    path = Path(config.out) / "constants.json"
    if not path.exists():
        raise ConfigError(f"no constants: add a [constants] section or run 'certify' first (looked for {path})")
    try:
        return ConditionConstants.from_json(path.read_text())
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_verify(config: ExperimentConfig, workers: int = 1) -> int:
    """Run the property suite against a certified constant set.

    The system is rebuilt at the kappa recorded with the constants, falling
    back to the configured kappa.
    """
    constants = _load_constants(config)
    out, manifest = _prepare(config, "verify")
    sys = config.system(constants.kappa0)
    settings = VerifySettings(
        n_samples=config.verify_samples, n_max=config.verify_n_max, q=config.verify_q,
        horizon=config.horizon, seed=config.verify_seed, graph_depth=config.depth,
    )
    with manifest.stage("verify"):
        report = verify(sys, constants, settings)
    (out / "verification.txt").write_text(report.to_text())
    manifest.record(out / "verification.txt")
    return _finish(out, manifest, EXIT_CHECK if report.failed else EXIT_OK)


COMMANDS = {"decay": cmd_decay, "sna": cmd_sna, "certify": cmd_certify, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pinched-sna", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        p.add_argument("--config", type=Path, help="INI experiment config (defaults apply when omitted)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
        p.add_argument("--seed", type=int, help="override sampling.seed")
        p.add_argument("--kappa", type=float, help="override system.kappa")
        p.add_argument("--samples", type=int, help="override sampling.n")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        config = config.with_overrides(out=args.out, seed=args.seed, kappa=args.kappa, n_samples=args.samples)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return COMMANDS[args.command](config, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
