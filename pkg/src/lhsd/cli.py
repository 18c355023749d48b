"""Command line interface: ``lhsd {price,check-copula,diag-variance,selftest}``.

Exit codes: 0 on success, 2 for configuration or argument errors, 3 when a
numerical guard (grid budget, quadrature tolerance, root-finding) trips.
``selftest`` exits 1 if any of its checks fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import TEST_INTEGRANDS, integrand_by_name, sigma2_lhsd, sigma2_mc, variance_gap
from .config import BUNDLED_CONFIGS, ExperimentConfig, load_config
from .copula import CopulaModel, check_conditions
from .errors import ConfigError, NumericalGuardError
from .pricing import run_sweep, write_csv
from .vg import ModelError

log = logging.getLogger("lhsd")

EXIT_OK = 0
EXIT_SELFTEST_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def cmd_price(cfg: ExperimentConfig, *, seed: int | None = None, threads: int = 1) -> str:
    """Run every strike of ``cfg`` for MC and LHSD and return the CSV report."""
    master_seed = cfg.master_seed if seed is None else seed
    header = [
        f"lhsd {__version__}",
        f"config_sha256 {cfg.digest}",
        f"master_seed {master_seed}",
        f"option {cfg.option_kind.value}",
        f"n {cfg.n} m_reps {cfg.m_reps} eta_policy {cfg.eta_policy.value} "
        f"drift_convention {cfg.drift_convention.value}",
        f"copula_plus {cfg.copula_plus.family.value} {cfg.copula_plus.alpha!r} "
        f"copula_minus {cfg.copula_minus.family.value} {cfg.copula_minus.alpha!r}",
    ]
    started = time.perf_counter()
    results = run_sweep(
        cfg.basket(),
        cfg.option_specs(),
        cfg.n,
        cfg.m_reps,
        master_seed=master_seed,
        eta_policy=cfg.eta_policy,
        drift_convention=cfg.drift_convention,
        threads=threads,
    )
    # timings go to the log, not the report, so reruns are byte-identical
    log.info("priced %d strikes in %.1fs", len(results), time.perf_counter() - started)
    return write_csv((r.row(cfg.copula_plus.alpha) for r in results), header)


def cmd_check_copula(family: str, alpha: float, dim: int, grid: int) -> str:
    report = check_conditions(CopulaModel(family, alpha, dim), grid)
    return report.render()


def cmd_diag_variance(
    integrand_id: str, family: str, alpha: float, dim: int = 2, resolution: int = 32
) -> dict:
    """Limit variances of MC and LHSD for a catalogued test integrand.

    ``consistency`` is ``sigma2_lhsd - sigma2_mc - gap``, which vanishes up to
    quadrature error since the gap is computed independently.
    """
    model = CopulaModel(family, alpha, dim)
    integrand = integrand_by_name(integrand_id, dim)
    s_mc = sigma2_mc(model, integrand, 2 * resolution)
    s_lh = sigma2_lhsd(model, integrand, resolution)
    gap = variance_gap(model, integrand, resolution)
    return {"sigma2_mc": s_mc, "sigma2_lhsd": s_lh, "gap": gap, "consistency": s_lh - s_mc - gap}


def _selftest_checks():
    from scipy import special

    from .core import lhsd_transform
    from .gamma_inv import gamma_ppf

    def marginals():
        model = CopulaModel("amh", 0.7, 3)
        t = np.linspace(0, 1, 101)
        pts = np.ones((101, 3))
        pts[:, 1] = t
        return float(np.max(np.abs(model.cdf(pts) - t))) < 1e-12

    def stratification():
        rng = np.random.default_rng(0)
        v = lhsd_transform(CopulaModel("fgm", 0.5, 3).sample(64, rng), "iid_uniform", rng)
        return all(sorted(np.floor(v[:, j] * 64).astype(int)) == list(range(64)) for j in range(3))

    def gamma_inverse():
        p = np.linspace(0.001, 0.999, 200)
        x = gamma_ppf(p, 0.0627, 2.0)
        return float(np.max(np.abs(special.gammainc(0.0627, x / 2.0) - p))) < 1e-9

    def conditions():
        return check_conditions(CopulaModel("fgm", 0.5, 3), 9).holds

    def independence_variances():
        out = cmd_diag_variance("neg_product", "independence", 0.0, 2, resolution=16)
        return abs(out["sigma2_mc"] - 7 / 144) < 1e-3 and abs(out["sigma2_lhsd"] - 1 / 144) < 1e-3

    return [
        ("copula marginals are uniform", marginals),
        ("lhsd points are stratified", stratification),
        ("gamma inverse matches the incomplete gamma function", gamma_inverse),
        ("fgm alpha=0.5 satisfies the variance conditions", conditions),
        ("independence limit variances are 7/144 and 1/144", independence_variances),
    ]


def cmd_selftest(out=sys.stdout) -> bool:
    ok = True
    for name, check in _selftest_checks():
        passed = bool(check())
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}", file=out)
    return ok


def _emit(text: str, path: str | None, out) -> None:
    if path in (None, "-"):
        out.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
        log.info("wrote %s", path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lhsd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    price = sub.add_parser("price", help="price the configured options with MC and LHSD")
    price.add_argument(
        "--config", required=True, metavar="PATH", help=f"config file or bundled name ({', '.join(BUNDLED_CONFIGS)})"
    )
    price.add_argument("--seed", type=int, metavar="N", help="master seed, overrides the config")
    price.add_argument("--out", metavar="PATH", help="output file, '-' for stdout; overrides the config")
    price.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads for replications")

    check = sub.add_parser("check-copula", help="grid check of the variance-reduction conditions")
    check.add_argument("--family", required=True, choices=["independence", "fgm", "amh"])
    check.add_argument("--alpha", type=float, default=0.0)
    check.add_argument("--dim", type=int, default=2)
    check.add_argument("--grid", type=int, default=9, help="interior points per axis")
    check.add_argument("--out", metavar="PATH")

    diag = sub.add_parser("diag-variance", help="limit variances of MC and LHSD for a test integrand")
    diag.add_argument("--integrand", required=True, choices=sorted(TEST_INTEGRANDS))
    diag.add_argument("--family", required=True, choices=["independence", "fgm", "amh"])
    diag.add_argument("--alpha", type=float, default=0.0)
    diag.add_argument("--dim", type=int, default=2)
    diag.add_argument("--resolution", type=int, default=32)
    diag.add_argument("--out", metavar="PATH")

    sub.add_parser("selftest", help="run fast internal consistency checks")
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.command == "price":
            if args.threads < 1:
                raise ConfigError(["--threads: must be >= 1"])
            if args.seed is not None and args.seed < 0:
                raise ConfigError(["--seed: must be >= 0"])
            cfg = load_config(args.config)
            text = cmd_price(cfg, seed=args.seed, threads=args.threads)
            _emit(text, args.out if args.out is not None else cfg.output_path, out)
        elif args.command == "check-copula":
            _emit(cmd_check_copula(args.family, args.alpha, args.dim, args.grid) + "\n", args.out, out)
        elif args.command == "diag-variance":
            res = cmd_diag_variance(args.integrand, args.family, args.alpha, args.dim, args.resolution)
            _emit("".join(f"{k} {v!r}\n" for k, v in res.items()), args.out, out)
        else:
            return EXIT_OK if cmd_selftest(out) else EXIT_SELFTEST_FAILED
    except NumericalGuardError as exc:
        print(f"lhsd: numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        for err in exc.errors:
            print(f"lhsd: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, ValueError, IndexError) as exc:
        print(f"lhsd: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
