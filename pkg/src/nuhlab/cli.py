"""Build the perturbed torus map and run its estimators and acceptance checks.

Usage: ``nuhlab {build,lyapunov,integrals,access,survey,check} [options]``.

Exit codes: 0 success, 1 validation failure, 2 usage or configuration error.
Every output file lands under ``--out`` and is listed with its SHA-256 in
``manifest.txt``.  No timestamps or timings are written, so identical
configuration and seed give byte-identical output trees.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .io import to_gray, tree_digest, write_csv, write_manifest, write_pgm
from .perturbations import SupportContractError
from .survey import LABELS, NEGATIVE, UNDECIDED, ZERO
from .suite import Suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _manifest(suite: Suite, out: Path):
    ak = suite.pipe.ak
    header = {
        "artifact_version": __version__,
        "config_sha256": suite.cfg.digest,
        "seed": suite.cfg.seed,
        "variant": suite.cfg.variant,
        "ak_period": ak.period,
        "ak_period_defect": repr(ak.period_defect),
        "ak_derivative_bound": repr(ak.derivative_bound),
        "ak_k_conjugacy_bound": repr(ak.k_conjugacy_bound),
    }
    for st in ak.closeness:
        header[f"ak_stage{st['stage']}_c0"] = repr(st["c0"])
        header[f"ak_stage{st['stage']}_c1"] = repr(st["c1"])
    write_manifest(out, header)


def cmd_build(suite: Suite, out: Path) -> int:
    (out / "config.txt").write_text(suite.cfg.to_text())
    rows = suite.validation_table()
    write_csv(out / "build" / "validation.csv", ["check", "value", "tolerance", "passed"], rows)
    write_csv(
        out / "build" / "stages.csv",
        ["stage", "p", "q", "c0", "c1", "c0_budget", "within_budget"],
        [tuple(st.values()) for st in suite.pipe.ak.closeness],
    )
    trivial = suite.trivial_gadgets()
    write_csv(out / "build" / "gadgets.csv", ["gadget", "trivial"], [(g, g in trivial) for g in ("sw", "bm", "dw")])
    if trivial:
        print(f"note: trivial gadgets {', '.join(trivial)}")
    failed = [r[0] for r in rows if not r[3]]
    for name in failed:
        kind = "support contract violated" if name.startswith(("support_", "ak_clear")) else "validation failed"
        print(f"{kind}: {name}")
    if not failed:
        print(f"build: all {len(rows)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_lyapunov(suite: Suite, out: Path) -> int:
    rows = suite.lyapunov_rows()
    write_csv(out / "lyapunov" / "spectra.csv", suite.lyapunov_header(), rows)
    d = suite.dim
    write_csv(
        out / "lyapunov" / "checkpoints.csv",
        ["set", "sample", "step"] + [f"lambda{i}" for i in range(d)],
        suite.checkpoint_rows(),
    )
    worst = max(abs(r[2 + d + 2 + d]) for r in rows)
    print(f"lyapunov: {len(rows)} spectra, max |zero sum| {worst:.2e}")
    return EXIT_OK if worst < 1e-6 else EXIT_FAIL


def cmd_integrals(suite: Suite, out: Path) -> int:
    rows = []
    for (label, where), est in suite.integrals.items():
        lo, hi = est.interval()
        rows.append((label, where, est.integral, est.stderr, lo, hi, est.n, est.excluded, est.flagged))
    write_csv(
        out / "integrals" / "integrals.csv",
        ["pipeline", "region", "integral", "stderr", "lo99", "hi99", "n", "excluded", "flagged"],
        rows,
    )
    rrows = [
        (label, r.ratio, r.stderr, r.numerator.integral, r.denominator.integral)
        for label, r in suite.ratios.items()
    ]
    write_csv(out / "integrals" / "ratios.csv", ["pipeline", "ratio", "stderr", "outside_abs", "inside"], rrows)
    for r in rows:
        print(f"integral {r[0]} over {r[1]}: {r[2]:.4e} +- {r[3]:.1e}")
    return EXIT_OK


def cmd_access(suite: Suite, out: Path) -> int:
    rep, bun = suite.cone_reports
    write_csv(
        out / "access" / "cones.csv",
        ["cone", "angle_ratio", "axis_expansion", "worst_expansion", "n_samples", "n_steps"],
        [(k, r.angle_ratio, r.axis_expansion, r.worst_expansion, r.n_samples, r.n_steps) for k, r in rep.items()],
    )
    write_csv(
        out / "access" / "bunching.csv",
        ["margin", "worst_center_spread", "min_unstable_rate", "excluded", "n_steps"],
        [(bun.margin, bun.worst_center_spread, bun.min_unstable_rate, bun.excluded, bun.n_steps)],
    )
    for name, R in suite.reach_rasters.items():
        rows = []
        n = R.magnitude.shape[0]
        for i in range(n):
            for j in range(n):
                rows.append(
                    (i, j, *R.centers[i, j], R.magnitude[i, j], R.error[i, j],
                     bool(R.significant[i, j]), bool(R.failed[i, j]))
                )
        write_csv(
            out / "access" / f"reach_{name}.csv",
            ["i", "j", "c1", "c2", "magnitude", "error", "significant", "failed"],
            rows,
        )
        with np.errstate(divide="ignore"):
            logm = np.log10(np.where(R.magnitude > 0, R.magnitude, np.nan))
        write_pgm(out / "access" / f"reach_{name}.pgm", to_gray(logm, missing=R.failed).T[::-1])
        print(f"access {name}: significant fraction {R.significant_fraction:.3f}")
    return EXIT_OK


def cmd_survey(suite: Suite, out: Path) -> int:
    raster, density, floor = suite.survey
    n = raster.n_center
    rows = []
    P = raster.points.reshape(n, n, -1)
    for i in range(n):
        for j in range(n):
            rows.append(
                (i, j, *P[i, j], *raster.central[i, j], LABELS[raster.labels[i, j]], *raster.spectra[i, j])
            )
    d = suite.dim
    write_csv(
        out / "survey" / "cells.csv",
        ["i", "j"] + [f"x{k}" for k in range(d)] + ["central1", "central2", "label"] + [f"lambda{k}" for k in range(d)],
        rows,
    )
    summary = []
    for k, name in enumerate(LABELS):
        lo, hi = raster.interval(k)
        summary.append((name, raster.fraction(k), lo, hi))
    write_csv(out / "survey" / "summary.csv", ["class", "fraction", "lo95", "hi95"], summary)
    write_csv(
        out / "survey" / "meta.csv",
        ["noise_floor", "threshold", "n_time", "burn_in", "density_delta", "density_pass", "seed"],
        [(floor, raster.threshold, raster.n_time, raster.burn_in, density.delta, density.pass_fraction, suite.cfg.seed)],
    )
    write_csv(out / "survey" / "density_failures.csv", ["c1", "c2"], density.failures)
    shade = {NEGATIVE: 0, ZERO: 255, UNDECIDED: 128}
    img = np.vectorize(shade.get)(raster.labels).astype(np.uint8)
    # rows of the image run top to bottom in decreasing second centre coordinate
    write_pgm(out / "survey" / "labels.pgm", img.T[::-1])
    cmax = np.abs(raster.central).max(axis=-1)
    write_pgm(out / "survey" / "central_max.pgm", to_gray(cmax).T[::-1])
    for name, frac, lo, hi in summary:
        print(f"survey {name}: {frac:.4f} [{lo:.4f}, {hi:.4f}]")
    return EXIT_OK


def _determinism_probe(cfg: RunConfig, threads: int) -> bool:
    """Rebuild and rerun the Lyapunov stage twice in scratch directories and
    compare the output trees."""
    digests = []
    for _ in range(2):
        with tempfile.TemporaryDirectory() as tmp:
            s = Suite(cfg, threads)
            cmd_build(s, Path(tmp))
            cmd_lyapunov(s, Path(tmp))
            digests.append(tree_digest(tmp))
    return digests[0] == digests[1]


def cmd_check(suite: Suite, out: Path) -> int:
    for cmd in (cmd_build, cmd_lyapunov, cmd_integrals, cmd_access, cmd_survey):
        cmd(suite, out)
    crit = suite.criteria()
    same = _determinism_probe(suite.cfg, suite.threads)
    rows = [(c.key, c.name, c.passed, c.detail) for c in crit]
    rows.append(("10", "determinism", same, "rerun of build and lyapunov byte-identical" if same else "outputs differ"))
    write_csv(out / "check" / "criteria.csv", ["criterion", "name", "passed", "detail"], rows)
    for key, name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'} criterion {key} ({name}): {detail}")
    return EXIT_OK if all(r[2] for r in rows) else EXIT_FAIL


COMMANDS = {
    "build": cmd_build,
    "lyapunov": cmd_lyapunov,
    "integrals": cmd_integrals,
    "access": cmd_access,
    "survey": cmd_survey,
    "check": cmd_check,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nuhlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="flat key = value configuration file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sample ensembles")
    p.add_argument("--variant", choices=("t4", "t6"), help="override the configured variant")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.variant is not None:
            over["variant"] = args.variant
        cfg = cfg.with_overrides(**over)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        suite = Suite(cfg, args.threads)
    except SupportContractError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as e:
        print(f"error: support contract violated: {e}", file=sys.stderr)
        return EXIT_FAIL
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.command != "build" and not (out / "config.txt").exists():
        (out / "config.txt").write_text(cfg.to_text())
    code = COMMANDS[args.command](suite, out)
    _manifest(suite, out)
    return code


if __name__ == "__main__":
    sys.exit(main())
