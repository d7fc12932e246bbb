"""Command-line front end.

    densmatch match    --config run.json
    densmatch rdo      --config run.json
    densmatch kde      --samples draws.txt --bandwidth scott --grid 0,7,10000
    densmatch validate --config run.json --design design.csv --threshold 1e-3

Exit codes: 0 success, 1 invalid input or failed validation, 2 computation
failure. Every run writes ``MANIFEST.json`` next to its CSV files.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .config import OUTPUT_ROOT_ENV, ConfigError, RunConfig, parse_config
from .densities import derive_seed, sample
from .kde import estimate_on_grid, scott_from_samples
from .models import validate_surrogate
from .optimizer import ComputationError, RunReport, final_distance, run_density_match
from .quadrature import trapezoid_grid
from .rdo import nsga2_run

log = logging.getLogger("densmatch")

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2
FLOAT_FMT = "%.17g"
# sample-set stream for the mean-variance baseline (stages 1 and 2 use 1, 2)
RDO_STREAM = 3


class ValidationFailure(Exception):
    """Input was well formed but a requested check did not pass."""


# --- output helpers --------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % float(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class RunDirectory:
    """Output directory guarded by a lockfile, with a manifest of artifacts."""

    def __init__(self, path: Path, command: str, config_hash: str | None, seed: int | None):
        self.path = Path(path)
        self.manifest = {
            "tool": "densmatch",
            "version": __version__,
            "command": command,
            "config_sha256": config_hash,
            "seed": seed,
            "artifacts": [],
            "complete": False,
        }

    @contextmanager
    def locked(self):
        self.path.mkdir(parents=True, exist_ok=True)
        lock = self.path / ".lock"
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(f"{self.path} is in use by another run (remove {lock} if stale)") from None
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield self
        except BaseException as exc:
            self.manifest.setdefault("error", f"{type(exc).__name__}: {exc}")
            raise
        finally:
            self.write_manifest()
            lock.unlink(missing_ok=True)

    def csv(self, name: str, header, rows) -> Path:
        path = self.path / name
        write_csv(path, list(header), rows)
        self.manifest["artifacts"].append({"file": name, "sha256": _sha256(path)})
        return path

    def note(self, **items) -> None:
        self.manifest.update(items)

    def write_manifest(self) -> None:
        text = json.dumps(self.manifest, indent=2, sort_keys=True)
        (self.path / "MANIFEST.json").write_text(text + "\n")


def _history_rows(report: RunReport):
    for r in report.records:
        yield (r.iteration, r.stage, r.objective, r.grad_norm, r.step, r.bandwidth)


def _write_history(out: RunDirectory, report: RunReport) -> None:
    out.csv("history.csv", ["iter", "stage", "objective", "grad_norm", "step", "bandwidth"],
            _history_rows(report))


def _write_design(out: RunDirectory, design) -> None:
    out.csv("design.csv", ["index", "value"], ((k + 1, v) for k, v in enumerate(design)))


def read_design(path) -> np.ndarray:
    """Read a ``design.csv`` written by ``match`` (columns index, value)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"design file {path} does not exist")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{path}: expected columns index,value ({exc})") from exc
    if data.shape[1] != 2:
        raise ConfigError(f"{path}: expected columns index,value")
    return data[:, 1]


def _default_dir(cfg: RunConfig, config_path: Path, command: str) -> Path:
    return cfg.output_dir(f"{config_path.stem}-{command}")


# --- commands --------------------------------------------------------------


def cmd_match(args) -> int:
    cfg = parse_config(args.config)
    problem = cfg.problem()
    out = RunDirectory(args.output or _default_dir(cfg, Path(args.config), "match"),
                       "match", cfg.digest(), cfg.seed)
    with out.locked():
        try:
            report = run_density_match(problem)
        except ComputationError as exc:
            if exc.report is not None:
                _write_history(out, exc.report)
            out.note(error=str(exc), failed_stage=exc.stage, failed_iteration=exc.iteration)
            raise
        _write_history(out, report)
        _write_design(out, report.final_design)
        ev = report.final
        out.csv("pdf.csv", ["node", "target", "response"],
                zip(problem.grid.nodes, ev.target_trace, ev.response_trace))
        out.note(termination=report.termination, objective=report.final_objective,
                 distance=final_distance(report, problem.grid),
                 diagnostics=report.diagnostics, complete=True)
    print(f"{report.termination}; design {np.array2string(report.final_design, precision=6)}; "
          f"distance {final_distance(report, problem.grid):.6g}; wrote {out.path}")
    for msg in report.diagnostics:
        print(f"warning: {msg}", file=sys.stderr)
    return EXIT_OK


def cmd_rdo(args) -> int:
    cfg = parse_config(args.config)
    model = cfg.build_model()
    m = cfg.rdo.m_samples or cfg.kde.m_samples
    omegas = sample(model.uncertainty, derive_seed(cfg.seed, RDO_STREAM), m)
    out = RunDirectory(args.output or _default_dir(cfg, Path(args.config), "rdo"),
                       "rdo", cfg.digest(), cfg.seed)
    with out.locked():
        archive = nsga2_run(model, model.bounds, omegas, cfg.nsga2_config(), cfg.surrogate_spec())
        header = [f"s_{k + 1}" for k in range(model.n)] + ["inv_mean", "mean", "variance", "skewness"]
        rows = [(*mem.design, mem.objectives[0], mem.moments.mean, mem.moments.variance,
                 mem.moments.skewness) for mem in archive.members]
        out.csv("pareto.csv", header, rows)
        out.note(members=len(archive.members), generations=archive.generation,
                 penalized=sum(mem.penalized for mem in archive.members), complete=True)
    print(f"{len(archive.members)} non-dominated designs after {archive.generation} generations; "
          f"wrote {out.path}")
    return EXIT_OK


def _parse_grid(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--grid expects lo,hi,N, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"--grid expects lo,hi,N, got {text!r}") from None
    if n < 2:
        raise ConfigError("--grid N must be >= 2")
    if not lo < hi:
        raise ConfigError("--grid lo must be < hi")
    return trapezoid_grid(lo, hi, n)


def cmd_kde(args) -> int:
    path = Path(args.samples)
    if not path.is_file():
        raise ConfigError(f"samples file {path} does not exist")
    try:
        values = np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=1).ravel()
    except ValueError as exc:
        raise ConfigError(f"{path}: could not read numeric samples ({exc})") from exc
    if values.size < 1:
        raise ConfigError(f"{path}: no samples")
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise ConfigError(f"{path}: sample {bad + 1} is not finite")
    grid = _parse_grid(args.grid)
    if args.bandwidth == "scott":
        try:
            h = scott_from_samples(values)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        try:
            h = float(args.bandwidth)
        except ValueError:
            raise ConfigError(f"--bandwidth must be a number or 'scott', got {args.bandwidth!r}") from None
        if not h > 0:
            raise ConfigError("--bandwidth must be positive")
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    out = RunDirectory(args.output or root / f"{path.stem}-kde", "kde", None, None)
    with out.locked():
        out.note(samples_sha256=_sha256(path), bandwidth=h, bandwidth_rule=args.bandwidth,
                 grid=[grid.lower, grid.upper, grid.n], m_samples=int(values.size))
        q = estimate_on_grid(values, h, grid)
        out.csv("pdf.csv", ["node", "density"], zip(grid.nodes, q))
        out.note(complete=True)
    print(f"bandwidth {h:.12g}; wrote {out.path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = parse_config(args.config)
    model = cfg.build_model()
    design = read_design(args.design)
    if design.shape != model.lower.shape:
        raise ConfigError(f"design has {design.size} entries, model expects {model.n}")
    p, degree = cfg.surrogate_spec() or (21, 5)
    out = RunDirectory(args.output or _default_dir(cfg, Path(args.config), "validate"),
                       "validate", cfg.digest(), cfg.seed)
    with out.locked():
        sur, f_err, g_err = validate_surrogate(model, design, p, degree)
        scale = max(float(np.max(np.abs(model.evaluate(design, sur.nodes)))), 1e-300)
        rel_resid = sur.residual / scale
        sur.poly.save(out.path / "surrogate.txt")
        out.manifest["artifacts"].append({"file": "surrogate.txt",
                                          "sha256": _sha256(out.path / "surrogate.txt")})
        out.csv("validation.csv", ["quantity", "value"],
                [("residual", sur.residual), ("relative_residual", rel_resid),
                 ("holdout_value_error", f_err), ("holdout_gradient_error", g_err),
                 ("threshold", args.threshold)])
        worst = max(rel_resid, f_err, g_err)
        passed = worst <= args.threshold
        out.note(passed=passed, worst_error=worst, complete=True)
    print(f"residual {sur.residual:.3e} (relative {rel_resid:.3e}); held-out error value "
          f"{f_err:.3e}, gradient {g_err:.3e}; threshold {args.threshold:g}: "
          f"{'pass' if passed else 'FAIL'}")
    if not passed:
        raise ValidationFailure(f"surrogate error {worst:.3e} exceeds threshold {args.threshold:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densmatch", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log optimizer progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="density-matching optimization")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help=f"output directory (default ${OUTPUT_ROOT_ENV}/<config>-match)")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("rdo", help="mean-variance NSGA-II baseline")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_rdo)

    p = sub.add_parser("kde", help="kernel density estimate of a samples file")
    p.add_argument("--samples", required=True, help="text or CSV file of draws")
    p.add_argument("--bandwidth", required=True, help="positive number or 'scott'")
    p.add_argument("--grid", required=True, help="lo,hi,N")
    p.add_argument("--output")
    p.set_defaults(func=cmd_kde)

    p = sub.add_parser("validate", help="fit and check a response surface at a design")
    p.add_argument("--config", required=True)
    p.add_argument("--design", required=True, help="design.csv from a match run")
    p.add_argument("--threshold", required=True, type=float)
    p.add_argument("--output")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValidationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - any numerical failure maps to exit 2
        print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
