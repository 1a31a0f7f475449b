"""Command-line driver.

    phasepovm {validate,density,measure,sample,verify} --config exp.toml [--out DIR] [--seed N] [--threads N]

Exit status: 0 success (for ``verify``: every check passed), 1 validation
failure, 2 configuration or argument error, 3 numerical abort (quadrature
or sampling failure, non-finite output). Failures print one JSON line
``{"status": ..., "error": ..., "reason": ...}`` on stderr.

Artifacts written to the output directory:

========  ==============  =========================================
command   file            content
========  ==============  =========================================
validate  validate.json   density-matrix and invariant-block report
density   density.csv     ``q1..qd, p1..pd, value``
measure   measure.json    probability and operator per region
sample    samples.csv     ``q1..qd, p1..pd``
verify    report.json     verification report
========  ==============  =========================================
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .config import ConfigError, ExperimentConfig, OperatorSpec, load_config, prepare_output
from .fockspace import DensityMatrix, FockSpace, ValidationError, validate_density
from .povm import SamplingError, measure_region, prob_density_grid, sample
from .regions import QuadratureError, QuadratureRule, big_box, default_half_width
from .rotinv import extract_blocks, invariance_residual, radial_dim
from .verify import SuiteConfig, theorem_suite

log = logging.getLogger("phasepovm")

THREADS_ENV = "PHASEPOVM_THREADS"
COMMANDS = ("validate", "density", "measure", "sample", "verify")

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


class CommandFailed(Exception):
    def __init__(self, status: int, reason: str, error: str = "ValidationError"):
        super().__init__(reason)
        self.status = status
        self.error = error


def _density_matrix(spec: OperatorSpec, space: FockSpace, name: str) -> np.ndarray:
    try:
        mat = spec.build(space)
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from exc
    if mat.shape != (space.dim, space.dim):
        raise ValidationError(f"{name}: matrix shape {mat.shape} does not match dim {space.dim}")
    return DensityMatrix(space, mat).matrix if spec.kind == "matrix" else mat


def _operator_report(spec: OperatorSpec, space: FockSpace, seed: int) -> dict:
    out = {"kind": spec.kind}
    blocks = spec.blocks()
    if blocks is not None:
        out["blocks"] = {
            "trace_sum": blocks.trace_sum(),
            "ranks": {str(l): (2 * l + 1) * radial_dim(space.n_cut, l) for l, _ in blocks},
        }
    try:
        mat = spec.build(space)
    except ValidationError as exc:
        out.update(passed=False, reason=str(exc))
        return out
    rep = validate_density(mat)
    out["density_matrix"] = rep.as_dict()
    out["passed"] = rep.passed
    if not rep.passed:
        out["reason"] = "; ".join(rep.reasons())
    if space.d == 3 and rep.passed:
        out["invariance_residual"] = invariance_residual(space, mat, seed)
        out["trace_sum"] = extract_blocks(space, mat).trace_sum()
    return out


def cmd_validate(cfg: ExperimentConfig, out: Path, seed: int) -> int:
    space = cfg.space()
    doc = {
        "space": {"d": space.d, "n_cut": space.n_cut, "mass": space.mass, "dim": space.dim},
        "T": _operator_report(cfg.T, space, seed),
        "S": _operator_report(cfg.S, space, seed),
    }
    doc["passed"] = doc["T"]["passed"] and doc["S"]["passed"]
    io.write_json(out / "validate.json", doc)
    if not doc["passed"]:
        bad = next(k for k in ("T", "S") if not doc[k]["passed"])
        raise CommandFailed(EXIT_INVALID, f"{bad}: {doc[bad]['reason']}")
    return EXIT_OK


def density_grid(cfg: ExperimentConfig) -> np.ndarray:
    axes = [
        np.linspace(lo, hi, n) if n > 1 else np.array([lo])
        for n, (lo, hi) in zip(cfg.density_grid, cfg.density_range)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def cmd_density(cfg: ExperimentConfig, out: Path, seed: int) -> int:
    space = cfg.space()
    T = _density_matrix(cfg.T, space, "T")
    S = _density_matrix(cfg.S, space, "S")
    pts = density_grid(cfg)
    vals = prob_density_grid(S, T, pts, space)
    neg = int(np.sum(vals < 0))
    if neg:
        log.info("density: clamped %d negative values (min %.3e)", neg, vals.min())
    io.write_csv(out / "density.csv", io.coordinate_names(space.d) + ["value"], np.column_stack([pts, np.maximum(vals, 0.0)]))
    return EXIT_OK


def cmd_measure(cfg: ExperimentConfig, out: Path, seed: int) -> int:
    space = cfg.space()
    T = _density_matrix(cfg.T, space, "T")
    S = _density_matrix(cfg.S, space, "S")
    results = []
    for name, Z in zip(cfg.region_names, cfg.regions):
        E = measure_region(space, T, Z, cfg.quadrature)
        prob = float(np.trace(S @ E).real)
        results.append({"name": name, "probability": min(max(prob, 0.0), 1.0), "raw_probability": prob,
                        "operator": io.operator_to_dict(E)})
    io.write_json(out / "measure.json", {"nodes": cfg.quadrature.nodes, "regions": results})
    return EXIT_OK


def cmd_sample(cfg: ExperimentConfig, out: Path, seed: int) -> int:
    space = cfg.space()
    T = _density_matrix(cfg.T, space, "T")
    S = _density_matrix(cfg.S, space, "S")
    opts = cfg.sample
    bbox = big_box(space.d, opts.get("half_width", default_half_width(space.n_cut)))
    quad = QuadratureRule(opts.get("nodes", 60 if space.d == 1 else 8))
    pts = sample(DensityMatrix(space, S), T, opts["n"], seed=seed, bbox=bbox, quad=quad,
                 batch=opts.get("batch", 1 << 16))
    io.write_csv(out / "samples.csv", io.coordinate_names(space.d), pts)
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out: Path, seed: int) -> int:
    space = cfg.space()
    T = cfg.T.blocks() if cfg.T.kind == "blocks" else _density_matrix(cfg.T, space, "T")
    suite = SuiteConfig(d=cfg.d, n_cut=cfg.n_cut, mass=cfg.mass, T=T, seed=seed, **cfg.verify)
    report = theorem_suite(suite)
    io.write_json(out / "report.json", report.to_dict())
    if not report.passed:
        raise CommandFailed(EXIT_INVALID, f"checks failed: {', '.join(report.failed())}", "VerificationFailed")
    return EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "density": cmd_density,
    "measure": cmd_measure,
    "sample": cmd_sample,
    "verify": cmd_verify,
}


def run(command: str, cfg: ExperimentConfig, out: Path | None = None, seed: int | None = None) -> int:
    """Run one command; raises on failure (see :func:`main` for the status mapping)."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    out = prepare_output(Path(out) if out is not None else cfg.output)
    return HANDLERS[command](cfg, out, cfg.seed if seed is None else seed)


def _status(exc: BaseException) -> int:
    if isinstance(exc, CommandFailed):
        return exc.status
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (QuadratureError, SamplingError, FloatingPointError, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    if isinstance(exc, ValueError):
        return EXIT_INVALID
    return EXIT_NUMERICAL


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if not env:
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasepovm", description="Covariant phase-space POVM experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML experiment file")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="seed (overrides the config)")
    p.add_argument("--threads", type=int, help=f"BLAS threads (default: ${THREADS_ENV})")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(name)s: %(message)s")
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = load_config(args.config)
        threads = _threads(args.threads)
        with threadpool_limits(limits=threads):
            return run(args.command, cfg, args.out, args.seed)
    except Exception as exc:  # noqa: BLE001 - every failure maps to an exit status
        status = _status(exc)
        error = exc.error if isinstance(exc, CommandFailed) else type(exc).__name__
        print(json.dumps({"status": status, "error": error, "reason": str(exc)}), file=sys.stderr)
        return status


if __name__ == "__main__":
    sys.exit(main())
