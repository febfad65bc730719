"""Command-line experiment runner.

    bohm run <config.json> [--out DIR] [--jobs N] [--seed S]
    bohm validate <config.json>
    bohm benchmark henon-heiles --energy E [--y Y] [--py PY] [--steps N] [--out DIR]
    bohm list

``<config.json>`` may also name a bundled config (``bohm run ho3d_stat``).
Exit codes: 0 success, 2 invalid config or arguments, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
import time
import warnings
from dataclasses import asdict, dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import chaos, measures
from .config import ConfigError, ExperimentConfig, bundled_configs, load
from .dynamics import NodeProximity, TrajectoryStatus, fmt, integrate
from .regularity import com_residual, detect_structure

log = logging.getLogger("bohmchaos")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def code_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


class NumericalFailure(RuntimeError):
    pass


# --- output -----------------------------------------------------------------

def atomic_write(path: Path, data: bytes) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_bytes(header, rows) -> bytes:
    lines = [",".join(header)]
    lines += [",".join("" if v is None else fmt(v) for v in row) for row in rows]
    return ("\n".join(lines) + "\n").encode()


@dataclass
class RunRecord:
    run_id: str
    command: str
    config: dict
    seed: int | None
    code_version: str
    wall_time: float = 0.0
    jobs: int = 1
    statuses: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    regularity: dict | None = None
    outputs: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, ensure_ascii=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def run_id(cfg: ExperimentConfig) -> str:
    """Content hash of the config and code version, shortened like a commit id."""
    blob = json.dumps(cfg.raw, sort_keys=True).encode() + code_version().encode()
    return hashlib.sha1(blob).hexdigest()[:12]


class Outputs:
    """Collects written files for the manifest."""

    def __init__(self, root: Path, prefix: str):
        self.root, self.prefix = root, prefix
        self.files: dict[str, Path] = {}

    def csv(self, suffix: str, header, rows) -> Path:
        p = self.root / f"{self.prefix}_{suffix}.csv"
        atomic_write(p, csv_bytes(header, rows))
        self.files[p.name] = p
        return p

    def manifest(self) -> list[dict]:
        out = []
        for name, p in sorted(self.files.items()):
            data = p.read_bytes()
            out.append({"file": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
        return out


def _nan_safe(x: float) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)


# --- commands -----------------------------------------------------------------

def _coord_labels(wf) -> list[str]:
    axes = "xyz"[: wf.dimension]
    return [f"{a}{k + 1}" for k in range(wf.particles) for a in axes]


def _regularity(wf, traj=None) -> dict:
    report = detect_structure(wf)
    d = report.to_dict()
    if traj is not None:
        for m, md in zip(report.matches, d["matches"]):
            r = com_residual(wf, traj, m)
            md["com_residual"] = {"value": r.value, "samples": r.samples, "skipped": r.skipped,
                                  "method": r.method}
    return d


def _cmd_trajectory(cfg, out: Outputs, rec: RunRecord, jobs: int):
    wf = cfg.wavefunction()
    traj = integrate(wf, cfg.x0(wf), cfg.t_span, cfg.integrator, cfg.sample_every,
                     diagnostics=bool(cfg.raw.get("diagnostics", False)))
    out.csv("trajectory", traj.header(), np.column_stack([traj.times, traj.positions]))
    if traj.energy is not None:
        out.csv("diagnostics", ["t", "abs2", "energy", "quantum"],
                zip(traj.times, traj.abs2, traj.energy, traj.quantum))
    rec.statuses.append(traj.status.value)
    rec.results = {"samples": len(traj), "t_end": float(traj.times[-1]), "nfev": traj.nfev}
    if traj.energy is not None and wf.stationary:
        rec.results["max_energy_error"] = float(np.max(np.abs(traj.energy - wf.stationary_energy)))
    if cfg.outputs["regularity"]:
        rec.regularity = _regularity(wf, traj)
    if traj.status is not TrajectoryStatus.COMPLETED:
        raise NumericalFailure(f"trajectory stopped early: {traj.status.value}")


def _cmd_lyapunov(cfg, out, rec, jobs):
    wf = cfg.wavefunction()
    est = chaos.lyapunov(wf, cfg.x0(wf), cfg.lyapunov, cfg.integrator)
    out.csv("lyapunov", ["T", "h"], est.rows())
    rec.statuses.append(est.status.value)
    rec.results = {"final_h": _nan_safe(est.final_h), "horizon": float(est.times[-1]) if len(est.times) else 0.0,
                   "saturated_intervals": est.saturated}
    if cfg.outputs["regularity"]:
        rec.regularity = _regularity(wf)
    if not est.status.ok:
        raise NumericalFailure(f"Lyapunov run stopped early: {est.status.value}")


def _cmd_ensemble(cfg, out, rec, jobs):
    wf = cfg.wavefunction()
    sampler, count = cfg.sampler(wf)
    res = chaos.average_lyapunov(wf, sampler, count, cfg.lyapunov, cfg.integrator, cfg.seed, jobs)
    out.csv("ensemble", res.header(_coord_labels(wf)), res.rows())
    rec.statuses.extend(est.status.value for _, est in res.per_sample)
    rec.results = {"mean_h": res.mean_h, "std_h": res.std_h, "excluded": res.excluded,
                   "samples": res.n_samples}
    if cfg.outputs["regularity"]:
        rec.regularity = _regularity(wf)


def _cmd_poincare(cfg, out, rec, jobs):
    wf = cfg.wavefunction()
    idx, level, t_max = cfg.section
    pts = chaos.poincare_section(wf, cfg.x0(wf), (idx, level), t_max, cfg.integrator)
    labels = [c for i, c in enumerate(_coord_labels(wf)) if i != idx]
    out.csv("section", ["t", *labels, "direction"],
            ([p.time, *p.chart.tolist(), p.direction] for p in pts))
    rec.statuses.append("Completed")
    rec.results = {"crossings": len(pts), "plane": {"coordinate": idx, "value": level}}
    if cfg.outputs["regularity"]:
        rec.regularity = _regularity(wf)


def _measure_row(spec, **override) -> list:
    pr = measures.participation_ratio(spec.coefficients(**override))
    t = spec.qubit_tensor(**override)
    if t is None:
        t = _inferred_tensor(spec, **override)
    if t is None:
        return [pr, None, None, None]
    m = measures.all_measures(t)
    return [pr, m.Q, m.EG, m.tau3]


def _inferred_tensor(spec, **override):
    """Qubit tensor of an explicit three-particle state built on exactly two basis states."""
    if spec.generator is not None:
        return None
    wf = spec.build()
    states = wf.unique_states
    if wf.particles != 3 or len(states) != 2:
        return None
    from .wavefunction import qubit_coefficients

    return measures.normalized(qubit_coefficients(wf, *states))


def _cmd_measures(cfg, out, rec, jobs):
    if "sweep" in cfg.raw:
        gen, param, grid = cfg.sweep
        spec = cfg.sweep_state()
        rows = [[v, *_measure_row(spec, **{param: v})] for v in grid]
    else:
        rows = [[0.0, *_measure_row(cfg.state)]]
    out.csv("measures", ["param", "PR", "Q", "EG", "tau3"], rows)
    rec.statuses.extend("Completed" for _ in rows)
    rec.results = {"rows": len(rows)}


def _cmd_sweep(cfg, out, rec, jobs):
    gen, param, grid = cfg.sweep
    spec = cfg.sweep_state()
    header = ["param", "mean_h", "std_h", "excluded", "PR", "Q", "EG", "tau3"]
    rows, points = [], []
    for v in grid:
        wf = spec.build(**{param: v})
        sampler, count = cfg.sampler(wf)
        try:
            res = chaos.average_lyapunov(wf, sampler, count, cfg.lyapunov, cfg.integrator, cfg.seed, jobs)
            mean, std, excluded, status = res.mean_h, res.std_h, res.excluded, "Completed"
        except (chaos.EnsembleError, NodeProximity, ArithmeticError, ValueError) as exc:
            log.warning("sweep point %s=%g failed: %s", param, v, exc)
            mean, std, excluded, status = math.nan, math.nan, count, f"Failed: {exc}"
        rows.append([v, mean, std, excluded, *_measure_row(spec, **{param: v})])
        points.append({"param": v, "status": status, "mean_h": _nan_safe(mean),
                       "excluded": excluded})
        # rewrite after every point so an interrupted sweep leaves valid rows
        out.csv("sweep", header, rows)
    rec.statuses.extend(p["status"] for p in points)
    rec.results = {"generator": gen, "parameter": param, "points": points}
    if all(p["status"] != "Completed" for p in points):
        raise NumericalFailure("every sweep point failed")


def _cmd_benchmark(cfg, out, rec, jobs):
    b = cfg.benchmark
    x0 = chaos.henon_heiles_point(b["energy"], b["y"], b["py"])
    params = cfg.lyapunov if "lyapunov" in cfg.raw else chaos.LyapunovParams(n_steps=100_000)
    est = chaos.henon_heiles_lyapunov(b["energy"], x0, params)
    out.csv("lyapunov", ["T", "h"], est.rows())
    rec.statuses.append(est.status.value)
    drift = None
    if est.final_point is not None:
        drift = abs(chaos.henon_heiles_energy(est.final_point) - b["energy"])
    rec.results = {"system": "henon-heiles", "energy": b["energy"], "x0": x0.tolist(),
                   "final_h": _nan_safe(est.final_h), "energy_drift_end": drift}
    if b["section_t_max"] > 0:
        pts = chaos.henon_heiles_section(x0, b["section_t_max"])
        out.csv("section", ["t", "y", "px", "py", "direction"],
                ([p.time, *p.chart.tolist(), p.direction] for p in pts))
        rec.results["crossings"] = len(pts)
    if not est.status.ok:
        raise NumericalFailure(f"benchmark stopped early: {est.status.value}")


COMMANDS = {
    "trajectory": _cmd_trajectory,
    "lyapunov": _cmd_lyapunov,
    "ensemble": _cmd_ensemble,
    "poincare": _cmd_poincare,
    "measures": _cmd_measures,
    "sweep": _cmd_sweep,
    "benchmark": _cmd_benchmark,
}


def run(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> RunRecord:
    """Execute ``cfg`` and write its CSVs plus ``<name>_run.json`` into ``out_dir``.

    Raises :class:`NumericalFailure` after writing the record when the run
    ended with a numerical problem.
    """
    root = Path(out_dir if out_dir is not None else cfg.outputs["dir"])
    root.mkdir(parents=True, exist_ok=True)
    rec = RunRecord(run_id(cfg), cfg.command, cfg.to_dict(), cfg.seed, code_version(), jobs=jobs)
    out = Outputs(root, cfg.name)
    start = time.perf_counter()
    failure = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        try:
            COMMANDS[cfg.command](cfg, out, rec, jobs)
        except (NumericalFailure, NodeProximity, chaos.EnsembleError) as exc:
            failure = exc
            rec.statuses.append(f"Failed: {exc}")
    rec.results["warnings"] = sorted({str(w.message) for w in caught})
    rec.wall_time = time.perf_counter() - start
    rec.outputs = out.manifest()
    atomic_write(root / f"{cfg.name}_run.json", rec.to_json().encode())
    if failure is not None:
        raise NumericalFailure(str(failure)) from failure
    return rec


# --- argument parsing -------------------------------------------------------------

def _jobs(value) -> int:
    if value is None:
        value = os.environ.get("BOHM_JOBS", "1")
    try:
        n = int(value)
    except ValueError:
        raise ConfigError("jobs", f"expected an integer, got {value!r}") from None
    if n < 1:
        raise ConfigError("jobs", f"must be >= 1, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bohm", description="Bohmian trajectory chaos experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="path to a JSON config or the name of a bundled config")
    r.add_argument("--out", help="output directory (default: outputs.dir from the config)")
    r.add_argument("--jobs", help="worker processes (default: $BOHM_JOBS or 1)")
    r.add_argument("--seed", type=int, help="override the config seed")

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")

    b = sub.add_parser("benchmark", help="reference chaos benchmark")
    b.add_argument("system", choices=["henon-heiles"])
    b.add_argument("--energy", type=float, required=True)
    b.add_argument("--y", type=float, default=0.0, help="initial y on the x = 0 line (default 0)")
    b.add_argument("--py", type=float, default=0.0)
    b.add_argument("--steps", type=int, default=100_000, help="Benettin intervals of length 1")
    b.add_argument("--section", type=float, default=0.0, help="also record x = 0 crossings up to this time")
    b.add_argument("--out", default="runs/henon_heiles")

    sub.add_parser("list", help="list bundled configs")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "list":
            print("\n".join(bundled_configs()))
            return EXIT_OK
        if args.cmd == "validate":
            cfg = load(args.config)
            print(f"ok: {cfg.name} ({cfg.command})")
            return EXIT_OK
        if args.cmd == "benchmark":
            cfg = ExperimentConfig.from_dict({
                "name": f"henon_heiles_E{args.energy:g}", "command": "benchmark",
                "benchmark": {"system": args.system, "energy": args.energy, "y": args.y, "py": args.py,
                              "section_t_max": args.section},
                "lyapunov": {"n_steps": args.steps}})
            jobs, out = 1, args.out
        else:
            cfg = load(args.config)
            if args.seed is not None:
                cfg = cfg.with_seed(args.seed)
            jobs, out = _jobs(args.jobs), args.out
        rec = run(cfg, out, jobs)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps({"run_id": rec.run_id, "statuses": sorted(set(rec.statuses)),
                      "results": {k: v for k, v in rec.results.items() if k != "points"},
                      "outputs": [o["file"] for o in rec.outputs]}, default=_json_default))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
