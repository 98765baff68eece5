"""Command-line entry point: `toda-twistor <command> [flags]`.

Exit codes: 0 success, 1 property failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, atlas, cp3, curves, toda, verify

COMMANDS = ("integrate", "scan", "classify", "pde-check", "reconstruct", "verify", "flowlines")
SCAN_CHUNK = 512


class InputError(ValueError):
    """Invalid user input; maps to exit code 2."""


@dataclass
class RunConfig:
    command: str
    k: int = 1
    m: int = 2
    c2: Optional[float] = None
    mu: Optional[float] = None
    t_end: float = 20.0
    dt: float = 1e-3
    stride: int = 100
    method: str = "rk4"
    grid_n: int = 32
    amplitude: float = 0.1
    samples: int = 1000
    seed: int = 0
    point: Optional[str] = None
    state: Optional[str] = None
    out_path: Optional[str] = None
    format: str = "csv"
    quick: bool = False
    inject_fault: Optional[str] = None

    def validate(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if not self.dt > 0 or not self.t_end > 0:
            raise InputError("dt and t-end must be positive")
        if self.samples < 1 or self.stride < 1 or self.grid_n < 4:
            raise InputError("samples, stride must be >= 1 and grid-n >= 4")
        if self.format not in ("csv", "json"):
            raise InputError("format must be csv or json")
        if self.method not in toda.STEPPERS:
            raise InputError(f"method must be one of {sorted(toda.STEPPERS)}")
        try:
            self.weights
        except ValueError as exc:
            raise InputError(str(exc)) from None

    @property
    def weights(self) -> cp3.WeightPair:
        return cp3.WeightPair(self.k, self.m)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("inject_fault")
        return d


# ---------------------------------------------------------------- output


def version_string() -> str:
    """Package version, with `git describe` appended when available."""
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _json_value(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else None


def write_table(cfg: RunConfig, columns: Sequence[str], rows, summary: Optional[dict] = None, stream=None):
    """CSV (default) or JSON with a metadata envelope; to cfg.out_path or stdout."""
    rows = list(rows)
    if cfg.format == "json":
        doc = {
            "meta": {"version": version_string(), "config": cfg.echo(), "summary": summary or {}},
            "columns": list(columns),
            "rows": [[_json_value(v) for v in r] for r in rows],
        }
        text = json.dumps(doc, indent=1, sort_keys=False) + "\n"
    else:
        lines = [",".join(columns)] + [",".join(_fmt(v) for v in r) for r in rows]
        text = "\n".join(lines) + "\n"
    if cfg.out_path:
        Path(cfg.out_path).write_text(text)
    else:
        (stream or sys.stdout).write(text)


def _info(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- parsing helpers


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise InputError(f"{what}: expected {n} comma-separated numbers") from None
    if len(vals) != n:
        raise InputError(f"{what}: expected {n} comma-separated numbers, got {len(vals)}")
    return vals


def _point(cfg: RunConfig) -> np.ndarray:
    v = _floats(cfg.point, 8, "--point")
    z = np.array([complex(v[2 * i], v[2 * i + 1]) for i in range(4)])
    if np.linalg.norm(z) == 0:
        raise InputError("--point must not be zero")
    return z / np.linalg.norm(z)


def _initial_state(cfg: RunConfig) -> tuple[toda.TodaState, toda.TodaParams]:
    """From --state (validated against D) or a seeded D-interior sample."""
    w = cfg.weights
    if cfg.state is not None:
        v = _floats(cfg.state, 4, "--state")
        if v[0] <= 0 or v[1] <= 0:
            raise InputError("initial state outside D: v must be positive")
        d = atlas.d_membership(*v, w)
        if not d.in_D:
            raise InputError(f"initial state outside D (h = {d.h:.6g}, mu = {d.mu:.6g})")
        c2 = d.C2
        if cfg.c2 is not None and abs(cfg.c2 - c2) > 1e-8 * max(1.0, c2):
            raise InputError(f"initial state outside D for c2 = {cfg.c2} (the state implies C^2 = {c2!r})")
        mu = d.mu
        if cfg.mu is not None and abs(cfg.mu - mu) > 1e-8:
            raise InputError(f"initial state outside D for mu = {cfg.mu} (the state implies mu = {mu!r})")
        return d.state, toda.TodaParams.from_c2(c2, max(-1.0, min(1.0, mu)), w)
    rng = np.random.default_rng(cfg.seed)
    s, c2, mu = atlas.sample_d_interior(rng, w, 1)
    return toda.TodaState.from_array(s[0]), toda.TodaParams.from_c2(float(c2[0]), float(mu[0]), w)


def _threads() -> int:
    env = os.environ.get("TODA_TWISTOR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError("TODA_TWISTOR_THREADS must be an integer") from None
    return max(1, min(4, os.cpu_count() or 1))


# ---------------------------------------------------------------- commands


def cmd_integrate(cfg: RunConfig) -> int:
    s, p = _initial_state(cfg)
    try:
        traj = toda.integrate(s, p, cfg.dt, cfg.t_end, stride=cfg.stride, method=cfg.method)
    except toda.PositivityError as exc:
        _info(f"error: {exc}")
        return 2
    table = toda.trajectory_table(traj)
    drifts = {name: toda.relative_drift(table[:, i]) for name, i in (("H1", 5), ("H2", 6), ("C2", 7))}
    write_table(cfg, toda.TRAJECTORY_COLUMNS, table.tolist(), {"max_relative_drift": drifts})
    _info("max relative drift " + " ".join(f"{k}={v:.3e}" for k, v in drifts.items()))
    return 0


def _scan_chunk(args):
    seed, start, stop, w = args
    z = np.empty((stop - start, 4), dtype=complex)
    for j, idx in enumerate(range(start, stop)):
        rng = np.random.default_rng([seed, idx])
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        z[j] = v / np.linalg.norm(v)
    return start, atlas.scan_points(z, w)


def _scan_rows(res: dict, offset: int):
    z, inv, cl = res["z"], res["inv"], res["closed"]
    rows = []
    for i in np.flatnonzero(res["keep"]):
        zr = [c for zi in z[i] for c in (zi.real, zi.imag)]
        inv_vals = [inv[key][i] for key in ("f1", "f2", "f4", "f5", "nu")]
        pv = list(cl["p"][i])
        rows.append((offset + i, zr + inv_vals + pv + [cl["h"][i], cl["mu"][i], cl["H2"][i], 64 * cl["C2"][i], res["edge_class"][i]]))
    return rows


def cmd_scan(cfg: RunConfig) -> int:
    w = cfg.weights
    if cfg.point is not None:
        z = _point(cfg)[None, :]
        results = [(0, atlas.scan_points(z, w))]
    else:
        bounds = [(s, min(s + SCAN_CHUNK, cfg.samples)) for s in range(0, cfg.samples, SCAN_CHUNK)]
        jobs = [(cfg.seed, a, b, w) for a, b in bounds]
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            results = list(pool.map(_scan_chunk, jobs))
    rows, skipped, devs, inside, total = [], 0, [], 0, 0
    for start, res in sorted(results, key=lambda r: r[0]):
        rows.extend(_scan_rows(res, start))
        skipped += int(np.sum(~res["keep"]))
        kept = res["keep"]
        total += int(kept.sum())
        inside += int(np.sum(res["inside"][kept]))
        if kept.any():
            devs.append(float(np.max(res["deviation"][kept])))
    rows.sort(key=lambda r: r[0])
    rate = inside / total if total else float("nan")
    dev = max(devs) if devs else float("nan")
    summary = {"rows": len(rows), "skipped_singular": skipped, "containment_rate": rate, "max_two_path_deviation": dev}
    write_table(cfg, atlas.SCAN_COLUMNS, [r[1] for r in rows], summary)
    _info(f"rows={len(rows)} skipped_singular={skipped} containment_rate={rate!r} max_two_path_deviation={dev:.3e}")
    return 0


def cmd_classify(cfg: RunConfig) -> int:
    w = cfg.weights
    cols = ["v_minus", "v_plus", "r_minus", "r_plus", "h", "mu", "in_D", "H2", "C2x64", "edge_class"]
    if cfg.point is not None:
        x = cp3.CP3Point(_point(cfg))
        flags = cp3.singular_classify(x)
        if not flags.free:
            _info(f"point lies on the singular lines {', '.join(flags.lines())}")
            return 2
        try:
            d = atlas.p_closed_form(x, w)
        except ValueError as exc:
            _info(f"error: {exc}")
            return 2
        sp = atlas.special_set_detect(x, w, tol=1e-8)
        extra_cols = ["onT", "onQuadric", "onBranchLocus", "CliffordOrbit"]
        extra = [sp.onT, sp.onQuadric, sp.onBranchLocus, sp.CliffordOrbit]
    elif cfg.state is not None:
        v = _floats(cfg.state, 4, "--state")
        d = atlas.d_membership(*v, w)
        extra_cols, extra = [], []
    else:
        raise InputError("classify needs --point or --state")
    if not d.in_D:
        _info("point is not in D")
        return 2
    r = atlas.u_map(d)
    try:
        cls = atlas.classify(r, w).value
    except ValueError as exc:
        _info(f"error: {exc}")
        return 2
    row = [d.v_minus, d.v_plus, d.r_minus, d.r_plus, d.h, d.mu, d.in_D, r.H2, r.sixty_four_C2, cls] + extra
    write_table(cfg, cols + extra_cols, [row])
    return 0


def _perturbed_field(n: int, eps: float, seed: int) -> curves.AngleField:
    rng = np.random.default_rng(seed)
    a1, a2 = rng.integers(1, 3, size=2)
    ph = rng.uniform(0, 2 * np.pi, size=2)
    base = 1 / math.sqrt(2)
    return curves.AngleField.from_functions(
        n,
        lambda x, y: base * (1 + eps * np.sin(a1 * x + ph[0]) * np.cos(y)),
        lambda x, y: base * (1 + eps * np.cos(x + a2 * y + ph[1])),
    )


def cmd_pde_check(cfg: RunConfig) -> int:
    rows = []
    for n in (cfg.grid_n, 2 * cfg.grid_n, 4 * cfg.grid_n):
        a = _perturbed_field(n, cfg.amplitude, cfg.seed)
        res = curves.toda_pde_residual(a)
        flat = curves.flatness_residual(a)
        gap = np.max(np.abs(flat - curves.flatness_from_toda(res)))
        rows.append([n, a.hx, res.max_abs, float(np.max(flat)), float(gap), float(np.max(np.abs(curves.gauss_curvature(a))))])
    orders = [math.log2(rows[i][4] / rows[i + 1][4]) for i in range(2) if rows[i + 1][4] > 0]
    write_table(cfg, ["n", "h", "toda_residual_max", "flatness_max", "flatness_gap_max", "gauss_max"], rows, {"gap_order": orders})
    _info("flatness/Toda gap convergence order " + ", ".join(f"{o:.3f}" for o in orders))
    return 0


def cmd_reconstruct(cfg: RunConfig) -> int:
    s, p = _initial_state(cfg)
    w = cfg.weights
    try:
        traj = toda.integrate(s, p, cfg.dt, cfg.t_end)
        phi0 = curves.diagonalizing_frame(s, p, w)
        path = curves.reconstruct_u1_curve(traj.states, traj.ts, p, phi0)
    except ValueError as exc:
        _info(f"error: {exc}")
        return 2
    dev = float(np.max(np.abs(curves.path_p_values(path, w) - path.states)))
    unit = path.unitarity_defect()
    table = curves.frame_table(path)[:: max(1, cfg.stride // 2)]
    write_table(cfg, curves.FRAME_COLUMNS, table.tolist(), {"round_trip_deviation": dev, "unitarity_defect": unit})
    _info(f"round-trip deviation {dev:.3e}, unitarity defect {unit:.3e}")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    results = verify.run_all(cfg.seed, cfg.quick, cfg.inject_fault)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    if cfg.out_path:
        doc = {
            "meta": {"version": version_string(), "config": cfg.echo()},
            "results": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
        }
        Path(cfg.out_path).write_text(json.dumps(doc, indent=1) + "\n")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed: " + ", ".join(failed))
        return 1
    return 0


def cmd_flowlines(cfg: RunConfig) -> int:
    """Flow lines inside u^{-1}(l4), where v- = v+ and r- = r+."""
    w = cfg.weights
    eq, eq_p = toda.clifford_equilibrium(w)
    rng = np.random.default_rng(cfg.seed)
    z = atlas.sample_T(rng, w, cfg.samples)
    out = atlas.closed_form_array(z, w)
    good = out["in_D"]
    starts = np.vstack([eq.as_array()[None, :], out["p"][good]])
    c2 = np.concatenate([[eq_p.C2], out["C2"][good]])
    n_steps = int(round(cfg.t_end / cfg.dt))
    try:
        traj = toda.integrate_array(starts, c2, cfg.dt, n_steps, stride=cfg.stride, method=cfg.method)
    except toda.PositivityError as exc:
        _info(f"error: {exc}")
        return 2
    ts = cfg.dt * cfg.stride * np.arange(traj.shape[0])
    _, h2, c2s = toda.conserved_array(traj, c2)
    rows = []
    for line in range(starts.shape[0]):
        for i, t in enumerate(ts):
            rows.append([line, t, traj[i, line, 0], traj[i, line, 2], h2[i, line], 64 * c2s[i, line]])
    diag = float(np.max(np.abs(h2 - 64 * c2s) / np.maximum(1.0, h2)))
    write_table(cfg, ["line", "t", "v", "r", "H2", "C2x64"], rows, {"max_diagonal_defect": diag})
    _info(f"{starts.shape[0]} flow lines; max |H2 - 64C2|/H2 = {diag:.3e}")
    return 0


HANDLERS = {
    "integrate": cmd_integrate,
    "scan": cmd_scan,
    "classify": cmd_classify,
    "pde-check": cmd_pde_check,
    "reconstruct": cmd_reconstruct,
    "verify": cmd_verify,
    "flowlines": cmd_flowlines,
}


# ---------------------------------------------------------------- argv


def _summary(fn) -> Optional[str]:
    doc = (fn.__doc__ or "").strip()
    return doc.splitlines()[0] if doc else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toda-twistor", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values; explicit flags win")
    common.add_argument("--k", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--c2", type=float)
    common.add_argument("--mu", type=float)
    common.add_argument("--t-end", dest="t_end", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--stride", type=int, help="output every N-th step")
    common.add_argument("--method", choices=sorted(toda.STEPPERS))
    common.add_argument("--grid-n", dest="grid_n", type=int)
    common.add_argument("--amplitude", type=float, help="perturbation size for pde-check")
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--point", help="Z0re,Z0im,Z1re,Z1im,Z2re,Z2im,Z3re,Z3im")
    common.add_argument("--state", help="v_minus,v_plus,r_minus,r_plus")
    common.add_argument("--out", dest="out_path")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--quick", action="store_true", default=None)
    common.add_argument("--inject-fault", dest="inject_fault", choices=verify.FAULTS, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=_summary(HANDLERS[name]))
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    values = {}
    if ns.config:
        try:
            values.update(json.loads(Path(ns.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config: {exc}") from None
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - fields
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    for key, val in vars(ns).items():
        if key in fields and val is not None:
            values[key] = val
    values["command"] = ns.command
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        cfg = config_from_args(ns)
        return HANDLERS[cfg.command](cfg)
    except InputError as exc:
        _info(f"error: {exc}")
        return 2
    except BrokenPipeError:
        # downstream closed the pipe (e.g. `| head`); not an error of ours
        sys.stderr.close()
        return 0


if __name__ == "__main__":
    sys.exit(main())
