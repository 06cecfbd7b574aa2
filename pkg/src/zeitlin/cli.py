"""Command-line front end: simulate / convergence / bench / blobs / basis-check.

Heavy imports happen inside the command functions so that ``--threads`` can
pin BLAS and numba thread counts through the environment before numpy loads.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(fixed-point divergence or failed check), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "BenchReport",
    "ConfigError",
    "RunConfig",
    "load_config",
    "main",
    "run_basis_check",
    "run_bench",
    "run_blobs",
    "run_convergence",
    "run_simulate",
]

SCHEMA_VERSION = 1
INTEGRATORS = ("iso2", "rkmk1", "rkmk2", "midpoint", "strang")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: "object"
    n: int
    r: int
    dt: float
    t_final: float
    integrator: str
    n_trunc: int | None = None
    fp_tol: float = 1e-12
    fp_max_iters: int = 100
    diag_every: int = 1
    k_max: int = 5
    output_dir: str = "out"
    reference: str | None = None

    def validate(self) -> None:
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        if not (self.dt > 0):
            raise ConfigError("dt must be positive")
        if self.t_final < self.dt:
            raise ConfigError("T must be at least dt")
        if not (1 <= self.r <= self.n):
            raise ConfigError(f"rank must satisfy 1 <= r <= N, got r={self.r}, N={self.n}")
        if self.n_trunc is not None and not (0 < self.n_trunc <= self.n - 1):
            raise ConfigError(f"n_trunc must satisfy 0 < n_trunc <= N-1, got {self.n_trunc}")
        if self.diag_every < 1:
            raise ConfigError("diag_every must be at least 1")
        if self.k_max < 1:
            raise ConfigError("k_max must be at least 1")
        try:
            self.scenario.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        from dataclasses import asdict

        d = {
            "schema": SCHEMA_VERSION,
            "scenario": asdict(self.scenario),
            "N": self.n,
            "r": self.r,
            "n_trunc": self.n_trunc,
            "dt": self.dt,
            "T": self.t_final,
            "integrator": self.integrator,
            "fixed_point": {"tol": self.fp_tol, "max_iters": self.fp_max_iters},
            "diag_every": self.diag_every,
            "k_max": self.k_max,
            "output_dir": self.output_dir,
            "reference": self.reference,
        }
        return d


def config_from_dict(data: dict) -> RunConfig:
    from .scenarios import ScenarioSpec

    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if data.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema {data.get('schema')!r}")
    try:
        sdata = dict(data["scenario"])
        n = int(data["N"])
        if "n" in sdata and int(sdata.pop("n")) != n:
            raise ConfigError("scenario N disagrees with top-level N")
        if "spectrum_range" in sdata:
            sdata["spectrum_range"] = tuple(float(x) for x in sdata["spectrum_range"])
        scenario = ScenarioSpec(n=n, **sdata)
        cfg = RunConfig(
            scenario=scenario,
            n=n,
            r=int(data.get("r", n)),
            n_trunc=None if data.get("n_trunc") is None else int(data["n_trunc"]),
            dt=float(data["dt"]),
            t_final=float(data["T"]),
            integrator=str(data["integrator"]),
            fp_tol=float(data.get("fixed_point", {}).get("tol", 1e-12)),
            fp_max_iters=int(data.get("fixed_point", {}).get("max_iters", 100)),
            diag_every=int(data.get("diag_every", 1)),
            k_max=int(data.get("k_max", 5)),
            output_dir=str(data.get("output_dir", "out")),
            reference=data.get("reference"),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def _content_hash(obj) -> str:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _write_manifest(outdir: Path, command: str, cfg_dict: dict, outputs: list[str]) -> None:
    manifest = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "config": cfg_dict,
        "content_hash": _content_hash(cfg_dict),
        "outputs": outputs,
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


# -- simulate ----------------------------------------------------------------


@dataclass
class SimulationResult:
    records: list
    final_state: "object"
    output_dir: Path
    csv_path: Path
    checkpoint_path: Path


def _make_stepper(cfg: RunConfig, blocks, w0):
    """Initial state plus step/densify closures for the configured scheme."""
    import numpy as np

    from . import integrators as integ
    from .states import SpectralFactorization, truncated_eig

    fp = integ.FixedPointConfig(tol=cfg.fp_tol, max_iters=cfg.fp_max_iters)
    nt = cfg.n_trunc
    if cfg.integrator == "iso2":
        def step(w):
            return integ.iso2_step(w, cfg.dt, blocks, fp, nt)[0]

        return np.asarray(w0, dtype=np.complex128), step, lambda w: w

    fact0 = truncated_eig(w0, cfg.r)
    if cfg.integrator in ("rkmk1", "rkmk2"):
        tableau = integ.TABLEAUX["euler" if cfg.integrator == "rkmk1" else "heun"]

        def step(f):
            return SpectralFactorization(
                u=integ.rkmk_step(f.u, f.s, cfg.dt, blocks, tableau, nt), s=f.s
            )

    elif cfg.integrator == "midpoint":
        def step(f):
            return SpectralFactorization(
                u=integ.midpoint_stiefel_step(f.u, f.s, cfg.dt, blocks, fp, nt)[0], s=f.s
            )

    else:  # strang
        tableau = integ.TABLEAUX["heun"]

        def step(f):
            return integ.strang_step(f, cfg.dt, blocks, tableau, fp, nt)[0]

    return fact0, step, lambda f: f.reconstruct()


def run_simulate(cfg: RunConfig, snapshot_times=(), quiet: bool = True) -> SimulationResult:
    import numpy as np

    from .diagnostics import (
        DiagnosticsRecord,
        casimirs,
        csv_header,
        hamiltonian,
        record_to_csv_row,
        spectrum_drift,
    )
    from .quantization import render_field
    from .scenarios import make_initial_condition, scenario_hash
    from .states import save_checkpoint, sorted_eigenvalues
    from .stream import build_blocks

    cfg.validate()
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    blocks = build_blocks(cfg.n)
    w0 = make_initial_condition(cfg.scenario)
    ref_eigs = sorted_eigenvalues(w0)
    reference_state = None
    if cfg.reference:
        from .states import load_checkpoint

        reference_state, _ = load_checkpoint(cfg.reference)

    state, step, densify = _make_stepper(cfg, blocks, w0)
    n_steps = int(round(cfg.t_final / cfg.dt))
    if n_steps < 1:
        raise ConfigError("T/dt rounds to zero steps")

    snapshot_steps = sorted({min(n_steps, max(0, int(np.ceil(t / cfg.dt - 1e-12)))) for t in snapshot_times})
    records = []
    outputs = []
    clock = time.perf_counter()

    def observe(step_idx, state, final=False):
        nonlocal clock
        t = step_idx * cfg.dt
        wall_ms = (time.perf_counter() - clock) * 1e3
        clock = time.perf_counter()
        h = hamiltonian(state, blocks, cfg.n_trunc)
        cas = casimirs(state, cfg.k_max)
        eigs = sorted_eigenvalues(state, n=cfg.n)
        drift = spectrum_drift(ref_eigs, state)
        frob = None
        if final and reference_state is not None:
            from .diagnostics import frobenius_error

            frob = frobenius_error(state, reference_state)
        records.append(
            DiagnosticsRecord(
                time=t,
                hamiltonian=h,
                hamiltonian_normalized=h * cfg.n / (4.0 * np.pi),
                casimirs=cas,
                eigenvalues=eigs,
                eig_drift=drift,
                frobenius_error_vs_reference=frob,
                wall_ms=wall_ms,
            )
        )

    def snapshot(step_idx, state):
        grid = render_field(densify(state), 65, 128)
        name = f"field_{step_idx:08d}.bin"
        header = {
            "n_theta": grid.n_theta,
            "n_phi": grid.n_phi,
            "time": step_idx * cfg.dt,
            "layout": "row-major",
            "dtype": "float64",
        }
        with open(outdir / name, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
            fh.write(b"\n")
            fh.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())
        outputs.append(name)

    observe(0, state)
    if 0 in snapshot_steps:
        snapshot(0, state)
    for k in range(1, n_steps + 1):
        state = step(state)
        if k == n_steps or k % cfg.diag_every == 0:
            observe(k, state, final=(k == n_steps))
        if k in snapshot_steps:
            snapshot(k, state)

    csv_path = outdir / "diagnostics.csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_header(cfg.k_max) + "\n")
        seen = set()
        for rec in records:
            if rec.time in seen:
                continue
            seen.add(rec.time)
            fh.write(record_to_csv_row(rec) + "\n")
    outputs.append(csv_path.name)

    ckpt_path = outdir / "final.ckpt"
    save_checkpoint(ckpt_path, state, scenario_hash=scenario_hash(cfg.scenario))
    outputs.append(ckpt_path.name)
    _write_manifest(outdir, "simulate", cfg.to_dict(), outputs)

    if not quiet:
        print(f"simulate: {n_steps} steps, wrote {csv_path}")
    return SimulationResult(
        records=records,
        final_state=state,
        output_dir=outdir,
        csv_path=csv_path,
        checkpoint_path=ckpt_path,
    )


# -- reference solutions -----------------------------------------------------


def compute_reference(scenario, n, t_final, dt_ref, outdir: Path, n_trunc=None):
    """Dense RK4 reference at a fine step, cached by manifest hash."""
    import numpy as np

    from .integrators import rk4_step
    from .scenarios import make_initial_condition, scenario_hash
    from .states import load_checkpoint, save_checkpoint
    from .stream import build_blocks

    key = _content_hash(
        {
            "scenario": scenario_hash(scenario),
            "N": n,
            "T": t_final,
            "dt_ref": dt_ref,
            "n_trunc": n_trunc,
            "method": "rk4",
        }
    )[:16]
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"reference_{key}.ckpt"
    if path.exists():
        state, header = load_checkpoint(path)
        if header.get("scenario_hash") == key:
            return np.asarray(state), path
    blocks = build_blocks(n)
    w = make_initial_condition(scenario)
    n_steps = int(round(t_final / dt_ref))
    for _ in range(n_steps):
        w = rk4_step(w, dt_ref, blocks, n_trunc)
    save_checkpoint(path, w, scenario_hash=key)
    return w, path


# -- convergence -------------------------------------------------------------


@dataclass
class ConvergenceResult:
    rows: list
    orders: dict
    reference_path: Path


def run_convergence(cfg: RunConfig, dts, integrators=("iso2",), quiet=True) -> ConvergenceResult:
    import numpy as np

    from dataclasses import replace

    from .diagnostics import frobenius_error

    cfg.validate()
    dts = sorted(float(d) for d in dts)
    if len(dts) < 3:
        raise ConfigError("convergence needs at least 3 time steps")
    ratios = [dts[i + 1] / dts[i] for i in range(len(dts) - 1)]
    if max(ratios) / min(ratios) > 1.2:
        raise ConfigError("time steps must form a geometric ladder")
    for name in integrators:
        if name not in INTEGRATORS:
            raise ConfigError(f"unknown integrator {name!r}")

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    if cfg.reference:
        from .states import load_checkpoint

        ref, ref_path = load_checkpoint(cfg.reference)[0], Path(cfg.reference)
    else:
        ref, ref_path = compute_reference(
            cfg.scenario, cfg.n, cfg.t_final, min(dts) / 100.0, outdir, cfg.n_trunc
        )
    ref_norm = float(np.linalg.norm(ref))

    rows = []
    orders = {}
    for name in integrators:
        errors = []
        for dt in dts:
            sub = replace(
                cfg,
                integrator=name,
                dt=dt,
                output_dir=str(outdir / f"run_{name}_{dt:.6g}"),
                reference=None,
                diag_every=10**9,
            )
            res = run_simulate(sub)
            err = frobenius_error(res.final_state, ref)
            errors.append(err)
            rows.append({"integrator": name, "dt": dt, "error": err})
        if max(errors) < 1e-12 * max(ref_norm, 1.0):
            orders[name] = float("nan")  # stationary case: slope not applicable
        else:
            slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
            orders[name] = slope
        if not quiet:
            print(f"{name}: errors={errors} slope={orders[name]}")

    csv_path = outdir / "convergence.csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("integrator,dt,error\n")
        for row in rows:
            fh.write(f"{row['integrator']},{row['dt']:.17g},{row['error']:.17g}\n")
    with open(outdir / "orders.json", "w", encoding="utf-8") as fh:
        json.dump(orders, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(outdir, "convergence", cfg.to_dict(), [csv_path.name, "orders.json"])
    return ConvergenceResult(rows=rows, orders=orders, reference_path=ref_path)


# -- bench -------------------------------------------------------------------


@dataclass(frozen=True)
class BenchReport:
    kind: str
    sizes: tuple
    runtimes: tuple
    slope: float
    r_squared: float


BENCH_KINDS = ("stream", "stream-truncated", "iso2", "rkmk2", "midpoint")


def _bench_state(n, seed=1234):
    import numpy as np

    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    w = 0.5 * (g - g.conj().T)
    w *= 0.1 / np.linalg.norm(w, 2)  # tame spectral radius: few fixed-point iters
    return w


def _bench_frame(n, r, seed=1234):
    import numpy as np

    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    q = np.linalg.qr(g)[0]
    mu = 0.1 * np.linspace(1.0, 0.5, r) * (-1.0) ** np.arange(r)
    return q, np.diag(1j * mu)


def run_bench(kind: str, sizes, reps: int = 3, fixed_r: int = 8, n_trunc: int = 8) -> BenchReport:
    import numpy as np

    from . import integrators as integ
    from .stream import build_blocks, solve_stream, solve_stream_truncated

    if kind not in BENCH_KINDS:
        raise ConfigError(f"unknown bench kind {kind!r}; choose from {BENCH_KINDS}")
    sizes = sorted(int(s) for s in sizes)
    if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("bench needs at least 2 strictly increasing sizes")
    if reps < 1:
        raise ConfigError("reps must be at least 1")

    runtimes = []
    for n in sizes:
        blocks = build_blocks(n)
        if kind in ("stream", "stream-truncated"):
            w = _bench_state(n)
            out = np.zeros((n, n), dtype=np.complex128)
            nt = min(n_trunc, n - 1)
            if kind == "stream":
                op = lambda: solve_stream(blocks, w, out=out)
            else:
                op = lambda: solve_stream_truncated(blocks, w, nt, out=out)
        elif kind == "iso2":
            w = _bench_state(n)
            fp = integ.FixedPointConfig(tol=1e-10, max_iters=50)
            op = lambda: integ.iso2_step(w, 1e-4, blocks, fp)
        elif kind == "rkmk2":
            u, s = _bench_frame(n, min(fixed_r, n))
            op = lambda: integ.rkmk_step(u, s, 1e-4, blocks, integ.TABLEAUX["heun"])
        else:  # midpoint
            u, s = _bench_frame(n, min(fixed_r, n))
            fp = integ.FixedPointConfig(tol=1e-10, max_iters=50)
            op = lambda: integ.midpoint_stiefel_step(u, s, 1e-4, blocks, fp)
        op()  # warmup (includes kernel compilation on first use)
        t0 = time.perf_counter()
        op()
        once = time.perf_counter() - t0
        # batch fast operations so each sample outlasts scheduler jitter
        inner = max(1, int(np.ceil(0.04 / max(once, 1e-9))))
        samples = []
        for _ in range(reps):
            t0 = time.perf_counter()
            for _ in range(inner):
                op()
            samples.append((time.perf_counter() - t0) / inner)
        runtimes.append(float(np.median(samples)))

    logx = np.log(np.asarray(sizes, dtype=float))
    logy = np.log(np.asarray(runtimes))
    slope, intercept = np.polyfit(logx, logy, 1)
    fitted = slope * logx + intercept
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return BenchReport(
        kind=kind,
        sizes=tuple(sizes),
        runtimes=tuple(runtimes),
        slope=float(slope),
        r_squared=r2,
    )


# -- blobs -------------------------------------------------------------------


@dataclass
class BlobsResult:
    table: dict
    table_path: Path
    finals: dict
    reference: "object" 


def run_blobs(cfg: RunConfig, quiet=True) -> BlobsResult:
    import numpy as np

    from dataclasses import replace

    from .diagnostics import casimirs, frobenius_error

    cfg.validate()
    if cfg.scenario.kind != "vortex-blobs":
        raise ConfigError("blobs command needs a vortex-blobs scenario")
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    ref, _ = compute_reference(cfg.scenario, cfg.n, cfg.t_final, cfg.dt / 100.0, outdir)

    finals = {}
    columns = {
        "zeitlin_iso2": replace(cfg, integrator="iso2", output_dir=str(outdir / "col_iso2")),
        "rec_fixed_core": replace(cfg, integrator="rkmk2", output_dir=str(outdir / "col_rkmk2")),
        "rec_timedep_core": replace(cfg, integrator="strang", output_dir=str(outdir / "col_strang")),
    }
    table = {}
    for name, sub in columns.items():
        t0 = time.perf_counter()
        res = run_simulate(sub)
        runtime = time.perf_counter() - t0
        h0 = res.records[0].hamiltonian
        h_drift = max(abs(rec.hamiltonian - h0) for rec in res.records)
        cas0 = res.records[0].casimirs
        cas_drift = max(
            float(np.max(np.abs(rec.casimirs - cas0))) for rec in res.records
        )
        finals[name] = res.final_state
        table[name] = {
            "frobenius_error_vs_reference": frobenius_error(res.final_state, ref),
            "hamiltonian_drift_normalized": h_drift * cfg.n / (4.0 * np.pi),
            "casimir_drift_max": cas_drift,
            "runtime_s": runtime,
        }
        if not quiet:
            print(name, table[name])

    table_path = outdir / "blobs_table.csv"
    metrics = [
        "frobenius_error_vs_reference",
        "hamiltonian_drift_normalized",
        "casimir_drift_max",
        "runtime_s",
    ]
    with open(table_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("metric," + ",".join(columns.keys()) + "\n")
        for metric in metrics:
            vals = ",".join(f"{table[c][metric]:.17g}" for c in columns)
            fh.write(f"{metric},{vals}\n")
    _write_manifest(outdir, "blobs", cfg.to_dict(), [table_path.name])
    return BlobsResult(table=table, table_path=table_path, finals=finals, reference=ref)


# -- basis check -------------------------------------------------------------


def run_basis_check(sizes=(8, 16), ortho_tol=1e-10, lap_tol=1e-9, quiet=False) -> bool:
    import numpy as np

    from .quantization import basis_diagonal
    from .stream import apply_laplacian, build_blocks, solve_stream

    ok = True
    for n in sizes:
        worst_ortho = 0.0
        scale = 4.0 * np.pi / n
        for m in range(-(n - 1), n):
            ells = list(range(abs(m), n))
            rows = np.stack([basis_diagonal(n, ell, m) for ell in ells])
            gram = scale * (rows @ rows.T)
            worst_ortho = max(worst_ortho, float(np.max(np.abs(gram - np.eye(len(ells))))))
        worst_lap = 0.0
        for ell in range(n):
            for m in range(-ell, ell + 1):
                from .quantization import basis_matrix

                t = basis_matrix(n, (ell, m)).dense()
                if ell == 0:
                    resid = float(np.linalg.norm(apply_laplacian(t)))
                else:
                    resid = float(
                        np.linalg.norm(apply_laplacian(t) + ell * (ell + 1) * t)
                        / (ell * (ell + 1))
                    )
                worst_lap = max(worst_lap, resid)
        blocks = build_blocks(n)
        eye_resid = float(np.linalg.norm(solve_stream(blocks, 1j * np.eye(n))))
        passed = worst_ortho < ortho_tol and worst_lap < lap_tol and eye_resid == 0.0
        ok = ok and passed
        if not quiet:
            status = "ok" if passed else "FAIL"
            print(
                f"N={n}: orthonormality dev {worst_ortho:.3e}, "
                f"Laplacian residual {worst_lap:.3e}, kernel {eye_resid:.3e} [{status}]"
            )
    return ok


# -- argument parsing --------------------------------------------------------


def _parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zeitlin", description=__doc__)
    parser.add_argument("--threads", type=int, default=None, help="pin BLAS/numba thread count")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--snapshot-times", type=_parse_float_list, default=[])

    p = sub.add_parser("convergence", help="error vs dt study against a fine reference")
    p.add_argument("--config", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dts", type=_parse_float_list, required=True)
    p.add_argument("--integrators", default="iso2,rkmk1,rkmk2,strang")

    p = sub.add_parser("bench", help="runtime scaling exponents")
    p.add_argument("--kind", required=True, choices=BENCH_KINDS)
    p.add_argument("--sizes", type=_parse_int_list, required=True)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--fixed-r", type=int, default=8)
    p.add_argument("--n-trunc", type=int, default=8)
    p.add_argument("--output", default=None)

    p = sub.add_parser("blobs", help="three-column vortex-blob comparison table")
    p.add_argument("--config", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("basis-check", help="verify basis orthonormality and Laplacian identity")
    p.add_argument("--sizes", type=_parse_int_list, default=[8, 16])
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    from dataclasses import replace

    if getattr(args, "output", None):
        cfg = replace(cfg, output_dir=args.output)
    if getattr(args, "seed", None) is not None:
        scenario = replace(cfg.scenario, seed=args.seed)
        cfg = replace(cfg, scenario=scenario)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .integrators import FixedPointDivergenceError

    try:
        if args.command == "simulate":
            cfg = _apply_overrides(load_config(args.config), args)
            run_simulate(cfg, snapshot_times=args.snapshot_times, quiet=False)
        elif args.command == "convergence":
            cfg = _apply_overrides(load_config(args.config), args)
            run_convergence(
                cfg, args.dts, integrators=[s.strip() for s in args.integrators.split(",")], quiet=False
            )
        elif args.command == "bench":
            report = run_bench(args.kind, args.sizes, args.reps, args.fixed_r, args.n_trunc)
            print(json.dumps(report.__dict__, indent=2, default=list))
            if args.output:
                outdir = Path(args.output)
                outdir.mkdir(parents=True, exist_ok=True)
                name = f"bench_{args.kind}.json"
                with open(outdir / name, "w") as fh:
                    json.dump(report.__dict__, fh, indent=2, default=list)
                bench_cfg = {
                    "kind": args.kind,
                    "sizes": args.sizes,
                    "reps": args.reps,
                    "fixed_r": args.fixed_r,
                    "n_trunc": args.n_trunc,
                }
                _write_manifest(outdir, "bench", bench_cfg, [name])
        elif args.command == "blobs":
            cfg = _apply_overrides(load_config(args.config), args)
            run_blobs(cfg, quiet=False)
        elif args.command == "basis-check":
            if not run_basis_check(args.sizes):
                return 3
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FixedPointDivergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
