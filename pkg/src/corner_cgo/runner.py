"""Experiment orchestration: dispatch a config, write CSV reports and a manifest.

Each run writes ``<command>.csv`` and ``manifest.json`` into the output
directory. The CSV holds one row per (quantity, h); values are printed with
17 significant digits so two runs with the same config compare byte for
byte. The manifest records the config, the package version, grid
checksums, wall time per stage, every emitted value with its source and the
pass/fail state of each check.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .analytic import gamma_bound_sweep, incomplete_gamma_bound_check
from .cauchy import cauchy_apply
from .config import ExperimentConfig
from .corner import (
    MediumModel,
    corner_integral,
    rate_fit,
    sector_power_integral,
    sector_power_quadrature,
    sharp_constants,
    taylor_leading,
)
from .dbar import PotentialSpec, build_cgo, verify_smapping
from .errors import ConfigurationError, DomainError, NumericalError, PreconditionError
from .quadrature import build_sector_grid, fd_dbar, lp_norm
from .verdict import CornerSpec, classify, witness_cross_check

__all__ = ["EXIT_OK", "EXIT_VALIDATION", "EXIT_NUMERICAL", "EXIT_CHECK", "RunManifest", "run", "configure_threads"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

CSV_HEADER = ("quantity", "h", "re", "im", "abs", "predicted_exponent", "measured_slope")
VERDICT_HEADER = ("outcome", "item_tag", "reason")


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "nan" if math.isnan(x) else format(x, ".17g")


@dataclass(frozen=True)
class Row:
    quantity: str
    h: float | None
    value: complex
    predicted: float | None = None
    slope: float | None = None

    def cells(self) -> list[str]:
        v = complex(self.value)
        return [self.quantity, _fmt(self.h), _fmt(v.real), _fmt(v.imag), _fmt(abs(v)), _fmt(self.predicted), _fmt(self.slope)]


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str = __version__
    status: str = "RUNNING"
    exit_code: int | None = None
    threads: int = 1
    grid_checksums: dict = field(default_factory=dict)
    stage_seconds: dict = field(default_factory=dict)
    values: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    error: str | None = None

    def record(self, quantity: str, value, source: str, h: float | None = None) -> None:
        v = complex(value)
        self.values.append({"quantity": quantity, "h": h, "re": v.real, "im": v.imag, "source": source})

    def check(self, name: str, value: float, passed: bool, limit=None) -> None:
        self.checks[name] = {"value": value, "limit": limit, "passed": bool(passed)}

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True, allow_nan=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def configure_threads(threads: int = 0, serial: bool = False) -> int:
    """Set the worker count for compiled kernels; 0 means all available cores."""
    limit = numba.config.NUMBA_NUM_THREADS
    n = 1 if serial else (limit if threads == 0 else max(1, min(int(threads), limit)))
    numba.set_num_threads(n)
    return n


class _Context:
    """Mutable state of one run: rows, the manifest and the worker count."""

    def __init__(self, cfg: ExperimentConfig, manifest: RunManifest, threads: int):
        self.cfg = cfg
        self.manifest = manifest
        self.threads = threads
        self.rows: list[Row] = []
        self.verdict_rows: list[list[str]] = []

    def map_h(self, fn, hs):
        """Evaluate ``fn`` per h, concurrently when allowed; results keep the order of ``hs``."""
        if self.threads > 1 and len(hs) > 1:
            with ThreadPoolExecutor(max_workers=min(self.threads, len(hs))) as pool:
                return list(pool.map(fn, hs))
        return [fn(h) for h in hs]

    def stage(self, name: str):
        return _Stage(self.manifest, name)


class _Stage:
    def __init__(self, manifest: RunManifest, name: str):
        self.manifest, self.name = manifest, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.manifest.stage_seconds[self.name] = time.perf_counter() - self.t0
        return False


def _sweep_slope(hs, vals) -> float:
    mags = np.abs(np.asarray(vals, dtype=complex))
    if len(hs) < 2 or np.any(mags <= 0) or not np.all(np.isfinite(mags)):
        return float("nan")
    return float(np.polyfit(np.log(hs), np.log(mags), 1)[0])


def _grid(cfg: ExperimentConfig, resolution=None):
    nr, nt = resolution or cfg.grid_resolution
    return build_sector_grid(cfg.sector(), nr, nt, cfg.alpha)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_cgo_build(ctx: _Context) -> None:
    cfg = ctx.cfg
    with ctx.stage("grid"):
        grid = _grid(cfg)
    ctx.manifest.grid_checksums["sector_grid"] = grid.checksum()
    media = cfg.media_model()
    pot = media.potential() if media is not None else PotentialSpec.explicit(cfg.q)
    hs = cfg.h_grid

    def solve(h):
        t0 = time.perf_counter()
        sol = build_cgo(1.0, pot, cfg.phase(h), grid)
        return sol, time.perf_counter() - t0

    with ctx.stage("build_cgo"):
        results = ctx.map_h(solve, hs)
    sols = [s for s, _ in results]
    for h, (_, dt) in zip(hs, results):
        ctx.manifest.stage_seconds[f"build_cgo[h={h:g}]"] = dt
    lp1 = [s.norms["p1"].lp for s in sols]
    w1p2 = [s.norms["p2"].w1p for s in sols]
    slope_lp, slope_w1 = _sweep_slope(hs, lp1), _sweep_slope(hs, w1p2)
    tol = cfg.tolerances["residual"]
    for h, s in zip(hs, sols):
        ctx.rows += [
            Row("residual_rel", h, s.residual_rel),
            Row("iterations", h, s.iterations),
            Row(f"w_h_L{s.p1:g}", h, s.norms["p1"].lp, None, slope_lp),
            Row(f"w_h_L{s.p1:g}_times_h", h, s.norms["p1"].lp * h),
            Row(f"w_h_W1,{s.p2:g}", h, s.norms["p2"].w1p, None, slope_w1),
        ]
        ctx.manifest.record("residual_rel", s.residual_rel, "neumann-series+finite-difference", h)
        ctx.manifest.check(f"residual[h={h:g}]", s.residual_rel, s.residual_rel <= tol, tol)


def _predicted_corner_exponent(media: MediumModel, tl, alpha: float) -> float:
    return (tl.N + 1) / alpha if media.c1 != 0 else (tl.N0 + 2) / alpha


def _cmd_rate_sweep(ctx: _Context) -> None:
    cfg = ctx.cfg
    sector = cfg.sector()
    hs = cfg.h_grid
    r = cfg.rate
    if r["quantity"] == "moment":
        beta, n, j = r["beta"], r["n"], r["j"]
        pred = (beta + 2.0) / cfg.alpha
        with ctx.stage("quadrature"):
            vals = ctx.map_h(lambda h: sector_power_quadrature(beta, n, j, cfg.phase(h), sector, h), hs)
        closed = [sector_power_integral(beta, n, j, cfg.phase(h), sector, h) for h in hs]
        name = "moment"
        source = "quadrature"
        extra = [("moment_closed", closed, "closed-form")]
    else:
        media, v = cfg.media_model(), cfg.incident_model()
        tl = taylor_leading(v)
        pred = _predicted_corner_exponent(media, tl, cfg.alpha)
        with ctx.stage("grid"):
            grid = _grid(cfg)
        ctx.manifest.grid_checksums["sector_grid"] = grid.checksum()
        pot = media.potential()
        conj = r["j"] == 2

        def one(h):
            sol = build_cgo(1.0, pot, cfg.phase(h), grid, conjugate=conj)
            return corner_integral(media, v, sol)

        with ctx.stage("corner_integral"):
            vals = ctx.map_h(one, hs)
        name = "corner_integral"
        source = "neumann-series+grid-quadrature"
        extra = []
    rep = rate_fit(hs, vals, pred)
    for h, val in zip(hs, vals):
        ctx.rows.append(Row(name, h, val, pred, rep.slope))
        ctx.manifest.record(name, val, source, h)
    for qname, series, src in extra:
        for h, val in zip(hs, series):
            ctx.rows.append(Row(qname, h, val, pred))
            ctx.manifest.record(qname, val, src, h)
    tol = cfg.tolerances
    ctx.manifest.check("slope_relative_error", rep.relative_error, rep.relative_error <= tol["slope_rel"], tol["slope_rel"])
    ctx.manifest.check("slope_r_squared", rep.r_squared, rep.r_squared >= tol["r_squared"], tol["r_squared"])


def _cmd_constants(ctx: _Context) -> None:
    cfg = ctx.cfg
    media = cfg.media_model() or MediumModel(0.0, 0.0)
    tl = taylor_leading(cfg.incident_model())
    prm = cfg.phase()
    with ctx.stage("constants"):
        for th in cfg.theta0_grid():
            sector = cfg.sector().__class__(th, cfg.radius_a)
            sc = sharp_constants(tl, media, prm, sector)
            tag = f"@theta0={th:.17g}"
            pairs = {"C0": sc.C0, "C1": sc.C1pair, "C2": sc.C2pair}
            for key, pair in pairs.items():
                if pair is None:
                    continue
                for j, val in zip((1, 2), pair.values):
                    ctx.rows.append(Row(f"{key}_{j}{tag}", None, val))
                    ctx.manifest.record(f"{key}_{j}{tag}", val, "closed-form")
            for flag, val in sc.vanishing_flags.items():
                ctx.manifest.record(f"{flag}{tag}", 0 if val is None else float(val), "closed-form")


def _cmd_verdict(ctx: _Context) -> None:
    cfg = ctx.cfg
    media = cfg.media_model() or MediumModel(0.0, 0.0)
    incident = cfg.descriptor_model() or cfg.incident_model()
    verdict = classify(CornerSpec(cfg.theta0, media, incident))
    ctx.verdict_rows.append(verdict.csv_row())
    ctx.manifest.values.append({"quantity": "verdict", "outcome": verdict.outcome, "item_tag": verdict.item_tag, "reason": verdict.reason, "reference": verdict.reference, "source": "decision-table"})


def _cmd_witness(ctx: _Context) -> None:
    cfg = ctx.cfg
    w = cfg.witness_model()
    with ctx.stage("witness_cross_check"):
        rep = witness_cross_check(w, cfg.witness["n_samples"], cfg.witness["seed"], cfg.tolerances["witness"])
    for name, val in rep.residuals.items():
        ctx.rows.append(Row(name, None, val))
        ctx.manifest.record(name, val, "sampling")
        ctx.manifest.check(name, val, val <= rep.tol, rep.tol)
    ctx.manifest.record("k", w.k, "closed-form")
    ctx.manifest.check("classify_consistent", float(rep.classify_consistent), rep.classify_consistent)
    ctx.manifest.values.append({"quantity": "verdict", "outcome": rep.verdict.outcome, "reason": rep.verdict.reason, "source": "decision-table"})


def _cauchy_error(grid) -> float:
    c = 0.5 * grid.sector.radius_a
    f = grid.sample(lambda z: np.exp(-np.abs(z - c) ** 2 / (0.2 * grid.sector.radius_a) ** 2))
    return lp_norm(fd_dbar(cauchy_apply(f)) - f, 2) / lp_norm(f, 2)


def _cmd_verify_lemma(ctx: _Context) -> None:
    cfg = ctx.cfg
    tol = cfg.tolerances
    with ctx.stage("gamma_bound_sweep"):
        checks = [(c, incomplete_gamma_bound_check(c, tol["gamma_quad"])) for c in gamma_bound_sweep()]
    violations = 0
    for c, res in checks:
        tag = f"[b0={c.b0:g},b1={complex(c.b1).real:g},mu={complex(c.mu).real:g}{complex(c.mu).imag:+g}i,eps={c.eps:g}]"
        ctx.rows += [Row("gamma_lhs" + tag, None, res.lhs), Row("gamma_rhs" + tag, None, res.rhs)]
        ctx.manifest.record("gamma_lhs" + tag, res.lhs, "tanh-sinh-quadrature")
        violations += not res.holds
    ctx.manifest.check("gamma_bound_violations", violations, violations == 0, 0)

    nr, nt = cfg.lemma["cauchy_resolution"]
    coarse = ((nr // 2) // 4 * 4, nt // 2)
    with ctx.stage("cauchy_right_inverse"):
        g_fine = _grid(cfg, (nr, nt))
        g_coarse = _grid(cfg, coarse)
        e_fine, e_coarse = _cauchy_error(g_fine), _cauchy_error(g_coarse)
    ctx.manifest.grid_checksums["cauchy_fine"] = g_fine.checksum()
    ctx.manifest.grid_checksums["cauchy_coarse"] = g_coarse.checksum()
    ctx.rows += [Row(f"cauchy_error[{coarse[0]}x{coarse[1]}]", None, e_coarse), Row(f"cauchy_error[{nr}x{nt}]", None, e_fine)]
    ctx.manifest.record("cauchy_error", e_fine, "finite-difference")
    ctx.manifest.check("cauchy_error", e_fine, e_fine <= tol["cauchy"], tol["cauchy"])
    ratio = e_coarse / e_fine if e_fine > 0 else math.inf
    ctx.manifest.check("cauchy_refinement_ratio", ratio, ratio >= 1.5, 1.5)

    with ctx.stage("smapping"):
        grid = _grid(cfg)
        ctx.manifest.grid_checksums["sector_grid"] = grid.checksum()
        trend = verify_smapping(PotentialSpec.explicit(cfg.q), cfg.h_grid, cfg.lemma["smapping_p"], grid, cfg.alpha)
    for i, h in enumerate(trend.h):
        for jp, probe in enumerate(trend.probes):
            ctx.rows.append(Row(f"S_ratio[{probe}]", h, trend.lp_ratio[i, jp], 1.0, trend.lp_slope))
    lo, hi = tol["smapping_slope_min"], tol["smapping_slope_max"]
    ctx.manifest.record("smapping_slope", trend.lp_slope, "neumann-operator")
    ctx.manifest.check("smapping_slope", trend.lp_slope, lo <= trend.lp_slope <= hi, [lo, hi])


_COMMANDS = {
    "cgo-build": _cmd_cgo_build,
    "rate-sweep": _cmd_rate_sweep,
    "constants": _cmd_constants,
    "verdict": _cmd_verdict,
    "witness": _cmd_witness,
    "verify-lemma": _cmd_verify_lemma,
}


# ---------------------------------------------------------------------------
# output


def _sort_key(row: Row):
    return (row.quantity, -row.h if row.h is not None else 0.0)


def _write_outputs(ctx: _Context, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    cmd = ctx.cfg.command
    path = out / f"{cmd}.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        if cmd == "verdict":
            w.writerow(VERDICT_HEADER)
            w.writerows(ctx.verdict_rows)
        else:
            w.writerow(CSV_HEADER)
            # stable order: by quantity, then h from coarse to fine
            for row in sorted(ctx.rows, key=_sort_key):
                w.writerow(row.cells())
    mpath = out / "manifest.json"
    ctx.manifest.files = [path.name, mpath.name]
    mpath.write_text(ctx.manifest.to_json() + "\n", encoding="utf-8")


def run(cfg: ExperimentConfig, out_dir=None, threads: int | None = None, serial: bool = False) -> RunManifest:
    """Run one experiment and write its reports.

    Never raises for library errors: the manifest carries the status, the
    exit code and the originating error message.
    """
    n = configure_threads(cfg.threads if threads is None else threads, serial)
    manifest = RunManifest(command=cfg.command, config=cfg.to_dict(), threads=n)
    ctx = _Context(cfg, manifest, n)
    out = Path(out_dir if out_dir is not None else cfg.output_path)
    t0 = time.perf_counter()
    try:
        _COMMANDS[cfg.command](ctx)
    except (ConfigurationError, PreconditionError, DomainError) as exc:
        manifest.status, manifest.exit_code = "FAILED", EXIT_VALIDATION
        manifest.error = f"{type(exc).__name__}: {exc}"
    except NumericalError as exc:
        manifest.status, manifest.exit_code = "FAILED", EXIT_NUMERICAL
        manifest.error = f"{type(exc).__name__}: {exc}"
    else:
        ok = manifest.all_passed
        manifest.status = "OK" if ok else "CHECK-FAILED"
        manifest.exit_code = EXIT_OK if ok else EXIT_CHECK
    finally:
        manifest.stage_seconds["total"] = time.perf_counter() - t0
        _write_outputs(ctx, out)
    return manifest
