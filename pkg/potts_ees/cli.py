"""
potts-ees：平均場 Potts 模型上的 Equi-Energy Sampler 與 Metropolis 實驗驅動程式。

子命令：
    landscape    自由能 f 的網格（CSV）與局部極大值報告（JSON）
    stationary   精確的集總（lumped）平穩分佈與平衡類別的局部極值判定
    gap          Metropolis 集總核的譜隙與 Cheeger 夾擠檢查
    conductance  a0（或 a1）球的切割比例、提升切割界與指數衰減率擬合
    escape       EES 逃逸時間實驗（M0 與即時紀錄兩種模式）與自相關時間
    simulate     EES 軌跡（每 stride 個 sweep 記錄一次頂層座標的 m、能量與到 a0 的距離）
    selftest     小 N 的不變量檢查（失敗時回傳 1 並列出失敗項目）

透過 .env 或系統環境變數進行設定：
    - POTTS_EES_THREADS：平行工作數（亦可用 --threads）
    - POTTS_EES_OUT：輸出資料夾（亦可用 --out，預設 ./results）
    - POTTS_EES_SEED：主種子（亦可用 --seed）
    - POTTS_EES_LOG_LEVEL：記錄層級（預設 INFO）
    - POTTS_EES_EXPORT_KERNELS：gap 子命令是否一併輸出核矩陣 CSV

範例：
    potts-ees landscape --beta 2.0 2.9 3.0
    potts-ees conductance --n 30 60 90 120 150 --beta 2.9
    potts-ees escape --config experiments.toml --threads 4
    potts-ees simulate --n 48 --beta 2.9 --sweeps 100000 --stride 100 --seeds 0 1

回傳碼：0 成功；1 執行或不變量失敗；2 設定錯誤。
"""
from __future__ import annotations

import argparse
import logging
import math
import multiprocessing as mp
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv
from scipy.stats import linregress

from .config import ExperimentConfig, _env_bool, _env_value
from .errors import BallTooSmallError, ConfigError, PottsError, PremiseError
from .kernels import (
    balanced_class_profile,
    metropolis_kernel,
    stationary_distribution,
)
from .lattice import enumerate_lattice
from .model import (
    ModelParams,
    basin_radius,
    directional_second_derivative,
    find_local_maxima,
    landscape_grid,
)
from .oracles import spin_stationary_by_class
from .output import build_manifest, write_csv, write_json
from .samplers import (
    ReplicaSystem,
    escape_time,
    integrated_autocorrelation_time,
    make_rng,
    metropolis_chain,
    simulate,
)
from .selftest import CHECKS, run_selftest
from .spectral import (
    CutFamily,
    ConductanceReport,
    ball_cut_ratio,
    cheeger_check,
    family_cuts,
    fit_exponential_rate,
    lifted_cut_conductance_bound,
    relaxation_time,
    spectral_gap,
    standard_families,
)

logger = logging.getLogger("potts_ees")

ORACLE_MAX_N = 8
MODE_IDS = {"m0": 0, "live": 1}


# --- Logging ----------------------------------------------------------------
class MarkerFormatter(logging.Formatter):
    MARKERS = {logging.DEBUG: "[i]", logging.INFO: "[+]", logging.WARNING: "[!]", logging.ERROR: "[!]"}

    def format(self, record: logging.LogRecord) -> str:
        marker = self.MARKERS.get(record.levelno, "[!]")
        return f"{marker} {record.getMessage()}"


def setup_logging(level: str = "INFO") -> None:
    root = logging.getLogger("potts_ees")
    for h in list(root.handlers):
        root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(MarkerFormatter())
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
    root.propagate = False


# --- Worker pool ------------------------------------------------------------
def run_tasks(fn: Callable[[Any], Any], tasks: Sequence[Any], threads: int) -> List[Any]:
    """Apply fn to every task; a process pool when threads > 1, inline otherwise."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with mp.Pool(min(threads, len(tasks))) as pool:
        return pool.map(fn, tasks)


def _beta_tag(beta: float) -> str:
    return format(beta, "g")


def _beta_key(beta: float) -> int:
    return int(round(beta * 1_000_000))


# --- landscape --------------------------------------------------------------
def cmd_landscape(config: ExperimentConfig, args: argparse.Namespace) -> int:
    q = config.q
    for beta in config.betas:
        report = find_local_maxima(beta, q, grid=config.grid)
        manifest = build_manifest("landscape", config.to_dict(), {"beta": beta})
        pts, f = landscape_grid(beta, q, config.grid)
        header = [f"c{i + 1}" for i in range(q)] + ["f"]
        write_csv(
            config.out / f"landscape_beta{_beta_tag(beta)}.csv",
            header,
            (tuple(p) + (v,) for p, v in zip(pts, f)),
            manifest,
        )
        payload = report.to_dict()
        if q == 3:
            payload["h2_a0_axis"] = directional_second_derivative(0.0, beta)
        if report.center_status == "maximum":
            payload["basin_radius_a0"] = basin_radius(beta, np.full(q, 1.0 / q))
        write_json(config.out / f"maxima_beta{_beta_tag(beta)}.json", payload, manifest)
        logger.info(
            "beta=%s: %d maxima, balanced point %s", _beta_tag(beta), report.count, report.center_status
        )
    return 0


# --- stationary -------------------------------------------------------------
def _stationary_task(task: Tuple[int, float, int]) -> Dict[str, Any]:
    N, beta, q = task
    lattice = enumerate_lattice(N, q)
    pi = stationary_distribution(lattice, beta)
    profile = balanced_class_profile(pi)
    oracle_tv = None
    if N <= ORACLE_MAX_N and q ** N <= 50_000:
        oracle_tv = pi.total_variation(spin_stationary_by_class(lattice, beta))
    rows = [(*c, lw, p) for c, lw, p in zip(lattice.counts.tolist(), pi.log_weights, pi.probabilities)]
    return {
        "N": N, "beta": beta, "q": q, "classes": lattice.size,
        "log_normalizer": pi.log_normalizer, "rows": rows,
        "balanced_counts": "-".join(str(c) for c in profile.counts),
        "balanced_strict_max": profile.strict_max, "balanced_strict_min": profile.strict_min,
        "oracle_tv": oracle_tv,
    }


def cmd_stationary(config: ExperimentConfig, args: argparse.Namespace) -> int:
    q = config.q
    tasks = [(N, beta, q) for N in config.n_values for beta in config.betas]
    results = sorted(run_tasks(_stationary_task, tasks, config.threads), key=lambda r: (r["N"], r["beta"]))
    manifest = build_manifest("stationary", config.to_dict())
    header = [f"n{i + 1}" for i in range(q)] + ["log_weight", "probability"]
    for r in results:
        write_csv(config.out / f"stationary_N{r['N']}_beta{_beta_tag(r['beta'])}.csv", header, r["rows"], manifest)
    cols = ["N", "beta", "q", "classes", "log_normalizer", "balanced_counts",
            "balanced_strict_max", "balanced_strict_min", "oracle_tv"]
    write_csv(config.out / "stationary_summary.csv", cols, ([r[c] for c in cols] for r in results), manifest)
    failed = [r for r in results if r["oracle_tv"] is not None and r["oracle_tv"] > 1e-12]
    for r in failed:
        logger.error("N=%d beta=%s: stationary law differs from enumeration (TV %.3e)", r["N"], r["beta"], r["oracle_tv"])
    return 1 if failed else 0


# --- gap ----------------------------------------------------------------------
def _gap_task(task: Tuple[int, float, int, int, bool, Dict[str, Any]]) -> Dict[str, Any]:
    N, beta, q, dense_limit, export, config = task
    lattice = enumerate_lattice(N, q)
    kernel = metropolis_kernel(lattice, beta)
    pi = stationary_distribution(lattice, beta)
    gap = spectral_gap(kernel, pi, dense_limit=dense_limit)
    check = cheeger_check(kernel, pi, standard_families(lattice, pi, beta), gap=gap)
    if export:
        write_csv(
            Path(config["out"]) / f"kernel_metropolis_N{N}_beta{_beta_tag(beta)}.csv",
            ["row_index", "col_index", "probability"],
            kernel.to_rows(),
            build_manifest("gap", config, {"N": N, "beta": beta, "kernel": "metropolis"}),
        )
    return {
        "N": N, "beta": beta, "gap": gap, "relaxation_time": relaxation_time(gap),
        "phi_family": check.phi_family, "phi_exact": check.phi_exact,
        "cut_family": check.cut.family, "cut_radius": check.cut.radius, "cut_mass": check.cut.mass,
        "upper_ok": check.upper_ok, "lower_ok": check.lower_ok, "ok": check.ok,
    }


def cmd_gap(config: ExperimentConfig, args: argparse.Namespace) -> int:
    export = bool(getattr(args, "export_kernels", False))
    tasks = [(N, beta, config.q, config.dense_limit, export, config.to_dict())
             for N in config.n_values for beta in config.betas]
    results = sorted(run_tasks(_gap_task, tasks, config.threads), key=lambda r: (r["N"], r["beta"]))
    cols = ["N", "beta", "gap", "relaxation_time", "phi_family", "phi_exact", "cut_family",
            "cut_radius", "cut_mass", "upper_ok", "lower_ok"]
    manifest = build_manifest("gap", config.to_dict())
    write_csv(config.out / "gap.csv", cols, ([r[c] for c in cols] for r in results), manifest)
    bad = [r for r in results if not r["ok"]]
    for r in bad:
        logger.error(
            "Cheeger sandwich violated at N=%d beta=%s: gap=%.6g phi=%.6g", r["N"], r["beta"], r["gap"], r["phi_family"]
        )
    return 1 if bad else 0


# --- conductance --------------------------------------------------------------
def _center_for(beta: float, q: int, which: str) -> Optional[np.ndarray]:
    if which == "a0":
        return np.full(q, 1.0 / q)
    report = find_local_maxima(beta, q, grid=None)
    ordered = [m.point.as_array() for m in report.maxima if m.classification == "asymmetric"]
    if not ordered:
        return None
    # the maximum whose large coordinate is color 1
    return max(ordered, key=lambda x: x[0])


def _conductance_task(task: Tuple[int, float, int, str, float, float, float, int]) -> Dict[str, Any]:
    N, beta, q, which, epsilon, delta, d, dense_limit = task
    lattice = enumerate_lattice(N, q)
    pi = stationary_distribution(lattice, beta)
    center = _center_for(beta, q, which)
    out: Dict[str, Any] = {"N": N, "beta": beta, "ratio": None, "lifted_bound": None,
                           "premise_ok": None, "reach": None, "cuts": []}
    if center is None:
        return out
    try:
        out["ratio"] = ball_cut_ratio(pi, center, epsilon, delta)
    except BallTooSmallError as exc:
        logger.warning("N=%d beta=%s: %s", N, beta, exc)
        return out
    try:
        bound = lifted_cut_conductance_bound(pi, epsilon, delta, d=d, center=center)
        out.update(lifted_bound=bound.bound, premise_ok=True, reach=bound.max_reach_distance)
    except PremiseError as exc:
        logger.warning("N=%d beta=%s: %s", N, beta, exc)
        out["premise_ok"] = False
    kernel = metropolis_kernel(lattice, beta)
    gap = spectral_gap(kernel, pi, dense_limit=dense_limit) if lattice.size <= dense_limit else None
    for cut in family_cuts(kernel, pi, CutFamily.ball(lattice, center)):
        if cut.radius <= epsilon + 1e-12:
            out["cuts"].append((N, beta, cut.radius, cut.phi, cut.mass, gap))
    return out


def cmd_conductance(config: ExperimentConfig, args: argparse.Namespace) -> int:
    q = config.q
    for beta in config.betas:
        center = _center_for(beta, q, config.center)
        if center is None:
            logger.warning("beta=%s has no ordered maximum; skipping center %s", beta, config.center)
            continue
        radius = basin_radius(beta, center)
        if config.epsilon > radius:
            logger.warning(
                "epsilon=%.3g exceeds the radius %.3g within which f decreases from %s at beta=%s",
                config.epsilon, radius, config.center, beta,
            )
    tasks = [(N, beta, q, config.center, config.epsilon, config.delta, config.d, config.dense_limit)
             for beta in config.betas for N in config.n_values]
    results = sorted(run_tasks(_conductance_task, tasks, config.threads), key=lambda r: (r["beta"], r["N"]))

    report = ConductanceReport()
    for r in results:
        for row in r["cuts"]:
            report.add(*row)
    for beta in config.betas:
        series = [(r["N"], r["ratio"]) for r in results if r["beta"] == beta and r["ratio"]]
        if len(series) >= 4:
            report.fits[f"ball_ratio_beta{_beta_tag(beta)}"] = fit_exponential_rate(*zip(*series))
        bounds = [(r["N"], r["lifted_bound"]) for r in results if r["beta"] == beta and r["lifted_bound"]]
        if len(bounds) >= 4:
            report.fits[f"lifted_bound_beta{_beta_tag(beta)}"] = fit_exponential_rate(*zip(*bounds))

    manifest = build_manifest("conductance", config.to_dict())
    rows = report.sorted_rows()
    write_csv(
        config.out / "conductance.csv", ["N", "beta", "r", "phi", "pi_S", "gap"],
        ([r["N"], r["beta"], r["r"], r["phi"], r["pi_S"], r["gap"]] for r in rows), manifest,
    )
    cols = ["N", "beta", "ratio", "lifted_bound", "premise_ok", "reach"]
    write_csv(
        config.out / "ball_ratio.csv", ["N", "beta", "epsilon", "delta"] + cols[2:],
        ([r["N"], r["beta"], config.epsilon, config.delta] + [r[c] for c in cols[2:]] for r in results),
        manifest,
    )
    write_json(config.out / "fits.json", {k: v.to_dict() for k, v in report.fits.items()}, manifest)
    for r in results:
        tag = _beta_tag(r["beta"])
        part = ConductanceReport(fits={k: v for k, v in report.fits.items() if k.endswith(f"_beta{tag}")})
        for row in r["cuts"]:
            part.add(*row)
        payload = part.to_dict()
        payload.update({k: r[k] for k in ("N", "beta", "ratio", "lifted_bound", "premise_ok", "reach")})
        payload.update(center=config.center, epsilon=config.epsilon, delta=config.delta)
        write_json(config.out / f"conductance_N{r['N']}_beta{tag}.json", payload, manifest)
    for name, fit in sorted(report.fits.items()):
        logger.info("%s: rate=%.6g (R^2=%.6f)", name, fit.rate, fit.r_squared)
    return 0


# --- escape -------------------------------------------------------------------
def _escape_task(task: Tuple[int, float, int, str, str, int, int, float, float, int]) -> Dict[str, Any]:
    N, beta, seed, mode, rule, master, q, d, epsilon, max_sweeps = task
    rng = make_rng(master, N, _beta_key(beta), seed, MODE_IDS[mode])
    system = ReplicaSystem.create(N, beta, d=d, q=q, record=mode, rule=rule, seed=seed)
    t = escape_time(system, epsilon, max_sweeps, rng)
    if t is None:
        logger.debug("N=%d beta=%s seed=%d (%s): timeout at %d sweeps", N, beta, seed, mode, max_sweeps)
    return {"N": N, "beta": beta, "mode": mode, "seed": seed, "escape_sweeps": t, "timeout": t is None}


def _autocorr_task(task: Tuple[int, float, int, int, int, int]) -> Dict[str, Any]:
    N, beta, q, steps, master, dense_limit = task
    lattice = enumerate_lattice(N, q)
    series = metropolis_chain(lattice, beta, steps, make_rng(master, N, _beta_key(beta), 99))
    tau = integrated_autocorrelation_time(series)
    exact = None
    if lattice.size <= dense_limit:
        exact = relaxation_time(spectral_gap(metropolis_kernel(lattice, beta), stationary_distribution(lattice, beta)))
    return {"N": N, "beta": beta, "tau_int": tau, "relaxation_time": exact}


def _median(values: Iterable[Optional[int]]) -> float:
    vals = [math.inf if v is None else float(v) for v in values]
    return float(np.median(vals)) if vals else math.nan


def _loglog_slope(points: Sequence[Tuple[float, float]]) -> Optional[float]:
    pts = [(n, v) for n, v in points if v is not None and v > 0 and math.isfinite(v)]
    if len(pts) < 2:
        return None
    x, y = zip(*pts)
    return float(linregress(np.log(x), np.log(y)).slope)


def cmd_escape(config: ExperimentConfig, args: argparse.Namespace) -> int:
    modes = ["m0", "live"] if config.record == "both" else [config.record]
    tasks = [
        (N, beta, seed, mode, config.jump_rule, config.seed, config.q, config.d, config.epsilon, config.max_sweeps)
        for N in config.n_values for beta in config.betas for mode in modes for seed in config.seeds
    ]
    runs = sorted(
        run_tasks(_escape_task, tasks, config.threads),
        key=lambda r: (r["N"], r["beta"], r["mode"], r["seed"]),
    )
    manifest = build_manifest("escape", config.to_dict(), {"seeds": list(config.seeds)})
    cols = ["N", "beta", "mode", "seed", "escape_sweeps", "timeout"]
    write_csv(config.out / "escape_runs.csv", cols, ([r[c] for c in cols] for r in runs), manifest)

    summary = []
    for beta in config.betas:
        for mode in modes:
            prev = None
            for N in sorted(config.n_values):
                group = [r for r in runs if r["N"] == N and r["beta"] == beta and r["mode"] == mode]
                med = _median(r["escape_sweeps"] for r in group)
                ratio = None
                if prev is not None and N == 2 * prev[0] and math.isfinite(med) and math.isfinite(prev[1]):
                    ratio = med / prev[1]
                summary.append({
                    "N": N, "beta": beta, "mode": mode, "median": med,
                    "timeouts": sum(r["timeout"] for r in group), "runs": len(group), "doubling_ratio": ratio,
                })
                prev = (N, med)
    cols = ["N", "beta", "mode", "median", "timeouts", "runs", "doubling_ratio"]
    write_csv(config.out / "escape_summary.csv", cols, ([s[c] for c in cols] for s in summary), manifest)

    ac_tasks = [(N, beta, config.q, config.sweeps, config.seed, config.dense_limit)
                for N in config.n_values for beta in config.betas]
    ac = sorted(run_tasks(_autocorr_task, ac_tasks, config.threads), key=lambda r: (r["N"], r["beta"]))
    cols = ["N", "beta", "tau_int", "relaxation_time"]
    write_csv(config.out / "autocorrelation.csv", cols, ([r[c] for c in cols] for r in ac), manifest)
    slopes = {}
    for beta in config.betas:
        rows = [r for r in ac if r["beta"] == beta]
        slopes[_beta_tag(beta)] = {
            "tau_int_loglog_slope": _loglog_slope([(r["N"], r["tau_int"]) for r in rows]),
            "relaxation_loglog_slope": _loglog_slope([(r["N"], r["relaxation_time"]) for r in rows]),
        }
    write_json(config.out / "escape_fit.json", {"summary": summary, "autocorrelation": slopes}, manifest)
    for s in summary:
        logger.info(
            "N=%d beta=%s %s: median %s sweeps, %d/%d timeouts",
            s["N"], _beta_tag(s["beta"]), s["mode"], s["median"], s["timeouts"], s["runs"],
        )
    return 0


# --- simulate -----------------------------------------------------------------
def _simulate_task(task: Tuple[int, float, int, str, str, int, int, float, int, int]) -> Dict[str, Any]:
    N, beta, seed, mode, rule, master, q, d, sweeps, stride = task
    rng = make_rng(master, N, _beta_key(beta), seed, MODE_IDS[mode])
    traj = simulate(ModelParams(N=N, q=q, beta=beta), sweeps, stride, seed, d=d, record=mode, rule=rule, rng=rng)
    return {"N": N, "beta": beta, "mode": mode, "seed": seed, "header": traj.header, "rows": list(traj.rows())}


def cmd_simulate(config: ExperimentConfig, args: argparse.Namespace) -> int:
    modes = ["m0", "live"] if config.record == "both" else [config.record]
    tasks = [
        (N, beta, seed, mode, config.jump_rule, config.seed, config.q, config.d, config.sweeps, config.stride)
        for N in config.n_values for beta in config.betas for mode in modes for seed in config.seeds
    ]
    results = sorted(
        run_tasks(_simulate_task, tasks, config.threads),
        key=lambda r: (r["N"], r["beta"], r["mode"], r["seed"]),
    )
    for r in results:
        manifest = build_manifest(
            "simulate", config.to_dict(), {"N": r["N"], "beta": r["beta"], "mode": r["mode"], "run_seed": r["seed"]}
        )
        name = f"trajectory_N{r['N']}_beta{_beta_tag(r['beta'])}_{r['mode']}_seed{r['seed']}.csv"
        write_csv(config.out / name, r["header"], r["rows"], manifest)
    return 0


# --- selftest -----------------------------------------------------------------
def cmd_selftest(config: ExperimentConfig, args: argparse.Namespace) -> int:
    only = getattr(args, "only", None)
    results = run_selftest(only)
    failed = [r for r in results if not r.ok]
    for r in results:
        if r.ok:
            logger.info("%s: ok", r.name)
        else:
            logger.error("%s FAILED: %s", r.name, r.message)
    if failed:
        logger.error("selftest FAILED: %s", ", ".join(r.name for r in failed))
        return 1
    logger.info("selftest PASSED (%d checks)", len(results))
    return 0


COMMANDS: Dict[str, Callable[[ExperimentConfig, argparse.Namespace], int]] = {
    "landscape": cmd_landscape,
    "stationary": cmd_stationary,
    "gap": cmd_gap,
    "conductance": cmd_conductance,
    "escape": cmd_escape,
    "simulate": cmd_simulate,
    "selftest": cmd_selftest,
}


# --- Arguments ----------------------------------------------------------------
def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    load_dotenv()  # Load from .env if present
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML 設定檔路徑")
    common.add_argument("--seed", type=int, default=_env_value("POTTS_EES_SEED"),
                        help="主種子（亦可用環境變數 POTTS_EES_SEED）")
    common.add_argument("--out", type=Path, default=_env_value("POTTS_EES_OUT"),
                        help="輸出資料夾（亦可用環境變數 POTTS_EES_OUT；預設 ./results）")
    common.add_argument("--threads", type=int, default=_env_value("POTTS_EES_THREADS"),
                        help="平行工作數（亦可用環境變數 POTTS_EES_THREADS）")
    common.add_argument("--n", dest="n_values", type=int, nargs="+", help="N 列表")
    common.add_argument("--beta", dest="betas", type=float, nargs="+", help="beta 列表")
    common.add_argument("--q", type=int, help="顏色數（預設 3）")
    common.add_argument("--seeds", type=int, nargs="+", help="逃逸實驗的種子列表")
    common.add_argument("--epsilon", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--d", type=float, help="能帶密度，M = round(d N)")
    common.add_argument("--sweeps", type=int)
    common.add_argument("--stride", type=int, help="軌跡記錄間隔（sweep 數）")
    common.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    common.add_argument("--record", choices=["m0", "live", "both"])
    common.add_argument("--jump-rule", dest="jump_rule", choices=["tempered", "uniform"])
    common.add_argument("--center", choices=["a0", "a1"])
    common.add_argument("--log-level", default=_env_value("POTTS_EES_LOG_LEVEL", "INFO"),
                        help="記錄層級（亦可用環境變數 POTTS_EES_LOG_LEVEL）")

    parser = argparse.ArgumentParser(prog="potts-ees", description="平均場 Potts 模型 EES / Metropolis 實驗")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("landscape", "stationary", "conductance", "escape", "simulate"):
        sub.add_parser(name, parents=[common])
    gap = sub.add_parser("gap", parents=[common])
    gap.add_argument("--export-kernels", action="store_true",
                     default=_env_bool("POTTS_EES_EXPORT_KERNELS", False),
                     help="一併輸出核矩陣 CSV（亦可用環境變數 POTTS_EES_EXPORT_KERNELS=true 啟用）")
    st = sub.add_parser("selftest", parents=[common])
    st.add_argument("--only", nargs="+", choices=sorted(CHECKS), help="只執行指定的檢查")
    return parser.parse_args(argv)


OVERRIDE_KEYS = ("seed", "out", "threads", "n_values", "betas", "q", "seeds", "epsilon", "delta",
                 "d", "sweeps", "stride", "max_sweeps", "record", "jump_rule", "center")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        config = ExperimentConfig.from_toml(args.config, section=args.command)
    else:
        config = ExperimentConfig()
    config = config.with_overrides(**{k: getattr(args, k, None) for k in OVERRIDE_KEYS})
    return config.validate()


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    setup_logging(args.log_level)
    try:
        config = build_config(args)
    except ConfigError as exc:
        logger.error("設定錯誤：%s", exc)
        return 2
    try:
        return COMMANDS[args.command](config, args)
    except ConfigError as exc:
        logger.error("設定錯誤：%s", exc)
        return 2
    except PottsError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
