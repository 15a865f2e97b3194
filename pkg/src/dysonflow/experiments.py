"""Config-driven experiments, manifests and byte-level replay."""
from __future__ import annotations

import copy
import hashlib
import json
import math
import shutil
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from . import equilibrium as eq
from . import mean_field as mf
from . import particles as pt
from . import potentials as pots
from .free_energy import free_entropy
from .matrix import MatrixState, run_matrix_trials
from .measures import bump_density, to_quantiles, wasserstein
from .series import MetricSeries
from .transforms import burgers_residual

STOCHASTIC = {"gdbm_run", "matrix_crosscheck"}

DEFAULT_TOLERANCES = {
    "sigma_rule": 3.0,
    "el_residual": 5e-3,
    "mass": 1e-8,
    "refine_ratio": 0.65,
    "envelope": 0.05,
    "burgers": 1e-3,
    "monotone": 1e-6,
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ReproducibilityError(RuntimeError):
    def __init__(self, file: str, row: int | None, message: str = ""):
        where = f"{file}" + (f", row {row}" if row is not None else "")
        super().__init__(f"replay mismatch in {where}{': ' + message if message else ''}")
        self.file = file
        self.row = row


@dataclass
class ExperimentConfig:
    """Flat experiment schema; kind-specific knobs live in ``params``."""

    kind: str
    potential: dict = field(default_factory=lambda: {"kind": "quadratic", "theta": 0.5})
    n: int = 100
    beta: float = 2.0
    dt: float = 1e-3
    T: float = 1.0
    checkpoints: list = field(default_factory=list)
    seed: int | None = None
    output: str = "out"
    trials: int = 1
    thread_count: int = 1
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError("kind", f"unknown experiment kind {self.kind!r}")
        for name in ("dt", "T", "beta"):
            val = getattr(self, name)
            if not isinstance(val, (int, float)) or isinstance(val, bool) or not val > 0:
                raise ConfigError(name, "must be a positive number")
        for name in ("n", "trials", "thread_count"):
            val = getattr(self, name)
            if not isinstance(val, int) or isinstance(val, bool) or val < 1:
                raise ConfigError(name, "must be a positive integer")
        if not isinstance(self.checkpoints, list):
            raise ConfigError("checkpoints", "must be a list")
        for k, t in enumerate(self.checkpoints):
            if not isinstance(t, (int, float)) or not 0 < t <= self.T:
                raise ConfigError(f"checkpoints[{k}]", "must lie in (0, T]")
        if sorted(self.checkpoints) != list(self.checkpoints):
            raise ConfigError("checkpoints", "must be increasing")
        if self.kind in STOCHASTIC and not isinstance(self.seed, int):
            raise ConfigError("seed", "an integer seed is required for stochastic kinds")
        if not isinstance(self.potential, dict):
            raise ConfigError("potential", "must be a mapping")
        try:
            pots.from_spec(self.potential)
        except KeyError as exc:
            raise ConfigError(f"potential.{exc.args[0]}", "missing parameter") from None
        except (ValueError, TypeError) as exc:
            where = f"potential.{exc.param}" if hasattr(exc, "param") else "potential"
            raise ConfigError(where, str(exc)) from None
        for k in self.tolerances:
            if k not in DEFAULT_TOLERANCES:
                raise ConfigError(f"tolerances.{k}", "unknown tolerance")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a mapping")
        known = set(cls.__dataclass_fields__)
        for k in data:
            if k not in known:
                raise ConfigError(k, "unknown field")
        if "kind" not in data:
            raise ConfigError("kind", "missing")
        return cls(**copy.deepcopy(data)).validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def v(self) -> pots.Potential:
        return pots.from_spec(self.potential)


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None

    def to_dict(self) -> dict:
        return {"status": "PASS" if self.passed else "FAIL", "value": _num(self.value),
                "threshold": _num(self.threshold)}


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


@dataclass
class RunResult:
    series: dict[str, MetricSeries | str]
    checks: list[Check]
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def git_blob_hash(data: bytes) -> str:
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


# ---------------------------------------------------------------- kinds


def _initial_positions(n: int, init: dict) -> np.ndarray:
    shape = init.get("shape", "cluster")
    width = float(init.get("width", 0.05))
    center = float(init.get("center", 0.0))
    if shape == "cluster":
        return center + np.linspace(-width, width, n)
    if shape == "semicircle":
        return to_quantiles(bump_density(center, width), n).values.copy()
    raise ConfigError("params.init.shape", f"unknown initial shape {shape!r}")


def _times(cfg: ExperimentConfig) -> list[float]:
    return sorted({*map(float, cfg.checkpoints), float(cfg.T)})


def _steps(cfg: ExperimentConfig, t: float) -> int:
    return int(round(t / cfg.dt))


def run_gdbm(cfg: ExperimentConfig) -> RunResult:
    v = cfg.v()
    init = pt.ParticleState(_initial_positions(cfg.n, cfg.params.get("init", {})), 0.0, cfg.beta)
    steps = _steps(cfg, cfg.T)
    save_times = _times(cfg)
    save_steps = [_steps(cfg, t) for t in save_times]
    every = math.gcd(*save_steps) if save_steps else steps
    sim = pt.SimConfig(dt=cfg.dt, steps=steps, seed=cfg.seed, thread_count=cfg.thread_count)
    trajs = pt.run_trials(init, v, sim, cfg.trials, save_every=every)

    m2 = np.array([[np.mean(s ** 2) / 2 for s in tr.positions] for tr in trajs])
    times = trajs[0].times
    moment = MetricSeries("moment", ["t", "mean", "se", "ode"])
    m0 = m2[0, 0]
    ode = pt.moment_ode(m0, cfg.beta, cfg.n, times)
    se = m2.std(axis=0, ddof=1) / math.sqrt(cfg.trials) if cfg.trials > 1 else np.zeros(times.size)
    for k, t in enumerate(times):
        moment.append(t, m2[:, k].mean(), se[k], ode[k])

    checks = [Check("sorted_finite", all(np.all(np.diff(tr.positions, axis=1) > 0) for tr in trajs))]
    if v.kind == "quadratic" and v.params["theta"] == 0.5 and cfg.trials > 1:
        k_rule = cfg.tol("sigma_rule")
        for t in cfg.checkpoints:
            k = int(np.argmin(np.abs(times - t)))
            z = abs(m2[:, k].mean() - ode[k]) / se[k]
            checks.append(Check(f"moment_identity_t{t:g}", z <= k_rule, z, k_rule))
    series = {"moment": moment, "trajectory_trial0": trajs[0].to_csv()}
    return RunResult(series, checks)


def run_matrix_crosscheck(cfg: ExperimentConfig) -> RunResult:
    v = cfg.v()
    if cfg.beta not in (1, 2):
        raise ConfigError("beta", "matrix cross-check supports beta 1 or 2")
    steps = _steps(cfg, cfg.T)
    beta = int(cfg.beta)
    mat = np.array(run_matrix_trials(MatrixState.zeros(cfg.n, beta), v, cfg.dt, steps, cfg.trials,
                                     cfg.seed, cfg.thread_count))
    init = pt.ParticleState(_initial_positions(cfg.n, cfg.params.get("init", {"width": 1e-3})), 0.0, cfg.beta)
    sim = pt.SimConfig(dt=cfg.dt, steps=steps, seed=cfg.seed + cfg.trials, thread_count=cfg.thread_count)
    par = np.array(pt.run_trials(init, v, sim, cfg.trials, save_every=steps,
                                 reducer=lambda tr: tr.positions[-1]))
    k_rule = cfg.tol("sigma_rule")
    out = MetricSeries("spectral_moments", ["t", "k", "matrix_mean", "matrix_se", "particle_mean",
                                            "particle_se", "z"], strict=False)
    checks = []
    for k in range(1, 5):
        a = np.mean(mat ** k, axis=1)
        b = np.mean(par ** k, axis=1)
        sa, sb = a.std(ddof=1) / math.sqrt(a.size), b.std(ddof=1) / math.sqrt(b.size)
        z = abs(a.mean() - b.mean()) / math.hypot(sa, sb)
        out.append(cfg.T, k, a.mean(), sa, b.mean(), sb, z)
        checks.append(Check(f"moment_{k}", z <= k_rule, z, k_rule))
    return RunResult({"spectral_moments": out}, checks)


def _mf_initial(cfg: ExperimentConfig, spec: dict, v) -> mf.MeanFieldState:
    shape = spec.get("shape", "bump")
    if shape == "bump":
        mu = bump_density(float(spec.get("center", 0.0)), float(spec.get("width", 0.2)))
    elif shape == "equilibrium":
        mu = eq.equilibrium_density(v)
    else:
        raise ConfigError("params.init.shape", f"unknown initial shape {shape!r}")
    return mf.from_measure(mu, cfg.n, v)


def run_mean_field_decay(cfg: ExperimentConfig) -> RunResult:
    v = cfg.v()
    mu_eq = eq.equilibrium_density(v)
    s0 = _mf_initial(cfg, cfg.params.get("init", {}), v)
    tol = cfg.tol("envelope")
    series, _ = mf.decay_experiment(s0, v, cfg.checkpoints, mu_eq, q=cfg.n, tol=tol)
    checks = []
    w0, s0_rel = series.rows[0][1], series.rows[0][3]
    for t, w, wb, rel, sb in series.rows[1:]:
        checks.append(Check(f"w2_ratio_t{t:g}", w <= wb * (1 + tol), w / w0, wb / w0 * (1 + tol)))
        checks.append(Check(f"sigma_ratio_t{t:g}", rel <= sb * (1 + tol), rel / s0_rel,
                            sb / s0_rel * (1 + tol)))
    return RunResult({"decay": series}, checks)


def run_contraction(cfg: ExperimentConfig) -> RunResult:
    v = cfg.v()
    p = cfg.params
    width = float(p.get("width", 0.2))
    centers = p.get("centers", [-0.5, 0.5])
    tol = cfg.tol("envelope")
    mu1 = bump_density(float(centers[0]), width)
    mu2 = bump_density(float(centers[1]), width)
    series, passed = mf.contraction_experiment(mu1, mu2, v, cfg.T, cfg.checkpoints, q=cfg.n, tol=tol)
    checks = []
    for t, w, bound, ratio in series.rows[1:]:
        lim = bound * (1 + tol) / series.rows[0][1]
        checks.append(Check(f"contraction_t{t:g}", w <= bound * (1 + tol), ratio, lim))
    return RunResult({"contraction": series}, checks)


def _z_points(cfg) -> np.ndarray:
    pts = cfg.params.get("z", [[0.0, 2.0]])
    return np.array([complex(a, b) for a, b in pts])


def run_burgers(cfg: ExperimentConfig) -> RunResult:
    v = cfg.v()
    if v.kind != "quadratic":
        raise ConfigError("potential.kind", "Burgers check needs a quadratic potential")
    theta = v.params["theta"]
    z = _z_points(cfg)
    tol = cfg.tol("burgers")
    s0 = _mf_initial(cfg, cfg.params.get("init", {}), v)
    rows = []
    state = s0
    for t in cfg.checkpoints:
        if t - cfg.dt < state.time:
            raise ConfigError("checkpoints", "checkpoints must be more than 2*dt apart and >= dt")
        window = mf.solve(state, v, [t - cfg.dt, t, t + cfg.dt])
        rows.extend(burgers_residual(window, theta, z).rows)
        state = window[-1]
    out = MetricSeries("burgers_residual", ["t", "z_re", "z_im", "residual"], strict=False)
    for r in rows:
        out.append(*r)
    stat = mf.from_measure(eq.equilibrium_density(v), cfg.n, v)
    window = mf.solve(stat, v, [0.0, cfg.dt, 2 * cfg.dt])
    st = burgers_residual(window, theta, z)
    worst = max(r[3] for r in out.rows)
    worst_st = max(r[3] for r in st.rows)
    checks = [Check("burgers_run", worst <= tol, worst, tol),
              Check("burgers_stationary", worst_st <= tol, worst_st, tol)]
    return RunResult({"burgers_residual": out, "burgers_stationary": st}, checks)


def run_double_well_sweep(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    cs = p.get("c", [-2.0, -1.0])
    start = p.get("init", {"shape": "bump", "center": 0.0, "width": 0.5})
    mono_tol = cfg.tol("monotone")
    save = sorted({0.0, *map(float, cfg.checkpoints), float(cfg.T)})
    series = {}
    checks = []
    for c in cs:
        v = pots.double_well(float(c))
        s0 = _mf_initial(cfg, start, v)
        states = mf.solve(s0, v, save)
        try:
            mu_eq = eq.equilibrium_density(v)
        except eq.EquilibriumNotAvailable:
            mu_eq = None
        ser = mf.entropy_series(states, v, mu_eq)
        ser.name = f"double_well_c{c:g}"
        series[ser.name] = ser
        mono = float(np.max(np.diff(ser.column("sigma")))) if len(ser) > 1 else 0.0
        checks.append(Check(f"sigma_monotone_c{c:g}", mono <= mono_tol, mono, mono_tol))
    return RunResult(series, checks)


def run_equilibrium_audit(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    if "c" in p:
        vs = [pots.double_well(float(c)) for c in p["c"]]
    else:
        vs = [cfg.v()]
    m = int(p.get("m", 4096))
    series: dict[str, Any] = {}
    checks = []
    extra = {}
    for v in vs:
        spec = eq.equilibrium_spec(v)
        tag = f"c{v.params['c']:g}" if "c" in v.params else v.kind
        mu = eq.equilibrium_density(v, m)
        mass_err = abs(spec.mass() - 1.0)
        r1 = eq.euler_lagrange_residual(mu, v, spec.intervals)
        r2 = eq.euler_lagrange_residual(eq.equilibrium_density(v, 2 * m), v, spec.intervals)
        checks.append(Check(f"mass_{tag}", mass_err <= cfg.tol("mass"), mass_err, cfg.tol("mass")))
        checks.append(Check(f"el_residual_{tag}", r1 <= cfg.tol("el_residual"), r1, cfg.tol("el_residual")))
        checks.append(Check(f"el_refinement_{tag}", r2 <= cfg.tol("refine_ratio") * r1, r2 / r1,
                            cfg.tol("refine_ratio")))
        series[f"density_{tag}"] = mu.to_csv()
        series[f"params_{tag}.json"] = spec.to_json() + "\n"
        extra[tag] = {"mass_error": mass_err, "el_residual": r1, "el_residual_refined": r2,
                      "sigma_V": free_entropy(mu, v)}
    return RunResult(series, checks, extra)


KINDS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "gdbm_run": run_gdbm,
    "matrix_crosscheck": run_matrix_crosscheck,
    "mean_field_decay": run_mean_field_decay,
    "contraction": run_contraction,
    "burgers": run_burgers,
    "double_well_sweep": run_double_well_sweep,
    "equilibrium_audit": run_equilibrium_audit,
}


# ---------------------------------------------------------------- run / replay


def _write_outputs(result: RunResult, out: Path) -> dict[str, str]:
    out.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, s in result.series.items():
        fname = name if name.endswith(".json") else f"{name}.csv"
        text = s.to_csv() if isinstance(s, MetricSeries) else s
        data = text.encode("utf-8")
        (out / fname).write_bytes(data)
        hashes[fname] = git_blob_hash(data)
    return hashes


def run(cfg: ExperimentConfig, output: str | Path | None = None) -> tuple[int, Path]:
    """Run one experiment; returns (exit status, output directory)."""
    cfg.validate()
    out = Path(output if output is not None else cfg.output)
    result = KINDS[cfg.kind](cfg)
    hashes = _write_outputs(result, out)
    summary = {"kind": cfg.kind, "passed": result.passed,
               "checks": {c.name: c.to_dict() for c in result.checks}}
    if result.extra:
        summary["details"] = result.extra
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    manifest = {"config": cfg.to_dict(), "version": __version__, "files": hashes}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return (0 if result.passed else 1), out


def _first_diff_row(a: bytes, b: bytes) -> int:
    la, lb = a.split(b"\n"), b.split(b"\n")
    for k, (x, y) in enumerate(zip(la, lb)):
        if x != y:
            return k
    return min(len(la), len(lb))


def replay(manifest_path: str | Path) -> int:
    """Re-run the embedded config and compare every emitted file byte for byte.

    Row numbers count the header as row 0.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    cfg = ExperimentConfig.from_dict(manifest["config"])
    orig_dir = manifest_path.parent
    tmp = Path(tempfile.mkdtemp(prefix="replay-"))
    try:
        run(cfg, tmp)
        for fname in sorted(manifest["files"]):
            new = (tmp / fname).read_bytes() if (tmp / fname).exists() else None
            path = orig_dir / fname
            old = path.read_bytes() if path.exists() else None
            if old is None or new is None:
                raise ReproducibilityError(fname, None, "file missing")
            if git_blob_hash(old) != manifest["files"][fname]:
                raise ReproducibilityError(fname, None, "original file does not match its recorded hash")
            if old != new:
                raise ReproducibilityError(fname, _first_diff_row(old, new))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return 0
