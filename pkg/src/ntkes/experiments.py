"""Experiment orchestration: config parsing, the four pipelines, report writing.

The four experiments share one JSON config schema (see parse_config) and one
report shape (ExperimentReport). Everything is seeded through named sub-streams
of the single config seed, so a report is a pure function of its config echo:
running the same config twice yields byte-identical report.json apart from the
wall-clock field.
"""

import dataclasses
import json
import math
import os
import tempfile
import time

import numpy as np

from . import rng
from .complexity import fixed_point, population_fixed_point, rate_slope, stopping_time
from .data import (
    LinearTarget,
    RkhsTarget,
    build_training_set,
    estimate_risk,
    make_target,
    sample_sphere,
)
from .errors import ConfigError, NumericalError
from .kernel import edr_slope, eigendecompose, gram_matrix
from .kernel_gd import (
    decomposition_sup_error,
    h_component,
    kernel_gd_state,
    residual_iterate,
)
from .network import GDConfig, forward_batch, init_symmetric, train

SCHEMA_VERSION = 1

_EXPERIMENTS = ("simulate", "rate_sweep", "edr", "tracking")
_MODES = ("biased", "bias_free")
_SCHEMA_KEYS = (
    "experiment",
    "d",
    "n_list",
    "m_rule",
    "eta",
    "sigma0",
    "kappa",
    "T_max",
    "seed",
    "mode",
    "target",
    "output_dir",
)

_HELD_OUT_POINTS = 1000
_STOPPING_HORIZON = 10**6
_TRACKING_LADDER = tuple(2**k for k in range(10, 17))
_TRACKING_PROBE_POINTS = 512


@dataclasses.dataclass
class ExperimentConfig:
    """Effective settings for one experiment run (all defaults resolved)."""

    experiment: str = "simulate"
    d: int = 10
    n_list: tuple = (100, 200, 300)
    m_rule: object = "n_squared"  # "n_squared" or an explicit tuple of even ints
    eta: float = 0.1
    sigma0: float = 0.1
    kappa: float = 1.0
    T_max: int = 300
    seed: int = 0
    mode: str = "biased"
    target: dict = dataclasses.field(default_factory=lambda: {"kind": "linear"})
    output_dir: str = "ntkes_out"

    def echo(self):
        """The config as a plain JSON-ready dict (the report's config echo)."""
        return {
            "experiment": self.experiment,
            "d": self.d,
            "n_list": list(self.n_list),
            "m_rule": self.m_rule if isinstance(self.m_rule, str) else list(self.m_rule),
            "eta": self.eta,
            "sigma0": self.sigma0,
            "kappa": self.kappa,
            "T_max": self.T_max,
            "seed": self.seed,
            "mode": self.mode,
            "target": self.target,
            "output_dir": self.output_dir,
        }


@dataclasses.dataclass
class ExperimentReport:
    """Everything a run produced: config echo, per-n/width records, slopes."""

    config: dict
    records: list
    slopes: dict
    wall_clock_seconds: float
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "records": self.records,
            "slopes": self.slopes,
            "wall_clock_seconds": self.wall_clock_seconds,
        }


def _key_line(text, key):
    """Best-effort 1-based line number of a config key, for error messages."""
    if text is None:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _fail(text, key, why):
    line = _key_line(text, key)
    where = f' (key "{key}", line {line})' if line is not None else f' (key "{key}")'
    raise ConfigError(why + where)


def _as_int(text, key, value, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(text, key, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(text, key, f"expected an integer >= {minimum}, got {value}")
    return value


def _as_finite(text, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(text, key, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        _fail(text, key, f"expected a finite number, got {value}")
    return value


def _parse_target(text, spec):
    if not isinstance(spec, dict):
        _fail(text, "target", f"expected an object, got {spec!r}")
    if "kind" not in spec:
        _fail(text, "target", "missing required sub-key 'kind'")
    kind = spec["kind"]
    allowed = {
        "linear": {"kind", "s"},
        "rkhs": {"kind", "centers", "coeffs", "num_centers"},
        "power_law": {"kind", "exponent", "scale"},
    }
    if kind not in allowed:
        _fail(text, "target", f"unknown target kind {kind!r}")
    extra = set(spec) - allowed[kind]
    if extra:
        _fail(text, "target", f"unknown sub-key {sorted(extra)[0]!r} for kind {kind!r}")
    if kind == "power_law":
        exponent = _as_finite(text, "target", spec.get("exponent", 2.0))
        if exponent <= 1.0:
            _fail(text, "target", f"power_law exponent must exceed 1, got {exponent}")
        scale = _as_finite(text, "target", spec.get("scale", 1.0))
        if scale <= 0.0:
            _fail(text, "target", f"power_law scale must be positive, got {scale}")
        return {"kind": "power_law", "exponent": exponent, "scale": scale}
    if kind == "rkhs" and ("centers" in spec) != ("coeffs" in spec):
        _fail(text, "target", "rkhs target needs both 'centers' and 'coeffs'")
    return dict(spec)


def parse_config(source, experiment=None):
    """Parse a JSON config from a file path or inline JSON text (strict schema).

    Exactly the documented top-level keys are accepted; unknown keys are
    rejected by name. seed is required (runs are never wall-clock seeded).
    The optional experiment argument (from the CLI subcommand) fills a missing
    "experiment" key and must agree with an explicit one.
    """
    if isinstance(source, (bytes, bytearray)):
        source = source.decode("utf-8")
    if not isinstance(source, str):
        raise ConfigError(f"config source must be a path or JSON text, got {type(source).__name__}")
    if source.lstrip()[:1] in ("{", "["):
        text = source
    else:
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {source!r}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config must be a JSON object, got {type(raw).__name__}")

    for key in raw:
        if key not in _SCHEMA_KEYS:
            _fail(text, key, "unknown config key")

    if "seed" not in raw:
        raise ConfigError('missing required key (key "seed")')
    seed = _as_int(text, "seed", raw["seed"], minimum=0)
    if seed >= 2**64:
        _fail(text, "seed", f"seed must fit in 64 bits, got {seed}")

    declared = raw.get("experiment")
    if declared is not None and declared not in _EXPERIMENTS:
        _fail(text, "experiment", f"expected one of {list(_EXPERIMENTS)}, got {declared!r}")
    if experiment is not None and experiment not in _EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    if declared is not None and experiment is not None and declared != experiment:
        _fail(
            text,
            "experiment",
            f"config says {declared!r} but the command asked for {experiment!r}",
        )
    chosen = declared or experiment or "simulate"

    d = _as_int(text, "d", raw.get("d", 10), minimum=2)

    n_list = raw.get("n_list", [100, 200, 300])
    if not isinstance(n_list, list) or not n_list:
        _fail(text, "n_list", f"expected a nonempty list of integers, got {n_list!r}")
    n_list = tuple(_as_int(text, "n_list", v, minimum=10) for v in n_list)

    m_rule = raw.get("m_rule", "n_squared")
    if isinstance(m_rule, str):
        if m_rule != "n_squared":
            _fail(text, "m_rule", f'expected "n_squared" or a list of even integers, got {m_rule!r}')
    elif isinstance(m_rule, list) and m_rule:
        m_rule = tuple(_as_int(text, "m_rule", v, minimum=2) for v in m_rule)
        for m in m_rule:
            if m % 2 != 0:
                _fail(text, "m_rule", f"widths must be even (mirrored init pairs), got {m}")
    else:
        _fail(text, "m_rule", f'expected "n_squared" or a nonempty list, got {m_rule!r}')

    eta = _as_finite(text, "eta", raw.get("eta", 0.1))
    if eta <= 0.0:
        _fail(text, "eta", f"eta must be positive, got {eta}")

    sigma0 = _as_finite(text, "sigma0", raw.get("sigma0", 0.1))
    if sigma0 <= 0.0:
        _fail(text, "sigma0", f"sigma0 must be positive, got {sigma0}")

    kappa = _as_finite(text, "kappa", raw.get("kappa", 1.0))
    if not 0.0 < kappa <= 1.0:
        _fail(text, "kappa", f"kappa must lie in (0, 1], got {kappa}")

    T_max = _as_int(text, "T_max", raw.get("T_max", 300), minimum=1)

    mode = raw.get("mode", "biased")
    if mode not in _MODES:
        _fail(text, "mode", f"expected one of {list(_MODES)}, got {mode!r}")

    target = _parse_target(text, raw.get("target", {"kind": "linear"}))
    if target["kind"] == "power_law" and chosen != "rate_sweep":
        _fail(text, "target", "a power_law (synthetic spectrum) target only makes sense for rate_sweep")

    output_dir = raw.get("output_dir", "ntkes_out")
    if not isinstance(output_dir, str) or not output_dir:
        _fail(text, "output_dir", f"expected a nonempty string, got {output_dir!r}")

    return ExperimentConfig(
        experiment=chosen,
        d=d,
        n_list=n_list,
        m_rule=m_rule,
        eta=eta,
        sigma0=sigma0,
        kappa=kappa,
        T_max=T_max,
        seed=seed,
        mode=mode,
        target=target,
        output_dir=output_dir,
    )


def apply_paper_scale(cfg):
    """Rewrite a config to the full-scale simulation protocol (opt-in; heavy).

    d=50, n from 100 to 1000 in steps of 100, widths m=n², a horizon long
    enough for the late stopping points. Noise level, learning rate, seed and
    target are kept from the incoming config.
    """
    return dataclasses.replace(
        cfg,
        d=50,
        n_list=tuple(range(100, 1001, 100)),
        m_rule="n_squared",
        T_max=max(cfg.T_max, 600),
    )


def resolve_m(cfg, n):
    """Width for a given n: n² (rounded up to even) or the explicit list entry."""
    if isinstance(cfg.m_rule, str):
        m = n * n
        return m if m % 2 == 0 else m + 1
    if len(cfg.m_rule) != len(cfg.n_list):
        raise ConfigError(
            f"explicit m_rule needs one width per n ({len(cfg.n_list)}), got {len(cfg.m_rule)}"
        )
    return cfg.m_rule[cfg.n_list.index(n)]


def _target_object(cfg):
    """Materialize the config's target spec into a data-module target object."""
    spec = cfg.target
    kind = spec["kind"]
    if kind == "linear":
        if "s" in spec:
            s = np.asarray(spec["s"], dtype=np.float64)
            if s.shape != (cfg.d,):
                raise ConfigError(f"target s must have length d={cfg.d}, got shape {s.shape}")
        else:
            s = sample_sphere(1, cfg.d, rng.subseed(cfg.seed, "target"))[0]
        return LinearTarget(s=s)
    if kind == "rkhs":
        if "centers" in spec:
            centers = np.asarray(spec["centers"], dtype=np.float64)
            coeffs = np.asarray(spec["coeffs"], dtype=np.float64)
        else:
            k = int(spec.get("num_centers", 8))
            if k < 1:
                raise ConfigError(f"num_centers must be >= 1, got {k}")
            centers = sample_sphere(k, cfg.d, rng.subseed(cfg.seed, "target"))
            coeffs = rng.standard_normal(rng.stream(cfg.seed, "target.coeffs"), (k,)) / k
        if centers.ndim != 2 or centers.shape[1] != cfg.d or centers.shape[0] != coeffs.shape[0]:
            raise ConfigError(
                f"rkhs target needs centers (k, d={cfg.d}) with matching coeffs, "
                f"got {centers.shape} and {coeffs.shape}"
            )
        return RkhsTarget(centers=centers, coeffs=coeffs)
    raise ConfigError(f"target kind {kind!r} does not define a sampled function")


def _rate_exponent(d):
    """The n-exponent (d+1)/(2d+1) that normalizes empirical stopping steps."""
    return (d + 1) / (2 * d + 1)


def _theory_for_spectrum(eigenvalues, n, cfg):
    eps_hat_sq = fixed_point(eigenvalues, n, cfg.sigma0)
    st = stopping_time(eigenvalues, n, cfg.sigma0, cfg.eta, _STOPPING_HORIZON)
    return eps_hat_sq, st


def _run_simulate(cfg):
    target_obj = _target_object(cfg)
    target_fn, _ = make_target(target_obj, cfg.mode)
    test_seed = rng.subseed(cfg.seed, "test")
    records = []
    for n in cfg.n_list:
        m = resolve_m(cfg, n)
        record = {"n": n, "m": m, "failed": False}
        ts = build_training_set(
            n, cfg.d, seed=rng.subseed(cfg.seed, f"data.n{n}"), sigma0=cfg.sigma0, target=target_obj, mode=cfg.mode
        )
        params = init_symmetric(m, cfg.d, cfg.kappa, seed=rng.subseed(cfg.seed, f"init.n{n}"), mode=cfg.mode)
        risk_curve = []

        def observe(t, p):
            risk, _ = estimate_risk(
                lambda X: forward_batch(p, X, cfg.mode), target_fn, _HELD_OUT_POINTS, cfg.d, test_seed
            )
            risk_curve.append(risk)

        try:
            _, trace = train(params, ts, GDConfig(eta=cfg.eta, max_steps=cfg.T_max, seed=cfg.seed), cfg.mode, observer=observe)
        except NumericalError as exc:
            record["failed"] = True
            record["error"] = str(exc)
            records.append(record)
            continue

        spec = eigendecompose(gram_matrix(ts, cfg.mode))
        eps_hat_sq, st = _theory_for_spectrum(spec.eigenvalues, n, cfg)
        curve = np.asarray(risk_curve)
        # stopping at step 0 would mean "never run gradient descent at all";
        # the empirical stopping step searches t >= 1 (ties -> smallest step)
        t_hat = int(np.argmin(curve[1:])) + 1
        record.update(
            {
                "train_loss_curve": [float(v) for v in trace.losses],
                "test_risk_curve": [float(v) for v in curve],
                "t_hat_empirical": t_hat,
                "T_hat_theory": st.t_hat,
                "theory_saturated": st.saturated,
                "eps_hat_sq": eps_hat_sq,
                "ratio": t_hat / n ** _rate_exponent(cfg.d),
                "risk_at_stop": float(curve[t_hat]),
            }
        )
        records.append(record)

    complete = [r for r in records if not r["failed"]]
    slopes = {
        "t_hat_vs_n": None,
        "ratio_min": min((r["ratio"] for r in complete), default=None),
        "ratio_max": max((r["ratio"] for r in complete), default=None),
    }
    pairs = [(r["n"], r["t_hat_empirical"]) for r in complete if r["t_hat_empirical"] > 0]
    if len(pairs) >= 3:
        slopes["t_hat_vs_n"] = rate_slope(pairs)
    return records, slopes


def _run_rate_sweep(cfg):
    records = []
    synthetic = cfg.target["kind"] == "power_law"
    target_obj = None if synthetic else _target_object(cfg)
    for n in cfg.n_list:
        if synthetic:
            exponent = cfg.target["exponent"]
            scale = cfg.target["scale"]
            eps_hat_sq, length = population_fixed_point(n, cfg.sigma0, exponent, scale)
            length = max(length, 64)
            lam = scale * np.arange(1, length + 1, dtype=np.float64) ** (-exponent)
            st = stopping_time(lam, n, cfg.sigma0, cfg.eta, _STOPPING_HORIZON)
        else:
            ts = build_training_set(
                n, cfg.d, seed=rng.subseed(cfg.seed, f"data.n{n}"), sigma0=cfg.sigma0, target=target_obj, mode=cfg.mode
            )
            spec = eigendecompose(gram_matrix(ts, cfg.mode))
            lam = spec.eigenvalues
            eps_hat_sq, st = _theory_for_spectrum(lam, n, cfg)
            length = int(lam.size)
        records.append(
            {
                "n": n,
                "eps_hat_sq": eps_hat_sq,
                "T_hat_theory": st.t_hat,
                "theory_saturated": st.saturated,
                "spectrum_length": length,
            }
        )

    slopes = {"fixed_point": None, "stopping_time": None}
    eps_pairs = [(r["n"], r["eps_hat_sq"]) for r in records if r["eps_hat_sq"] > 0]
    st_pairs = [(r["n"], r["T_hat_theory"]) for r in records if r["T_hat_theory"] > 0]
    if len(eps_pairs) >= 3:
        slopes["fixed_point"] = rate_slope(eps_pairs)
    if len(st_pairs) >= 3:
        slopes["stopping_time"] = rate_slope(st_pairs)
    return records, slopes


def _run_edr(cfg):
    records = []
    for n in cfg.n_list:
        X = sample_sphere(n, cfg.d, rng.subseed(cfg.seed, f"data.n{n}"))
        spec = eigendecompose(gram_matrix(X, cfg.mode))
        j_hi = min(50, n)
        slope = edr_slope(spec.eigenvalues, 5, j_hi)
        records.append({"n": n, "edr_slope": slope, "window": [5, j_hi]})
    mean_slope = float(np.mean([r["edr_slope"] for r in records])) if records else None
    return records, {"edr": mean_slope}


def _run_tracking(cfg):
    n = cfg.n_list[0]
    target_obj = _target_object(cfg)
    ts = build_training_set(
        n, cfg.d, seed=rng.subseed(cfg.seed, f"data.n{n}"), sigma0=cfg.sigma0, target=target_obj, mode=cfg.mode
    )
    widths = cfg.m_rule if isinstance(cfg.m_rule, tuple) else _TRACKING_LADDER
    state = kernel_gd_state(ts, cfg.eta, cfg.mode)
    kernel_final = residual_iterate(state, cfg.T_max)
    probe = sample_sphere(_TRACKING_PROBE_POINTS, cfg.d, rng.subseed(cfg.seed, "probe"))
    records = []
    for m in widths:
        params = init_symmetric(m, cfg.d, cfg.kappa, seed=rng.subseed(cfg.seed, f"init.m{m}"), mode=cfg.mode)
        params, trace = train(params, ts, GDConfig(eta=cfg.eta, max_steps=cfg.T_max, seed=cfg.seed), cfg.mode)
        gap = float(np.max(np.abs(trace.residuals[cfg.T_max] - kernel_final)))
        net_on_probe = forward_batch(params, probe, cfg.mode)
        kernel_part = h_component(trace, ts, cfg.eta, cfg.T_max, probe, cfg.mode)
        d_err = decomposition_sup_error(net_on_probe, kernel_part)
        records.append({"m": int(m), "gap": gap, "decomposition_sup_error": d_err})

    slopes = {"tracking_gap": None, "decomposition": None}
    gap_pairs = [(r["m"], r["gap"]) for r in records if r["gap"] > 0]
    dec_pairs = [(r["m"], r["decomposition_sup_error"]) for r in records if r["decomposition_sup_error"] > 0]
    if len(gap_pairs) >= 3:
        slopes["tracking_gap"] = rate_slope(gap_pairs)
    if len(dec_pairs) >= 3:
        slopes["decomposition"] = rate_slope(dec_pairs)
    return records, slopes


_PIPELINES = {
    "simulate": _run_simulate,
    "rate_sweep": _run_rate_sweep,
    "edr": _run_edr,
    "tracking": _run_tracking,
}


def run_experiment(cfg):
    """Run the configured experiment; all randomness comes from cfg.seed streams."""
    started = time.perf_counter()
    records, slopes = _PIPELINES[cfg.experiment](cfg)
    for record in records:
        for key in ("test_risk_curve", "train_loss_curve"):
            if key in record and len(record[key]) != cfg.T_max + 1:
                raise NumericalError(
                    f"recorded {key} for n={record.get('n')} has length "
                    f"{len(record[key])}, expected T_max+1 = {cfg.T_max + 1}"
                )
    return ExperimentReport(
        config=cfg.echo(),
        records=records,
        slopes=slopes,
        wall_clock_seconds=time.perf_counter() - started,
    )


def _fmt(value):
    """One CSV cell: ints verbatim, floats with 17 significant digits."""
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _atomic_write(path, data):
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report, directory, overwrite=False):
    """Write report.json, summary.csv and per-curve CSVs; returns paths written.

    Existing files are only replaced when overwrite is set (checked up front,
    before anything is written). Every file is written atomically with LF line
    endings and floats at 17 significant digits.
    """
    os.makedirs(directory, exist_ok=True)
    files = {"report.json": _render_json(report), "summary.csv": _render_summary(report)}
    for record in report.records:
        if not record.get("failed", False) and "test_risk_curve" in record:
            files[f"curve_n{record['n']}.csv"] = _render_curve(record)
    paths = [os.path.join(directory, name) for name in files]
    if not overwrite:
        for path in paths:
            if os.path.exists(path):
                raise FileExistsError(f"refusing to replace {path} without the overwrite flag")
    for path, name in zip(paths, files):
        _atomic_write(path, files[name])
    return paths


def _render_json(report):
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


_SUMMARY_COLUMNS = ("n", "m", "t_hat_empirical", "T_hat_theory", "eps_hat_sq", "ratio", "risk_at_stop")


def _render_summary(report):
    lines = [",".join(_SUMMARY_COLUMNS)]
    for record in report.records:
        # only records that carry stopping statistics get a row (failed
        # simulate records included, as all-nan documentation of the failure)
        has_stats = any(column in record for column in _SUMMARY_COLUMNS[2:])
        if "n" not in record or not (has_stats or record.get("failed", False)):
            continue
        lines.append(",".join(_fmt(record.get(column)) for column in _SUMMARY_COLUMNS))
    return "\n".join(lines) + "\n"


def _render_curve(record):
    lines = ["step,train_loss,test_risk"]
    for step, (loss, risk) in enumerate(zip(record["train_loss_curve"], record["test_risk_curve"])):
        lines.append(f"{step},{_fmt(loss)},{_fmt(risk)}")
    return "\n".join(lines) + "\n"
