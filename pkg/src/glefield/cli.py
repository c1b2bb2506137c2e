"""Command line entry point: the pipeline as subcommands with config files.

Configuration is INI-style text with [section] headers and key = value
lines.  Every key has a documented default (run with --help to see the
schema), unknown sections or keys are hard errors anchored to their line
number, and subcommand flags override file values.  Each run writes its
artifact plus a JSON provenance sidecar (<artifact>.provenance.json)
carrying the effective configuration, its SHA-256 hash, the seed, and the
tolerance settings; re-serializing the sidecar's config reproduces the hash.

Exit codes: 0 success, 2 configuration or input validation error,
3 numerical tolerance failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import re
import sys

import numpy as np

from . import __version__, spectral
from .cm_kernel import (
    ExponentialSum,
    KernelError,
    KernelMeasure,
    PowerLaw,
    discretize,
    eval_kernel,
    k_cos,
    k_sin,
)
from .field_assembly import (
    DirichletInterval,
    Divergent,
    Explicit,
    FieldSample,
    Flat,
    PowerDecay,
    TailBudgetExceeded,
    assemble_field,
    check_regularity_assumption,
    check_wellposedness,
    tail_variance_bound,
)
from .mode_sampler import (
    EmbeddingNotPSD,
    TimeGrid,
    sample_gle_mode,
    sample_gle_mode_spectral,
    sample_ou_mode,
)
from .regularity import (
    DegenerateFit,
    empirical_variogram,
    fit_exponent,
    theoretical_field_variogram,
    theoretical_space_variogram,
    theoretical_variogram,
)
from .spectral import (
    InequalityViolated,
    Mode,
    NoResonance,
    SpectralDensity,
    ToleranceNotMet,
    check_resonance_inequality,
    find_resonance,
    integrate_rho,
)


class ConfigError(Exception):
    """Configuration file or flag rejected; message carries file:line."""


# section -> key -> (default text, kind, help); kinds drive parsing,
# validation, and the canonical re-serialization that gets hashed
_SCHEMA = {
    "kernel": {
        "kernel": ("expsum", "choice:expsum,powerlaw", "kernel family"),
        "atoms": ("[[1.0, 1.0]]", "atoms", "expsum atoms as [[w, x], ...]"),
        "exponent": ("1.0", "float", "powerlaw decay exponent a > 0"),
        "nodes": ("64", "int", "powerlaw quadrature node count >= 8"),
    },
    "basis": {
        "type": ("dirichlet_interval", "choice:dirichlet_interval", "eigenbasis"),
        "length": (repr(math.pi), "float", "interval length L > 0"),
    },
    "weights": {
        "rule": ("flat", "choice:flat,power,explicit", "noise weight rule"),
        "lam": ("1.0", "float", "flat rule: lambda_k = lam"),
        "s": ("0.5", "float", "power rule: lambda_k = alpha_k^(-s)"),
        "values": ("[]", "floats", "explicit rule: lambda_1..lambda_N"),
    },
    "assumption": {
        "eta": ("0.6", "float", "smoothness series exponent, in (0, 1)"),
    },
    "sampler": {
        "dt": ("0.00390625", "float", "time step"),
        "n": ("4096", "int", "samples per path"),
        "ensemble": ("64", "int", "paths per mode"),
        "seed": ("0", "int", "base seed for counter-based streams"),
        "method": ("ce", "choice:ce,ss,ou", "ce=circulant, ss=spectral, ou=memoryless"),
    },
    "regularity": {
        "lags": ("dyadic", "lags", "variogram lag steps: 'dyadic' or comma ints"),
        "bootstrap": ("200", "int", "bootstrap resamples for the exponent CI"),
    },
    "tolerances": {
        "rel_tol": ("1e-06", "float", "relative tolerance for quadrature routines"),
        "verify_rel_tol": ("1e-06", "float", "pass bar for the verify report"),
        "tail_budget": ("0.01", "float", "allowed truncated pointwise variance"),
    },
}

_SECTION_RE = re.compile(r"^\s*\[(?P<name>[^\]]+)\]\s*([#;].*)?$")
_KEY_RE = re.compile(r"^\s*(?P<name>[^\s=:\[#;][^=:]*?)\s*[=:]")


def _canon(kind: str, text: str, where: str):
    """Parse one config value; returns (typed value, canonical text)."""
    text = text.strip()
    if kind == "int":
        try:
            value = int(text)
        except ValueError:
            raise ConfigError(f"{where}: {text!r} is not an integer") from None
        return value, str(value)
    if kind == "float":
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{where}: {text!r} is not a number") from None
        if not math.isfinite(value):
            raise ConfigError(f"{where}: {text!r} is not finite")
        return value, repr(value)
    if kind.startswith("choice:"):
        allowed = kind.split(":", 1)[1].split(",")
        if text not in allowed:
            raise ConfigError(f"{where}: {text!r} must be one of {', '.join(allowed)}")
        return text, text
    if kind == "atoms":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError:
            raise ConfigError(f"{where}: atoms must be JSON like [[w, x], ...]") from None
        if not (
            isinstance(raw, list)
            and raw
            and all(
                isinstance(p, list)
                and len(p) == 2
                and all(isinstance(v, (int, float)) for v in p)
                for p in raw
            )
        ):
            raise ConfigError(f"{where}: atoms must be a nonempty list of [w, x] pairs")
        value = [[float(w), float(x)] for w, x in raw]
        return value, json.dumps(value, separators=(",", ":"))
    if kind == "floats":
        if text in ("", "[]"):
            return [], "[]"
        parts = text.strip("[]").replace(",", " ").split()
        try:
            value = [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"{where}: expected a list of numbers") from None
        return value, json.dumps(value, separators=(",", ":"))
    if kind == "lags":
        if text == "dyadic":
            return "dyadic", "dyadic"
        try:
            steps = [int(p) for p in text.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"{where}: lags must be 'dyadic' or comma-separated integers") from None
        if not steps or any(s <= 0 for s in steps):
            raise ConfigError(f"{where}: lag steps must be positive integers")
        return steps, ",".join(str(s) for s in steps)
    raise AssertionError(f"unhandled kind {kind}")


class RunConfig:
    """Effective configuration: schema defaults, file values, flag overrides.

    Holds typed values alongside canonical strings; the canonical text is
    what gets hashed into provenance sidecars, so two configs that mean the
    same thing hash identically regardless of spelling.
    """

    def __init__(self, values: dict, texts: dict):
        self._values = values
        self._texts = texts

    def get(self, section: str, key: str):
        return self._values[section][key]

    def override(self, section: str, key: str, raw) -> None:
        if raw is None:
            return
        kind = _SCHEMA[section][key][1]
        value, canon = _canon(kind, str(raw), f"--{key.replace('_', '-')}")
        self._values[section][key] = value
        self._texts[section][key] = canon

    def canonical_text(self) -> str:
        lines = []
        for section in sorted(self._texts):
            lines.append(f"[{section}]")
            for key in sorted(self._texts[section]):
                lines.append(f"{key} = {self._texts[section][key]}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def as_dict(self) -> dict:
        return {s: dict(kv) for s, kv in sorted(self._texts.items())}


def _scan_lines(text: str) -> dict:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    anchors = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group("name").strip()
            anchors.setdefault((section, None), lineno)
            continue
        if section is None:
            continue
        m = _KEY_RE.match(line)
        if m:
            anchors.setdefault((section, m.group("name").strip()), lineno)
    return anchors


def load_config(path: str | None) -> RunConfig:
    """Parse a config file against the schema; None means all defaults.

    Unknown sections or keys, malformed syntax, and untyped values are all
    ConfigError with a file:line anchor.
    """
    values = {s: {k: _canon(spec[1], spec[0], f"{s}.{k}")[0] for k, spec in kv.items()}
              for s, kv in _SCHEMA.items()}
    texts = {s: {k: _canon(spec[1], spec[0], f"{s}.{k}")[1] for k, spec in kv.items()}
             for s, kv in _SCHEMA.items()}
    cfg = RunConfig(values, texts)
    if path is None:
        return cfg
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    anchors = _scan_lines(text)
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), strict=True
    )
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        anchor = f"{path}:{lineno}" if lineno else path
        raise ConfigError(f"{anchor}: {exc.message}") from None
    for section in parser.sections():
        if section not in _SCHEMA:
            line = anchors.get((section, None), 0)
            raise ConfigError(f"{path}:{line}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                line = anchors.get((section, key), anchors.get((section, None), 0))
                raise ConfigError(f"{path}:{line}: unknown key {key!r} in [{section}]")
            line = anchors.get((section, key), 0)
            kind = _SCHEMA[section][key][1]
            value, canon = _canon(kind, raw, f"{path}:{line}")
            values[section][key] = value
            texts[section][key] = canon
    if values["weights"]["rule"] == "explicit" and not values["weights"]["values"]:
        line = anchors.get(("weights", "rule"), anchors.get(("weights", None), 0))
        raise ConfigError(f"{path}:{line}: rule = explicit needs weights.values")
    return cfg


def build_kernel(cfg: RunConfig) -> KernelMeasure:
    if cfg.get("kernel", "kernel") == "expsum":
        family = ExponentialSum([tuple(p) for p in cfg.get("kernel", "atoms")])
    else:
        family = PowerLaw(cfg.get("kernel", "exponent"), cfg.get("kernel", "nodes"))
    return discretize(family)


def build_basis(cfg: RunConfig) -> DirichletInterval:
    return DirichletInterval(cfg.get("basis", "length"))


def build_weights(cfg: RunConfig):
    rule = cfg.get("weights", "rule")
    if rule == "flat":
        return Flat(cfg.get("weights", "lam"))
    if rule == "power":
        return PowerDecay(cfg.get("weights", "s"))
    return Explicit(tuple(cfg.get("weights", "values")))


def build_mode(cfg: RunConfig, k: int) -> Mode:
    if k < 1:
        raise ConfigError(f"mode index {k} must be >= 1")
    basis = build_basis(cfg)
    weights = build_weights(cfg)
    return Mode(
        index=k,
        alpha_k=basis.alpha(k),
        lambda_k=weights.weight(basis, k),
        c_k=basis.sup_const(k),
    )


def _threads(args) -> int:
    flag = getattr(args, "threads", None)
    if flag is not None:
        if flag < 1:
            raise ConfigError("--threads must be >= 1")
        return flag
    env = os.environ.get("GLEFIELD_THREADS")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"GLEFIELD_THREADS={env!r} is not an integer") from None
        if value < 1:
            raise ConfigError(f"GLEFIELD_THREADS={env!r} must be >= 1")
        return value
    return os.cpu_count() or 1


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_sidecar(out_path: str, command: str, cfg: RunConfig, seed, extra=None) -> None:
    payload = {
        "artifact": os.path.basename(out_path),
        "command": command,
        "config": cfg.as_dict(),
        "config_hash": cfg.hash(),
        "seed": seed,
        "tolerances": {k: cfg.get("tolerances", k) for k in _SCHEMA["tolerances"]},
        "version": __version__,
    }
    if extra:
        payload.update(extra)
    _write_json(out_path + ".provenance.json", payload)


def cmd_kernel(args) -> int:
    """Tabulate the kernel on [0, t_max] as CSV columns t, value."""
    cfg = load_config(args.config)
    measure = build_kernel(cfg)
    if not (args.t_max > 0.0 and math.isfinite(args.t_max)):
        raise ConfigError(f"--t-max {args.t_max} must be positive")
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    ts = np.linspace(0.0, args.t_max, args.points)
    ks = eval_kernel(measure, ts)
    _write_csv(args.out, ["t", "value"], ([_fmt(t), _fmt(v)] for t, v in zip(ts, ks)))
    _write_sidecar(
        args.out, "kernel", cfg, cfg.get("sampler", "seed"),
        {"mass": measure.mass, "atom_count": len(measure.atoms)},
    )
    return 0


def cmd_spectrum(args) -> int:
    """Tabulate rho, K_cos, K_sin for one mode as CSV."""
    cfg = load_config(args.config)
    measure = build_kernel(cfg)
    mode = build_mode(cfg, args.k)
    sd = SpectralDensity(measure, mode)
    omega_max = args.omega_max
    if omega_max is None:
        omega_max = 2.0 * math.sqrt(2.0 * mode.alpha_k * measure.mass)
    if not (omega_max > 0.0 and math.isfinite(omega_max)):
        raise ConfigError(f"--omega-max {omega_max} must be positive")
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    omegas = np.linspace(0.0, omega_max, args.points)
    rho_vals = spectral.rho(sd, omegas)
    kc = k_cos(measure, omegas)
    ks = k_sin(measure, omegas)
    _write_csv(
        args.out,
        ["omega", "rho", "k_cos", "k_sin"],
        (
            [_fmt(w), _fmt(r), _fmt(c), _fmt(s)]
            for w, r, c, s in zip(omegas, rho_vals, kc, ks)
        ),
    )
    _write_sidecar(args.out, "spectrum", cfg, cfg.get("sampler", "seed"), {"k": args.k})
    return 0


def cmd_verify(args) -> int:
    """Check the variance identity and resonance diagnostics per mode.

    Reports integral vs lambda_k^2/alpha_k, the resonance frequency and its
    alpha-ratio, and the inequality slack; exits 3 if any relative error
    exceeds tolerances.verify_rel_tol or the inequality fails.
    """
    cfg = load_config(args.config)
    measure = build_kernel(cfg)
    try:
        k_list = [int(p) for p in args.k_list.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"--k-list {args.k_list!r} must be comma-separated integers") from None
    if not k_list or any(k < 1 for k in k_list):
        raise ConfigError("--k-list needs positive mode indices")
    rel_tol = cfg.get("tolerances", "rel_tol")
    bar = cfg.get("tolerances", "verify_rel_tol")
    results = []
    failed = False
    for k in k_list:
        mode = build_mode(cfg, k)
        sd = SpectralDensity(measure, mode)
        integral = integrate_rho(sd, rel_tol=rel_tol)
        expected = mode.lambda_k**2 / mode.alpha_k
        rel_err = abs(integral - expected) / expected if expected else abs(integral)
        record = {
            "k": k,
            "alpha_k": mode.alpha_k,
            "lambda_k": mode.lambda_k,
            "integral": integral,
            "expected": expected,
            "rel_err": rel_err,
            "omega_k": None,
            "omega_k_sq_over_alpha_k": None,
            "inequality_min_slack": None,
        }
        try:
            res = find_resonance(sd)
        except NoResonance:
            res = None
        if res is not None:
            record["omega_k"] = res.omega_r
            record["omega_k_sq_over_alpha_k"] = res.omega_r**2 / mode.alpha_k
            try:
                slack = check_resonance_inequality(sd, res)
                if not slack.skipped:
                    record["inequality_min_slack"] = slack.min_slack
            except InequalityViolated as exc:
                record["inequality_min_slack"] = exc.slack
                failed = True
        if rel_err > bar:
            failed = True
        results.append(record)
    report = {
        "passed": not failed,
        "rel_tol_bar": bar,
        "results": results,
    }
    _write_json(args.out, report)
    _write_sidecar(args.out, "verify", cfg, cfg.get("sampler", "seed"))
    return 3 if failed else 0


def _sampler_grid(cfg: RunConfig) -> TimeGrid:
    return TimeGrid(dt=cfg.get("sampler", "dt"), n=cfg.get("sampler", "n"))


def cmd_sample_mode(args) -> int:
    """Sample one mode's trajectories to CSV columns path_id, t, value."""
    cfg = load_config(args.config)
    for key in ("dt", "n", "ensemble", "seed", "method"):
        cfg.override("sampler", key, getattr(args, key))
    measure = build_kernel(cfg)
    mode = build_mode(cfg, args.k)
    grid = _sampler_grid(cfg)
    m = cfg.get("sampler", "ensemble")
    seed = cfg.get("sampler", "seed")
    method = cfg.get("sampler", "method")
    if method == "ce":
        ens = sample_gle_mode(measure, mode, grid, m, seed)
    elif method == "ss":
        ens = sample_gle_mode_spectral(measure, mode, grid, m, seed)
    else:
        ens = sample_ou_mode(mode, grid, m, seed)
    times = grid.times

    def rows():
        for i in range(ens.m):
            for j in range(grid.n):
                yield [str(i), _fmt(times[j]), _fmt(ens.values[i, j])]

    _write_csv(args.out, ["path_id", "t", "value"], rows())
    _write_sidecar(
        args.out, "sample-mode", cfg, seed,
        {
            "k": args.k,
            "method": method,
            "clipped_mass": ens.clipped_mass,
            "embedding_length": ens.embedding_length,
            "node_count": ens.node_count,
        },
    )
    return 0


def _interior_grid(length: float, nx: int) -> np.ndarray:
    if nx < 1:
        raise ConfigError(f"--nx {nx} must be >= 1")
    return np.arange(1, nx + 1) * (length / (nx + 1))


def cmd_sample_field(args) -> int:
    """Sample the truncated field to CSV columns path_id, t, x, value."""
    cfg = load_config(args.config)
    for key in ("dt", "n", "ensemble", "seed"):
        cfg.override("sampler", key, getattr(args, key))
    cfg.override("tolerances", "tail_budget", args.tail_budget)
    if args.N < 1:
        raise ConfigError(f"--N {args.N} must be >= 1")
    measure = build_kernel(cfg)
    basis = build_basis(cfg)
    weights = build_weights(cfg)
    grid = _sampler_grid(cfg)
    xs = _interior_grid(cfg.get("basis", "length"), args.nx)
    m = cfg.get("sampler", "ensemble")
    seed = cfg.get("sampler", "seed")
    sample = assemble_field(
        measure,
        basis,
        weights,
        args.N,
        grid,
        xs,
        m,
        seed,
        dynamics=args.dynamics,
        tail_budget=cfg.get("tolerances", "tail_budget"),
        workers=_threads(args),
    )
    times = grid.times

    def rows():
        for i in range(m):
            for j in range(grid.n):
                for l in range(xs.size):
                    yield [str(i), _fmt(times[j]), _fmt(xs[l]), _fmt(sample.values[i, j, l])]

    _write_csv(args.out, ["path_id", "t", "x", "value"], rows())
    wellposed = check_wellposedness(basis, weights, raise_on_divergent=False)
    regularity = check_regularity_assumption(basis, weights, cfg.get("assumption", "eta"))
    _write_sidecar(
        args.out, "sample-field", cfg, seed,
        {
            "N": args.N,
            "dynamics": args.dynamics,
            "tail_bound": tail_variance_bound(basis, weights, args.N),
            "max_clipped_mass": max(sample.clipped_masses, default=0.0),
            "wellposedness": {
                "partial_sum": wellposed.partial_sum,
                "tail_estimate": wellposed.tail_estimate,
                "decay_power": wellposed.decay_power,
                "convergent": wellposed.convergent,
            },
            "regularity_assumption": {
                "eta": cfg.get("assumption", "eta"),
                "decay_power": regularity.decay_power,
                "convergent": regularity.convergent,
            },
        },
    )
    return 0


def _read_field_csv(path: str):
    """Reconstruct (values[m, nt, nx], TimeGrid, x) from a sample CSV."""
    if not os.path.exists(path):
        raise ConfigError(f"input file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if header == ["path_id", "t", "value"]:
        has_x = False
    elif header == ["path_id", "t", "x", "value"]:
        has_x = True
    else:
        raise ConfigError(f"{path}: unrecognized columns {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] == 0:
        raise ConfigError(f"{path}: no data rows")
    paths = np.unique(data[:, 0])
    times = np.unique(data[:, 1])
    xs = np.unique(data[:, 2]) if has_x else np.array([0.0])
    m, nt, nx = len(paths), len(times), len(xs)
    if data.shape[0] != m * nt * nx:
        raise ConfigError(f"{path}: rows do not form a full (path, t, x) grid")
    if nt < 2:
        raise ConfigError(f"{path}: need at least 2 time samples")
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
        raise ConfigError(f"{path}: time grid is not uniform")
    values = np.empty((m, nt, nx))
    pi = np.searchsorted(paths, data[:, 0])
    ti = np.searchsorted(times, data[:, 1])
    xi = np.searchsorted(xs, data[:, 2]) if has_x else np.zeros(len(data), dtype=int)
    values[pi, ti, xi] = data[:, -1]
    grid = TimeGrid(dt=float(dts[0]), n=nt, t0=float(times[0]))
    return values, grid, xs


def _lag_steps(spec_text, size: int) -> list:
    """Resolve a lag specification to integer steps for an axis of length size.

    'dyadic' means powers of two from 1 up to a quarter of the axis.
    """
    if spec_text == "dyadic":
        steps = []
        step = 1
        while step <= max(size // 4, 1):
            steps.append(step)
            step *= 2
        return steps
    return list(spec_text)


def cmd_hoelder(args) -> int:
    """Fit the roughness exponent of a sampled field along one axis.

    Writes a JSON report with the fitted gamma, its bootstrap CI, the fit
    quality, and the variogram itself.  With --config, quadrature oracle
    values for the same lags are included (mode-level when the input has no
    x column, field-level with --N otherwise).
    """
    values, grid, xs = _read_field_csv(args.infile)
    if args.axis == "space" and xs.size < 2:
        raise ConfigError("space axis needs a field CSV with an x column")
    cfg = load_config(args.config)
    cfg.override("regularity", "lags", args.lags)
    cfg.override("regularity", "bootstrap", args.bootstrap)
    lag_spec = cfg.get("regularity", "lags")
    size = values.shape[1] if args.axis == "time" else values.shape[2]
    steps = _lag_steps(lag_spec, size)
    sample = FieldSample(
        grid=grid,
        x=xs,
        values=values,
        n_modes=0,
        dynamics="unknown",
        seed=0,
    )
    curve = empirical_variogram(sample, args.axis, steps)
    fit = fit_exponent(curve, bootstrap=cfg.get("regularity", "bootstrap"))
    oracle = None
    if args.config is not None:
        measure = build_kernel(cfg)
        basis = build_basis(cfg)
        weights = build_weights(cfg)
        if args.axis == "time":
            if xs.size == 1:
                mode = build_mode(cfg, args.k)
                theory = theoretical_variogram(measure, mode, curve.lags)
            else:
                theory = theoretical_field_variogram(
                    measure, basis, weights, args.N, xs, curve.lags,
                    dynamics=args.dynamics,
                )
        else:
            theory = theoretical_space_variogram(
                basis, weights, args.N, xs, steps, dynamics=args.dynamics
            )
        oracle = [float(v) for v in theory.values]
    report = {
        "axis": args.axis,
        "gamma_hat": fit.gamma_hat,
        "ci": [fit.ci_low, fit.ci_high],
        "r_squared": fit.r_squared,
        "flagged": fit.flagged,
        "n_members": fit.n_members,
        "lags": [float(v) for v in curve.lags],
        "values": [float(v) for v in curve.values],
        "stderr": [float(v) for v in curve.stderr],
        "oracle_values": oracle,
    }
    _write_json(args.out, report)
    _write_sidecar(args.out, "hoelder", cfg, cfg.get("sampler", "seed"),
                   {"input": os.path.basename(args.infile)})
    return 0


# frozen settings for the one-shot comparison run; the lag windows avoid
# the truncation-contaminated smallest scales and the O(1) largest ones
_PROFILES = {
    "comparison_1d": {
        "atoms": [[1.0, 1.0]],
        "length": math.pi,
        "n_modes": 128,
        "time": {
            "dt": 2.0**-10,
            "n": 2**14,
            "ensemble": 64,
            "seed": 20240601,
            "probes": 16,
            "steps": [32, 64, 128, 256, 512],
            "fit_seed": 1,
        },
        "space": {
            "dt": 4.0,
            "n": 16,
            "ensemble": 256,
            "seed": 20240602,
            "nx": 255,
            "steps": [2, 4, 8, 16, 32],
            "fit_seed": 2,
        },
        "bootstrap": 200,
    },
}


def cmd_reproduce(args) -> int:
    """Run the four-cell roughness comparison and emit CSVs plus a summary.

    The memory-driven field and the memoryless baseline are both sampled on
    a fine time grid for the time exponents and as decorrelated snapshots on
    a fine space grid for the space exponents; each cell gets a variogram
    CSV and a {gamma_hat, ci_low, ci_high, r_squared} entry in summary.json.
    """
    profile = _PROFILES[args.profile]
    os.makedirs(args.out, exist_ok=True)
    cfg = load_config(None)
    cfg.override("kernel", "atoms", json.dumps(profile["atoms"]))
    cfg.override("basis", "length", profile["length"])
    cfg.override("sampler", "dt", profile["time"]["dt"])
    cfg.override("sampler", "n", profile["time"]["n"])
    cfg.override("sampler", "ensemble", profile["time"]["ensemble"])
    cfg.override("sampler", "seed", profile["time"]["seed"])
    cfg.override("regularity", "bootstrap", profile["bootstrap"])
    measure = build_kernel(cfg)
    basis = build_basis(cfg)
    weights = build_weights(cfg)
    n_modes = profile["n_modes"]
    workers = _threads(args)
    summary = {"profile": args.profile}

    time_spec = profile["time"]
    grid_t = TimeGrid(dt=time_spec["dt"], n=time_spec["n"])
    probes = _interior_grid(profile["length"], time_spec["probes"])
    space_spec = profile["space"]
    grid_x = TimeGrid(dt=space_spec["dt"], n=space_spec["n"])
    xg = _interior_grid(profile["length"], space_spec["nx"])

    cells = [
        ("gle_time", "gle", grid_t, probes, time_spec, "time"),
        ("heat_time", "heat", grid_t, probes, time_spec, "time"),
        ("gle_space", "gle", grid_x, xg, space_spec, "space"),
        ("heat_space", "heat", grid_x, xg, space_spec, "space"),
    ]
    for name, dynamics, grid, xs, spec_dict, axis in cells:
        sample = assemble_field(
            measure, basis, weights, n_modes, grid, xs,
            spec_dict["ensemble"], spec_dict["seed"],
            dynamics=dynamics, workers=workers,
        )
        curve = empirical_variogram(sample, axis, spec_dict["steps"])
        fit = fit_exponent(
            curve, bootstrap=profile["bootstrap"], seed=spec_dict["fit_seed"]
        )
        csv_path = os.path.join(args.out, f"{name}_variogram.csv")
        _write_csv(
            csv_path,
            ["lag", "value", "stderr"],
            (
                [_fmt(l), _fmt(v), _fmt(s)]
                for l, v, s in zip(curve.lags, curve.values, curve.stderr)
            ),
        )
        summary[name] = {
            "gamma_hat": fit.gamma_hat,
            "ci_low": fit.ci_low,
            "ci_high": fit.ci_high,
            "r_squared": fit.r_squared,
        }
    summary_path = os.path.join(args.out, "summary.json")
    _write_json(summary_path, summary)
    _write_sidecar(
        os.path.join(args.out, "reproduce"), "reproduce", cfg,
        time_spec["seed"],
        {"profile": args.profile, "n_modes": n_modes},
    )
    return 0


def _config_epilog() -> str:
    lines = ["config file keys (key = default): "]
    for section, keys in _SCHEMA.items():
        entries = ", ".join(f"{k} = {spec[0]}" for k, spec in keys.items())
        lines.append(f"  [{section}]  {entries}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="glefield",
        description="Stationary random field pipeline: kernels, spectra, samplers, roughness.",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=fn)
        return sp

    sp = add("kernel", cmd_kernel, "tabulate the memory kernel")
    sp.add_argument("--config", default=None, help="config file (defaults when omitted)")
    sp.add_argument("--t-max", type=float, default=10.0, dest="t_max")
    sp.add_argument("--points", type=int, default=256)
    sp.add_argument("--out", default="kernel.csv")

    sp = add("spectrum", cmd_spectrum, "tabulate one mode's spectral density")
    sp.add_argument("--config", default=None)
    sp.add_argument("--k", type=int, default=1, help="mode index")
    sp.add_argument("--omega-max", type=float, default=None, dest="omega_max",
                    help="grid end (default: twice the root bracket)")
    sp.add_argument("--points", type=int, default=2000)
    sp.add_argument("--out", default="spectrum.csv")

    sp = add("verify", cmd_verify, "variance identity and resonance report")
    sp.add_argument("--config", default=None)
    sp.add_argument("--k-list", default="1,10,100", dest="k_list",
                    help="comma-separated mode indices")
    sp.add_argument("--out", default="verify.json")

    sp = add("sample-mode", cmd_sample_mode, "sample one mode's trajectories")
    sp.add_argument("--config", default=None)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--ensemble", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--method", choices=("ce", "ss", "ou"), default=None)
    sp.add_argument("--out", default="paths.csv")

    sp = add("sample-field", cmd_sample_field, "sample the truncated field")
    sp.add_argument("--config", default=None)
    sp.add_argument("--N", type=int, default=64, help="modes kept in the series")
    sp.add_argument("--nx", type=int, default=16, help="interior spatial points")
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--ensemble", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--dynamics", choices=("gle", "heat", "spectral"), default="gle")
    sp.add_argument("--tail-budget", type=float, default=None, dest="tail_budget")
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--out", default="field.csv")

    sp = add("hoelder", cmd_hoelder, "fit a roughness exponent from a sample CSV")
    sp.add_argument("--in", required=True, dest="infile", help="paths.csv or field.csv")
    sp.add_argument("--axis", choices=("time", "space"), default="time")
    sp.add_argument("--lags", default=None, help="'dyadic' or comma-separated steps")
    sp.add_argument("--bootstrap", type=int, default=None)
    sp.add_argument("--config", default=None, help="include quadrature oracle values")
    sp.add_argument("--k", type=int, default=1, help="oracle mode index (mode-level input)")
    sp.add_argument("--N", type=int, default=128, help="oracle mode count (field input)")
    sp.add_argument("--dynamics", choices=("gle", "heat", "spectral"), default="gle")
    sp.add_argument("--out", default="report.json")

    sp = add("reproduce", cmd_reproduce, "one-shot roughness comparison run")
    sp.add_argument("--profile", choices=sorted(_PROFILES), default="comparison_1d")
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--out", default="reproduce_out")
    return p


_VALIDATION_ERRORS = (
    ConfigError,
    KernelError,
    ValueError,
    Divergent,
    TailBudgetExceeded,
    DegenerateFit,
    OSError,
)
_NUMERICAL_ERRORS = (ToleranceNotMet, EmbeddingNotPSD, InequalityViolated, NoResonance)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"glefield: numerical failure: {exc}", file=sys.stderr)
        return 3
    except _VALIDATION_ERRORS as exc:
        print(f"glefield: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
