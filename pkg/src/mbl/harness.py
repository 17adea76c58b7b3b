"""Experiment presets, run orchestration and travelling-wave table reports.

An :class:`ExperimentConfig` is the fully resolved description of one run.
Presets are stored in the same section/key form as configuration files
(see ``docs/config.md``) so that a preset, a file and ``--dump-config``
output all go through one parser.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import re
import shutil
import time
from concurrent.futures import Executor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, MBLError
from .meshing import (Closure, MMPDEConfig, MonitorConfig, MonitorKind, critical_fraction,
                      monitor_values, quality_report)
from .model import (BrooksCoreyModel, GravityModel, ModelSpec, SymmetricModel, Variant,
                    boundary_saturation)
from .solver import (ATOL, RTOL, BoundaryConditions, BoundaryKind, Diagnostics, InitialProfile,
                     ProfileKind, Series, diagnostics, mesh_quality_history, solve_moving,
                     uniform_reference)
from .travelling_wave import TWResult, WaveKind, analyse, solve_slope_ode

TABLE_DIGITS = 4
TABLE_ABS_TOL = 5e-3
TABLE_REL_TOL = 5e-3  # large-tau cells of table 8


# -- configuration ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: ModelSpec
    tau: float
    initial: InitialProfile
    domain: tuple
    T: float
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    mmpde: MMPDEConfig = field(default_factory=MMPDEConfig)
    method: str = "moving"
    bc: BoundaryConditions = field(default_factory=BoundaryConditions)
    rtol: float = RTOL
    atol: float = ATOL
    outputs: int = 5
    long_running: bool = False

    def __post_init__(self):
        if not self.tau >= 0:
            raise DomainError("tau must be non-negative")
        x_l, x_r = self.domain
        if not x_l < x_r:
            raise DomainError("domain must satisfy x_l < x_r")
        object.__setattr__(self, "domain", (float(x_l), float(x_r)))
        if not self.T > 0:
            raise DomainError("T must be positive")
        if self.method not in ("moving", "uniform"):
            raise DomainError(f"method must be 'moving' or 'uniform', got {self.method!r}")
        if not (self.rtol > 0 and self.atol > 0):
            raise DomainError("tolerances must be positive")
        if int(self.outputs) != self.outputs or self.outputs < 1:
            raise DomainError("outputs must be a positive integer")
        self.initial.check_domain(*self.domain)

    @property
    def output_times(self):
        return [self.T * (k + 1) / self.outputs for k in range(self.outputs)]


_SECTIONS = ("experiment", "model", "initial", "mesh", "solver")
_PROFILE_KEYS = {
    ProfileKind.TANH_FRONT: ("u_B", "u0", "x0", "steepness"),
    ProfileKind.PIECEWISE_THREE_LEVEL: ("u1", "u2", "u3", "x1", "x2", "steepness"),
}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def config_sections(cfg: ExperimentConfig) -> dict:
    """Section/key/value form of a resolved config (all values explicit)."""
    model = {"variant": cfg.model.variant.value, "tau": cfg.tau}
    model.update(dict(cfg.model.params))
    initial = {"kind": cfg.initial.kind.value}
    for key in _PROFILE_KEYS[cfg.initial.kind]:
        initial[key] = getattr(cfg.initial, key)
    return {
        "experiment": {"name": cfg.name, "T": cfg.T,
                       "domain": f"{cfg.domain[0]!r}, {cfg.domain[1]!r}",
                       "method": cfg.method, "outputs": cfg.outputs,
                       "long_running": cfg.long_running},
        "model": model,
        "initial": initial,
        "mesh": {"N": cfg.mmpde.N, "tau_mmpde": cfg.mmpde.tau_mmpde, "sigma": cfg.mmpde.sigma,
                 "closure": cfg.mmpde.closure, "monitor": cfg.monitor.kind,
                 "alpha_arc": cfg.monitor.alpha_arc, "beta": cfg.monitor.beta,
                 "m": cfg.monitor.m},
        "solver": {"rtol": cfg.rtol, "atol": cfg.atol, "boundary": cfg.bc.kind},
    }


def dump_config(cfg: ExperimentConfig) -> str:
    """Configuration text that parses back to ``cfg``."""
    out = []
    for sec, items in config_sections(cfg).items():
        out.append(f"[{sec}]")
        out.extend(f"{k} = {_fmt(v)}" for k, v in items.items())
        out.append("")
    return "\n".join(out)


def _line_of(text: str, section: str | None, key: str | None = None):
    """1-based line of ``key`` in ``section`` (or of the header), if present."""
    if text is None:
        return None
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section:
            m = re.match(r"([^=:#;]+?)\s*[=:]", line)
            if m and m.group(1).strip() == key:
                return no
    return None


class _Reader:
    """Typed access to a section dict with line-aware error messages."""

    def __init__(self, data: dict, text: str | None):
        self.data = data
        self.text = text
        self.used = {sec: set() for sec in data}

    def error(self, msg, section, key=None):
        return ConfigError(msg, _line_of(self.text, section, key))

    def has(self, sec, key):
        return key in self.data.get(sec, {})

    def raw(self, sec, key, default=None, required=False):
        if key in self.data.get(sec, {}):
            self.used[sec].add(key)
            return self.data[sec][key]
        if required:
            raise self.error(f"missing required key {sec}.{key}", sec)
        return default

    def float(self, sec, key, default=None, required=False):
        v = self.raw(sec, key, default, required)
        if v is None or isinstance(v, float):
            return v
        try:
            out = float(v)
        except (TypeError, ValueError):
            raise self.error(f"{sec}.{key}: expected a number, got {v!r}", sec, key) from None
        if not math.isfinite(out):
            raise self.error(f"{sec}.{key}: value must be finite", sec, key)
        return out

    def int(self, sec, key, default=None):
        v = self.raw(sec, key, default)
        if isinstance(v, int) and not isinstance(v, bool):
            return v
        try:
            f = float(v)
        except (TypeError, ValueError):
            raise self.error(f"{sec}.{key}: expected an integer, got {v!r}", sec, key) from None
        if f != int(f):
            raise self.error(f"{sec}.{key}: expected an integer, got {v!r}", sec, key)
        return int(f)

    def bool(self, sec, key, default=False):
        v = self.raw(sec, key, default)
        if isinstance(v, bool):
            return v
        s = str(v).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise self.error(f"{sec}.{key}: expected a boolean, got {v!r}", sec, key)

    def unused(self):
        for sec, items in self.data.items():
            for key in items:
                if key not in self.used.get(sec, set()):
                    raise self.error(f"unknown key {sec}.{key}", sec, key)


def _read_sections(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        msg = getattr(exc, "message", str(exc)).splitlines()[0]
        raise ConfigError(msg, line) from None
    data = {}
    for sec in parser.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", _line_of(text, sec))
        data[sec] = dict(parser[sec])
    return data


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings to section data."""
    out = {sec: dict(items) for sec, items in data.items()}
    for ov in overrides or ():
        m = re.fullmatch(r"\s*([A-Za-z_]+)\.([A-Za-z_0-9]+)\s*=\s*(.*?)\s*", ov)
        if not m:
            raise ConfigError(f"malformed override {ov!r}; expected section.key=value")
        sec, key, val = m.groups()
        if sec not in _SECTIONS:
            raise ConfigError(f"override {ov!r}: unknown section {sec!r}")
        out.setdefault(sec, {})[key] = val
    return out


def _merge(base: dict, top: dict) -> dict:
    out = {sec: dict(items) for sec, items in base.items()}
    for sec, items in top.items():
        out.setdefault(sec, {}).update(items)
    return out


def build_config(data: dict, text: str | None = None) -> ExperimentConfig:
    """Validate section data (optionally based on a preset) into a config."""
    preset = data.get("experiment", {}).get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}",
                              _line_of(text, "experiment", "preset"))
        rest = {sec: {k: v for k, v in items.items() if not (sec == "experiment" and k == "preset")}
                for sec, items in data.items()}
        data = _merge(PRESETS[preset], rest)
        if "name" not in rest.get("experiment", {}):
            data["experiment"]["name"] = preset
    r = _Reader(data, text)
    try:
        return _build(r)
    except ConfigError:
        raise
    except (DomainError, ValueError, TypeError) as exc:
        sec, key = _locate(str(exc), data)
        raise r.error(str(exc), sec, key) from None


def _locate(msg: str, data: dict):
    """Best effort: the first key whose name appears in an error message."""
    for sec in _SECTIONS:
        for key in data.get(sec, {}):
            if re.search(rf"\b{re.escape(key)}\b", msg):
                return sec, key
    return None, None


def _build(r: _Reader) -> ExperimentConfig:
    name = str(r.raw("experiment", "name", required=True))
    T = r.float("experiment", "T", required=True)
    dom = r.raw("experiment", "domain", required=True)
    try:
        parts = [float(v) for v in str(dom).split(",")]
    except ValueError:
        raise r.error(f"experiment.domain: expected 'x_l, x_r', got {dom!r}",
                      "experiment", "domain") from None
    if len(parts) != 2:
        raise r.error("experiment.domain needs two numbers", "experiment", "domain")
    method = str(r.raw("experiment", "method", "moving"))
    outputs = r.int("experiment", "outputs", 5)
    long_running = r.bool("experiment", "long_running", False)

    variant_raw = r.raw("model", "variant", required=True)
    try:
        variant = Variant(variant_raw)
    except ValueError:
        raise r.error(f"model.variant: unknown variant {variant_raw!r}", "model", "variant") \
            from None
    tau = r.float("model", "tau", required=True)
    params = {}
    for key in ModelSpec.parameter_names(variant):
        if r.has("model", key):
            params[key] = r.float("model", key)
    spec = ModelSpec(variant, params)
    model = spec.build()

    kind_raw = r.raw("initial", "kind", ProfileKind.TANH_FRONT.value)
    try:
        kind = ProfileKind(kind_raw)
    except ValueError:
        raise r.error(f"initial.kind: unknown profile {kind_raw!r}", "initial", "kind") from None
    prof = {"kind": kind}
    for key in _PROFILE_KEYS[kind]:
        if not r.has("initial", key):
            continue
        raw = r.raw("initial", key)
        if key == "u_B" and str(raw).strip() == "boundary":
            try:
                prof[key] = boundary_saturation(model)
            except MBLError as exc:
                raise r.error(f"initial.u_B: {exc}", "initial", key) from None
        else:
            prof[key] = r.float("initial", key)
    initial = InitialProfile(**prof)

    N = r.int("mesh", "N", MMPDEConfig.N)
    tau_m = r.raw("mesh", "tau_mmpde", "auto")
    tau_mmpde = 1e-3 * T if str(tau_m).strip() == "auto" else r.float("mesh", "tau_mmpde")
    closure = r.raw("mesh", "closure", Closure.REFLECTED.value)
    mmpde = MMPDEConfig(N=N, tau_mmpde=tau_mmpde, sigma=r.float("mesh", "sigma", 2.0),
                        closure=closure)
    monitor = MonitorConfig(kind=MonitorKind(r.raw("mesh", "monitor", MonitorKind.SMOOTHED.value)),
                            alpha_arc=r.float("mesh", "alpha_arc", 1.0),
                            beta=r.float("mesh", "beta", 0.9),
                            m=r.int("mesh", "m", 1))
    rtol = r.float("solver", "rtol", RTOL)
    atol = r.float("solver", "atol", ATOL)
    bc = BoundaryConditions(kind=BoundaryKind(r.raw("solver", "boundary", "dirichlet")))
    r.unused()
    return ExperimentConfig(name=name, model=spec, tau=tau, initial=initial,
                            domain=tuple(parts), T=T, monitor=monitor, mmpde=mmpde,
                            method=method, bc=bc, rtol=rtol, atol=atol, outputs=outputs,
                            long_running=long_running)


def parse_config(text: str, overrides=None) -> ExperimentConfig:
    """Parse configuration text (INI sections, see ``docs/config.md``)."""
    data = apply_overrides(_read_sections(text), overrides)
    return build_config(data, text)


def preset_config(name: str, overrides=None) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return build_config(apply_overrides({"experiment": {"preset": name}}, overrides))


# -- presets ------------------------------------------------------------------------------

def _piecewise(name, tau, u2, N):
    return {
        "experiment": {"name": name, "T": "0.5", "domain": "0, 3", "outputs": "5"},
        "model": {"variant": "symmetric", "M": "0.5", "eps": "0.001", "tau": str(tau)},
        "initial": {"kind": "piecewise-three-level", "u1": "0.25", "u2": str(u2), "u3": "0",
                    "x1": "0.75", "x2": "2.25", "steepness": "200"},
        "mesh": {"N": str(N), "tau_mmpde": "auto", "sigma": "2"},
    }


def _gravity(name, vT, tau, u_B, u0):
    return {
        "experiment": {"name": name, "T": "1", "domain": "-0.25, 1.5", "outputs": "4"},
        "model": {"variant": "gravity", "M": "10", "eps": "0.001", "C": "10", "vT": str(vT),
                  "tau": str(tau)},
        "initial": {"kind": "tanh-front", "u_B": str(u_B), "u0": str(u0), "x0": "0",
                    "steepness": "200"},
        "mesh": {"N": "200", "tau_mmpde": "auto", "sigma": "2"},
    }


def _full(name, u0, tau, T, N=800, long_running=True):
    return {
        "experiment": {"name": name, "T": str(T), "domain": "-0.05, 0.35", "outputs": "5",
                       "long_running": str(long_running).lower()},
        "model": {"variant": "brooks-corey", "vT": "1.32e-4", "tau": str(tau)},
        "initial": {"kind": "tanh-front", "u_B": "boundary", "u0": str(u0), "x0": "0",
                    "steepness": "200"},
        "mesh": {"N": str(N), "tau_mmpde": "auto", "sigma": "2"},
    }


PRESETS: dict[str, dict] = {
    "example1": _piecewise("example1", 3.5, 0.85, 400),
    "example2": _piecewise("example2", 5, 0.66, 400),
    "example3": _piecewise("example3", 5, 0.52, 200),
}
for _vt in ("1.0", "0.6", "0.4", "0.1"):
    PRESETS[f"example4-vt-{_vt}"] = _gravity(f"example4-vt-{_vt}", _vt, 3.3812, "boundary", 0)
for _u0 in ("0", "0.1", "0.2", "0.25"):
    PRESETS[f"example5-u0-{_u0}"] = _gravity(f"example5-u0-{_u0}", 0.6, 2.13, 0.75, _u0)
PRESETS.update({
    "example6-u0-0.003": _full("example6-u0-0.003", 0.003, 1246, 350),
    "example6-u0-0.003-t460": _full("example6-u0-0.003-t460", 0.003, 1246, 460),
    "example6-u0-0.03": _full("example6-u0-0.03", 0.03, 1246, 350),
    "example6-u0-0.03-tau5271": _full("example6-u0-0.03-tau5271", 0.03, 5271, 460),
    "example6-smoke": _full("example6-smoke", 0.003, 1246, 35, N=200, long_running=False),
})


def list_presets() -> list[tuple[str, bool]]:
    return [(name, str(p["experiment"].get("long_running", "false")) == "true")
            for name, p in PRESETS.items()]


# -- runs ---------------------------------------------------------------------------------------

@dataclass
class WavePrediction:
    """Travelling-wave expectation for one Riemann problem of the initial data."""

    part: str
    result: TWResult

    @property
    def expects_plateau(self) -> bool:
        return self.result.description in (WaveKind.MONOTONE_PLATEAU,
                                           WaveKind.NON_MONOTONE_PLATEAU)

    @property
    def expects_basin(self) -> bool:
        return self.result.description in (WaveKind.MONOTONE_BASIN,
                                           WaveKind.NON_MONOTONE_BASIN)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    series: Series
    diagnostics: Diagnostics
    quality: dict
    predictions: list
    slope_comparison: dict | None
    critical_fraction: float

    def summary(self) -> dict:
        s = self.series
        out = self.diagnostics.as_dict()
        out.update({
            "accepted_steps": s.accepted, "rejected_steps": s.rejected,
            "newton_iters": s.newton_iters, "jacobians": s.jacobians,
            "wall_time": s.wall_time, "quality": self.quality,
            "critical_fraction": self.critical_fraction,
            "predictions": [dict(part=p.part, **p.result.as_row()) for p in self.predictions],
            "slope_comparison": self.slope_comparison,
        })
        return out


def predict(cfg: ExperimentConfig, model=None) -> list[WavePrediction]:
    """Travelling-wave analysis of the Riemann problems in the initial data."""
    model = model or cfg.model.build()
    ini = cfg.initial
    if ini.kind is ProfileKind.TANH_FRONT:
        pairs = [("front", ini.u_B, ini.u0)]
    else:
        pairs = [("left", ini.u1, ini.u2), ("right", ini.u2, ini.u3)]
    return [WavePrediction(part, analyse(model, a, b, cfg.tau)) for part, a, b in pairs]


def _slope_comparison(model, pred: WavePrediction, diag: Diagnostics):
    r = pred.result
    if r.u_bar is None or r.switched or diag.max_neg_slope is None:
        return None
    prof = solve_slope_ode(model, r.u0, r.u_bar, r.tau)
    w_max = float(np.max(prof.w))
    return {"reference_max_slope": w_max, "computed_max_slope": diag.max_neg_slope,
            "ratio": diag.max_neg_slope / w_max}


def run_experiment(cfg: ExperimentConfig, wall_limit: float | None = None) -> ExperimentResult:
    """Travelling-wave pre-analysis followed by the PDE solve."""
    model = cfg.model.build()
    predictions = predict(cfg, model)
    common = dict(output_times=cfg.output_times, rtol=cfg.rtol, atol=cfg.atol,
                  bc=cfg.bc, wall_limit=wall_limit)
    if cfg.method == "moving":
        series = solve_moving(model, cfg.tau, cfg.initial, cfg.domain, cfg.T,
                              monitor=cfg.monitor, mmpde=cfg.mmpde, **common)
    else:
        series = uniform_reference(model, cfg.tau, cfg.mmpde.N, (0.0, cfg.T), cfg.initial,
                                   cfg.domain, **common)
    x, u = series.x[-1], series.u[-1]
    diag = diagnostics(x, u)
    quality = mesh_quality_history(series)
    omega = monitor_values(cfg.monitor, u, x)
    quality["final"] = quality_report(x, omega, cfg.mmpde).as_dict()
    slope = _slope_comparison(model, predictions[-1], diag)
    return ExperimentResult(cfg, series, diag, quality, predictions, slope,
                            critical_fraction(u, cfg.monitor.beta))


def comparison_text(res: ExperimentResult) -> str:
    """Predicted versus observed features, one line per quantity."""
    d = res.diagnostics
    lead = res.predictions[-1].result
    lines = [f"experiment {res.config.name}"]
    for p in res.predictions:
        r = p.result
        lines.append(f"{p.part}: u_B={r.u_B:.4f} u_0={r.u0:.4f} tau={r.tau:g} "
                     f"predicted '{r.description.value}' (u_under={_cell(r.u_under)}, "
                     f"u_bar={_cell(r.u_bar)})")
    lines.append(f"observed leading wave: '{d.morphology}'")
    lines.append(_diff_line("plateau height", d.plateau_height, lead.u_bar
                            if res.predictions[-1].expects_plateau else None))
    basin_ref = None
    for p in res.predictions:
        if p.expects_basin:
            basin_ref = p.result.u_under
    lines.append(_diff_line("basin height", d.basin_height, basin_ref))
    if res.slope_comparison:
        sc = res.slope_comparison
        lines.append(f"max -u_x: computed {sc['computed_max_slope']:.4g}, "
                     f"travelling wave {sc['reference_max_slope']:.4g} (ratio {sc['ratio']:.3f})")
    return "\n".join(lines) + "\n"


def _cell(v, fmt="{:.4f}"):
    return "--" if v is None else fmt.format(v)


def _diff_line(label, computed, expected):
    if computed is None and expected is None:
        return f"{label}: absent (expected absent)"
    diff = "" if computed is None or expected is None else \
        f" diff {computed - expected:+.4f} ({100 * abs(computed - expected) / expected:.2f}%)"
    return f"{label}: computed {_cell(computed)}, expected {_cell(expected)}{diff}"


class OutputExistsError(MBLError):
    """The output directory exists and overwriting was not requested."""


def output_root(root=None) -> Path:
    return Path(root or os.environ.get("MBL_OUT_DIR") or "out")


def write_outputs(res: ExperimentResult, root=None, force: bool = False) -> Path:
    """Write ``<root>/<name>/`` with config, snapshots, mesh, diagnostics, report."""
    out = output_root(root) / res.config.name
    if out.exists() and any(out.iterdir()):
        if not force:
            raise OutputExistsError(f"{out} exists; pass --force to overwrite")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dump_config(res.config))
    s = res.series
    with open(out / "snapshots.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "i", "x", "u"])
        for t, x, u in zip(s.times, s.x, s.u):
            for i, (xi, ui) in enumerate(zip(x, u)):
                w.writerow([repr(float(t)), i, repr(float(xi)), repr(float(ui))])
    with open(out / "mesh.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i}" for i in range(len(s.x[0]))])
        for t, x in zip(s.times, s.x):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
    (out / "diagnostics.json").write_text(json.dumps(res.summary(), indent=2, default=_json))
    (out / "report.txt").write_text(comparison_text(res))
    return out


def _json(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(type(o).__name__)


def run_presets(items, executor: Executor | None = None, **kw) -> dict:
    """Run presets (names or configs), optionally through an executor (one task each)."""
    cfgs = [preset_config(c) if isinstance(c, str) else c for c in items]
    if executor is None:
        return {c.name: run_experiment(c, **kw) for c in cfgs}
    futs = {c.name: executor.submit(run_experiment, c, **kw) for c in cfgs}
    return {n: f.result() for n, f in futs.items()}


# -- travelling-wave tables ---------------------------------------------------------------------

def _sym():
    return SymmetricModel(M=0.5, eps=1e-3)


_COLUMNS = ("u_B", "tau_star", "tau_s", "u_alpha", "u_under", "u_bar")

# Reference cells: (label, model factory, u_B or None for the boundary saturation,
# u_0, tau, {column: value or None}, description)
REFERENCE_TABLES = {
    "2": [
        ("Example 1 left", _sym, 0.25, 0.85, 3.5,
         dict(tau_star=0.6826, tau_s=0.4495, u_alpha=0.2151, u_under=0.1036, u_bar=0.3155),
         "Non-monotone basin"),
        ("Example 1 right", _sym, 0.85, 0.0, 3.5,
         dict(tau_star=0.7545, tau_s=None, u_alpha=0.5774, u_under=0.4804, u_bar=0.6938),
         "Monotone plateau"),
        ("Example 2 left", _sym, 0.25, 0.66, 5.0,
         dict(tau_star=1.0560, tau_s=1.0775, u_alpha=0.2702, u_under=0.2027, u_bar=0.3353),
         "Non-monotone basin"),
        ("Example 2 right", _sym, 0.66, 0.0, 5.0,
         dict(tau_star=0.7545, tau_s=2.5023, u_alpha=0.5774, u_under=0.4674, u_bar=0.7130),
         "Non-monotone plateau"),
        ("Example 3 left", _sym, 0.25, 0.52, 5.0,
         dict(tau_star=3.0723, tau_s=None, u_alpha=0.3246, u_under=0.3109, u_bar=0.3382),
         "Monotone basin"),
        ("Example 3 right", _sym, 0.52, 0.0, 5.0,
         dict(tau_star=0.7545, tau_s=0.4154, u_alpha=0.5774, u_under=0.4674, u_bar=0.7130),
         "Non-monotone plateau"),
    ],
    "4": [
        ("v_T=1.0", lambda: GravityModel(vT=1.0), None, 0.0, 3.3812,
         dict(u_B=1.0, u_alpha=0.8580, tau_star=0.5848, tau_s=None, u_under=0.7452,
              u_bar=0.9800), "Monotone plateau"),
        ("v_T=0.6", lambda: GravityModel(vT=0.6), None, 0.0, 3.3812,
         dict(u_B=0.7746, u_alpha=0.7662, tau_star=1.4633, tau_s=2.3406, u_under=0.7035,
              u_bar=0.8255), "Non-monotone plateau"),
        ("v_T=0.4", lambda: GravityModel(vT=0.4), None, 0.0, 3.3812,
         dict(u_B=0.6325, u_alpha=0.7093, tau_star=2.2330, tau_s=1.1512, u_under=0.6779,
              u_bar=0.7393), "Non-monotone overshoot"),
        ("v_T=0.1", lambda: GravityModel(vT=0.1), None, 0.0, 3.3812,
         dict(u_B=0.3162, u_alpha=0.6318, tau_star=3.8537, tau_s=2.6097, u_under=None,
              u_bar=None), "Monotone, no plateau"),
    ],
    "5": [
        ("u_0=0.00", lambda: GravityModel(vT=0.6), 0.75, 0.0, 2.13,
         dict(u_alpha=0.7662, tau_star=1.4633, tau_s=2.0371, u_under=0.7354, u_bar=0.7961),
         "Non-monotone plateau"),
        ("u_0=0.10", lambda: GravityModel(vT=0.6), 0.75, 0.1, 2.13,
         dict(u_alpha=0.7519, tau_star=1.6312, tau_s=4.0993, u_under=0.7320, u_bar=0.7714),
         "Non-monotone plateau"),
        ("u_0=0.20", lambda: GravityModel(vT=0.6), 0.75, 0.2, 2.13,
         dict(u_alpha=0.7358, tau_star=1.9688, tau_s=None, u_under=0.7306, u_bar=0.7410),
         "Monotone plateau"),
        ("u_0=0.25", lambda: GravityModel(vT=0.6), 0.75, 0.25, 2.13,
         dict(u_alpha=0.7268, tau_star=2.2537, tau_s=None, u_under=None, u_bar=None),
         "Monotone, no plateau"),
    ],
    "8": [
        ("u_0=0.003, tau=1246", lambda: BrooksCoreyModel(vT=1.32e-4), None, 0.003, 1246.0,
         dict(u_B=0.4212, tau_star=25.89, tau_s=2117.0, u_alpha=0.7440, u_under=0.3190,
              u_bar=0.9500), "Non-monotone plateau"),
        ("u_0=0.03, tau=1246", lambda: BrooksCoreyModel(vT=1.32e-4), None, 0.03, 1246.0,
         dict(u_B=0.4212, tau_star=83.52, tau_s=368.4, u_alpha=0.7429, u_under=0.4533,
              u_bar=0.8878), "Non-monotone overshoot"),
        ("u_0=0.03, tau=5271", lambda: BrooksCoreyModel(vT=1.32e-4), None, 0.03, 5271.0,
         dict(u_B=0.4212, tau_star=83.52, tau_s=588.9, u_alpha=0.7429, u_under=0.3664,
              u_bar=0.9200), "Non-monotone plateau"),
    ],
}
_RELATIVE = {"8": ("tau_star", "tau_s")}


@dataclass
class TableCell:
    column: str
    computed: float | None
    reference: float | None
    tolerance: float
    relative: bool = False

    @property
    def diff(self) -> float | None:
        if self.computed is None or self.reference is None:
            return None
        return self.computed - self.reference

    @property
    def ok(self) -> bool:
        if self.computed is None or self.reference is None:
            return self.computed is None and self.reference is None
        bound = self.tolerance * abs(self.reference) if self.relative else self.tolerance
        return abs(self.diff) <= bound


@dataclass
class TableRow:
    label: str
    cells: list
    description: str
    reference_description: str
    result: TWResult

    @property
    def ok(self) -> bool:
        return self.description == self.reference_description and all(c.ok for c in self.cells)


@dataclass
class TableReport:
    table_id: str
    rows: list
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def failures(self) -> list[str]:
        out = []
        for r in self.rows:
            for c in r.cells:
                if not c.ok:
                    out.append(f"table {self.table_id} {r.label} {c.column}: computed "
                               f"{_cell(c.computed)} vs {_cell(c.reference)}")
            if r.description != r.reference_description:
                out.append(f"table {self.table_id} {r.label}: '{r.description}' vs "
                           f"'{r.reference_description}'")
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        cols = [c.column for c in self.rows[0].cells]
        w.writerow(["row"] + cols + ["description"])
        for r in self.rows:
            w.writerow([r.label] + ["--" if c.computed is None else f"{c.computed:.6g}"
                                    for c in r.cells] + [r.description])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"Table {self.table_id}: computed / reference / difference"]
        for r in self.rows:
            lines.append(f"{r.label}")
            for c in r.cells:
                d = "" if c.diff is None else f"{c.diff:+.2e}"
                flag = "ok" if c.ok else "MISMATCH"
                lines.append(f"  {c.column:<9}{_cell(c.computed, '{:.6g}'):>12}"
                             f"{_cell(c.reference, '{:.6g}'):>12}  {d:>10}  {flag}")
            flag = "ok" if r.description == r.reference_description else "MISMATCH"
            lines.append(f"  description: {r.description} / {r.reference_description}  {flag}")
        return "\n".join(lines) + "\n"


def reproduce_table(table_id, digits: int | None = TABLE_DIGITS) -> TableReport:
    """Recompute every cell of a travelling-wave table."""
    table_id = str(table_id)
    if table_id not in REFERENCE_TABLES:
        raise DomainError(f"table id must be one of {sorted(REFERENCE_TABLES)}, got {table_id}")
    start = time.perf_counter()
    rows = []
    for label, factory, u_B, u0, tau, ref, desc in REFERENCE_TABLES[table_id]:
        model = factory()
        if u_B is None:
            u_B = boundary_saturation(model)
        r = analyse(model, u_B, u0, tau, digits=digits)
        values = {"u_B": u_B, "tau_star": r.tau_star, "tau_s": r.tau_s, "u_alpha": r.u_alpha,
                  "u_under": r.u_under, "u_bar": r.u_bar}
        cells = []
        for col in _COLUMNS:
            if col not in ref:
                continue
            rel = col in _RELATIVE.get(table_id, ())
            cells.append(TableCell(col, values[col], ref[col],
                                   TABLE_REL_TOL if rel else TABLE_ABS_TOL, rel))
        rows.append(TableRow(label, cells, r.description.value, desc, r))
    return TableReport(table_id, rows, time.perf_counter() - start)
