"""Experiment configuration, orchestration and result files.

Configurations are INI files (see ``configs/`` in the package). Every
pass/fail threshold is read from the ``[verdict]`` section.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import boltzmann, duhamel, theta
from .bloch import ALPHA_PRESETS, diophantine_estimate, matrix_oracle
from .phasespace import (ScalingParams, WavepacketSpec, free_evolve_symbol, hs_pairing,
                         wavepacket_expectation, wavepacket_symbol)
from .symbolcalc import ComplexGaussian, SymbolPair

EXPERIMENTS = {
    "zeroth": "zeroth-order Bloch pairing vs <a, b> (Poisson summation in m)",
    "first-cancel": "first-order coefficient Q_1 vanishes (l = 0, 1 terms cancel)",
    "theta-mean": "horocycle mean of Theta_f vs shell + diagonal limit",
    "theta-mean-family": "horocycle mean of the eta-integrated F_r vs its limit",
    "second-order": "Q_2 from theta sums vs <L_2(t) a, b> (golden-rule kernel)",
    "duhamel-vs-oracle": "brute-force propagator vs Q_0 + lam Q_1 + lam^2 Q_2, slope in lam",
    "alpha-average": "theta-mean deviation averaged over random alpha vs the preset",
    "wavepacket": "averaged wave-packet expectation vs <L_0(t) a, b>",
}

CSV_COLUMNS = ["experiment", "d", "r", "alpha_id", "value_re", "value_im", "limit_re",
               "limit_im", "abs_dev", "rel_dev", "tail_est", "seconds"]

# section -> key -> parser
_floats = lambda s: tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())
_bool = lambda s: s.strip().lower() in ("1", "true", "yes", "on")
SCHEMA = {
    "experiment": {"name": str, "d": int, "t": float, "radii": _floats, "lams": _floats},
    "alpha": {"mode": str, "vector": _floats, "count": int, "seed": int},
    "symbols": {"a_width_x": float, "a_width_y": float, "a_center_y": _floats,
                "b_width_x": float, "b_width_y": float, "b_center_y": _floats,
                "test_width": float, "u_width": float, "eta_width": float,
                "w_support": _floats, "packet_width": float, "packet_p0": _floats,
                "packet_pwidth": float},
    "numerics": {"eps": float, "order": int, "inner_order": int, "eta_order": int,
                 "route_r": float, "method": str},
    "verdict": {"abs_tol": _floats, "rel_tol": float, "monotone": _bool,
                "final_rel_tol": float, "slope_target": float, "slope_tol": float,
                "route_rel_tol": float, "se_factor": float, "scaled_tol": float},
    "output": {"dir": str, "format": str, "timing": _bool, "threads": int},
}


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    name: str
    d: int = 2
    t: float = 0.5
    radii: tuple = (0.2, 0.1)
    lams: tuple = ()
    alpha_mode: str = "preset"
    alpha_vector: tuple = ()
    alpha_count: int = 0
    seed: int | None = None
    symbols: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    verdict: dict = field(default_factory=dict)
    out_dir: str = "results"
    out_format: str = "csv"
    timing: bool = False
    threads: int = 1

    def validate(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}")
        if self.d not in (2, 3):
            raise ConfigError("d must be 2 or 3")
        if not self.radii or any(not (0 < r <= 1) for r in self.radii):
            raise ConfigError("radii must lie in (0, 1]")
        if self.t <= 0:
            raise ConfigError("t must be positive")
        if self.alpha_mode not in ("preset", "explicit", "random"):
            raise ConfigError("alpha mode must be preset, explicit or random")
        if self.alpha_mode == "explicit" and len(self.alpha_vector) != self.d:
            raise ConfigError("alpha vector must have d components")
        if self.alpha_mode == "random" and (self.seed is None or self.alpha_count < 1):
            raise ConfigError("random alpha needs a seed and a positive count")
        if self.out_format not in ("csv", "json-lines"):
            raise ConfigError("format must be csv or json-lines")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.name == "duhamel-vs-oracle" and len(self.lams) < 2:
            raise ConfigError("the oracle experiment needs at least two couplings")
        if self.name in ("second-order", "duhamel-vs-oracle", "first-cancel") and self.d != 2:
            raise ConfigError("the Duhamel experiments are set up for d = 2")
        eps = self.numerics.get("eps", 1e-16)
        if not (0 < eps < 1e-6):
            raise ConfigError("eps must lie in (0, 1e-6)")
        return self

    @classmethod
    def from_ini(cls, text: str):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp.read_string(text)
        vals = {}
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            for key, raw in cp[sec].items():
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                try:
                    vals[(sec, key)] = SCHEMA[sec][key](raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {sec}.{key}: {raw!r}") from exc
        if ("experiment", "name") not in vals:
            raise ConfigError("missing experiment.name")
        g = lambda s, k, dflt: vals.get((s, k), dflt)
        cfg = cls(
            name=vals[("experiment", "name")],
            d=g("experiment", "d", 2),
            t=g("experiment", "t", 0.5),
            radii=g("experiment", "radii", (0.2, 0.1)),
            lams=g("experiment", "lams", ()),
            alpha_mode=g("alpha", "mode", "preset"),
            alpha_vector=g("alpha", "vector", ()),
            alpha_count=g("alpha", "count", 0),
            seed=g("alpha", "seed", None),
            symbols={k: v for (s, k), v in vals.items() if s == "symbols"},
            numerics={k: v for (s, k), v in vals.items() if s == "numerics"},
            verdict={k: v for (s, k), v in vals.items() if s == "verdict"},
            out_dir=g("output", "dir", "results"),
            out_format=g("output", "format", "csv"),
            timing=g("output", "timing", False),
            threads=g("output", "threads", 1),
        )
        return cfg.validate()

    @classmethod
    def from_file(cls, path):
        return cls.from_ini(Path(path).read_text())

    @classmethod
    def bundled(cls, name):
        """The configuration shipped with the package for experiment name."""
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}")
        text = resources.files("boltzgrad").joinpath("configs", f"{name}.ini").read_text()
        return cls.from_ini(text)


@dataclass
class Row:
    r: float
    alpha_id: str
    value: complex
    limit: complex
    abs_dev: float
    rel_dev: float
    tail_est: float
    seconds: float = 0.0


@dataclass
class Verdict:
    passed: bool | None
    measured: float
    threshold: str
    note: str = ""

    def __post_init__(self):
        if self.passed is not None:
            self.passed = bool(self.passed)
        self.measured = float(self.measured)


@dataclass
class ConvergenceRecord:
    experiment: str
    d: int
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    def sort(self):
        self.rows.sort(key=lambda w: (-w.r, w.alpha_id))
        return self

    @property
    def passed(self):
        vs = [v.passed for v in self.verdicts.values() if v.passed is not None]
        return bool(vs) and all(vs)


# --- building blocks ---------------------------------------------------

def gaussian_symbol(d, width_x=1.0, width_y=1.0, center_y=()):
    """exp(-pi (|x|^2 / width_x^2 + |y - c|^2 / width_y^2))."""
    c = np.zeros(d) if len(center_y) == 0 else np.asarray(center_y, float)
    M = np.diag(np.r_[np.full(d, width_x ** -2.0), np.full(d, width_y ** -2.0)])
    w = np.r_[np.zeros(d), 2 * np.pi * c / width_y ** 2]
    return ComplexGaussian(2 * d, math.exp(-math.pi * c @ c / width_y ** 2), M, w)


def symbol_pair(cfg: ExperimentConfig) -> SymbolPair:
    s, d = cfg.symbols, cfg.d
    a = gaussian_symbol(d, s.get("a_width_x", 1.0), s.get("a_width_y", 1.0), s.get("a_center_y", ()))
    b = gaussian_symbol(d, s.get("b_width_x", 1.0), s.get("b_width_y", 1.0), s.get("b_center_y", ()))
    return SymbolPair(a, b, d)


def test_function(cfg: ExperimentConfig) -> ComplexGaussian:
    """exp(-pi (|y1|^2 + |y2|^2) / width^2) on R^2d."""
    wd = cfg.symbols.get("test_width", 1.0)
    return ComplexGaussian(2 * cfg.d, 1.0, np.eye(2 * cfg.d) / wd ** 2, np.zeros(2 * cfg.d))


def alphas(cfg: ExperimentConfig):
    """List of (alpha_id, alpha vector)."""
    if cfg.alpha_mode == "preset":
        return [("preset", np.array(ALPHA_PRESETS[cfg.d]))]
    if cfg.alpha_mode == "explicit":
        return [("explicit", np.array(cfg.alpha_vector))]
    rng = np.random.default_rng(cfg.seed)
    return [(f"mc-{k:03d}", rng.random(cfg.d)) for k in range(cfg.alpha_count)]


def _row(r, aid, value, limit, tail, seconds, rel_base=None):
    value, limit = complex(value), complex(limit)
    ad = abs(value - limit)
    base = abs(limit) if rel_base is None else rel_base
    rd = ad / base if base > 0 else float("inf")
    return Row(float(r), aid, value, limit, float(ad), float(rd), float(tail), float(seconds))


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


# --- per-cell evaluators (module level so they can be sent to workers) ---

def _cell_zeroth(cfg, r, aid, alpha):
    pair = symbol_pair(cfg)
    setup = duhamel.DuhamelSetup(pair, ScalingParams(cfg.d, r), alpha, eps=cfg.numerics.get("eps", 1e-16))
    v, sec = _timed(duhamel.eval_I00, setup)
    return [_row(r, aid, v.value, hs_pairing(pair.a, pair.b), v.tail, sec)]


def _cell_first(cfg, r, aid, alpha):
    pair = symbol_pair(cfg)
    setup = duhamel.DuhamelSetup(pair, ScalingParams(cfg.d, r, t=cfg.t), alpha,
                                 eps=cfg.numerics.get("eps", 1e-16))
    t0 = time.perf_counter()
    q0 = duhamel.assemble_Q(setup, 0, cfg.t)
    q1 = duhamel.assemble_Q(setup, 1, cfg.t, order=cfg.numerics.get("order", 8))
    sec = time.perf_counter() - t0
    return [_row(r, aid, q1.value, 0.0, q1.tail, sec, rel_base=abs(q0.value))]


def _horocycle_exp(cfg, r, alpha):
    sup = cfg.symbols.get("w_support", (-1.0, 1.0))
    return theta.HorocycleExperiment(cfg.d, r, tuple(alpha), tuple(sup),
                                     order=cfg.numerics.get("order", 8))


def _theta_limit(cfg, f):
    lo, hi = cfg.symbols.get("w_support", (-1.0, 1.0))
    w0 = 1.0 if lo <= 0 <= hi else 0.0
    return theta.theta_limit(f, cfg.d, w0=w0, w_support=(lo, hi))


def _cell_theta_mean(cfg, r, aid, alpha):
    f = test_function(cfg)
    (v, tail), sec = _timed(theta.horocycle_mean, f, _horocycle_exp(cfg, r, alpha))
    return [_row(r, aid, v, _theta_limit(cfg, f), tail, sec)]


def _family(cfg):
    s = cfg.symbols
    return theta.separable_family(test_function(cfg), s.get("u_width", 1.0), s.get("eta_width", 1.0))


def _cell_theta_family(cfg, r, aid, alpha):
    f = _family(cfg)
    (v, tail), sec = _timed(theta.horocycle_mean, f, _horocycle_exp(cfg, r, alpha))
    return [_row(r, aid, v, _theta_limit(cfg, f), tail, sec)]


def _evolved_pair(cfg):
    pair = symbol_pair(cfg)
    return SymbolPair(free_evolve_symbol(pair.a, cfg.t, cfg.d), pair.b, cfg.d)


def _cell_second(cfg, r, aid, alpha):
    pair = symbol_pair(cfg)
    setup = duhamel.DuhamelSetup(_evolved_pair(cfg), ScalingParams(cfg.d, r, t=cfg.t), alpha,
                                 eps=cfg.numerics.get("eps", 1e-16))
    n = cfg.numerics
    v, sec = _timed(lambda: duhamel.assemble_Q(setup, 2, cfg.t, method="theta",
                                               order=n.get("order", 8),
                                               inner_order=n.get("inner_order", 12)))
    lim = boltzmann.L2_pairing(cfg.t, pair)
    rows = [_row(r, aid, v.value, lim, v.tail, sec)]
    if abs(r - n.get("route_r", -1.0)) < 1e-12:
        w, sec2 = _timed(lambda: duhamel.assemble_Q(setup, 2, cfg.t, method="direct",
                                                    order=n.get("order", 8)))
        rows.append(_row(r, aid + ":direct", w.value, lim, w.tail, sec2))
    return rows


def _cell_oracle(cfg, r, aid, alpha, lam):
    pair = symbol_pair(cfg)
    n = cfg.numerics
    p = ScalingParams(cfg.d, r, lam=lam, t=cfg.t)
    setup = duhamel.DuhamelSetup(_evolved_pair(cfg), ScalingParams(cfg.d, r, t=cfg.t), alpha,
                                 eps=n.get("eps", 1e-16))
    t0 = time.perf_counter()
    orc = matrix_oracle(pair, p, alpha, eta_order=n.get("eta_order", 10))
    q = [duhamel.assemble_Q(setup, k, cfg.t, order=n.get("order", 8)) for k in range(3)]
    sec = time.perf_counter() - t0
    series = q[0].value + lam * q[1].value + lam ** 2 * q[2].value
    return [_row(r, f"{aid}:lam={lam:g}", orc.value, series, orc.boundary_mass, sec)]


def _cell_wavepacket(cfg, r, aid, alpha):
    s = cfg.symbols
    spec = WavepacketSpec(cfg.d, s.get("packet_width", 1.0), tuple(s.get("packet_p0", ())),
                          s.get("packet_pwidth", 1.0))
    a = wavepacket_symbol(spec)
    b = symbol_pair(cfg).b
    v, sec = _timed(wavepacket_expectation, spec, b, ScalingParams(cfg.d, r), cfg.t)
    lim = hs_pairing(free_evolve_symbol(a, cfg.t, cfg.d), b)
    return [_row(r, aid, v, lim, 0.0, sec)]


CELLS = {
    "zeroth": _cell_zeroth,
    "first-cancel": _cell_first,
    "theta-mean": _cell_theta_mean,
    "theta-mean-family": _cell_theta_family,
    "second-order": _cell_second,
    "alpha-average": _cell_theta_mean,
    "wavepacket": _cell_wavepacket,
}


def _run_cell(args):
    fn, cfg, coords = args
    try:
        return fn(cfg, *coords)
    except Exception as exc:  # re-raised with the grid coordinates
        raise ExperimentError(f"{cfg.name} failed at r={coords[0]}, alpha={coords[1]}"
                              + (f", lam={coords[3]}" if len(coords) > 3 else "")
                              + f": {exc}") from exc


def _map(cells, threads):
    if threads == 1 or len(cells) == 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(_run_cell, cells))


# --- verdicts ------------------------------------------------------------

def _monotone(devs):
    return all(b < a for a, b in zip(devs, devs[1:]))


def _trend_verdicts(rec, cfg, rows):
    v = cfg.verdict
    devs = [w.rel_dev for w in rows]
    if v.get("monotone", False):
        rec.verdicts["monotone"] = Verdict(_monotone(devs), float(devs[-1]),
                                           "rel_dev strictly decreasing in r")
    if "final_rel_tol" in v:
        rec.verdicts["final"] = Verdict(devs[-1] <= v["final_rel_tol"], float(devs[-1]),
                                        f"rel_dev <= {v['final_rel_tol']:g} at r = {rows[-1].r:g}")


def _excluded(alpha):
    k, indep = diophantine_estimate(alpha)
    return (not indep) or not math.isfinite(k)


def run_experiment(cfg: ExperimentConfig) -> ConvergenceRecord:
    cfg.validate()
    rec = ConvergenceRecord(cfg.name, cfg.d)
    v = cfg.verdict
    al = alphas(cfg)

    if cfg.name == "duhamel-vs-oracle":
        r = cfg.radii[0]
        aid, alpha = al[0]
        cells = [(_cell_oracle, cfg, (r, aid, alpha, lam)) for lam in cfg.lams]
        for rows in _map(cells, cfg.threads):
            rec.rows.extend(rows)
        lams = np.array(cfg.lams)
        res = np.array([w.abs_dev for w in rec.rows])
        slope = float(np.polyfit(np.log(lams), np.log(res), 1)[0])
        rec.fits["lam_slope"] = slope
        tgt, tol = v.get("slope_target", 3.0), v.get("slope_tol", 0.15)
        rec.verdicts["slope"] = Verdict(abs(slope - tgt) <= tol, slope, f"{tgt:g} +- {tol:g}")
        return rec.sort()

    if cfg.name == "alpha-average":
        r = cfg.radii[0]
        preset = ("preset", np.array(ALPHA_PRESETS[cfg.d]))
        cells = [(_cell_theta_mean, cfg, (r, aid, a)) for aid, a in [preset] + al]
        for rows in _map(cells, cfg.threads):
            rec.rows.extend(rows)
        dp = rec.rows[0].rel_dev
        devs = np.array([w.rel_dev for w in rec.rows[1:]])
        mean = float(devs.mean())
        se = float(devs.std(ddof=1) / math.sqrt(len(devs))) if len(devs) > 1 else float("inf")
        rec.fits.update({"mean_rel_dev": mean, "std_err": se, "preset_rel_dev": dp})
        k = v.get("se_factor", 2.0)
        rec.verdicts["average"] = Verdict(abs(mean - dp) <= k * se, abs(mean - dp) / se,
                                          f"|mean - preset| <= {k:g} SE")
        return rec.sort()

    fn = CELLS[cfg.name]
    cells = [(fn, cfg, (r, aid, a)) for aid, a in al for r in cfg.radii]
    for rows in _map(cells, cfg.threads):
        rec.rows.extend(rows)
    rec.sort()
    main = [w for w in rec.rows if ":" not in w.alpha_id]

    if cfg.name == "zeroth":
        tols = v.get("abs_tol", ())
        for w, tol in zip(sorted(main, key=lambda w: -w.r), tols):
            rec.verdicts[f"r={w.r:g}"] = Verdict(w.abs_dev <= tol, w.abs_dev, f"abs_dev <= {tol:g}")
    elif cfg.name == "first-cancel":
        tol = v.get("rel_tol", 1e-6)
        for w in main:
            rec.verdicts[f"r={w.r:g}"] = Verdict(w.rel_dev <= tol, w.rel_dev, f"|Q1|/|Q0| <= {tol:g}")
    elif cfg.name in ("theta-mean", "theta-mean-family"):
        if any(_excluded(a) for _, a in al):
            rec.verdicts["excluded"] = Verdict(None, float("nan"), "",
                                               "excluded input: alpha rational or dependent")
        else:
            _trend_verdicts(rec, cfg, main)
    elif cfg.name == "second-order":
        _trend_verdicts(rec, cfg, main)
        direct = {w.r: w for w in rec.rows if w.alpha_id.endswith(":direct")}
        for w in main:
            if w.r in direct:
                rd = abs(direct[w.r].value - w.value) / abs(w.value)
                tol = v.get("route_rel_tol", 0.01)
                rec.fits["route_rel_dev"] = rd
                rec.verdicts["route"] = Verdict(rd <= tol, rd, f"|direct - theta| <= {tol:g} rel")
    elif cfg.name == "wavepacket":
        c = v.get("scaled_tol", 1.0)
        for w in main:
            s = w.abs_dev / (w.r ** (cfg.d - 1) * w.r)
            rec.verdicts[f"r={w.r:g}"] = Verdict(s <= c, s, f"abs_dev / (r^(d-1) h) <= {c:g}")
    return rec


# --- output ----------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def _row_fields(rec, w, timing):
    return [rec.experiment, str(rec.d), _fmt(w.r), w.alpha_id,
            _fmt(w.value.real), _fmt(w.value.imag), _fmt(w.limit.real), _fmt(w.limit.imag),
            _fmt(w.abs_dev), _fmt(w.rel_dev), _fmt(w.tail_est),
            _fmt(w.seconds if timing else 0.0)]


def summary(rec: ConvergenceRecord) -> dict:
    return {"experiment": rec.experiment, "d": rec.d, "fits": rec.fits,
            "verdicts": {k: asdict(v) for k, v in rec.verdicts.items()},
            "passed": rec.passed}


def emit_results(rec: ConvergenceRecord, fmt="csv", out_dir=".", timing=False):
    """Write the rows (csv or json-lines) and a JSON summary of fits and
    verdicts. Output is byte-deterministic unless timing is on. Returns the
    paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted(rec.rows, key=lambda w: (-w.r, w.alpha_id))
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for w in rows:
            wr.writerow(_row_fields(rec, w, timing))
        path = out / f"{rec.experiment}.csv"
    elif fmt == "json-lines":
        lines = [json.dumps(dict(zip(CSV_COLUMNS, _row_fields(rec, w, timing))), sort_keys=True)
                 for w in rows]
        buf = io.StringIO("".join(line + "\n" for line in lines))
        path = out / f"{rec.experiment}.jsonl"
    else:
        raise ValueError("format must be csv or json-lines")
    path.write_text(buf.getvalue())
    spath = out / f"{rec.experiment}.summary.json"
    spath.write_text(json.dumps(summary(rec), sort_keys=True, indent=1, default=_fmt) + "\n")
    return [path, spath]
