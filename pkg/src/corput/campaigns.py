"""Batch campaigns: config parsing, sweeps, CSV/JSON output.

A campaign config is a YAML mapping. Common keys:

    campaign: one of KINDS
    name: output file stem (defaults to the campaign kind)
    tolerance: quadrature tolerance (optional)

Catalog selections are written as ``{name: ..., parameters: {...}}``.
Grids are ``{min: ..., max: ..., points: ...}`` and are geometric.
See the README for the keys each kind reads.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import dispersive as disp
from .catalog import CatalogError, instantiate
from .certificates import (
    BoundCertificate,
    EnvelopeRow,
    certify,
    exterior_certificate,
    fit_decay,
    measure,
    uniform_certificate,
)
from .core import PreconditionError, SingularAmplitude, SymbolDescriptor, ValidationError

KINDS = ("vdc_envelope", "p0_sweep", "decay_fit", "dispersive_cone", "linfty_global", "concentration", "optimality")

ENVELOPE_COLUMNS = ("omega", "magnitude", "quad_err", "bound", "ratio")
CONE_COLUMNS = ("t", "velocity", "magnitude", "bound", "inside_cone")
FIT_COLUMNS = ("grid_value", "magnitude")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2, 3
MIN_POINTS = 8


class ConfigError(ValueError):
    """The campaign config is malformed or names something unknown."""


@dataclass(frozen=True)
class CampaignConfig:
    kind: str
    name: str
    body: dict
    source: Optional[Path] = None


@dataclass
class VerdictReport:
    campaign: dict
    columns: tuple
    rows: list
    violations: int = 0
    flagged: int = 0
    fits: list = field(default_factory=list)
    constants: list = field(default_factory=list)
    fits_ok: bool = True
    wall_ms: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if self.violations or not self.fits_ok:
            return EXIT_VIOLATION
        if self.flagged:
            return EXIT_NONCONVERGED
        return EXIT_OK

    def verdict(self) -> dict:
        return {
            "campaign": self.campaign,
            "violations": self.violations,
            "flagged": self.flagged,
            "fits": self.fits,
            "constants": self.constants,
            "wall_ms": self.wall_ms,
            "exit_code": self.exit_code,
            "notes": self.notes,
        }


# ---------------------------------------------------------------------------
# parsing


def load_config(path) -> CampaignConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        body = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(body, path)


def parse_config(body: Any, source: Optional[Path] = None) -> CampaignConfig:
    if not isinstance(body, dict):
        raise ConfigError("config must be a mapping")
    kind = body.get("campaign")
    if kind not in KINDS:
        raise ConfigError(f"unknown campaign kind {kind!r}; expected one of {', '.join(KINDS)}")
    name = str(body.get("name", kind))
    if not name or any(c in name for c in "/\\") or name.startswith("."):
        raise ConfigError(f"invalid name {name!r}")
    return CampaignConfig(kind, name, body, source)


def _number(body: dict, key: str, default=None) -> float:
    if key not in body:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    try:
        val = float(body[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key!r} must be a number, got {body[key]!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"{key!r} must be finite")
    return val


def grid_from(spec: Any, key: str = "grid") -> np.ndarray:
    """A geometric grid from {min, max, points} or an explicit increasing list."""
    if isinstance(spec, list):
        try:
            g = np.array([float(x) for x in spec])
        except (TypeError, ValueError):
            raise ConfigError(f"invalid grid {key!r}: entries must be numbers") from None
        if g.size < 1 or np.any(g <= 0) or np.any(np.diff(g) <= 0) or not np.all(np.isfinite(g)):
            raise ConfigError(f"invalid grid {key!r}: values must be positive and strictly increasing")
        return g
    if not isinstance(spec, dict):
        raise ConfigError(f"invalid grid {key!r}: expected a mapping with min, max, points")
    lo = _number(spec, "min")
    hi = _number(spec, "max")
    pts = spec.get("points")
    if not isinstance(pts, int) or isinstance(pts, bool):
        raise ConfigError(f"invalid grid {key!r}: points must be an integer")
    if lo <= 0 or hi <= lo:
        raise ConfigError(f"invalid grid {key!r}: need 0 < min < max, got min={lo}, max={hi}")
    if pts < MIN_POINTS:
        raise ConfigError(f"invalid grid {key!r}: need at least {MIN_POINTS} points, got {pts}")
    return np.geomspace(lo, hi, pts)


def _select(body: dict, key: str, kind: Optional[type] = None):
    spec = body.get(key)
    if spec is None:
        raise ConfigError(f"missing catalog selection {key!r}")
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"{key!r} must be a catalog name or {{name, parameters}}")
    params = spec.get("parameters") or {}
    if not isinstance(params, dict):
        raise ConfigError(f"{key!r}.parameters must be a mapping")
    try:
        obj = instantiate(spec["name"], params)
    except CatalogError as exc:
        raise ConfigError(str(exc)) from None
    except (PreconditionError, ValidationError, TypeError, ValueError) as exc:
        raise ConfigError(f"{key!r}: {exc}") from None
    if kind is not None and not isinstance(obj, kind):
        raise ConfigError(f"{key!r}: catalog entry {spec['name']!r} is not a {kind.__name__}")
    return obj


def _pair(body: dict, key: str, default=None) -> tuple[float, float]:
    val = body.get(key, default)
    if val is None:
        raise ConfigError(f"missing key {key!r}")
    if not (isinstance(val, (list, tuple)) and len(val) == 2):
        raise ConfigError(f"{key!r} must be a pair [lo, hi]")
    lo, hi = float(val[0]), float(val[1])
    if not lo < hi:
        raise ConfigError(f"{key!r} must be ordered")
    return lo, hi


def _int(body: dict, key: str, default: int, minimum: int = 1) -> int:
    val = body.get(key, default)
    if not isinstance(val, int) or isinstance(val, bool) or val < minimum:
        raise ConfigError(f"{key!r} must be an integer >= {minimum}")
    return val


def _fit_band(body: dict, default_target: float) -> tuple[float, float, Optional[tuple[float, float]]]:
    fit = body.get("fit") or {}
    if not isinstance(fit, dict):
        raise ConfigError("'fit' must be a mapping")
    target = _number(fit, "target", default_target)
    tol = _number(fit, "tolerance", 0.05)
    window = _pair(fit, "window") if "window" in fit else None
    return target, tol, window


# ---------------------------------------------------------------------------
# preparation: everything that can fail on a bad config happens here


@dataclass
class Prepared:
    config: CampaignConfig
    objects: dict
    tol: Optional[float]


def prepare(cfg: CampaignConfig) -> Prepared:
    b = cfg.body
    tol = _number(b, "tolerance", -1.0)
    tol = None if tol == -1.0 else tol
    if tol is not None and not tol > 0:
        raise ConfigError("tolerance must be positive")
    o: dict = {}
    try:
        if cfg.kind in ("vdc_envelope", "decay_fit", "p0_sweep"):
            o["amplitude"] = _select(b, "amplitude", SingularAmplitude)
            o["grid"] = grid_from(b.get("grid"), "grid")
            if cfg.kind == "p0_sweep":
                sweep = b.get("p0")
                if not isinstance(sweep, dict):
                    raise ConfigError("p0_sweep needs 'p0: {min, max, points}'")
                lo, hi = _number(sweep, "min"), _number(sweep, "max")
                pts = _int(sweep, "points", 21, 2)
                if not lo < hi:
                    raise ConfigError("invalid grid 'p0': need min < max")
                o["p0_values"] = np.linspace(lo, hi, pts)
                phase = b.get("phase")
                if not isinstance(phase, dict) or "name" not in phase:
                    raise ConfigError("p0_sweep needs a phase selection with a p0 parameter")
                o["phase_spec"] = phase
                params = dict(phase.get("parameters") or {})
                o["phases"] = []
                for p0 in o["p0_values"]:
                    params["p0"] = float(p0)
                    o["phases"].append(_select({"phase": {"name": phase["name"], "parameters": params}}, "phase"))
            else:
                o["phase"] = _select(b, "phase")
            if cfg.kind == "vdc_envelope":
                choice = b.get("certificate", "auto")
                if choice not in ("auto", "interior", "uniform", "exterior", "nonstationary"):
                    raise ConfigError(f"unknown certificate {choice!r}")
                o["certificate"] = choice
            if cfg.kind == "decay_fit":
                o["fit"] = _fit_band(b, -0.5)
        elif cfg.kind == "dispersive_cone":
            o["datum"] = _select(b, "datum")
            o["symbol"] = _select(b, "symbol", SymbolDescriptor)
            o["times"] = grid_from(b.get("times"), "times")
            rays = b.get("rays") or {}
            o["inside_rays"] = _int(rays, "inside", 33)
            o["outside_rays"] = _int(rays, "outside", 16, 0)
            o["estimate"] = b.get("estimate", "band_cone")
            if o["estimate"] == "band_cone":
                if not isinstance(o["datum"], disp.BandDatum):
                    raise ConfigError("band_cone needs a band datum")
                o["band"] = _pair(b, "band")
            elif o["estimate"] == "narrow_cone":
                if not isinstance(o["datum"], disp.LineSingularDatum):
                    raise ConfigError("narrow_cone needs a line-singular datum")
                o["eta"] = _number(b, "eta")
                o["eps"] = _number(b, "eps")
            elif o["estimate"] == "off_cone":
                if not isinstance(o["datum"], disp.LineSingularDatum):
                    raise ConfigError("off_cone needs a line-singular datum")
                o["band"] = _pair(b, "band")
                o["eta"] = _number(b, "eta") if "eta" in b else None
            else:
                raise ConfigError(f"unknown estimate {o['estimate']!r}")
            o["window"] = _pair(b, "window") if "window" in b else None
        elif cfg.kind in ("linfty_global", "concentration"):
            o["datum"] = _select(b, "datum", disp.WeightedDatum)
            o["symbol"] = _select(b, "symbol", SymbolDescriptor)
            o["times"] = grid_from(b.get("times"), "times")
            o["rays"] = _int(b, "rays", 33, 2)
            o["window"] = _pair(b, "window", [-3.0, 3.0])
            if cfg.kind == "linfty_global":
                o["path"] = b.get("path", "auto")
                if o["path"] not in ("auto", "band", "uniform"):
                    raise ConfigError(f"unknown path {o['path']!r}")
            else:
                o["margin"] = _number(b, "margin", 0.1)
                if "fit" in b:
                    o["fit"] = _fit_band(b, -o["datum"].mu)
        elif cfg.kind == "optimality":
            o["datum"] = _select(b, "datum", disp.BandDatum)
            o["symbol"] = _select(b, "symbol", SymbolDescriptor)
            o["times"] = grid_from(b.get("times"), "times")
            o["fit"] = _fit_band(b, -o["datum"].mu / 2)
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from None
    return Prepared(cfg, o, tol)


# ---------------------------------------------------------------------------
# runners


def _constant_entry(name: str, value: float, theorem: str) -> dict:
    return {"name": name, "value": value, "theorem": theorem}


def _pick_certificate(a, ph, choice: str) -> BoundCertificate:
    if choice == "auto":
        return certify(a, ph)[0]
    if choice == "uniform":
        return uniform_certificate(a, ph)
    if choice == "exterior":
        return exterior_certificate(a, ph)
    for cert in certify(a, ph):
        if cert.theorem_id.value == choice:
            return cert
    raise PreconditionError(f"certificate {choice!r} does not apply to this pair")


def _envelope_rows(cert, a, ph, grid, tol, threads) -> list[EnvelopeRow]:
    kw = {} if tol is None else {"tol": tol}
    results = measure(a, ph, grid, workers=threads, **kw)
    return [
        EnvelopeRow(float(w), abs(r.value), r.abs_error_estimate, float(cert.bound(w)), r.converged)
        for w, r in zip(grid, results)
    ]


def _run_envelope(p: Prepared, threads: int) -> VerdictReport:
    o = p.objects
    cert = _pick_certificate(o["amplitude"], o["phase"], o["certificate"])
    rows = _envelope_rows(cert, o["amplitude"], o["phase"], o["grid"], p.tol, threads)
    return VerdictReport(
        campaign={}, columns=ENVELOPE_COLUMNS,
        rows=[(r.omega, r.magnitude, r.quad_err, r.bound, r.ratio) for r in rows],
        violations=sum(r.violated for r in rows),
        flagged=sum(not r.converged for r in rows),
        constants=[_constant_entry("C", cert.constant, cert.theorem_id.value)],
        notes={"exponent": cert.exponent, "max_ratio": max(r.ratio for r in rows)},
    )


def _run_p0_sweep(p: Prepared, threads: int) -> VerdictReport:
    o = p.objects
    a = o["amplitude"]
    # the uniform constant does not read p0; compute it once from the first phase
    cert = uniform_certificate(a, o["phases"][0])
    rows, violations, flagged = [], 0, 0
    for p0, ph in zip(o["p0_values"], o["phases"]):
        same = uniform_certificate(a, ph)
        if same.constant != cert.constant:
            raise PreconditionError(f"uniform constant changed with p0 at p0={p0}")
        for r in _envelope_rows(cert, a, ph, o["grid"], p.tol, threads):
            rows.append((float(p0), r.omega, r.magnitude, r.quad_err, r.bound, r.ratio))
            violations += r.violated
            flagged += not r.converged
    return VerdictReport(
        campaign={}, columns=("p0",) + ENVELOPE_COLUMNS, rows=rows, violations=violations, flagged=flagged,
        constants=[_constant_entry("C", cert.constant, cert.theorem_id.value)],
        notes={"exponent": cert.exponent, "max_ratio": max(r[-1] for r in rows)},
    )


def _fit_entry(name: str, fit, target: float, tol: float) -> dict:
    return {
        "name": name, "slope": fit.slope, "stderr": fit.stderr, "target": target, "tolerance": tol,
        "window": list(fit.window), "within": fit.within(target, tol),
    }


def _run_decay_fit(p: Prepared, threads: int) -> VerdictReport:
    o = p.objects
    kw = {} if p.tol is None else {"tol": p.tol}
    results = measure(o["amplitude"], o["phase"], o["grid"], workers=threads, **kw)
    samples = [(float(w), abs(r.value)) for w, r in zip(o["grid"], results)]
    target, band, window = o["fit"]
    fit = fit_decay(samples, window)
    entry = _fit_entry("decay", fit, target, band)
    return VerdictReport(
        campaign={}, columns=FIT_COLUMNS, rows=samples, fits=[entry], fits_ok=entry["within"],
        flagged=sum(not r.converged for r in results),
    )


def _cone_rows(samples) -> list[tuple]:
    return [(r.t, r.velocity, r.magnitude, r.bound, int(r.inside_cone)) for r in samples]


def _run_dispersive_cone(p: Prepared, threads: int) -> VerdictReport:
    o = p.objects
    d, s = o["datum"], o["symbol"]
    est = o["estimate"]
    if est == "band_cone":
        cs = disp.band_constants(d, s, *o["band"])
    elif est == "narrow_cone":
        cs = disp.narrow_cone_constants(d, s, o["eta"], o["eps"])
    else:
        cs = disp.offcone_constants(d, s, *o["band"], o["eta"])
    cone = cs.cone
    inside = disp.equispaced_rays(cone.a, cone.b, o["inside_rays"])
    samples = disp.sample_rays(d, s, o["times"], inside, lambda t, v: cs.bound(t, "inside"), cone, p.tol, threads)
    if o["outside_rays"] and "outside" in cs.regions.values():
        window = o["window"] if o["window"] is not None else cone.clip(disp.DEFAULT_CLIP)
        outside = disp.outside_rays(cone, o["outside_rays"], window)
        samples += disp.sample_rays(d, s, o["times"], outside, lambda t, v: cs.bound(t, "outside"), cone, p.tol, threads)
    return VerdictReport(
        campaign={}, columns=CONE_COLUMNS, rows=_cone_rows(samples),
        violations=sum(r.violated for r in samples), flagged=sum(not r.converged for r in samples),
        constants=[_constant_entry(k, v, cs.theorem_id) for k, v in cs.constants.items()],
        notes={"cone": [cone.a, cone.b], "method": cs.method, "exponents": cs.exponents},
    )


def _run_linfty_global(p: Prepared, threads: int) -> VerdictReport:
    o = p.objects
    d, s = o["datum"], o["symbol"]
    cs = disp.global_linfty_constants(d, s, o["path"])
    rays = disp.equispaced_rays(*o["window"], o["rays"])
    samples = disp.sample_rays(d, s, o["times"], rays, lambda t, v: cs.bound(t), None, p.tol, threads)
    return VerdictReport(
        campaign={}, columns=CONE_COLUMNS, rows=_cone_rows(samples),
        violations=sum(r.violated for r in samples), flagged=sum(not r.converged for r in samples),
        constants=[_constant_entry(k, v, cs.theorem_id) for k, v in cs.constants.items()],
        notes={"method": cs.method, "exponents": cs.exponents, "window": list(o["window"])},
    )


def _run_concentration(p: Prepared, threads: int) -> VerdictReport:
    o = p.objects
    d, s = o["datum"], o["symbol"]
    cs = disp.concentration_constants(d, s)
    a, b = cs.cone.a, cs.cone.b
    lo_w, hi_w = o["window"]
    margin = o["margin"]
    if not (lo_w < a - margin and hi_w > b + margin):
        raise ConfigError("window must extend beyond the cone by more than the margin")
    half = max(o["rays"] // 2, 1)
    rays = np.concatenate([np.linspace(lo_w, a - margin, half), np.linspace(b + margin, hi_w, half)])
    samples = disp.sample_rays(d, s, o["times"], rays, lambda t, v: cs.bound(t), cs.cone, p.tol, threads)
    report = VerdictReport(
        campaign={}, columns=CONE_COLUMNS, rows=_cone_rows(samples),
        violations=sum(r.violated for r in samples), flagged=sum(not r.converged for r in samples),
        constants=[_constant_entry(k, v, cs.theorem_id) for k, v in cs.constants.items()],
        notes={"cone": [a, b], "margin": margin, "exponents": cs.exponents},
    )
    if "fit" in o:
        target, band, window = o["fit"]
        by_t: dict = {}
        for r in samples:
            by_t[r.t] = max(by_t.get(r.t, 0.0), r.magnitude)
        fit = fit_decay(sorted(by_t.items()), window)
        entry = _fit_entry("off_cone_sup", fit, target, band)
        # the off-cone rate must be at least as fast as the target
        entry["within"] = fit.slope <= target + band
        report.fits.append(entry)
        report.fits_ok = entry["within"]
    return report


def _run_optimality(p: Prepared, threads: int) -> VerdictReport:
    o = p.objects
    d, s = o["datum"], o["symbol"]
    target, band, window = o["fit"]
    p1 = d.band[0]
    v = float(s.f.d1(np.array([p1]))[0])
    times = o["times"]
    samples = disp.sample_rays(d, s, times, [v], lambda *_: math.inf, None, p.tol, threads)
    pairs = [(r.t, r.magnitude) for r in samples]
    fit = fit_decay(pairs, window)
    entry = _fit_entry("singular_direction", fit, target, band)
    return VerdictReport(
        campaign={}, columns=FIT_COLUMNS, rows=pairs, fits=[entry], fits_ok=entry["within"],
        flagged=sum(not r.converged for r in samples), notes={"velocity": v},
    )


_RUNNERS = {
    "vdc_envelope": _run_envelope,
    "p0_sweep": _run_p0_sweep,
    "decay_fit": _run_decay_fit,
    "dispersive_cone": _run_dispersive_cone,
    "linfty_global": _run_linfty_global,
    "concentration": _run_concentration,
    "optimality": _run_optimality,
}


def run_campaign(cfg: CampaignConfig, out_dir=None, threads: int = 1, seed: Optional[int] = None) -> VerdictReport:
    """Run a campaign and write ``<name>.csv`` and ``<name>.json`` into ``out_dir``."""
    start = time.perf_counter()
    prepared = prepare(cfg)
    try:
        report = _RUNNERS[cfg.kind](prepared, max(1, threads))
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from None
    report.campaign = {"kind": cfg.kind, "name": cfg.name, "config": _jsonable(cfg.body), "seed": seed}
    report.wall_ms = round((time.perf_counter() - start) * 1000.0, 3)
    if out_dir is not None:
        write_outputs(report, Path(out_dir), cfg.name)
    return report


def default_out_dir() -> Path:
    return Path(os.environ.get("CORPUT_OUT_DIR", "corput_out"))


# ---------------------------------------------------------------------------
# output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    lines += [",".join(format_number(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(report: VerdictReport, out_dir: Path, name: str) -> tuple[Path, Path]:
    csv_path = out_dir / f"{name}.csv"
    json_path = out_dir / f"{name}.json"
    _atomic_write(csv_path, csv_text(report.columns, report.rows))
    _atomic_write(json_path, json.dumps(_jsonable(report.verdict()), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path
