"""INI configuration files for runs and sweeps.

Sections and keys mirror SolverConfig::

    [grid]      n_points, half_length
    [equation]  variant, eps, nonlinear
    [stepper]   stepper, dt, t_end, dealias, cfl_max, min_dt, adaptive_dt,
                tail_tol, blowup_cap
    [output]    snapshot_stride, norm_exponents
    [initial]   profile, amplitude, width, center, mode, path
    [sweep]     kind, eps, scales, mollify   (sweep files only)

``half_length`` accepts a number, ``pi`` or ``<number>*pi``.  Lists are
comma separated.  ``#`` and ``;`` start comments, also inline.  Unknown
sections or keys are errors.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .evolve import InitialData, SolverConfig

SECTIONS: Dict[str, Tuple[str, ...]] = {
    "grid": ("n_points", "half_length"),
    "equation": ("variant", "eps", "nonlinear"),
    "stepper": ("stepper", "dt", "t_end", "dealias", "cfl_max", "min_dt", "adaptive_dt",
                "tail_tol", "blowup_cap"),
    "output": ("snapshot_stride", "norm_exponents"),
    "initial": ("profile", "amplitude", "width", "center", "mode", "path"),
}
SWEEP_KEYS = ("kind", "eps", "scales", "mollify")
SWEEP_KINDS = ("family", "twin")

_KEY_SECTION = {k: s for s, keys in SECTIONS.items() for k in keys}
_SOLVER_TYPES = {f.name: f.type for f in fields(SolverConfig)}
_INITIAL_TYPES = {f.name: f.type for f in fields(InitialData)}


class ConfigError(ValueError):
    def __init__(self, msg: str, section: str = "", key: str = "",
                 line: Optional[int] = None):
        where = f"[{section}] {key}".strip() if section else key
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {msg}" if where else msg)
        self.section, self.key, self.line = section, key, line


@dataclass
class SweepSpec:
    kind: str = "family"
    eps: List[float] = field(default_factory=list)
    scales: List[float] = field(default_factory=list)
    mollify: bool = True


def _parse_float(text: str) -> float:
    t = text.strip().lower().replace(" ", "")
    if t == "pi":
        return math.pi
    m = re.fullmatch(r"(.+)\*pi", t)
    if m:
        return float(m.group(1)) * math.pi
    return float(t)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_list(text: str) -> List[float]:
    return [_parse_float(p) for p in text.split(",") if p.strip()]


def _parse_int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _convert(key: str, text: str, typ: str):
    typ = str(typ)
    if key == "norm_exponents":
        return tuple(_parse_list(text))
    if "bool" in typ:
        return _parse_bool(text)
    if "int" in typ:
        return _parse_int(text)
    if "float" in typ:
        return _parse_float(text)
    return text.strip()


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    cur = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.fullmatch(r"\[(.+)\]", line)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if key and cur == section and re.match(rf"{re.escape(key)}\s*[=:]", line):
            return i
    return None


def _read(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from exc
    return cp


def parse_config(text: str, source: str = "<string>", allow_sweep: bool = False
                 ) -> Tuple[SolverConfig, Optional[SweepSpec]]:
    cp = _read(text, source)
    solver_kw, init_kw = {}, {}
    sweep = None
    for section in cp.sections():
        if section == "sweep" and allow_sweep:
            sweep = _parse_sweep(cp[section], text)
            continue
        if section not in SECTIONS:
            raise ConfigError("unknown section", section, line=_line_of(text, section))
        for key, raw in cp[section].items():
            if key not in SECTIONS[section]:
                raise ConfigError("unknown key", section, key, _line_of(text, section, key))
            target, types = (init_kw, _INITIAL_TYPES) if section == "initial" \
                else (solver_kw, _SOLVER_TYPES)
            try:
                target[key] = _convert(key, raw, types[key])
            except ValueError as exc:
                raise ConfigError(str(exc), section, key,
                                  _line_of(text, section, key)) from exc
    try:
        init = InitialData(**init_kw)
    except ValueError as exc:
        key = _blame(str(exc), _INITIAL_TYPES)
        raise ConfigError(str(exc), "initial", key, _line_of(text, "initial", key)) from exc
    try:
        cfg = SolverConfig(initial=init, **solver_kw)
    except (ValueError, TypeError) as exc:
        key = _blame(str(exc), _SOLVER_TYPES)
        sec = _KEY_SECTION.get(key, "")
        raise ConfigError(str(exc), sec, key, _line_of(text, sec, key) if sec else None) from exc
    return cfg, sweep


def _blame(msg: str, names) -> str:
    """Field named at the start of a validation message, if any."""
    first = re.match(r"\w+", msg)
    return first.group(0) if first and first.group(0) in names else ""


def _parse_sweep(sec, text: str) -> SweepSpec:
    spec = SweepSpec()
    for key, raw in sec.items():
        line = _line_of(text, "sweep", key)
        if key not in SWEEP_KEYS:
            raise ConfigError("unknown key", "sweep", key, line)
        try:
            if key == "kind":
                if raw.strip() not in SWEEP_KINDS:
                    raise ValueError(f"kind must be one of {SWEEP_KINDS}")
                spec.kind = raw.strip()
            elif key == "mollify":
                spec.mollify = _parse_bool(raw)
            else:
                setattr(spec, key, _parse_list(raw))
        except ValueError as exc:
            raise ConfigError(str(exc), "sweep", key, line) from exc
    return spec


def load_config(path, allow_sweep: bool = False) -> Tuple[SolverConfig, Optional[SweepSpec]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path), allow_sweep)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(float(x)) for x in v)
    return str(v)


def serialize_config(cfg: SolverConfig, sweep: Optional[SweepSpec] = None) -> str:
    out = []
    for section, keys in SECTIONS.items():
        src = cfg.initial if section == "initial" else cfg
        out.append(f"[{section}]")
        out += [f"{k} = {_fmt(getattr(src, k))}" for k in keys]
        out.append("")
    if sweep is not None:
        out += ["[sweep]", f"kind = {sweep.kind}", f"eps = {_fmt(sweep.eps)}",
                f"scales = {_fmt(sweep.scales)}", f"mollify = {_fmt(sweep.mollify)}", ""]
    return "\n".join(out)
