"""Scenario files: sectioned ``key = value`` text with a strict schema.

Keys marked as list-valued accept comma-separated values; a scenario then
expands into the Cartesian product of its lists, except for keys tied
together by ``[scenario] zip`` (groups separated by ``;``), which vary in step.
"""

from __future__ import annotations

import configparser
import hashlib
import itertools
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any, Callable

KINDS = ("sweep", "protocol", "transfer-map", "init-polarization", "ensemble", "coupling", "bulk-estimate")
ENV_PREFIX = "NVSWEEP_"


class ConfigError(ValueError):
    """Invalid scenario configuration. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source:
            where = f"{source}:{line}: " if line else f"{source}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any
    multi: bool = False
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _float(s: str) -> float:
    x = float(s)
    if math.isnan(x):
        raise ValueError("nan is not allowed")
    return x


def _int(s: str) -> int:
    return int(s)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _auto_or_float(s: str):
    return "auto" if s.strip().lower() == "auto" else _float(s)


def _opt_int(s: str):
    return None if s.strip().lower() in ("", "none") else _int(s)


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none") else _float(s)


def _choice(*options):
    def parse(s: str):
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {s!r}")
        return s

    return parse


def F(default, multi=False, check=None, rule=""):
    return Field(_float, default, multi, check, rule)


pos = lambda x: x > 0  # noqa: E731
nonneg = lambda x: x >= 0  # noqa: E731

SCHEMA: dict[str, dict[str, Field]] = {
    "scenario": {
        "kind": Field(_choice(*KINDS), "protocol"),
        "zip": Field(str, ""),
        "description": Field(str, ""),
    },
    "system": {
        "species": Field(_choice("11B", "14N"), "11B", multi=True),
        "a_x": F(0.047, True, nonneg, ">= 0"),
        "a_z": F(0.0, True),
        "E_perp": F(0.4, True, nonneg, ">= 0"),
        "host_14N": Field(_bool, False),
        "p1_g1": F(0.0, True, nonneg, ">= 0"),
        "p1_g2": F(0.0, True, nonneg, ">= 0"),
    },
    "sweep": {
        "omega_start": F(-6.0),
        "omega_end": F(6.0),
        "v": F(30.0, True, pos, "> 0"),
        "cycles": Field(_int, 1, False, lambda x: x >= 1, ">= 1"),
        "n_sweeps": Field(_opt_int, None, False, lambda x: x is None or x >= 1, ">= 1"),
        "reinit": Field(_choice("chi_minus", "chi_plus"), "chi_minus", multi=True),
        "T2": F(10.0, True, pos, "> 0 (inf allowed)"),
        "dt": Field(_auto_or_float, "auto", False, lambda x: x == "auto" or x > 0, "'auto' or > 0"),
        "stride": Field(_int, 1000, False, lambda x: x >= 1, ">= 1"),
        "p_nv": F(1.0, True, lambda x: -1 <= x <= 1, "in [-1, 1]"),
    },
    "ensemble": {
        "n_samples": Field(_int, 300, False, lambda x: x >= 1, ">= 1"),
        "seed": Field(_int, 0, False, nonneg, ">= 0"),
        "theta_deg": F(0.0, True, lambda x: 0 <= x <= 180, "in [0, 180]"),
        "theta_max_deg": Field(_opt_float, None, False, lambda x: x is None or 0 < x <= 180, "in (0, 180]"),
        "E_perp_sigma": F(0.5, True, nonneg, ">= 0"),
        "E_perp_lo": F(-1.5, True),
        "E_perp_hi": F(1.5, True),
        "delta_b_sigma": F(1.0, True, nonneg, ">= 0"),
        "delta_b_lo": F(-3.0, True),
        "delta_b_hi": F(3.0, True),
        "E_z_sigma": F(0.25, True, nonneg, ">= 0"),
        "E_z_lo": F(-0.73, True),
        "E_z_hi": F(0.73, True),
        "mw_init": Field(_bool, False),
    },
    "mw": {
        "Omega": F(8.0, True, pos, "> 0"),
        "omega": F(6.0, True),
        "P_i": F(1.0, False, lambda x: 0 <= x <= 1, "in [0, 1]"),
        "t_pulse": Field(_opt_float, None, False, lambda x: x is None or x > 0, "> 0"),
        "theta_start_deg": F(0.0),
        "theta_stop_deg": F(90.0),
        "theta_n": Field(_int, 46, False, lambda x: x >= 1, ">= 1"),
    },
    "map": {
        "ax_min": F(0.01, False, nonneg, ">= 0"),
        "ax_max": F(0.05, True, nonneg, ">= 0"),
        "ax_n": Field(_int, 41, False, lambda x: x >= 1, ">= 1"),
        "eperp_min": F(0.05, False, nonneg, ">= 0"),
        "eperp_max": F(0.7, False, nonneg, ">= 0"),
        "eperp_n": Field(_int, 66, False, lambda x: x >= 1, ">= 1"),
    },
    "coupling": {
        "d_NV": F(2.0, True, pos, "> 0"),
        "rho_n": F(44.0, False, pos, "> 0"),
        "beta_deg": F(54.7),
        "numeric": Field(_bool, True),
    },
    "bulk": {
        "rho_NV": F(1.6e4, False, pos, "> 0"),
        "rho_n": F(1.6e10, False, pos, "> 0"),
        "T_o": F(100.0, False, pos, "> 0"),
        "rate_source": Field(_choice("given", "lz"), "given"),
        "P_1": F(0.17, False, nonneg, ">= 0"),
        "P_1_time_ms": F(0.2, False, pos, "> 0"),
        "d_NV": F(2.0, True, pos, "> 0"),
    },
}


def key_index() -> dict[str, list[str]]:
    """Bare key -> sections defining it."""
    idx: dict[str, list[str]] = {}
    for sec, fields in SCHEMA.items():
        for k in fields:
            idx.setdefault(k, []).append(sec)
    return idx


# section preferred for an ambiguous bare key, by scenario kind
KIND_SECTION = {
    "coupling": "coupling",
    "bulk-estimate": "bulk",
    "transfer-map": "map",
    "init-polarization": "mw",
    "ensemble": "ensemble",
}


def resolve_key(key: str, kind: str | None = None) -> tuple[str, str]:
    """``section.key`` or a bare key -> (section, key).

    A bare key defined in several sections resolves to the section of the
    scenario ``kind`` when that is one of them.
    """
    if "." in key:
        sec, k = key.split(".", 1)
        if sec not in SCHEMA or k not in SCHEMA[sec]:
            raise ConfigError(f"unknown key {key!r}")
        return sec, k
    secs = key_index().get(key)
    if not secs:
        raise ConfigError(f"unknown key {key!r}")
    if len(secs) > 1 and KIND_SECTION.get(kind) in secs:
        return KIND_SECTION[kind], key
    if len(secs) > 1:
        raise ConfigError(f"key {key!r} is ambiguous; use one of " + ", ".join(f"{s}.{key}" for s in secs))
    return secs[0], key


def _line_of(text: str, section: str, key: str | None) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if cur == section and key is not None:
            m = re.match(r"([^=:]+)[=:]", s)
            if m and m.group(1).strip() == key:
                return i
    return None


@dataclass
class Scenario:
    """Raw (string) values per section plus where they came from."""

    raw: dict[str, dict[str, str]]
    source: str = "<config>"
    text: str = ""
    origins: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "Scenario":
        cp = configparser.ConfigParser(interpolation=None, strict=True, delimiters=("=",))
        cp.optionxform = str  # keys are case-sensitive
        try:
            cp.read_string(text, source=source)
        except configparser.MissingSectionHeaderError as e:
            raise ConfigError("key/value found before any [section] header", e.lineno, source) from None
        except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as e:
            raise ConfigError(str(e).split(": ", 1)[-1], e.lineno, source) from None
        except configparser.ParsingError as e:
            lineno = e.errors[0][0] if e.errors else None
            raise ConfigError(f"cannot parse line: {e.errors[0][1] if e.errors else ''}", lineno, source) from None
        raw: dict[str, dict[str, str]] = {}
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]", _line_of(text, sec, None), source)
            for k, v in cp.items(sec):
                if k not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {k!r} in [{sec}]", _line_of(text, sec, k), source)
                raw.setdefault(sec, {})[k] = v
        return cls(raw, source, text)

    @classmethod
    def from_file(cls, path) -> "Scenario":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e.strerror}", None, str(path)) from None
        return cls.from_text(text, str(path))

    def override(self, key: str, value: str, origin: str = "--set") -> None:
        kind = self.raw.get("scenario", {}).get("kind", "").strip() or None
        try:
            sec, k = resolve_key(key, kind)
        except ConfigError as e:
            raise ConfigError(f"{origin} {key}={value}: {e}") from None
        self.raw.setdefault(sec, {})[k] = value
        self.origins[(sec, k)] = origin

    def apply_env(self, environ=None) -> None:
        environ = os.environ if environ is None else environ
        idx = key_index()
        for name, value in sorted(environ.items()):
            if not name.startswith(ENV_PREFIX):
                continue
            key = name[len(ENV_PREFIX):]
            if key in ("THREADS", "OUT"):
                continue
            # NVSWEEP_SWEEP__V -> sweep.v ; NVSWEEP_E_PERP -> E_perp
            if "__" in key:
                sec, k = key.split("__", 1)
                names = [f"{s}.{kk}" for s in SCHEMA for kk in SCHEMA[s] if s.lower() == sec.lower() and kk.lower() == k.lower()]
            else:
                names = [kk for kk in idx if kk.lower() == key.lower()]
            if len(names) != 1:
                raise ConfigError(f"environment variable {name} does not name exactly one config key")
            self.override(names[0], value, origin=f"${name}")

    def _where(self, sec, k):
        origin = self.origins.get((sec, k))
        if origin:
            return None, f"{self.source} ({origin})"
        return _line_of(self.text, sec, k), self.source

    def resolve(self) -> dict[str, dict[str, Any]]:
        """Typed values with defaults filled in; lists stay lists for multi keys."""
        out: dict[str, dict[str, Any]] = {}
        for sec, fields in SCHEMA.items():
            out[sec] = {}
            for k, f in fields.items():
                if k not in self.raw.get(sec, {}):
                    out[sec][k] = f.default
                    continue
                text = self.raw[sec][k]
                parts = [p.strip() for p in text.split(",")] if f.multi else [text.strip()]
                vals = []
                for p in parts:
                    try:
                        x = f.parse(p)
                    except ValueError as e:
                        line, src = self._where(sec, k)
                        raise ConfigError(f"[{sec}] {k} = {text!r}: {e}", line, src) from None
                    if f.check is not None and not f.check(x):
                        line, src = self._where(sec, k)
                        raise ConfigError(f"[{sec}] {k} = {p!r} out of range (must be {f.rule})", line, src)
                    vals.append(x)
                out[sec][k] = vals if (f.multi and len(vals) > 1) else vals[0]
        self._check_consistency(out)
        return out

    def _check_consistency(self, cfg):
        sw = cfg["sweep"]
        if sw["omega_start"] == sw["omega_end"]:
            line, src = self._where("sweep", "omega_end")
            raise ConfigError("[sweep] omega_end must differ from omega_start", line, src)
        for name in ("E_perp", "delta_b", "E_z"):
            lo, hi = cfg["ensemble"][f"{name}_lo"], cfg["ensemble"][f"{name}_hi"]
            for a, b in itertools.product(_as_list(lo), _as_list(hi)):
                if not a < b:
                    line, src = self._where("ensemble", f"{name}_hi")
                    raise ConfigError(f"[ensemble] {name}_lo must be < {name}_hi", line, src)
        for g in parse_zip(cfg["scenario"]["zip"]):
            lens = {len(_as_list(cfg[s][k])) for s, k in g}
            if len(lens) > 1:
                line, src = self._where("scenario", "zip")
                raise ConfigError(f"zipped keys {', '.join(f'{s}.{k}' for s, k in g)} have different lengths", line, src)

    def to_text(self) -> str:
        lines = []
        for sec in SCHEMA:
            if sec in self.raw and self.raw[sec]:
                lines.append(f"[{sec}]")
                lines += [f"{k} = {v}" for k, v in self.raw[sec].items()]
                lines.append("")
        return "\n".join(lines)


def _as_list(x):
    return x if isinstance(x, list) else [x]


def parse_zip(spec: str) -> list[list[tuple[str, str]]]:
    groups = []
    for grp in spec.split(";"):
        keys = [k.strip() for k in grp.replace(",", " ").split() if k.strip()]
        if keys:
            groups.append([resolve_key(k) for k in keys])
    return groups


def expand(cfg: dict[str, dict[str, Any]]) -> list[tuple[dict, dict]]:
    """All concrete parameter sets. Returns ``(varying values, full config)`` pairs."""
    groups = parse_zip(cfg["scenario"]["zip"])
    zipped = {sk for g in groups for sk in g}
    axes = [[(g, i) for i in range(len(_as_list(cfg[g[0][0]][g[0][1]])))] for g in groups]
    singles = [
        (sec, k) for sec in SCHEMA for k in SCHEMA[sec]
        if isinstance(cfg[sec][k], list) and (sec, k) not in zipped
    ]
    axes += [[([sk], i) for i in range(len(cfg[sk[0]][sk[1]]))] for sk in singles]
    out = []
    for combo in itertools.product(*axes) if axes else [()]:
        full = {sec: dict(vals) for sec, vals in cfg.items()}
        varying = {}
        for keys, i in combo:
            for sec, k in keys:
                full[sec][k] = _as_list(cfg[sec][k])[i]
                varying[f"{sec}.{k}"] = full[sec][k]
        out.append((varying, full))
    return out


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def dumps_resolved(cfg) -> str:
    return json.dumps(cfg, sort_keys=True, default=str)
