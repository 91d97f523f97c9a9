"""Run configuration: INI-style files with sections physics, grid, time, ic, output.

Optional sections ``sweep``, ``dependence`` and ``mms`` parameterize the
corresponding subcommands.  Unknown sections or keys are rejected; type errors
report the offending line.  Defaults (applied and echoed into the manifest)::

    [physics]  nu, kappa, a, alpha                  required
    [grid]     N required; L = 2*pi
    [time]     t_end required; dt (fixed step) or dt_init/dt_min/dt_max
               (adaptive); defaults dt_init = dt_max = min(0.01, t_end/10),
               dt_min = dt_init/1e4; cfl_safety = 0.5; rk_order = 4;
               monitor_every = 1; checkpoint_every = 0 (off)
    [ic]       kind = random_band; amplitude = 1; energy = 1; mode = 1,0,0;
               direction = 0,1,0; b_amplitude = 0; b_direction = 0,0,1;
               k_max = 3; b_fraction = 0.5; seed = 0; mean_u = mean_b = 0,0,0
    [output]   dir = out; snapshot = true
    [sweep]    alpha, a, nu, kappa: comma lists (default: the physics value)
    [dependence] deltas = 1e-3,1e-4,1e-5; t_end (default L/|u0|_inf); dt; seed = 12345
    [mms]      kind = both; dt_levels = 1e-2,5e-3,2.5e-3; N_levels = 8,16,32;
               t_end = 0.5; spatial_dt = 2e-3; spatial_t_end = 0.2; ref_N = 96
"""

from __future__ import annotations

import configparser
import logging
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

from .integrator import TimeControls
from .rhs import PhysParams
from .spectral import Grid, make_grid
from .verification import ICSpec

log = logging.getLogger(__name__)

UNIQUENESS_SENSITIVE = {"dependence"}


class ConfigError(ValueError):
    pass


class ConfigWarning(UserWarning):
    pass


def _float(s: str) -> float:
    s = s.strip()
    m = re.fullmatch(r"([0-9.eE+-]*)\s*\*?\s*pi", s)
    if m:
        return (float(m.group(1)) if m.group(1) else 1.0) * math.pi
    return float(s)


def _int(s: str) -> int:
    return int(s.strip())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> list[float]:
    return [_float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [_int(x) for x in s.split(",") if x.strip()]


def _vec3(s: str) -> tuple[float, float, float]:
    v = _floats(s)
    if len(v) != 3:
        raise ValueError(f"expected 3 comma-separated numbers, got {s!r}")
    return tuple(v)


def _ivec3(s: str) -> tuple[int, int, int]:
    v = _ints(s)
    if len(v) != 3:
        raise ValueError(f"expected 3 comma-separated integers, got {s!r}")
    return tuple(v)


SCHEMA: dict[str, dict[str, Any]] = {
    "physics": {"nu": _float, "kappa": _float, "a": _float, "alpha": _float},
    "grid": {"N": _int, "L": _float},
    "time": {
        "t_end": _float,
        "dt": _float,
        "dt_init": _float,
        "dt_min": _float,
        "dt_max": _float,
        "cfl_safety": _float,
        "rk_order": _int,
        "monitor_every": _int,
        "checkpoint_every": _int,
    },
    "ic": {
        "kind": str,
        "amplitude": _float,
        "energy": _float,
        "mode": _ivec3,
        "direction": _vec3,
        "b_amplitude": _float,
        "b_direction": _vec3,
        "k_max": _float,
        "b_fraction": _float,
        "seed": _int,
        "mean_u": _vec3,
        "mean_b": _vec3,
    },
    "output": {"dir": str, "snapshot": _bool},
    "sweep": {"alpha": _floats, "a": _floats, "nu": _floats, "kappa": _floats},
    "dependence": {"deltas": _floats, "t_end": _float, "dt": _float, "seed": _int},
    "mms": {
        "kind": str,
        "dt_levels": _floats,
        "N_levels": _ints,
        "t_end": _float,
        "spatial_dt": _float,
        "spatial_t_end": _float,
        "ref_N": _int,
    },
}
REQUIRED = {"physics": ("nu", "kappa", "a", "alpha"), "grid": ("N",), "time": ("t_end",)}


@dataclass
class SimConfig:
    physics: PhysParams
    grid: Grid
    time: TimeControls
    ic: ICSpec
    monitor_every: int = 1
    checkpoint_every: int = 0


@dataclass
class RunManifest:
    config_path: Optional[str]
    config: SimConfig
    out_dir: str
    seed: int
    snapshot: bool = True
    sections: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    command: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        c = self.config
        return {
            "config_path": self.config_path,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "snapshot": self.snapshot,
            "physics": asdict(c.physics),
            "grid": {"N": c.grid.N, "L": c.grid.L},
            "time": {**asdict(c.time), "monitor_every": c.monitor_every, "checkpoint_every": c.checkpoint_every},
            "ic": asdict(c.ic),
            "sections": self.sections,
            "warnings": self.warnings,
            "command": self.command,
        }


def _line_index(text: str) -> dict[tuple[str, str], int]:
    idx, section = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            idx[(section, "")] = i
        elif section and "=" in s and not s.startswith(("#", ";")):
            idx[(section, s.split("=", 1)[0].strip())] = i
    return idx


def parse_config_text(
    text: str,
    path: Optional[str] = None,
    experiment: Optional[str] = None,
    strict: bool = False,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> RunManifest:
    where = path or "<config>"
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (N)
    try:
        cp.read_string(text, source=where)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    lines = _line_index(text)

    raw: dict[str, dict[str, Any]] = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{where}:{lines.get((sec, ''), '?')}: unknown section [{sec}]")
        raw[sec] = {}
        for key, value in cp.items(sec):
            line = lines.get((sec, key), "?")
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{where}:{line}: unknown key {key!r} in [{sec}]")
            try:
                raw[sec][key] = SCHEMA[sec][key](value)
            except ValueError as exc:
                raise ConfigError(f"{where}:{line}: bad value for {sec}.{key}: {exc}") from exc
    for sec, keys in REQUIRED.items():
        for key in keys:
            if key not in raw.get(sec, {}):
                raise ConfigError(f"{where}: missing required key {sec}.{key}")

    def located(sec, fn):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where}:{lines.get((sec, ''), '?')}: invalid [{sec}]: {exc}") from exc

    physics = located("physics", lambda: PhysParams(**raw["physics"]))
    gsec = raw["grid"]
    grid = located("grid", lambda: make_grid(gsec["N"], gsec.get("L", 2 * math.pi)))

    tsec = dict(raw["time"])
    t_end = tsec["t_end"]
    if "dt" in tsec:
        if any(k in tsec for k in ("dt_init", "dt_min", "dt_max")):
            raise ConfigError(f"{where}:{lines.get(('time', 'dt'))}: give either dt or dt_init/dt_min/dt_max")
        dt = tsec["dt"]
        tc = dict(dt_init=dt, dt_min=dt, dt_max=dt, cfl_safety=tsec.get("cfl_safety", 1.0))
    else:
        d0 = min(0.01, t_end / 10)
        dt_init = tsec.get("dt_init", d0)
        tc = dict(
            dt_init=dt_init,
            dt_min=tsec.get("dt_min", dt_init / 1e4),
            dt_max=tsec.get("dt_max", max(dt_init, d0)),
            cfl_safety=tsec.get("cfl_safety", 0.5),
        )
    controls = located("time", lambda: TimeControls(t_end=t_end, rk_order=tsec.get("rk_order", 4), **tc))

    icsec = dict(raw.get("ic", {}))
    if seed is not None:
        icsec["seed"] = seed
    ic = located("ic", lambda: ICSpec(**icsec))

    out = raw.get("output", {})
    config = SimConfig(
        physics,
        grid,
        controls,
        ic,
        monitor_every=tsec.get("monitor_every", 1),
        checkpoint_every=tsec.get("checkpoint_every", 0),
    )
    manifest = RunManifest(
        config_path=path,
        config=config,
        out_dir=out_dir or out.get("dir", "out"),
        seed=ic.seed,
        snapshot=out.get("snapshot", True),
        sections={k: raw[k] for k in ("sweep", "dependence", "mms") if k in raw},
    )
    if experiment in UNIQUENESS_SENSITIVE and physics.alpha < 1.5:
        msg = f"alpha = {physics.alpha} < 3/2: uniqueness/continuous dependence is not guaranteed for '{experiment}'"
        if strict:
            raise ConfigError(msg)
        manifest.warnings.append(msg)
        log.warning(msg)
    return manifest


def parse_config(
    path, experiment: Optional[str] = None, strict: bool = False, seed: Optional[int] = None, out_dir: Optional[str] = None
) -> RunManifest:
    p = Path(path)
    return parse_config_text(p.read_text(), str(p), experiment, strict, seed, out_dir)
