"""Flat ``section.key = value`` scenario files.

One assignment per line, ``#`` starts a comment, list values are
whitespace-separated. Every key has a type and a default (see :data:`SCHEMA`);
unknown keys and unparsable values raise :class:`~.errors.ConfigError`.
Command-line overrides use the same ``key=value`` syntax.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from .controller import ControllerConfig, ControllerMode, GainSet, PidGains
from .errors import ConfigError, ParameterError
from .gains import DisturbanceBounds, QuarticCoefficients, estimate_L1_L2, omega_star
from .observer import FeedbackSign, ObserverConfig
from .reference import ReferenceParams
from .surrogate import DisturbanceKind, DisturbanceSpec, PlantState

__all__ = ["SCHEMA", "Scenario", "parse_config", "load_config", "apply_overrides", "render_config"]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("none", "") else float(text)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split())


def _words(text: str) -> tuple[str, ...]:
    return tuple(text.split())


def _omega(text: str) -> float | str:
    return "auto" if text.strip().lower() == "auto" else float(text)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {text!r}")
        return t

    return parse


_MODES = tuple(m.value for m in ControllerMode)

# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "seed": (int, 0),
    "controller.mode": (_choice(*_MODES), "adrc_algorithm1"),
    "controller.k_ap": (float, 0.1),
    "controller.k_ad": (float, 0.01),
    "controller.K_p": (float, 0.1),
    "controller.K_i": (float, 0.01),
    "controller.K_d": (float, 0.01),
    "controller.alpha": (float, 0.035),
    "controller.lambda_max": (_opt_float, 100.0),
    "controller.lambda_init": (float, 0.001),
    "controller.delay": (int, 10),
    "controller.ema_alpha_p": (float, 0.95),
    "controller.ema_alpha_d": (float, 0.95),
    "controller.sum_normalization": (_bool, True),
    "controller.derivative_normalization": (_bool, False),
    "controller.strict_kd": (_bool, False),
    "controller.dt": (float, 1.0),
    "reference.c_r": (float, 0.1),
    "reference.d": (float, 25.0),
    "reference.x1_0": (float, 25.0),
    "reference.x2_0": (float, 0.0),
    "reference.margin": (float, 0.0),
    "reference.t_max": (float, 100.0),
    "reference.samples": (int, 101),
    "observer.omega_o": (_omega, 10.0),
    "observer.floor": (float, 10.0),
    "observer.feedback_sign": (_choice(*(s.value for s in FeedbackSign)), "negative_feedback"),
    "bounds.L1": (_opt_float, None),
    "bounds.L2": (_opt_float, None),
    "bounds.L3": (float, 0.0),
    "bounds.trace": (str, ""),
    "bounds.trace_dt": (float, 1.0),
    "manifold.coeffs": (_floats, ()),
    "disturbance.kind": (_choice(*(k.value for k in DisturbanceKind)), "constant"),
    "disturbance.offset": (float, 0.0),
    "disturbance.amplitude": (float, 0.0),
    "disturbance.frequency": (float, 0.0),
    "disturbance.phase": (float, 0.0),
    "disturbance.decay": (float, 0.0),
    "disturbance.step_height": (float, 0.0),
    "disturbance.step_rate": (float, 0.0),
    "disturbance.a1": (float, 0.0),
    "disturbance.a2": (float, 0.0),
    "disturbance.L_f": (_opt_float, None),
    "simulation.dt": (float, 0.001),
    "simulation.dt_update": (float, 0.01),
    "simulation.horizon": (float, 80.0),
    "simulation.x2_0": (float, 0.0),
    "sweep.param": (str, "reference.c_r"),
    "sweep.values": (_floats, (0.05, 0.1, 0.15, 0.2, 0.25)),
    "sweep.target": (_choice("toy-cmdp", "simulate"), "toy-cmdp"),
    "sweep.workers": (int, 1),
    "toy.instance": (str, "risky_chain"),
    "toy.epochs": (int, 150),
    "toy.episodes": (int, 32),
    "toy.seeds": (_ints, tuple(range(10))),
    "toy.step_size": (float, 0.05),
    "toy.modes": (_words, ("classical_lag", "pid_lag", "adrc_algorithm1")),
    "freq.n": (int, 200),
    "freq.lo": (float, 1e-3),
    "freq.hi": (float, 1e3),
    "output.dir": (str, "."),
    "output.precision": (int, 17),
}


def _parse_value(key: str, text: str) -> Any:
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    parser, _ = SCHEMA[key]
    try:
        return parser(text.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _split(line: str, where: str) -> tuple[str, str]:
    if "=" not in line:
        raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
    key, value = line.split("=", 1)
    return key.strip(), value.strip()


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, value = _split(line, f"{source}:{lineno}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, value)
    return values


def load_config(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))


def apply_overrides(values: Mapping[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    out = dict(values)
    for item in overrides:
        key, value = _split(item, "override")
        out[key] = _parse_value(key, value)
    return out


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_format(v) for v in value)
    return str(value)


def render_config(values: Mapping[str, Any]) -> str:
    """Serialize ``values`` (merged with defaults) back to the file format."""
    merged = {k: d for k, (_, d) in SCHEMA.items()}
    merged.update(values)
    return "".join(f"{k} = {_format(merged[k])}\n" for k in SCHEMA)


@dataclass(frozen=True)
class Scenario:
    """Validated scenario with builders for every component."""

    values: Mapping[str, Any]

    @classmethod
    def from_sources(cls, path: str | Path | None = None, overrides: Iterable[str] = ()) -> "Scenario":
        sc = cls(apply_overrides(load_config(path), overrides))
        sc.validate()
        return sc

    def __getitem__(self, key: str) -> Any:
        if key in self.values:
            return self.values[key]
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        return SCHEMA[key][1]

    def with_value(self, key: str, value: Any) -> "Scenario":
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        vals = dict(self.values)
        vals[key] = value
        return Scenario(vals)

    def validate(self) -> None:
        """Build every component once so errors surface before any run."""
        if self["observer.omega_o"] == "auto" and not self._has_bounds():
            raise ConfigError("observer.omega_o = auto requires bounds.L1/bounds.L2 or bounds.trace")
        try:
            self.controller_config()
            self.reference_params()
            self.observer_config()
            self.disturbance_spec()
            if self["disturbance.L_f"] is not None and self["disturbance.L_f"] < 0:
                raise ConfigError("disturbance.L_f must be >= 0")
            if self["sweep.param"] not in SCHEMA:
                raise ConfigError(f"sweep.param names an unknown key {self['sweep.param']!r}")
            for key in ("toy.epochs", "toy.episodes", "freq.n", "reference.samples", "sweep.workers"):
                if self[key] < 1:
                    raise ConfigError(f"{key} must be >= 1")
            if not self["toy.seeds"]:
                raise ConfigError("toy.seeds is empty")
            for m in self["toy.modes"]:
                if m not in _MODES:
                    raise ConfigError(f"toy.modes: unknown mode {m!r}")
            if not 0 < self["freq.lo"] < self["freq.hi"]:
                raise ConfigError("need 0 < freq.lo < freq.hi")
            if not 1 <= self["output.precision"] <= 17:
                raise ConfigError("output.precision must lie in [1, 17]")
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None

    # -- builders -----------------------------------------------------------

    def gains(self, mode: ControllerMode | None = None, omega_o: float | None = None) -> GainSet | PidGains:
        mode = ControllerMode(self["controller.mode"]) if mode is None else mode
        if mode is ControllerMode.CLASSICAL_LAG:
            return PidGains.classical(self["controller.alpha"])
        if mode is ControllerMode.PID_LAG:
            return PidGains(self["controller.K_p"], self["controller.K_i"], self["controller.K_d"])
        w = self.omega_o() if omega_o is None else omega_o
        return GainSet(self["controller.k_ap"], self["controller.k_ad"], w)

    def controller_config(self, mode: ControllerMode | str | None = None, dt: float | None = None) -> ControllerConfig:
        mode = ControllerMode(self["controller.mode"] if mode is None else mode)
        return ControllerConfig(
            mode=mode,
            gains=self.gains(mode),
            lambda_max=self["controller.lambda_max"],
            lambda_init=self["controller.lambda_init"],
            cost_limit=self["reference.d"],
            delay=self["controller.delay"],
            ema_alpha_p=self["controller.ema_alpha_p"],
            ema_alpha_d=self["controller.ema_alpha_d"],
            sum_normalization=self["controller.sum_normalization"],
            derivative_normalization=self["controller.derivative_normalization"],
            dt=self["controller.dt"] if dt is None else dt,
            strict_algorithm1_kd=self["controller.strict_kd"],
        )

    def reference_params(self) -> ReferenceParams:
        p = ReferenceParams(self["reference.c_r"], self["reference.d"], self["reference.x1_0"], self["reference.x2_0"])
        margin = self["reference.margin"]
        return p.with_margin(margin) if margin else p

    def _has_bounds(self) -> bool:
        return (self["bounds.L1"] is not None and self["bounds.L2"] is not None) or bool(self["bounds.trace"])

    def bounds(self) -> DisturbanceBounds:
        """Declared ``L1``/``L2`` or, failing that, estimates from ``bounds.trace``."""
        L1, L2 = self["bounds.L1"], self["bounds.L2"]
        if L1 is not None and L2 is not None:
            return DisturbanceBounds(L1, L2, self["bounds.L3"])
        path = self["bounds.trace"]
        if not path:
            raise ConfigError("bounds.L1/bounds.L2 or bounds.trace is required here")
        est = estimate_L1_L2(_read_column(path, "x1"), self["bounds.trace_dt"])
        return est.as_bounds(self["bounds.L3"])

    def manifold(self) -> QuarticCoefficients | None:
        c = self["manifold.coeffs"]
        if not c:
            return None
        if len(c) != 5:
            raise ConfigError(f"manifold.coeffs needs 5 values, got {len(c)}")
        return QuarticCoefficients(*c)

    def omega_star(self) -> float:
        return omega_star(self["controller.k_ap"], self["controller.k_ad"], self.bounds(), self.manifold())

    def omega_o(self) -> float:
        """Configured observer gain; ``auto`` gives ``max(floor, 2 omega_star)``."""
        w = self["observer.omega_o"]
        if w == "auto":
            return max(self["observer.floor"], 2.0 * self.omega_star())
        return w

    def observer_config(self) -> ObserverConfig:
        return ObserverConfig(self.omega_o(), FeedbackSign(self["observer.feedback_sign"]))

    def disturbance_spec(self) -> DisturbanceSpec:
        kind = DisturbanceKind(self["disturbance.kind"])
        g = self.__getitem__
        if kind is DisturbanceKind.CONSTANT:
            return DisturbanceSpec.constant(g("disturbance.offset"))
        if kind is DisturbanceKind.SINUSOID:
            return DisturbanceSpec.sinusoid(
                g("disturbance.amplitude"),
                g("disturbance.frequency"),
                offset=g("disturbance.offset"),
                phase=g("disturbance.phase"),
                decay=g("disturbance.decay"),
            )
        if kind is DisturbanceKind.SMOOTH_STEP:
            return DisturbanceSpec.smooth_step(g("disturbance.step_height"), g("disturbance.step_rate"), g("disturbance.offset"))
        L_f = g("disturbance.L_f")
        if L_f is None:
            raise ConfigError(f"disturbance.L_f must be declared for kind {kind.value}")
        if kind is DisturbanceKind.LINEAR_STATE:
            return DisturbanceSpec.linear_state(g("disturbance.a1"), g("disturbance.a2"), L_f, g("disturbance.offset"))
        amp, nu, dec = g("disturbance.amplitude"), g("disturbance.frequency"), g("disturbance.decay")
        slope = abs(g("disturbance.step_height")) * g("disturbance.step_rate")
        wave_rate = abs(amp) * math.hypot(nu, dec)
        off, sh = g("disturbance.offset"), g("disturbance.step_height")
        L3 = max(abs(off) + abs(sh) + abs(amp), slope + wave_rate)
        return DisturbanceSpec(
            DisturbanceKind.COMPOSITE,
            offset=off,
            amplitude=amp,
            frequency=nu,
            phase=g("disturbance.phase"),
            decay=dec,
            step_height=sh,
            step_rate=g("disturbance.step_rate"),
            a1=g("disturbance.a1"),
            a2=g("disturbance.a2"),
            L1=abs(g("disturbance.a1")),
            L2=abs(g("disturbance.a2")),
            L3=L3,
            L_f=L_f,
        )

    def plant0(self) -> PlantState:
        return PlantState(self["reference.x1_0"], self["simulation.x2_0"])


def _read_column(path: str | Path, column: str) -> np.ndarray:
    """One numeric column of a CSV file (``#`` lines ignored)."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    except OSError as exc:
        raise ConfigError(f"cannot read trace {path}: {exc.strerror}") from None
    if not rows or column not in rows[0]:
        raise ConfigError(f"trace {path} has no column {column!r}")
    i = rows[0].index(column)
    try:
        return np.array([float(r[i]) for r in rows[1:]])
    except (ValueError, IndexError):
        raise ConfigError(f"trace {path}: non-numeric or missing {column!r} entries") from None
