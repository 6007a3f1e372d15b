"""Experiment configuration: flat key-value text with dotted sections.

The format is diffable and hand-editable; parsing validates every field and
reports all errors at once.  Booleans accept true/false, ints and floats
their literal forms; '#' starts a comment.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

from .errors import ValidationErrors

_SCHEMA = {
    "seed": (int, 0),
    "geometry.model": (str, "cp1"),            # cp1 | torus
    "geometry.resolution": (int, 256),
    "geometry.complex_dim": (int, 1),          # torus charts only
    "geometry.perturbation_amplitude": (float, 0.0),
    "geometry.perturbation_modes": (int, 3),
    "geometry.perturbation_seed": (int, -1),   # -1: fall back to seed
    "flow.kind": (str, "nkrf"),                # nkrf | krf | potential
    "flow.t_end": (float, 1.0),
    "flow.dt": (float, 1e-3),
    "flow.scheme": (str, "rk4"),               # rk4 | imex1
    "flow.substep": (str, "auto"),             # auto | off
    "flow.cfl_safety": (float, 0.8),
    "flow.curvature_c": (float, 0.1),
    "diagnostics.tracker_every": (int, 0),     # 0 disables
    "diagnostics.entropy_every": (int, 0),
    "diagnostics.noncollapse_every": (int, 0),
    "diagnostics.harnack": (bool, False),
    "diagnostics.futaki": (bool, False),
    "diagnostics.flush_every": (int, 50),
    "diagnostics.checkpoint_every": (int, 0),
    "output.dir": (str, "runs/out"),
    "verify.periodic1_n": (int, 64),
    "verify.periodic2_n": (int, 24),
    "verify.fs_resolution": (int, 256),
    "verify.heat_kernel_samples": (int, 1000),
    "verify.trace_samples": (int, 100_000),
    "debug.fault_injection": (bool, False),
}

_CHOICES = {
    "geometry.model": {"cp1", "torus"},
    "flow.kind": {"nkrf", "krf", "potential"},
    "flow.scheme": {"rk4", "imex1"},
    "flow.substep": {"auto", "off"},
}

_POSITIVE = {"flow.t_end", "flow.dt", "flow.cfl_safety", "flow.curvature_c"}
_NONNEGATIVE = {"diagnostics.tracker_every", "diagnostics.entropy_every",
                "diagnostics.noncollapse_every", "diagnostics.flush_every",
                "diagnostics.checkpoint_every"}


@dataclass
class ExperimentConfig:
    """Validated configuration; field names mirror the dotted keys."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def canonical_text(self):
        """Byte-stable serialization used for hashing and persistence."""
        lines = []
        for key in sorted(self.values):
            v = self.values[key]
            if isinstance(v, bool):
                sv = "true" if v else "false"
            elif isinstance(v, float):
                sv = format(v, ".17g")
            else:
                sv = str(v)
            lines.append(f"{key} = {sv}")
        return "\n".join(lines) + "\n"

    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    @property
    def perturbation_seed(self):
        ps = self.values["geometry.perturbation_seed"]
        return self.values["seed"] if ps == -1 else ps


def _coerce(key, raw, typ, errors):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        errors.append(f"{key}: cannot parse {raw!r} as {typ.__name__}")
        return None


def parse_config(text) -> ExperimentConfig:
    """Parse and validate; raises ValidationErrors carrying every problem."""
    errors = []
    values = {k: default for k, (_, default) in _SCHEMA.items()}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(f"line {lineno}: expected 'key = value', got {body!r}")
            continue
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _SCHEMA:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        seen.add(key)
        typ, _ = _SCHEMA[key]
        val = _coerce(key, raw, typ, errors)
        if val is not None:
            values[key] = val
    for key, choices in _CHOICES.items():
        if values[key] not in choices:
            errors.append(f"{key}: {values[key]!r} not in {sorted(choices)}")
    for key in _POSITIVE:
        if not (isinstance(values[key], (int, float)) and values[key] > 0):
            errors.append(f"{key}: must be positive, got {values[key]!r}")
    for key in _NONNEGATIVE:
        if not (isinstance(values[key], int) and values[key] >= 0):
            errors.append(f"{key}: must be a nonnegative integer, got "
                          f"{values[key]!r}")
    if values["geometry.model"] == "torus" and values["flow.kind"] in (
            "nkrf", "krf", "potential") and values["flow.t_end"] > 0:
        # flows run on CP^1 profiles; torus charts are for identity suites
        errors.append("geometry.model = torus does not support flow runs; "
                      "use the verify subcommand for torus identity suites")
    if values["geometry.resolution"] < 8:
        errors.append("geometry.resolution: must be at least 8")
    if values["geometry.complex_dim"] not in (1, 2):
        errors.append("geometry.complex_dim: must be 1 or 2")
    if errors:
        raise ValidationErrors(errors)
    return ExperimentConfig(values)


def default_config() -> ExperimentConfig:
    return ExperimentConfig({k: d for k, (_, d) in _SCHEMA.items()})
