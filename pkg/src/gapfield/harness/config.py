"""Experiment configuration read from a TOML file.

Example::

    [shape1]
    kind = "ellipse"
    a = 1.5
    b = 1.0

    [shape2]
    kind = "circle"
    radius = 1.0

    [eps]
    min = 1e-4
    max = 1e-1
    count = 7

    [background]
    re1 = 1.0

Unknown sections or keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import tomli

from ..errors import ConfigError, DomainError
from ..geometry import Curve
from ..solver import HarmonicBackground

SECTIONS = {
    "shape1": None,
    "shape2": None,
    "eps": {"values", "min", "max", "count"},
    "background": None,
    "problem": {"kind", "orthogonalize", "h0"},
    "numerics": {"n", "n_constant", "grading", "gap_samples", "spectrum",
                 "probes", "oracle_tol"},
    "output": {"dir", "format", "plots"},
    "run": {"seed", "name"},
}
SHAPE_KEYS = {
    "circle": {"kind", "radius", "angle"},
    "ellipse": {"kind", "a", "b", "angle"},
    "fourier": {"kind", "r0", "modes", "angle"},
}
# Re (z - 1/2)^3: a second background with nonzero gradient at the gap
DEFAULT_H0 = {"re3": 1.0, "re2": -1.5, "re1": 0.75, "const": -0.125}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    Attributes
    ----------
    shape1, shape2 : Curve
        Shapes before placement.
    eps : tuple of float
        Gaps, sorted descending.
    background : HarmonicBackground
    kind : {"conducting", "insulating"}
    orthogonalize : bool
        Replace ``h`` by ``h - <h, g>/<h0, g> h0`` at every gap.
    h0 : HarmonicBackground
    n : int or None
        Fixed node count (``None`` uses the default policy).
    """

    shape1: Curve
    shape2: Curve
    eps: tuple
    background: HarmonicBackground
    kind: str = "conducting"
    orthogonalize: bool = False
    h0: HarmonicBackground = field(
        default_factory=lambda: HarmonicBackground.from_mapping(DEFAULT_H0))
    n: int | None = None
    n_constant: float = 24.0
    grading: float = 0.6
    gap_samples: int = 9
    spectrum: str = "multiplicity"
    probes: int = 50
    oracle_tol: float = 1e-6
    out_dir: str = "out"
    out_format: str = "csv"
    plots: tuple = ()
    seed: int = 0
    name: str = "experiment"
    source: str = ""
    raw: dict = field(default_factory=dict, compare=False)


def _shape(spec, label):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"[{label}] needs a 'kind'")
    kind = spec["kind"]
    if kind not in SHAPE_KEYS:
        raise ConfigError(f"[{label}] unknown kind {kind!r}")
    extra = set(spec) - SHAPE_KEYS[kind]
    if extra:
        raise ConfigError(f"[{label}] unknown keys {sorted(extra)}")
    angle = float(spec.get("angle", 0.0))
    try:
        if kind == "circle":
            return Curve.circle(radius=float(spec.get("radius", 1.0)))
        if kind == "ellipse":
            return Curve.ellipse(a=float(spec["a"]), b=float(spec["b"]), angle=angle)
        modes = [tuple(m) for m in spec.get("modes", [])]
        if any(len(m) != 3 for m in modes):
            raise ConfigError(f"[{label}] modes must be [n, a_n, b_n] triples")
        return Curve.fourier(r0=float(spec["r0"]), modes=modes, angle=angle)
    except KeyError as exc:
        raise ConfigError(f"[{label}] missing key {exc}") from exc
    except DomainError as exc:
        raise ConfigError(f"[{label}] {exc}") from exc


def _eps(spec):
    if "values" in spec:
        if set(spec) - {"values"}:
            raise ConfigError("[eps] use either 'values' or 'min'/'max'/'count'")
        vals = [float(v) for v in spec["values"]]
    else:
        try:
            lo, hi, n = float(spec["min"]), float(spec["max"]), int(spec["count"])
        except KeyError as exc:
            raise ConfigError(f"[eps] missing key {exc}") from exc
        if n < 0 or lo <= 0 or hi < lo:
            raise ConfigError("[eps] needs 0 < min <= max and count >= 0")
        vals = list(np.geomspace(hi, lo, n)) if n > 1 else ([hi] if n == 1 else [])
    if any(not v > 0 for v in vals):
        raise ConfigError("[eps] values must be positive")
    return tuple(sorted((float(v) for v in vals), reverse=True))


def _background(spec, label):
    try:
        return HarmonicBackground.from_mapping({k: float(v) for k, v in spec.items()})
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"[{label}] {exc}") from exc


def parse_config(text, source="<string>"):
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    for sec, keys in SECTIONS.items():
        if sec in raw and not isinstance(raw[sec], dict):
            raise ConfigError(f"[{sec}] must be a table")
        if keys is not None and sec in raw:
            extra = set(raw[sec]) - keys
            if extra:
                raise ConfigError(f"[{sec}] unknown keys {sorted(extra)}")
    for sec in ("shape1", "shape2", "eps"):
        if sec not in raw:
            raise ConfigError(f"missing section [{sec}]")
    prob = raw.get("problem", {})
    num = raw.get("numerics", {})
    out = raw.get("output", {})
    run = raw.get("run", {})
    kind = prob.get("kind", "conducting")
    if kind not in ("conducting", "insulating"):
        raise ConfigError(f"[problem] kind must be conducting or insulating, got {kind!r}")
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json", "both"):
        raise ConfigError("[output] format must be csv, json or both")
    spec = num.get("spectrum", "multiplicity")
    if spec not in ("none", "multiplicity", "full"):
        raise ConfigError("[numerics] spectrum must be none, multiplicity or full")
    n = num.get("n", 0)
    if not isinstance(n, int) or n < 0 or n % 2:
        raise ConfigError("[numerics] n must be a nonnegative even integer (0 = auto)")
    grading = float(num.get("grading", 0.6))
    if not 0 <= grading < 1:
        raise ConfigError("[numerics] grading must lie in [0, 1)")
    plots = tuple(out.get("plots", ()))
    for p in plots:
        if not isinstance(p, str) or p.count(":") != 1:
            raise ConfigError(f"[output] plot spec {p!r} must look like 'colx:coly'")
    return ExperimentConfig(
        shape1=_shape(raw["shape1"], "shape1"),
        shape2=_shape(raw["shape2"], "shape2"),
        eps=_eps(raw["eps"]),
        background=_background(raw.get("background", {"re1": 1.0}), "background"),
        kind=kind,
        orthogonalize=bool(prob.get("orthogonalize", False)),
        h0=_background(prob.get("h0", DEFAULT_H0), "problem.h0"),
        n=n or None,
        n_constant=float(num.get("n_constant", 24.0)),
        grading=grading,
        gap_samples=int(num.get("gap_samples", 9)),
        spectrum=spec,
        probes=int(num.get("probes", 50)),
        oracle_tol=float(num.get("oracle_tol", 1e-6)),
        out_dir=str(out.get("dir", "out")),
        out_format=fmt,
        plots=plots,
        seed=int(run.get("seed", 0)),
        name=str(run.get("name", "experiment")),
        source=text,
        raw=raw,
    )


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
