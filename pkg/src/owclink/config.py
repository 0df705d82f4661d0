"""Configuration files, presets and their validation.

Configs are YAML mappings.  Every validation error carries the line of the
offending node, or of the enclosing mapping when a field is missing.  The
full grammar is documented in ``docs/config.md``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import yaml

from .analysis import DEFAULT_ZETA, Formula, Method
from .channels import EwParams, LinkBudget, PointingGeometry, SeriesControl, atten_from_visibility
from .errors import DomainError
from .simulate import GgParams, Metric, MonteCarloConfig

AXES = ("transmit_power_dbm", "distance_m", "preset_name")


class ConfigError(ValueError):
    """Invalid configuration, with the source line when known."""

    def __init__(self, message, line=None, source="<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Preset:
    """Named physical parameter set.

    The EW triples are illustrative.  The published C_n^2 labels cannot be
    mapped to (alpha, beta, eta) from the information available, so the
    label is kept for reference only.
    """

    name: str
    wavelength_m: float
    responsivity: float
    noise_variance: float
    aperture_diameter_m: float
    beam_width_m: float
    sigma_x_m: float
    sigma_y_m: float
    mu_x_m: float
    mu_y_m: float
    visibility_m: float
    ew: EwParams
    distance_m: float = 2000.0
    transmit_power_dbm: float = 22.0
    cn2_label: float | None = None
    note: str = ""

    def __post_init__(self):
        for f in ("wavelength_m", "responsivity", "noise_variance", "aperture_diameter_m",
                  "beam_width_m", "sigma_x_m", "sigma_y_m", "visibility_m"):
            if not getattr(self, f) > 0:
                raise DomainError(f"preset {self.name}: {f} must be positive")
        if self.mu_x_m < 0 or self.mu_y_m < 0 or self.distance_m < 0:
            raise DomainError(f"preset {self.name}: offsets and distance must be non-negative")

    def pointing(self) -> PointingGeometry:
        return PointingGeometry(self.aperture_diameter_m / 2, self.beam_width_m, self.sigma_x_m,
                                self.sigma_y_m, self.mu_x_m, self.mu_y_m)


_COMMON = dict(wavelength_m=1550e-9, responsivity=0.41, noise_variance=1e-14,
               aperture_diameter_m=0.10, beam_width_m=2.5, sigma_x_m=0.35, sigma_y_m=0.35)

PRESETS = {
    p.name: p for p in (
        Preset("strong", mu_x_m=20.0, mu_y_m=20.0, visibility_m=16e3, ew=EwParams(1.8, 0.9, 0.35),
               cn2_label=8e-14, note="boresight 20 m as listed; h_p is then of order 1e-111", **_COMMON),
        Preset("medium", mu_x_m=20.0, mu_y_m=20.0, visibility_m=4e3, ew=EwParams(3.2, 2.0, 1.0),
               cn2_label=2e-14, note="boresight 20 m as listed", **_COMMON),
        Preset("strong_zero_boresight", mu_x_m=0.0, mu_y_m=0.0, visibility_m=16e3,
               ew=EwParams(1.8, 0.9, 0.35), cn2_label=8e-14,
               note="strong with zero boresight, so the closed-form pointing density applies", **_COMMON),
        Preset("medium_zero_boresight", mu_x_m=0.0, mu_y_m=0.0, visibility_m=4e3,
               ew=EwParams(3.2, 2.0, 1.0), cn2_label=2e-14,
               note="medium with zero boresight", **_COMMON),
    )
}


def dbm_to_watts(dbm: float) -> float:
    return 10 ** (dbm / 10) / 1000


@dataclass(frozen=True)
class GgSetting:
    params: GgParams | None  # None means moment-matched to the EW law
    mean: float = 1.0


@dataclass(frozen=True)
class PointConfig:
    """Everything needed to evaluate one parameter point."""

    preset: Preset
    transmit_power_dbm: float
    distance_m: float
    ew: EwParams
    pointing: PointingGeometry | None
    gg: GgSetting | None
    methods: tuple
    metrics: tuple
    zeta: int = DEFAULT_ZETA
    formula: Formula = Formula.DERIVED
    series: SeriesControl = field(default_factory=SeriesControl)
    mc: MonteCarloConfig | None = None

    def link(self) -> LinkBudget:
        p = self.preset
        return LinkBudget(dbm_to_watts(self.transmit_power_dbm), p.responsivity, p.noise_variance,
                          atten_from_visibility(p.visibility_m, p.wavelength_m), self.distance_m)


@dataclass(frozen=True)
class RunConfig:
    base: PointConfig
    axis: str | None = None
    points: tuple = ()
    raw: dict = field(default_factory=dict, repr=False, compare=False)
    lines: dict = field(default_factory=dict, repr=False, compare=False)
    source: str = "<config>"

    def point(self, value) -> PointConfig:
        """The base configuration with the sweep axis set to ``value``."""
        if self.axis is None:
            return self.base
        if self.axis == "preset_name":
            return build_point(self.raw, self.lines, self.source, preset_override=value)
        return replace(self.base, **{self.axis: float(value)})


# ---------------------------------------------------------------------------
# YAML with line numbers
# ---------------------------------------------------------------------------

def _plain(node, path, lines):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            out[key] = _plain(v, path + (key,), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, path + (i,), lines) for i, v in enumerate(node.value)]
    return _scalar(node)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


def parse_text(text: str, source: str = "<config>"):
    """Parse YAML into plain data plus a path -> line map."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    if node is None:
        raise ConfigError("empty configuration", 1, source)
    lines = {}
    data = _plain(node, (), lines)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    return data, lines


def _line(lines, path):
    while path not in lines and path:
        path = path[:-1]
    return lines.get(path)


class _Ctx:
    def __init__(self, lines, source):
        self.lines, self.source = lines, source

    def err(self, path, msg):
        name = ".".join(str(p) for p in path)
        return ConfigError(f"{name}: {msg}" if name else msg, _line(self.lines, tuple(path)), self.source)

    def number(self, data, path, *, positive=False, nonneg=False, integer=False):
        v = data
        if isinstance(v, bool) or v is None:
            raise self.err(path, f"expected a number, got {v!r}")
        if isinstance(v, str):
            try:
                v = float(v)
            except ValueError:
                raise self.err(path, f"expected a number, got {data!r}") from None
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise self.err(path, f"expected a finite number, got {data!r}")
        if integer:
            if int(v) != v:
                raise self.err(path, f"expected an integer, got {data!r}")
            v = int(v)
        if positive and not v > 0:
            raise self.err(path, f"must be positive, got {data!r}")
        if nonneg and v < 0:
            raise self.err(path, f"must be non-negative, got {data!r}")
        return v

    def mapping(self, data, path):
        if not isinstance(data, dict):
            raise self.err(path, "expected a mapping")
        return data

    def check_keys(self, data, path, allowed):
        for k in data:
            if k not in allowed:
                raise self.err(tuple(path) + (k,), f"unknown field (allowed: {', '.join(sorted(allowed))})")


_TOP = {"preset", "transmit_power_dbm", "distance_m", "ew", "link", "pointing", "gg", "methods",
        "metrics", "zeta", "formula", "series", "mc", "sweep"}
_LINK = {"wavelength_m", "responsivity", "noise_variance", "visibility_m"}
_POINTING = {"aperture_diameter_m", "beam_width_m", "sigma_x_m", "sigma_y_m", "mu_x_m", "mu_y_m"}

TURB_METHODS = (Method.QUADRATURE, Method.KERNEL_APPROX, Method.ASYMPTOTIC, Method.ASYMPTOTIC_PATHLOSS)
COMBINED_METHODS = (Method.QUADRATURE, Method.SERIES, Method.SERIES_PRINTED,
                    Method.ASYMPTOTIC_DERIVED, Method.ASYMPTOTIC_PRINTED)


def applicable_methods(pointing: PointingGeometry | None) -> tuple:
    if pointing is None:
        return TURB_METHODS
    if pointing.is_symmetric:
        return COMBINED_METHODS
    return (Method.ASYMPTOTIC_DERIVED, Method.ASYMPTOTIC_PRINTED)


def build_point(data: dict, lines: dict, source: str = "<config>", preset_override=None) -> PointConfig:
    c = _Ctx(lines, source)
    c.check_keys(data, (), _TOP)

    pname = preset_override if preset_override is not None else data.get("preset")
    if pname is not None:
        if pname not in PRESETS:
            raise c.err(("preset",) if preset_override is None else ("sweep", "points"),
                        f"unknown preset {pname!r} (known: {', '.join(PRESETS)})")
        preset = PRESETS[pname]
    else:
        preset = None

    link = c.mapping(data.get("link", {}), ("link",))
    c.check_keys(link, ("link",), _LINK)
    link_vals = {}
    for k in sorted(_LINK):
        if k in link:
            link_vals[k] = c.number(link[k], ("link", k), positive=True)
        elif preset is None:
            raise c.err(("link", k), "missing required field (no preset given)")

    if "ew" in data:
        ewd = c.mapping(data["ew"], ("ew",))
        c.check_keys(ewd, ("ew",), {"alpha", "beta", "eta"})
        vals = {}
        for k in ("alpha", "beta", "eta"):
            if k not in ewd:
                raise c.err(("ew", k), "missing required field")
            vals[k] = c.number(ewd[k], ("ew", k), positive=True)
        ew = EwParams(**vals)
    elif preset is None:
        raise c.err(("ew",), "missing required field (no preset given)")
    else:
        ew = preset.ew

    pt = data.get("pointing", False)
    pointing_vals = {}
    if isinstance(pt, dict):
        c.check_keys(pt, ("pointing",), _POINTING)
        for k in sorted(_POINTING):
            if k in pt:
                pointing_vals[k] = c.number(pt[k], ("pointing", k), nonneg=k.startswith("mu"),
                                            positive=not k.startswith("mu"))
            elif preset is None and k != "sigma_y_m" and not k.startswith("mu"):
                raise c.err(("pointing", k), "missing required field (no preset given)")
        use_pointing = True
    elif isinstance(pt, bool):
        use_pointing = pt
        if pt and preset is None:
            raise c.err(("pointing",), "pointing: true needs a preset to take the geometry from")
    else:
        raise c.err(("pointing",), "expected true, false or a mapping")

    if preset is None:
        pointing_vals.setdefault("sigma_y_m", pointing_vals.get("sigma_x_m", 1.0))
        pointing_vals.setdefault("mu_x_m", 0.0)
        pointing_vals.setdefault("mu_y_m", 0.0)
        preset = Preset("custom", ew=ew, visibility_m=link_vals["visibility_m"],
                        wavelength_m=link_vals["wavelength_m"], responsivity=link_vals["responsivity"],
                        noise_variance=link_vals["noise_variance"],
                        **{k: pointing_vals.get(k, 1.0) for k in _POINTING})
    else:
        preset = replace(preset, ew=ew, **link_vals, **pointing_vals)
    pointing = preset.pointing() if use_pointing else None

    power = c.number(data.get("transmit_power_dbm", preset.transmit_power_dbm), ("transmit_power_dbm",))
    dist = c.number(data.get("distance_m", preset.distance_m), ("distance_m",), nonneg=True)

    gg = None
    if "gg" in data:
        g = data["gg"]
        if g == "moment_matched":
            gg = GgSetting(None)
        else:
            g = c.mapping(g, ("gg",))
            c.check_keys(g, ("gg",), {"a_gg", "b_gg", "mean"})
            for k in ("a_gg", "b_gg"):
                if k not in g:
                    raise c.err(("gg", k), "missing required field")
            gg = GgSetting(GgParams(c.number(g["a_gg"], ("gg", "a_gg"), positive=True),
                                    c.number(g["b_gg"], ("gg", "b_gg"), positive=True)),
                           c.number(g.get("mean", 1.0), ("gg", "mean"), positive=True))

    zeta = c.number(data.get("zeta", DEFAULT_ZETA), ("zeta",), positive=True, integer=True)
    try:
        formula = Formula(data.get("formula", "derived"))
    except ValueError:
        raise c.err(("formula",), "expected 'derived' or 'printed'") from None

    allowed = applicable_methods(pointing)
    if "methods" in data:
        ms = data["methods"]
        if not isinstance(ms, list) or not ms:
            raise c.err(("methods",), "expected a non-empty list")
        methods = []
        for i, m in enumerate(ms):
            try:
                mm = Method(m)
            except ValueError:
                raise c.err(("methods", i), f"unknown method {m!r} (known: "
                            f"{', '.join(x.value for x in Method)})") from None
            if mm not in allowed:
                raise c.err(("methods", i), f"method {mm.value} does not apply to this channel "
                            f"(applicable: {', '.join(x.value for x in allowed)})")
            methods.append(mm)
        methods = tuple(methods)
    else:
        printed = (Method.SERIES_PRINTED, Method.ASYMPTOTIC_PRINTED)
        methods = tuple(m for m in allowed if formula is Formula.PRINTED or m not in printed)

    metrics = data.get("metrics", [m.value for m in Metric])
    if not isinstance(metrics, list) or not metrics:
        raise c.err(("metrics",), "expected a non-empty list")
    mets = []
    for i, m in enumerate(metrics):
        try:
            mets.append(Metric(m))
        except ValueError:
            raise c.err(("metrics", i), f"unknown metric {m!r} (known: avg_snr, ergodic_rate)") from None

    series = SeriesControl()
    if "series" in data:
        s = c.mapping(data["series"], ("series",))
        c.check_keys(s, ("series",), {"max_terms", "rel_term_tol"})
        series = SeriesControl(
            c.number(s.get("max_terms", series.max_terms), ("series", "max_terms"), positive=True, integer=True),
            c.number(s.get("rel_term_tol", series.rel_term_tol), ("series", "rel_term_tol"), positive=True))

    mc = None
    if data.get("mc") is not None:
        m = c.mapping(data["mc"], ("mc",))
        c.check_keys(m, ("mc",), {"n_samples", "seed", "n_workers", "block_size"})
        if "n_samples" not in m:
            raise c.err(("mc", "n_samples"), "missing required field")
        kw = {k: c.number(m[k], ("mc", k), integer=True, nonneg=True) for k in m}
        try:
            mc = MonteCarloConfig(**kw)
        except DomainError as exc:
            raise c.err(("mc",), str(exc)) from None
        if mc.n_samples < 30:
            raise c.err(("mc", "n_samples"), "at least 30 samples are needed for an interval")

    try:
        return PointConfig(preset, power, dist, ew, pointing, gg, methods, tuple(mets), zeta, formula,
                           series, mc)
    except DomainError as exc:
        raise c.err((), str(exc)) from None


def load_config(text: str, source: str = "<config>", require_sweep: bool = False) -> RunConfig:
    data, lines = parse_text(text, source)
    c = _Ctx(lines, source)
    first_preset = None
    sw = data.get("sweep")
    if isinstance(sw, dict) and sw.get("axis") == "preset_name" and isinstance(sw.get("points"), list):
        if sw["points"] and sw["points"][0] in PRESETS:
            first_preset = sw["points"][0]
    try:
        base = build_point(data, lines, source, preset_override=first_preset)
    except DomainError as exc:
        raise ConfigError(str(exc), None, source) from None
    if "sweep" not in data:
        if require_sweep:
            raise c.err(("sweep",), "missing required section for the sweep command")
        return RunConfig(base, raw=data, lines=lines, source=source)
    s = c.mapping(data["sweep"], ("sweep",))
    c.check_keys(s, ("sweep",), {"axis", "points"})
    axis = s.get("axis")
    if axis not in AXES:
        raise c.err(("sweep", "axis"), f"expected one of {', '.join(AXES)}, got {axis!r}")
    pts = s.get("points")
    if not isinstance(pts, list) or not pts:
        raise c.err(("sweep", "points"), "expected a non-empty list")
    if axis == "preset_name":
        for i, p in enumerate(pts):
            if p not in PRESETS:
                raise c.err(("sweep", "points", i), f"unknown preset {p!r}")
        points = tuple(pts)
    else:
        points = tuple(c.number(p, ("sweep", "points", i), nonneg=axis == "distance_m")
                       for i, p in enumerate(pts))
        diffs = [b - a for a, b in zip(points, points[1:])]
        if not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise c.err(("sweep", "points"), "numeric sweep points must be strictly monotone")
    run = RunConfig(base, axis, points, data, lines, source)
    if axis == "preset_name":
        for p in points:
            run.point(p)
    return run


def load_config_file(path: str, require_sweep: bool = False) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
    return load_config(text, path, require_sweep)
