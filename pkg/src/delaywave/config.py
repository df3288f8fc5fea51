"""Experiment configuration: strict YAML/JSON loading and model assembly.

The file is a mapping of sections.  Unknown keys anywhere are errors, and
every error names the dotted key path that caused it.  Either give a
``scenario`` section (the built-in damped delay wave) or spell out
``operator``/``delay``/``noise``/``diffusion`` explicitly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .delay import DelayKernel, assemble_delay, derivative_galerkin_matrix
from .exceptions import ConfigError
from .noise import FixedNormJumps, GaussianJumps, JumpSpec, NoiseSpec, ParetoJumps
from .operators import DampingSpec, SpectralOperator, build_reduction
from .presets import Scenario, damped_delay_wave, standing_wave_init
from .sde import DiffusionSpec, velocity_noise_matrix

__all__ = ["ExperimentConfig", "load_config", "parse_config", "builtin_config", "BUILTIN_CONFIGS"]

BUILTIN_CONFIGS = ("delay_wave", "undamped", "levy_jumps", "verify_fault")

_SECTIONS = ("scenario", "operator", "delay", "noise", "diffusion", "simulation", "analysis", "output", "verify")
_MODEL_SECTIONS = ("operator", "delay", "noise", "diffusion")

_DEFAULTS = {
    "simulation": dict(T=40.0, h=1.0 / 128, paths=200, master_seed=0, scheme="exponential",
                       record_stride=16, richardson=False,
                       init=dict(amplitude=1.0, mode=1, velocity=0.0),
                       alt_init=dict(amplitude=-1.0, mode=2, velocity=0.0)),
    "analysis": dict(b_cutoff=None, a_grid=None, c=[0.25, 0.5, 0.75], dictionary_size=256,
                     checkpoints=[10.0, 20.0, 40.0], s_offset=10.0, envelope_T=50.0, envelope_points=501),
    "output": dict(directory="out", formats=["csv", "text"]),
    "verify": dict(scale="full", fault="none", only=None),
}


# -- low-level validators ------------------------------------------------------


def _mapping(obj, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected a mapping, got {type(obj).__name__}")
    return obj


def _keys(obj, path, allowed, required=()):
    _mapping(obj, path)
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else str(k), "unknown key")
    for k in required:
        if k not in obj:
            raise ConfigError(f"{path}.{k}" if path else str(k), "required key is missing")


def _num(v, path, *, positive=False, nonneg=False, integer=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    x = int(v) if integer else float(v)
    if not math.isfinite(x):
        raise ConfigError(path, "must be finite")
    if positive and not x > 0:
        raise ConfigError(path, f"must be positive, got {v!r}")
    if nonneg and x < 0:
        raise ConfigError(path, f"must be non-negative, got {v!r}")
    return x


def _numlist(v, path, **kw):
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(path, "expected a non-empty list of numbers")
    return [_num(x, f"{path}[{i}]", **kw) for i, x in enumerate(v)]


def _choice(v, path, options):
    if v not in options:
        raise ConfigError(path, f"must be one of {list(options)}, got {v!r}")
    return v


def _merge(defaults, given, path):
    out = dict(defaults)
    for k, v in given.items():
        if k not in defaults:
            raise ConfigError(f"{path}.{k}", "unknown key")
        if isinstance(defaults[k], dict) and v is not None:
            out[k] = _merge(defaults[k], _mapping(v, f"{path}.{k}"), f"{path}.{k}")
        else:
            out[k] = v
    return out


# -- model sections --------------------------------------------------------------


def _build_operator(sec, n_override):
    _keys(sec, "operator", ("eigenvalues", "damping"), ("eigenvalues", "damping"))
    ev = sec["eigenvalues"]
    _keys(ev, "operator.eigenvalues", ("rule", "n_modes", "values", "length"), ("rule",))
    rule = _choice(ev["rule"], "operator.eigenvalues.rule", ("dirichlet_laplacian_1d", "explicit"))
    if rule == "dirichlet_laplacian_1d":
        n = _num(ev.get("n_modes", 32), "operator.eigenvalues.n_modes", positive=True, integer=True)
        if n_override is not None:
            n = n_override
        A = SpectralOperator.dirichlet_laplacian_1d(n, _num(ev.get("length", 1.0), "operator.eigenvalues.length",
                                                            positive=True))
    else:
        if "values" not in ev:
            raise ConfigError("operator.eigenvalues.values", "explicit rule needs values")
        vals = _numlist(ev["values"], "operator.eigenvalues.values", positive=True)
        try:
            A = SpectralOperator(np.array(vals))
        except ValueError as e:
            raise ConfigError("operator.eigenvalues.values", str(e)) from None
        if n_override is not None:
            if n_override > A.n_modes:
                raise ConfigError("operator.eigenvalues.values", f"--modes {n_override} exceeds {A.n_modes} values")
            A = A.truncate(n_override)
    B = _build_damping(sec["damping"], A.n_modes)
    return A, B


def _build_damping(d, n):
    path = "operator.damping"
    _keys(d, path, ("kind", "value", "real", "imag"), ("kind",))
    kind = _choice(d["kind"], f"{path}.kind", ("scalar", "diagonal", "dense"))
    try:
        if kind == "scalar":
            B = DampingSpec.scalar(_num(d.get("value"), f"{path}.value"))
        elif kind == "diagonal":
            re = np.array(_numlist(d.get("real", d.get("value")), f"{path}.real"))
            im = np.array(_numlist(d["imag"], f"{path}.imag")) if "imag" in d else np.zeros_like(re)
            if re.size != n or im.size != n:
                raise ConfigError(path, f"diagonal damping needs {n} entries (one per mode)")
            B = DampingSpec.diagonal(re + 1j * im if np.any(im) else re)
        else:
            M = np.array(d.get("value"), dtype=float)
            if M.shape != (n, n):
                raise ConfigError(f"{path}.value", f"dense damping must be {n}x{n}")
            B = DampingSpec.dense(M)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(path, str(e)) from None
    if not B.is_dissipative(n):
        raise ConfigError(path, "damping must be dissipative (Re<Bv, v> <= 0); check its sign")
    return B


def _weight(w, path, n, D):
    """Weight spec: ``{scale, matrix: identity|derivative}`` or ``{values: [[...]]}``."""
    _keys(w, path, ("scale", "matrix", "values"))
    if "values" in w:
        M = np.array(w["values"], dtype=float)
        if M.shape != (n, n):
            raise ConfigError(f"{path}.values", f"expected an {n}x{n} matrix")
        return M
    s = _num(w.get("scale", 1.0), f"{path}.scale")
    m = _choice(w.get("matrix", "identity"), f"{path}.matrix", ("identity", "derivative"))
    return s * (np.eye(n) if m == "identity" else D)


def _build_kernel(sec, path, horizon, n, D, target):
    _keys(sec, path, ("atoms", "density"))
    atoms, dens = [], []
    for i, a in enumerate(sec.get("atoms", []) or []):
        p = f"{path}.atoms[{i}]"
        _keys(a, p, ("theta", "scale", "matrix", "values"), ("theta",))
        th = _num(a["theta"], f"{p}.theta")
        atoms.append((th, _weight({k: v for k, v in a.items() if k != "theta"}, p, n, D)))
    for i, a in enumerate(sec.get("density", []) or []):
        p = f"{path}.density[{i}]"
        _keys(a, p, ("from", "to", "scale", "matrix", "values"), ("from", "to"))
        dens.append((_num(a["from"], f"{p}.from"), _num(a["to"], f"{p}.to"),
                     _weight({k: v for k, v in a.items() if k not in ("from", "to")}, p, n, D)))
    if not atoms and not dens:
        return None
    try:
        return DelayKernel(horizon, tuple(atoms), tuple(dens), target)
    except ValueError as e:
        raise ConfigError(path, str(e)) from None


def _build_delay(sec, A):
    _keys(sec, "delay", ("horizon", "M", "N"))
    r = _num(sec.get("horizon", 1.0), "delay.horizon", positive=True)
    n = A.n_modes
    D = derivative_galerkin_matrix(n)
    M = _build_kernel(sec.get("M") or {}, "delay.M", r, n, D, "M")
    N = _build_kernel(sec.get("N") or {}, "delay.N", r, n, D, "N")
    if M is None and N is None:
        return DelayKernel.zero(2 * n, r)
    return assemble_delay(A, M=M, N=N)


def _build_jump(sec, path):
    _keys(sec, path, ("rate", "law", "norm", "scale", "tail_index", "small_jump_truncation"), ("rate", "law"))
    law = _choice(sec["law"], f"{path}.law", ("fixed_norm", "gaussian", "pareto"))
    try:
        if law == "fixed_norm":
            j = FixedNormJumps(_num(sec.get("norm", 1.0), f"{path}.norm", positive=True))
        elif law == "gaussian":
            j = GaussianJumps(_num(sec.get("scale", 1.0), f"{path}.scale", positive=True))
        else:
            j = ParetoJumps(_num(sec.get("tail_index"), f"{path}.tail_index", positive=True),
                            _num(sec.get("scale", 1.0), f"{path}.scale", positive=True))
        return JumpSpec(_num(sec["rate"], f"{path}.rate", positive=True), j,
                        _num(sec.get("small_jump_truncation", 0.0), f"{path}.small_jump_truncation", nonneg=True))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(path, str(e)) from None


def _build_noise(sec, n):
    _keys(sec, "noise", ("wiener_variances", "profile", "dim", "q0", "jump", "compensation"))
    if "wiener_variances" in sec and "profile" in sec:
        raise ConfigError("noise", "give either wiener_variances or profile, not both")
    dim = _num(sec.get("dim", n), "noise.dim", positive=True, integer=True)
    if "wiener_variances" in sec:
        q = np.array(_numlist(sec["wiener_variances"], "noise.wiener_variances", nonneg=True))
    else:
        prof = _choice(sec.get("profile", "inverse_square"), "noise.profile", ("inverse_square", "none"))
        q0 = _num(sec.get("q0", 1.0), "noise.q0", nonneg=True)
        q = NoiseSpec.default_profile(dim, q0).wiener_variances if prof == "inverse_square" else np.zeros(dim)
    jump = _build_jump(sec["jump"], "noise.jump") if sec.get("jump") else None
    comp = _choice(sec.get("compensation", "none"), "noise.compensation", ("none", "small", "full"))
    return NoiseSpec(q, jump, comp)


def _build_diffusion(sec, A, noise, r):
    _keys(sec, "diffusion", ("kind", "scale", "beta", "delay"), ("kind",))
    kind = _choice(sec["kind"], "diffusion.kind", ("zero", "additive", "delay_wave"))
    n = A.n_modes
    if kind == "zero":
        return DiffusionSpec.zero(2 * n, noise.noise_dim)
    if kind == "additive":
        return DiffusionSpec.additive(_num(sec.get("scale", 1.0), "diffusion.scale")
                                      * velocity_noise_matrix(n, noise.noise_dim))
    if noise.noise_dim != 1:
        raise ConfigError("diffusion.kind", "delay_wave diffusion needs a scalar noise (noise.dim = 1)")
    delay = _num(sec.get("delay", r), "diffusion.delay", positive=True)
    if delay > r + 1e-12:
        raise ConfigError("diffusion.delay", f"exceeds the delay horizon {r}")
    return DiffusionSpec.delay_wave(A, _num(sec.get("beta", 0.0), "diffusion.beta"), delay)


def _build_scenario(sec, n_override):
    _keys(sec, "scenario", ("name", "alpha", "c1", "c2", "beta", "n_modes", "delay"), ("name",))
    _choice(sec["name"], "scenario.name", ("damped_delay_wave",))
    alpha = _num(sec.get("alpha", 1.0), "scenario.alpha", positive=True)
    n = _num(sec.get("n_modes", 16), "scenario.n_modes", positive=True, integer=True)
    if n_override is not None:
        n = n_override
    return damped_delay_wave(alpha, _num(sec.get("c1", 0.04), "scenario.c1"),
                             _num(sec.get("c2", 0.0), "scenario.c2"), _num(sec.get("beta", 0.1), "scenario.beta"),
                             n, _num(sec.get("delay", 1.0), "scenario.delay", positive=True))


# -- run-control sections ------------------------------------------------------------


def _check_simulation(s):
    p = "simulation"
    s["T"] = _num(s["T"], f"{p}.T", positive=True)
    s["h"] = _num(s["h"], f"{p}.h", positive=True)
    s["paths"] = _num(s["paths"], f"{p}.paths", positive=True, integer=True)
    s["master_seed"] = _num(s["master_seed"], f"{p}.master_seed", nonneg=True, integer=True)
    _choice(s["scheme"], f"{p}.scheme", ("exponential", "euler"))
    s["record_stride"] = _num(s["record_stride"], f"{p}.record_stride", positive=True, integer=True)
    if not isinstance(s["richardson"], bool):
        raise ConfigError(f"{p}.richardson", "expected true or false")
    for key in ("init", "alt_init"):
        it = s[key]
        it["amplitude"] = _num(it["amplitude"], f"{p}.{key}.amplitude")
        it["mode"] = _num(it["mode"], f"{p}.{key}.mode", positive=True, integer=True)
        it["velocity"] = _num(it["velocity"], f"{p}.{key}.velocity")
    n_steps = s["T"] / s["h"]
    if abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, n_steps):
        raise ConfigError(f"{p}.T", "T must be a multiple of h")


def _check_analysis(s):
    p = "analysis"
    s["b_cutoff"] = _num(s["b_cutoff"], f"{p}.b_cutoff", positive=True, allow_none=True)
    if s["a_grid"] is not None:
        ag = s["a_grid"]
        if isinstance(ag, dict):
            _keys(ag, f"{p}.a_grid", ("start", "stop", "num"), ("start", "stop", "num"))
            s["a_grid"] = list(np.linspace(_num(ag["start"], f"{p}.a_grid.start"),
                                           _num(ag["stop"], f"{p}.a_grid.stop"),
                                           _num(ag["num"], f"{p}.a_grid.num", positive=True, integer=True)))
        else:
            s["a_grid"] = _numlist(ag, f"{p}.a_grid")
        if any(a > 0 for a in s["a_grid"]):
            raise ConfigError(f"{p}.a_grid", "abscissae must be <= 0")
    cs = _numlist(s["c"], f"{p}.c")
    if any(not 0 < c < 1 for c in cs):
        raise ConfigError(f"{p}.c", "each c must lie in (0, 1)")
    s["c"] = cs
    s["dictionary_size"] = _num(s["dictionary_size"], f"{p}.dictionary_size", positive=True, integer=True)
    s["checkpoints"] = sorted(_numlist(s["checkpoints"], f"{p}.checkpoints", positive=True))
    s["s_offset"] = _num(s["s_offset"], f"{p}.s_offset", positive=True)
    s["envelope_T"] = _num(s["envelope_T"], f"{p}.envelope_T", positive=True)
    s["envelope_points"] = _num(s["envelope_points"], f"{p}.envelope_points", positive=True, integer=True)


def _check_output(s):
    if not isinstance(s["directory"], str) or not s["directory"]:
        raise ConfigError("output.directory", "expected a non-empty path string")
    fm = s["formats"]
    if not isinstance(fm, list) or not fm:
        raise ConfigError("output.formats", "expected a non-empty list")
    for i, f in enumerate(fm):
        _choice(f, f"output.formats[{i}]", ("csv", "text"))


def _check_verify(s):
    _choice(s["scale"], "verify.scale", ("quick", "full"))
    _choice(s["fault"], "verify.fault", ("none", "lyapunov"))
    if s["only"] is not None and not (isinstance(s["only"], list) and all(isinstance(x, str) for x in s["only"])):
        raise ConfigError("verify.only", "expected a list of check names")


# -- public API ----------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Validated configuration plus the assembled model.

    ``raw`` is the parsed file, ``settings`` the run-control sections with
    defaults filled in, ``sha256`` the hash of the source bytes.
    """

    raw: dict
    settings: dict
    scenario: Scenario | None
    sha256: str
    source: str

    @property
    def simulation(self):
        return self.settings["simulation"]

    @property
    def analysis(self):
        return self.settings["analysis"]

    @property
    def output(self):
        return self.settings["output"]

    @property
    def verify(self):
        return self.settings["verify"]

    @property
    def seed(self):
        return self.simulation["master_seed"]

    @property
    def n_modes(self):
        return None if self.scenario is None else self.scenario.A.n_modes

    def inits(self):
        """``(init, alt_init)`` standing-wave initial data from the simulation section."""
        if self.scenario is None:
            raise ConfigError("operator", "no model configured")
        A = self.scenario.A
        out = []
        for key in ("init", "alt_init"):
            it = self.simulation[key]
            if it["mode"] > A.n_modes:
                raise ConfigError(f"simulation.{key}.mode", f"exceeds the number of modes {A.n_modes}")
            out.append(standing_wave_init(A, it["amplitude"], it["mode"], it["velocity"]))
        return tuple(out)


def parse_config(data, *, source="<memory>", digest=None, seed=None, paths=None, modes=None):
    """Validate a parsed mapping; CLI overrides ``seed``/``paths``/``modes`` win over the file."""
    if data is None or (isinstance(data, dict) and not data):
        raise ConfigError("<root>", "configuration is empty")
    _keys(data, "", _SECTIONS)
    if modes is not None and modes < 1:
        raise ConfigError("--modes", "must be positive")
    settings = {}
    for name, defaults in _DEFAULTS.items():
        given = data.get(name) or {}
        settings[name] = _merge(defaults, _mapping(given, name), name)
    if seed is not None:
        settings["simulation"]["master_seed"] = seed
    if paths is not None:
        settings["simulation"]["paths"] = paths
    _check_simulation(settings["simulation"])
    _check_analysis(settings["analysis"])
    _check_output(settings["output"])
    _check_verify(settings["verify"])

    scenario = None
    explicit = [s for s in _MODEL_SECTIONS if s in data]
    if "scenario" in data:
        if explicit:
            raise ConfigError(explicit[0], "cannot be combined with a scenario section")
        scenario = _build_scenario(_mapping(data["scenario"], "scenario"), modes)
    elif explicit:
        if "operator" not in data:
            raise ConfigError("operator", "required when no scenario is given")
        A, B = _build_operator(_mapping(data["operator"], "operator"), modes)
        if "diffusion" not in data:
            raise ConfigError("diffusion", "required when no scenario is given")
        op = build_reduction(A, B)
        F = _build_delay(_mapping(data.get("delay") or {}, "delay"), A)
        noise = _build_noise(_mapping(data.get("noise") or {"wiener_variances": [1.0]}, "noise"), A.n_modes)
        diff = _build_diffusion(_mapping(data["diffusion"], "diffusion"), A, noise, F.horizon)
        scenario = Scenario(A, B, op, F, diff, noise, dict(source="config"))
    if scenario is not None:
        r, h = scenario.F.horizon, settings["simulation"]["h"]
        m = r / h
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise ConfigError("simulation.h", f"h must divide the delay horizon {r}")
    if digest is None:
        digest = hashlib.sha256(yaml.safe_dump(data, sort_keys=True).encode()).hexdigest()
    return ExperimentConfig(data, settings, scenario, digest, source)


def load_config(path, **overrides):
    """Read a YAML (or JSON, a YAML subset) file and validate it."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as e:
        raise ConfigError("--config", f"cannot read {path}: {e.strerror}") from None
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError("--config", f"not valid YAML: {e}") from None
    return parse_config(data, source=str(p), digest=hashlib.sha256(raw).hexdigest(), **overrides)


def builtin_config(name):
    """Path of a config shipped with the package."""
    if name not in BUILTIN_CONFIGS:
        raise ConfigError("--config", f"unknown built-in config {name!r}; choose from {list(BUILTIN_CONFIGS)}")
    return resources.files("delaywave") / "configs" / f"{name}.yaml"
