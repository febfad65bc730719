"""JSON experiment configurations.

A config is a JSON object.  Top-level keys::

    name        free text, used for output file names (default "run")
    command     trajectory | lyapunov | ensemble | poincare | measures | sweep | benchmark
    seed        integer; required by ensemble and sweep
    state       explicit terms or a generator reference (see below)
    x0          list of coordinates, or {"spherical": [[r, theta, phi], ...]}
    t_span      [t0, t1] for trajectory (default [0, 100])
    sample_every  sampling interval for trajectory (default 1)
    integrator  {rel_tol, abs_tol, max_step, min_abs2, max_evals}
    lyapunov    {d0, dt, n_steps, e0}
    sampler     {edge, center, count}
    section     {coordinate, value, t_max}
    sweep       {generator, parameter, grid, fixed}
    benchmark   {system, energy, y, py, section_t_max}
    outputs     {dir, regularity}

Explicit states::

    {"family": "SPH3D",              # default for every term
     "masses": [1.0],
     "terms": [{"coefficient": {"abs": 1, "phase": "pi/3"},
                "quantum_numbers": [{"n": 3, "l": 3, "m": 1}]}]}

``quantum_numbers`` has one entry per particle.  An entry is a list in the
family's native order or, for SPH3D, a mapping with either ``k`` (radial
index) or ``n`` (shell index, ``n - l`` even) plus ``l`` and ``m``.
A term may override ``family``.  Coefficients are ``{"abs", "phase"}`` or
``{"re", "im"}``; numbers given as strings may use ``pi``, e.g. "2*pi/5".

Generator states are ``{"generator": "eq31", "params": {"alpha": "pi/4"}}``.
Every value is kept exactly as written so that serialising a parsed config
reproduces it.
"""

from __future__ import annotations

import ast
import copy
import json
import math
import operator
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import states as catalog
from .basis import BasisFamily, BasisState
from .chaos import CubeSampler, LyapunovParams, default_sampler
from .dynamics import IntegratorParams
from .wavefunction import ProductTerm, WaveFunction, build

COMMANDS = ("trajectory", "lyapunov", "ensemble", "poincare", "measures", "sweep", "benchmark")
STOCHASTIC = ("ensemble", "sweep")

GENERATOR_PARAMS = {
    "eq31": ("alpha", "beta"),
    "eq32": ("alpha", "beta"),
    "eq100": ("a",),
    "eq101": ("a",),
    "eq101-prime": ("a",),
}
QUBIT_BASES = {
    "eq100": catalog.W_BASIS,
    "eq101": catalog.W_BASIS,
    "eq101-prime": catalog.W_PRIME_BASIS,
}
PARAM_ALIASES = {"α": "alpha", "β": "beta"}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# --- numbers ------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "π": math.pi}


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt" \
            and len(node.args) == 1:
        return math.sqrt(_eval_node(node.args[0]))
    raise ValueError("unsupported expression")


def number(value, path: str) -> float:
    """A JSON number, or a string expression in numbers, pi, + - * / ** and sqrt."""
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        v = float(value)
    elif isinstance(value, str):
        try:
            v = _eval_node(ast.parse(value.replace("π", "pi"), mode="eval").body)
        except (SyntaxError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(path, f"cannot read {value!r} as a number ({exc})") from None
    else:
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(v):
        raise ConfigError(path, f"{value!r} is not finite")
    return v


def integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _obj(value, path: str, allowed: tuple[str, ...]) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected an object, got {type(value).__name__}")
    extra = sorted(set(value) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}", f"unknown key (allowed: {', '.join(allowed)})")
    return value


def _list(value, path: str) -> list:
    if not isinstance(value, list):
        raise ConfigError(path, f"expected a list, got {type(value).__name__}")
    return value


# --- state --------------------------------------------------------------------

def coefficient(spec, path: str) -> complex:
    spec = _obj(spec, path, ("abs", "phase", "re", "im"))
    polar = {"abs", "phase"} & set(spec)
    rect = {"re", "im"} & set(spec)
    if polar and rect:
        raise ConfigError(path, "use either {abs, phase} or {re, im}, not both")
    if polar:
        a = number(spec.get("abs", 1.0), f"{path}.abs")
        if a < 0:
            raise ConfigError(f"{path}.abs", f"must be >= 0, got {a}")
        p = number(spec.get("phase", 0.0), f"{path}.phase")
        return complex(a * math.cos(p), a * math.sin(p))
    if rect:
        return complex(number(spec.get("re", 0.0), f"{path}.re"),
                       number(spec.get("im", 0.0), f"{path}.im"))
    raise ConfigError(path, "coefficient needs {abs, phase} or {re, im}")


def basis_state(family: BasisFamily, qn, path: str) -> BasisState:
    if isinstance(qn, dict):
        if family is not BasisFamily.SPH3D:
            raise ConfigError(path, f"named quantum numbers are only accepted for SPH3D, not {family.name}")
        qn = _obj(qn, path, ("n", "k", "l", "m"))
        if ("n" in qn) == ("k" in qn) or "l" not in qn or "m" not in qn:
            raise ConfigError(path, "give l, m and exactly one of n (shell) or k (radial)")
        l, m = integer(qn["l"], f"{path}.l"), integer(qn["m"], f"{path}.m")
        if "n" in qn:
            n = integer(qn["n"], f"{path}.n")
            if n < l or (n - l) % 2:
                raise ConfigError(path, f"l parity mismatch: n - l must be even and >= 0 (n={n}, l={l})")
            k = (n - l) // 2
        else:
            k = integer(qn["k"], f"{path}.k")
        numbers = (k, l, m)
    else:
        numbers = tuple(integer(v, f"{path}[{i}]") for i, v in enumerate(_list(qn, path)))
    try:
        return BasisState(family, numbers)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _family(name, path: str) -> BasisFamily:
    if not isinstance(name, str):
        raise ConfigError(path, f"expected a family name, got {name!r}")
    try:
        return BasisFamily.parse(name)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass(frozen=True)
class StateSpec:
    """Either explicit ``terms`` or a ``generator`` with parameter values."""

    raw: dict

    @classmethod
    def parse(cls, spec, path: str = "state") -> "StateSpec":
        spec = _obj(spec, path, ("family", "masses", "terms", "generator", "params"))
        out = cls(copy.deepcopy(spec))
        out.build(path)
        return out

    @property
    def generator(self) -> str | None:
        return self.raw.get("generator")

    def generator_values(self, path: str = "state") -> dict[str, float]:
        names = GENERATOR_PARAMS[self.generator]
        params = _obj(self.raw.get("params", {}), f"{path}.params", names + tuple(PARAM_ALIASES))
        vals = {}
        for k, v in params.items():
            vals[PARAM_ALIASES.get(k, k)] = number(v, f"{path}.params.{k}")
        return vals

    def build(self, path: str = "state", **override) -> WaveFunction:
        if "generator" in self.raw:
            gen = self.raw["generator"]
            if gen not in catalog.GENERATORS:
                raise ConfigError(f"{path}.generator",
                                  f"unknown generator {gen!r} (known: {', '.join(catalog.GENERATORS)})")
            if "terms" in self.raw:
                raise ConfigError(path, "give either terms or generator, not both")
            vals = self.generator_values(path)
            vals.update(override)
            if "a" in GENERATOR_PARAMS[gen] and "a" not in vals:
                raise ConfigError(f"{path}.params.a", "missing")
            if "alpha" in GENERATOR_PARAMS[gen] and "alpha" not in vals:
                raise ConfigError(f"{path}.params.alpha", "missing")
            try:
                return catalog.GENERATORS[gen](**vals)
            except ValueError as exc:
                raise ConfigError(f"{path}.params", str(exc)) from None
        if "terms" not in self.raw:
            raise ConfigError(path, "needs terms or generator")
        default = self.raw.get("family")
        terms = []
        for i, t in enumerate(_list(self.raw["terms"], f"{path}.terms")):
            tp = f"{path}.terms[{i}]"
            t = _obj(t, tp, ("family", "quantum_numbers", "coefficient"))
            fam_name = t.get("family", default)
            if fam_name is None:
                raise ConfigError(f"{tp}.family", "missing (and no state-level default)")
            fam = _family(fam_name, f"{tp}.family")
            if "quantum_numbers" not in t:
                raise ConfigError(f"{tp}.quantum_numbers", "missing")
            qns = _list(t["quantum_numbers"], f"{tp}.quantum_numbers")
            factors = tuple(basis_state(fam, q, f"{tp}.quantum_numbers[{k}]") for k, q in enumerate(qns))
            c = coefficient(t.get("coefficient", {"abs": 1}), f"{tp}.coefficient")
            terms.append(ProductTerm(c, factors))
        masses = self.raw.get("masses", [])
        masses = tuple(number(m, f"{path}.masses[{k}]") for k, m in enumerate(_list(masses, f"{path}.masses")))
        if any(m <= 0 for m in masses):
            raise ConfigError(f"{path}.masses", "masses must be positive")
        try:
            return build(terms, masses=masses)
        except ValueError as exc:
            raise ConfigError(f"{path}.terms", str(exc)) from None

    def qubit_tensor(self, **override) -> np.ndarray | None:
        """The 2x2x2 coefficient tensor when the generator defines one."""
        gen = self.generator
        if gen not in QUBIT_BASES:
            return None
        a = {**self.generator_values(), **override}["a"]
        if gen == "eq100":
            return catalog.w_tensor(a, 0.5 - a, 0.5)
        return catalog.w_tensor(a, 0.25, 0.25)

    def coefficients(self, **override) -> np.ndarray:
        """Normalised coefficient vector (for the participation ratio)."""
        t = self.qubit_tensor(**override)
        if t is not None:
            return t.ravel()
        if self.generator in ("eq31", "eq32"):
            v = {"beta": 0.0, **self.generator_values(), **override}
            return catalog.four_mode_coefficients(v["alpha"], v["beta"])
        c = self.build().coefficients
        return c / np.linalg.norm(c)


def state_spec_from_catalog(name: str) -> dict:
    """Explicit-term JSON for one of the catalogued regression states."""
    wf = catalog.REGRESSIONS[name].make()
    fam = wf.terms[0].factors[0].family
    terms = []
    for t in wf.terms:
        c = t.coefficient
        terms.append({"coefficient": {"abs": abs(c), "phase": math.atan2(c.imag, c.real)},
                      "quantum_numbers": [list(f.quantum_numbers) for f in t.factors]})
    return {"family": fam.name, "terms": terms}


# --- sections -------------------------------------------------------------------

def initial_configuration(spec, n_coords: int, path: str = "x0") -> np.ndarray:
    if isinstance(spec, dict):
        spec = _obj(spec, path, ("spherical",))
        pts = _list(spec["spherical"], f"{path}.spherical")
        out = []
        for k, p in enumerate(pts):
            p = _list(p, f"{path}.spherical[{k}]")
            if len(p) != 3:
                raise ConfigError(f"{path}.spherical[{k}]", "expected [r, theta, phi]")
            out.extend(catalog.spherical_to_cartesian(*(number(v, f"{path}.spherical[{k}]") for v in p)))
        x = np.array(out)
    else:
        x = np.array([number(v, f"{path}[{i}]") for i, v in enumerate(_list(spec, path))])
    if x.size != n_coords:
        raise ConfigError(path, f"expected {n_coords} coordinates, got {x.size}")
    return x


def grid_values(spec, path: str) -> list[float]:
    if isinstance(spec, dict):
        spec = _obj(spec, path, ("start", "stop", "num"))
        num = integer(spec.get("num"), f"{path}.num")
        if num < 1:
            raise ConfigError(f"{path}.num", "must be >= 1")
        vals = np.linspace(number(spec["start"], f"{path}.start"), number(spec["stop"], f"{path}.stop"),
                           num).tolist()
    else:
        vals = [number(v, f"{path}[{i}]") for i, v in enumerate(_list(spec, path))]
    if not vals:
        raise ConfigError(path, "grid is empty")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(path, "grid must be strictly increasing")
    return vals


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed and validated config; ``raw`` is the lossless JSON form."""

    raw: dict = field(repr=False)
    name: str
    command: str
    seed: int | None
    state: StateSpec | None

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        d = _obj(d, "config", ("name", "description", "command", "seed", "state", "x0", "t_span",
                                "sample_every", "diagnostics", "integrator", "lyapunov", "sampler",
                                "section", "sweep", "benchmark", "outputs"))
        d = copy.deepcopy(d)
        if "command" not in d:
            raise ConfigError("command", "missing")
        cmd = d["command"]
        if cmd not in COMMANDS:
            raise ConfigError("command", f"unknown command {cmd!r} (known: {', '.join(COMMANDS)})")
        name = d.get("name", "run")
        if not isinstance(name, str) or not name or "/" in name:
            raise ConfigError("name", f"must be a non-empty file-name-safe string, got {name!r}")
        seed = d.get("seed")
        if seed is not None:
            seed = integer(seed, "seed")
            if seed < 0:
                raise ConfigError("seed", "must be >= 0")
        elif cmd in STOCHASTIC:
            raise ConfigError("seed", f"required for the {cmd} command")
        state = None
        if cmd != "benchmark":
            if "state" not in d and not (cmd in ("sweep", "measures") and "sweep" in d):
                raise ConfigError("state", "missing")
            if "state" in d:
                state = StateSpec.parse(d["state"])
        cfg = cls(d, name, cmd, seed, state)
        cfg._validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, ensure_ascii=False) + "\n"

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.raw == other.raw

    def with_seed(self, seed: int) -> "ExperimentConfig":
        d = self.to_dict()
        d["seed"] = seed
        return ExperimentConfig.from_dict(d)

    # typed views ------------------------------------------------------------

    def wavefunction(self, **override) -> WaveFunction:
        return self._sweep_state().build(**override)

    def _sweep_state(self) -> StateSpec:
        if self.state is not None:
            return self.state
        sw = self.raw["sweep"]
        return StateSpec({"generator": sw["generator"], "params": sw.get("fixed", {})})

    @property
    def integrator(self) -> IntegratorParams:
        spec = _obj(self.raw.get("integrator", {}), "integrator",
                    ("rel_tol", "abs_tol", "max_step", "min_abs2", "max_evals"))
        vals = {k: number(v, f"integrator.{k}") for k, v in spec.items() if k != "max_evals"}
        if "max_evals" in spec:
            vals["max_evals"] = integer(spec["max_evals"], "integrator.max_evals")
        try:
            return IntegratorParams(**vals)
        except ValueError as exc:
            raise ConfigError("integrator", str(exc)) from None

    @property
    def lyapunov(self) -> LyapunovParams:
        spec = _obj(self.raw.get("lyapunov", {}), "lyapunov", ("d0", "dt", "n_steps", "e0"))
        vals: dict[str, Any] = {}
        for k in ("d0", "dt"):
            if k in spec:
                vals[k] = number(spec[k], f"lyapunov.{k}")
        if "n_steps" in spec:
            vals["n_steps"] = integer(spec["n_steps"], "lyapunov.n_steps")
        if "e0" in spec:
            vals["e0"] = tuple(number(v, f"lyapunov.e0[{i}]") for i, v in
                               enumerate(_list(spec["e0"], "lyapunov.e0")))
        vals["seed"] = self.seed or 0
        try:
            return LyapunovParams(**vals)
        except ValueError as exc:
            raise ConfigError("lyapunov", str(exc)) from None

    def sampler(self, wf: WaveFunction) -> tuple[CubeSampler, int]:
        spec = _obj(self.raw.get("sampler", {}), "sampler", ("edge", "center", "count"))
        base = default_sampler(wf)
        edge = number(spec.get("edge", base.edge), "sampler.edge")
        center = number(spec.get("center", base.center), "sampler.center")
        count = integer(spec.get("count", 150), "sampler.count")
        if edge <= 0:
            raise ConfigError("sampler.edge", "must be positive")
        if count < 1:
            raise ConfigError("sampler.count", "must be >= 1")
        return CubeSampler(edge, center), count

    def x0(self, wf: WaveFunction) -> np.ndarray:
        if "x0" not in self.raw:
            raise ConfigError("x0", f"required for the {self.command} command")
        return initial_configuration(self.raw["x0"], wf.n_coords)

    @property
    def t_span(self) -> tuple[float, float]:
        span = _list(self.raw.get("t_span", [0, 100]), "t_span")
        if len(span) != 2:
            raise ConfigError("t_span", "expected [t0, t1]")
        t0, t1 = (number(v, f"t_span[{i}]") for i, v in enumerate(span))
        if t0 == t1:
            raise ConfigError("t_span", "t0 and t1 must differ")
        return t0, t1

    @property
    def sample_every(self) -> float:
        v = number(self.raw.get("sample_every", 1.0), "sample_every")
        if v <= 0:
            raise ConfigError("sample_every", "must be positive")
        return v

    @property
    def section(self) -> tuple[int, float, float]:
        spec = _obj(self.raw.get("section", {}), "section", ("coordinate", "value", "t_max"))
        idx = integer(spec.get("coordinate", 0), "section.coordinate")
        t_max = number(spec.get("t_max", 1000.0), "section.t_max")
        if t_max <= 0:
            raise ConfigError("section.t_max", "must be positive")
        return idx, number(spec.get("value", 0.0), "section.value"), t_max

    @property
    def sweep(self) -> tuple[str, str, list[float]]:
        if "sweep" not in self.raw:
            raise ConfigError("sweep", f"required for the {self.command} command")
        spec = _obj(self.raw["sweep"], "sweep", ("generator", "parameter", "grid", "fixed"))
        gen = spec.get("generator", self.state.generator if self.state else None)
        if gen not in GENERATOR_PARAMS:
            raise ConfigError("sweep.generator",
                              f"unknown generator {gen!r} (known: {', '.join(GENERATOR_PARAMS)})")
        if self.state is not None and self.state.generator not in (None, gen):
            raise ConfigError("sweep.generator", "differs from state.generator")
        if self.state is not None and self.state.generator is None:
            raise ConfigError("state", "a sweep needs a generator state (or omit state)")
        param = PARAM_ALIASES.get(spec.get("parameter"), spec.get("parameter"))
        if param not in GENERATOR_PARAMS[gen]:
            raise ConfigError("sweep.parameter",
                              f"{gen} takes {', '.join(GENERATOR_PARAMS[gen])}, got {spec.get('parameter')!r}")
        if "grid" not in spec:
            raise ConfigError("sweep.grid", "missing")
        return gen, param, grid_values(spec["grid"], "sweep.grid")

    def sweep_state(self) -> StateSpec:
        gen, _, _ = self.sweep
        if self.state is not None:
            return self.state
        fixed = self.raw["sweep"].get("fixed", {})
        return StateSpec({"generator": gen, "params": fixed})

    @property
    def benchmark(self) -> dict:
        spec = _obj(self.raw.get("benchmark", {}), "benchmark",
                    ("system", "energy", "y", "py", "section_t_max"))
        system = spec.get("system", "henon-heiles")
        if system != "henon-heiles":
            raise ConfigError("benchmark.system", f"unknown system {system!r}")
        if "energy" not in spec:
            raise ConfigError("benchmark.energy", "missing")
        out = {"energy": number(spec["energy"], "benchmark.energy"),
               "y": number(spec.get("y", 0.0), "benchmark.y"),
               "py": number(spec.get("py", 0.0), "benchmark.py"),
               "section_t_max": number(spec.get("section_t_max", 0.0), "benchmark.section_t_max")}
        if not 0 < out["energy"] < 1 / 6:
            raise ConfigError("benchmark.energy", "must lie in (0, 1/6) for bounded motion")
        return out

    @property
    def outputs(self) -> dict:
        spec = _obj(self.raw.get("outputs", {}), "outputs", ("dir", "regularity"))
        return {"dir": spec.get("dir", f"runs/{self.name}"),
                "regularity": bool(spec.get("regularity", True))}

    def _validate(self) -> None:
        """Touch every view the command needs so that errors surface at parse time."""
        self.integrator
        self.outputs
        cmd = self.command
        if cmd in ("lyapunov", "ensemble", "sweep", "benchmark"):
            self.lyapunov
        if cmd == "benchmark":
            self.benchmark
            return
        if cmd == "sweep":
            gen, param, grid = self.sweep
            st = self.sweep_state()
            for v in (grid[0], grid[-1]):
                wf = st.build("sweep", **{param: v})
            self.sampler(wf)
            return
        if cmd == "measures" and "sweep" in self.raw:
            self.sweep
            return
        wf = self.wavefunction()
        if cmd in ("trajectory", "lyapunov", "poincare"):
            x = self.x0(wf)
            if not wf.in_domain(x):
                raise ConfigError("x0", "outside the unit box")
        if cmd == "trajectory":
            self.t_span, self.sample_every
        if cmd == "poincare":
            idx, _, _ = self.section
            if not 0 <= idx < wf.n_coords:
                raise ConfigError("section.coordinate", f"must lie in 0..{wf.n_coords - 1}")
        if cmd == "ensemble":
            self.sampler(wf)
        if cmd == "lyapunov" and self.lyapunov.e0 is not None and len(self.lyapunov.e0) != wf.n_coords:
            raise ConfigError("lyapunov.e0", f"expected {wf.n_coords} entries")


def bundled_configs() -> list[str]:
    root = resources.files("bohmchaos") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str):
    """Path of a bundled config by stem (``ho3d_stat``) or file name."""
    stem = name[:-5] if name.endswith(".json") else name
    p = resources.files("bohmchaos") / "configs" / f"{stem}.json"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled config named {name!r}")
    return p


def load(ref) -> ExperimentConfig:
    """Load a config from a path, falling back to the bundled set by name."""
    p = Path(ref)
    if p.is_file():
        return ExperimentConfig.load(p)
    return ExperimentConfig.from_json(bundled_path(str(ref)).read_text())
