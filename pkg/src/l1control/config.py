"""Experiment configuration: line-oriented ``key = value`` with ``[section]`` headers.

Sections are ``[problem]``, ``[solver]`` and ``[study]``; ``seed`` may appear
before the first header or in any section. ``#`` and ``;`` start comments.
All problems found are collected and raised together, each tagged with its
line number.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .dual import SolverConfig
from .expr import Expression, ExpressionError
from .problem import ProblemSpec

DEFAULT_YD = "sin(pi*x1)*sin(pi*x2)"
DEFAULT_F = "sin(2*pi*x1)*sin(2*pi*x2)"


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ProblemBlock:
    m: int = 16
    alpha: float = 1e-2
    beta: float = 5e-3
    a: float = -1.0
    b: float = 1.0
    y_d: str = DEFAULT_YD
    y_r: str = "0"
    diffusion: str = "1"
    reaction: str = "0"


@dataclass
class StudyBlock:
    meshes: tuple = (8, 16, 32)
    reference_depth: int = 2
    reference_stop_tol: float = 1e-8
    f: str = DEFAULT_F
    out: str = "out"
    beta_factors: tuple = (1.05, 0.5, 0.1)
    max_ratio: float = 2.0
    backend: str = "direct"


@dataclass
class ExperimentConfig:
    problem: ProblemBlock = field(default_factory=ProblemBlock)
    solver: SolverConfig = field(default_factory=SolverConfig)
    study: StudyBlock = field(default_factory=StudyBlock)
    seed: int = 0
    expressions: dict = field(default_factory=dict)

    def expression(self, name: str) -> Expression:
        if name not in self.expressions:
            text = getattr(self.problem, name, None) if name != "f" else self.study.f
            self.expressions[name] = Expression(text)
        return self.expressions[name]

    def field_value(self, name: str):
        ex = self.expression(name)
        return ex.tree.value if ex.is_constant() and hasattr(ex.tree, "value") else ex

    def problem_spec(self, beta: float | None = None) -> ProblemSpec:
        p = self.problem
        return ProblemSpec(alpha=p.alpha, beta=p.beta if beta is None else beta, a=p.a, b=p.b,
                           y_d=self.field_value("y_d"), y_r=self.field_value("y_r"),
                           diffusion=self.field_value("diffusion"), reaction=self.field_value("reaction"))

    def to_text(self) -> str:
        lines = [f"seed = {self.seed}", "", "[problem]"]
        lines += [f"{f.name} = {getattr(self.problem, f.name)}" for f in dataclasses.fields(ProblemBlock)]
        lines += ["", "[solver]"]
        for f in dataclasses.fields(SolverConfig):
            v = getattr(self.solver, f.name)
            if v is not None:
                lines.append(f"{f.name} = {v}")
        lines += ["", "[study]"]
        for f in dataclasses.fields(StudyBlock):
            v = getattr(self.study, f.name)
            if isinstance(v, tuple):
                v = ", ".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_EXPR_KEYS = {"y_d", "y_r", "diffusion", "reaction"}


def _bool(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(text: str, typ, key: str):
    if key in ("meshes",):
        items = [s for s in text.replace(",", " ").split()]
        if not items:
            raise ValueError("empty mesh list")
        return tuple(int(s) for s in items)
    if key == "beta_factors":
        return tuple(float(s) for s in text.replace(",", " ").split())
    if typ in (int, "int"):
        v = float(text)
        if v != int(v):
            raise ValueError(f"not an integer: {text!r}")
        return int(v)
    if typ in (float, "float"):
        return float(text)
    if typ in (bool, "bool"):
        return _bool(text)
    if typ in ("int | None",):
        return None if text.lower() in ("none", "") else int(text)
    return text


def _field_types(cls):
    return {f.name: f.type for f in dataclasses.fields(cls)}


_SECTIONS = {"problem": ProblemBlock, "solver": SolverConfig, "study": StudyBlock}


def parse_config(text: str) -> ExperimentConfig:
    errors = []
    values = {name: {} for name in _SECTIONS}
    where = {}
    seed = 0
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append(f"line {lineno}: malformed section header {raw.strip()!r}")
                continue
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                errors.append(f"line {lineno}: unknown section [{name}]")
                section = "?"
            else:
                section = name
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "seed":
            try:
                seed = int(value)
            except ValueError:
                errors.append(f"line {lineno}: seed must be an integer, got {value!r}")
            continue
        if section is None:
            errors.append(f"line {lineno}: key {key!r} outside any section")
            continue
        if section == "?":
            continue
        types = _field_types(_SECTIONS[section])
        if key not in types:
            errors.append(f"line {lineno}: unknown key {key!r} in [{section}]")
            continue
        if key in values[section]:
            errors.append(f"line {lineno}: duplicate key {key!r} in [{section}]")
            continue
        try:
            values[section][key] = _convert(value, types[key], key)
        except ValueError as exc:
            errors.append(f"line {lineno}: {section}.{key}: {exc}")
            continue
        where[(section, key)] = lineno
    if errors:
        raise ConfigError(errors)

    def at(sec, key):
        n = where.get((sec, key))
        return f"line {n}: " if n else ""

    problem = ProblemBlock(**values["problem"])
    study = StudyBlock(**values["study"])
    if not problem.alpha > 0:
        errors.append(f"{at('problem', 'alpha')}problem.alpha must be > 0, got {problem.alpha}")
    if not problem.beta > 0:
        errors.append(f"{at('problem', 'beta')}problem.beta must be > 0, got {problem.beta}")
    if not problem.a <= 0:
        errors.append(f"{at('problem', 'a')}problem.a must be <= 0, got {problem.a}")
    if not problem.b >= 0:
        errors.append(f"{at('problem', 'b')}problem.b must be >= 0, got {problem.b}")
    if problem.m < 1:
        errors.append(f"{at('problem', 'm')}problem.m must be >= 1, got {problem.m}")
    ms = study.meshes
    if min(ms) < 1 or any(b <= a for a, b in zip(ms, ms[1:])):
        errors.append(f"{at('study', 'meshes')}study.meshes must be positive and strictly increasing, got {list(ms)}")
    if study.reference_depth < 0:
        errors.append(f"{at('study', 'reference_depth')}study.reference_depth must be >= 0")
    if not study.reference_stop_tol > 0:
        errors.append(f"{at('study', 'reference_stop_tol')}study.reference_stop_tol must be > 0")
    if study.backend not in ("direct", "cg"):
        errors.append(f"{at('study', 'backend')}study.backend must be 'direct' or 'cg'")
    expressions = {}
    for sec, key, text in [("problem", k, getattr(problem, k)) for k in sorted(_EXPR_KEYS)] + [("study", "f", study.f)]:
        try:
            expressions[key] = Expression(text)
        except ExpressionError as exc:
            errors.append(f"{at(sec, key)}{sec}.{key}: {exc}")
    solver = None
    try:
        solver = SolverConfig(**values["solver"])
    except (ValueError, TypeError) as exc:
        errors.append(f"solver: {exc}")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(problem, solver, study, seed, expressions)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())
