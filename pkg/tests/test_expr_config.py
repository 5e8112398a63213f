import math

import numpy as np
import pytest

from l1control.config import ConfigError, ExperimentConfig, parse_config
from l1control.expr import Expression, ExpressionError


def test_expression_example():
    assert Expression("sin(pi*x1)*sin(pi*x2)")(0.5, 0.5) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("text,val", [
    ("1+2*3", 7.0), ("(1+2)*3", 9.0), ("2^3^2", 512.0), ("-2^2", -4.0), ("--3", 3.0),
    ("8/4/2", 1.0), ("1-2-3", -4.0), ("exp(0)+cos(0)", 2.0), ("abs(-x1)", 0.25),
    ("x1*x2", 0.25 * 0.75), ("2*pi", 2 * math.pi), ("1.5e1", 15.0), (".5", 0.5), ("3.", 3.0),
])
def test_expression_values(text, val):
    assert Expression(text)(0.25, 0.75) == pytest.approx(val, rel=1e-15)


def test_vectorized():
    ex = Expression("x1 + 10*x2")
    x = np.linspace(0, 1, 5)
    assert np.allclose(ex(x, x), 11 * x)
    assert Expression("3")(x, x).shape == x.shape


@pytest.mark.parametrize("text", ["", "1+", "sin x1", "(1", "1)", "x3", "foo(1)", "1 $ 2", "2**3", "sin(1,2)"])
def test_syntax_errors(text):
    with pytest.raises(ExpressionError):
        Expression(text)


def test_division_by_zero_is_load_time_error():
    with pytest.raises(ExpressionError, match="not finite"):
        Expression("1/x1")
    with pytest.raises(ExpressionError):
        Expression("1/(x1 - x2)")
    Expression("1/(1 + x1)")


MINIMAL = """
[problem]
beta = 5e-3
"""


def test_minimal_config():
    cfg = parse_config(MINIMAL)
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.problem.alpha == 1e-2 and cfg.study.meshes == (8, 16, 32)
    assert cfg.seed == 0
    spec = cfg.problem_spec()
    assert spec.beta == 5e-3


def test_full_config():
    text = """seed = 7
# comment
[problem]
m = 8            ; trailing comment
alpha = 0.1
beta = 1e-3
a = -0.5
b = 2
y_d = 2*x1 - x2^2
diffusion = 1 + x1
[solver]
variant = sncg
max_iters = 200
switch_threshold = 10
record_history = false
[study]
meshes = 4, 8, 16
reference_depth = 1
f = sin(pi*x1)
"""
    cfg = parse_config(text)
    assert cfg.seed == 7 and cfg.problem.m == 8 and cfg.problem.b == 2.0
    assert cfg.solver.variant == "sncg" and cfg.solver.switch_threshold == 10
    assert cfg.solver.record_history is False
    assert cfg.study.meshes == (4, 8, 16)
    spec = cfg.problem_spec()
    assert spec.y_d(1.0, 1.0) == pytest.approx(1.0)
    assert spec.y_r == 0.0 and spec.reaction == 0.0
    assert cfg.expression("f")(0.5, 0.0) == pytest.approx(1.0)
    again = parse_config(cfg.to_text())
    assert again.problem == cfg.problem and again.solver == cfg.solver and again.study == cfg.study


@pytest.mark.parametrize("text,needle", [
    ("[problem]\nbeta = -1\n", "problem.beta"),
    ("[problem]\nalpha = 0\n", "problem.alpha"),
    ("[problem]\na = 0.5\n", "problem.a"),
    ("[problem]\nb = -0.5\n", "problem.b"),
    ("[study]\nmeshes = 8, 8, 16\n", "strictly increasing"),
    ("[study]\nmeshes = 16, 8\n", "strictly increasing"),
    ("[problem]\ny_d = sin(x1\n", "problem.y_d"),
    ("[problem]\ny_r = 1/x2\n", "problem.y_r"),
    ("[problem]\nbogus = 1\n", "unknown key"),
    ("[nope]\n", "unknown section"),
    ("m = 3\n", "outside any section"),
    ("[problem]\njust words\n", "expected 'key = value'"),
    ("[problem]\nm = 2.5\n", "not an integer"),
    ("[solver]\nvariant = magic\n", "variant"),
    ("[problem]\nm = 4\nm = 5\n", "duplicate"),
])
def test_config_errors(text, needle):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert needle in str(info.value)


def test_config_errors_carry_line_numbers():
    with pytest.raises(ConfigError) as info:
        parse_config("[problem]\nm = 4\n\nbeta = -1\nalpha = -2\n")
    msgs = info.value.errors
    assert any(m.startswith("line 4:") and "beta" in m for m in msgs)
    assert any(m.startswith("line 5:") and "alpha" in m for m in msgs)
