import math
import random

import mpmath
import pytest

from memra import expr as ex
from memra.errors import ExpressionDomainError, ExpressionSyntaxError, UnknownIdentifierError

QV = {"q", "i", "t"}


def test_parse_variable_leaf():
    ast = ex.parse_expression("q", QV)
    assert ast.root == ex.Var("q")


def test_parse_product():
    ast = ex.parse_expression("(1+q^2)*i", QV)
    assert ast.root == ex.Binary("*", ex.Binary("+", ex.Const(1.0), ex.Pow(ex.Var("q"), 2)), ex.Var("i"))


def test_unknown_identifier_names_variable():
    with pytest.raises(UnknownIdentifierError) as info:
        ex.parse_expression("(1+q^2)*w", QV)
    assert info.value.name == "w"


@pytest.mark.parametrize("text", ["", "1 +", "(q", "q)", "q^-1", "q^1.5", "sin q", "2*", "q @ i", "1..2"])
def test_syntax_errors(text):
    with pytest.raises(ExpressionSyntaxError):
        ex.parse_expression(text, QV)


def test_syntax_error_position():
    with pytest.raises(ExpressionSyntaxError) as info:
        ex.parse_expression("q + * i", QV)
    assert info.value.position == 4


def test_precedence():
    assert ex.eval(ex.parse_expression("-q^2", QV), {"q": 3.0}) == -9.0
    assert ex.eval(ex.parse_expression("2*3+4", QV), {}) == 10.0
    assert ex.eval(ex.parse_expression("2^3^2", QV), {}) == 64.0
    assert ex.eval(ex.parse_expression("8/2/2", QV), {}) == 2.0
    assert ex.eval(ex.parse_expression("1-2-3", QV), {}) == -4.0


def test_eval_examples():
    ast = ex.parse_expression("(1+q^2)*i", QV)
    assert ex.eval(ast, {"q": 2.0, "i": 3.0}) == 15.0
    assert ex.eval(ex.parse_expression("t", QV), {"t": 0.0}) == 0.0


def test_division_by_zero():
    with pytest.raises(ExpressionDomainError) as info:
        ex.eval(ex.parse_expression("1/q", QV), {"q": 0.0})
    assert "q" in str(info.value.subexpression)


def test_partial_examples():
    ast = ex.parse_expression("(1+q^2)*i", QV)
    pt = {"q": 2.0, "i": 3.0}
    assert ex.partial(ast, "i", pt) == 5.0
    assert ex.partial(ast, "q", pt) == 12.0
    assert ex.partial(ex.parse_expression("q", QV), "t", {"q": 0.7, "t": 1.0}) == 0.0


def test_functions():
    pt = {"q": 0.3}
    for name, f, df in [("sin", math.sin, math.cos), ("cos", math.cos, lambda x: -math.sin(x)),
                        ("exp", math.exp, math.exp), ("tanh", math.tanh, lambda x: 1 - math.tanh(x) ** 2)]:
        ast = ex.parse_expression(f"{name}(q)", QV)
        assert ex.eval(ast, pt) == pytest.approx(f(0.3), rel=1e-15)
        assert ex.partial(ast, "q", pt) == pytest.approx(df(0.3), rel=1e-15)


def test_power_zero():
    ast = ex.parse_expression("q^0", QV)
    assert ex.eval(ast, {"q": 0.0}) == 1.0
    assert ex.partial(ast, "q", {"q": 0.0}) == 0.0


def test_round_trip_text():
    for text in ["(1+q^2)*i", "-q^2", "sin(q)*exp(-i)/(1+t)", "2^3^2", "-(q+i)^3", "1e-3*q"]:
        ast = ex.parse_expression(text, QV)
        again = ex.parse_expression(str(ast), QV)
        assert again == ast


def test_free_variables():
    ast = ex.parse_expression("q*0 + sin(t)", QV)
    assert ast.free_variables() == {"q", "t"}


# -- random AST property suite ------------------------------------------------------

VARS = ("q", "i", "t")


def random_ast(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.4:
            return ex.Const(round(rng.uniform(-2, 2), 3))
        return ex.Var(rng.choice(VARS))
    kind = rng.random()
    if kind < 0.25:
        return ex.Unary(rng.choice(("neg", "sin", "cos", "exp", "tanh")), random_ast(rng, depth - 1))
    if kind < 0.4:
        return ex.Pow(random_ast(rng, depth - 1), rng.randint(0, 4))
    return ex.Binary(rng.choice("+-*/"), random_ast(rng, depth - 1), random_ast(rng, depth - 1))


_MP_UNARY = {"neg": lambda x: -x, "sin": mpmath.sin, "cos": mpmath.cos, "exp": mpmath.exp, "tanh": mpmath.tanh}


def mp_eval(node, env, sizes=None):
    """Independent high-precision evaluator of an expression tree.

    ``sizes`` collects the magnitude of every intermediate value.
    """
    value = _mp_eval(node, env, sizes)
    if sizes is not None:
        sizes.append(abs(value))
    return value


def _mp_eval(node, env, sizes):
    if isinstance(node, ex.Const):
        return mpmath.mpf(node.value)
    if isinstance(node, ex.Var):
        return env[node.name]
    if isinstance(node, ex.Unary):
        return _MP_UNARY[node.op](mp_eval(node.arg, env, sizes))
    if isinstance(node, ex.Pow):
        return mp_eval(node.base, env, sizes) ** node.exponent
    a, b = mp_eval(node.left, env, sizes), mp_eval(node.right, env, sizes)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if b == 0:
        raise ZeroDivisionError
    return a / b


def test_partial_matches_finite_difference_on_random_asts():
    rng = random.Random(7)
    mpmath.mp.dps = 40
    checked = 0
    for _ in range(50000):
        if checked == 1000:
            break
        node = random_ast(rng, 4)
        ast = ex.ExpressionAst(node, frozenset(VARS))
        point = {v: rng.uniform(-1.5, 1.5) for v in VARS}
        var = rng.choice(VARS)
        try:
            d = ex.partial(ast, var, point)
        except ExpressionDomainError:
            continue
        x = point[var]
        h = 1e-6 * (1 + abs(x))
        env_p = {k: mpmath.mpf(v) for k, v in point.items()}
        env_m = dict(env_p)
        env_p[var] = mpmath.mpf(x) + h
        env_m[var] = mpmath.mpf(x) - h
        sizes = []
        try:
            fd = float((mp_eval(node, env_p, sizes) - mp_eval(node, env_m, sizes)) / (2 * h))
        except ZeroDivisionError:
            continue
        # badly scaled trees make the step above truncation-dominated
        if max(sizes) > 50:
            continue
        if not math.isfinite(fd) or abs(fd) <= 1e-8 or abs(fd) > 1e8:
            continue
        checked += 1
        assert abs(d - fd) <= 1e-6 * abs(fd), (str(ast), var, point, d, fd)
    assert checked == 1000


def test_eval_and_partial_deterministic():
    rng = random.Random(11)
    for _ in range(200):
        ast = ex.ExpressionAst(random_ast(rng, 4), frozenset(VARS))
        point = {v: rng.uniform(-1, 1) for v in VARS}
        try:
            a = (ex.eval(ast, point), ex.partial(ast, "q", point))
        except ExpressionDomainError:
            continue
        b = (ex.eval(ast, point), ex.partial(ast, "q", point))
        assert repr(a) == repr(b)


def test_product_rule_on_constructed_pairs():
    rng = random.Random(3)
    for _ in range(300):
        f = random_ast(rng, 3)
        g = random_ast(rng, 3)
        point = {v: rng.uniform(-1, 1) for v in VARS}
        F, G = (ex.ExpressionAst(n, frozenset(VARS)) for n in (f, g))
        FG = ex.ExpressionAst(ex.Binary("*", f, g), frozenset(VARS))
        try:
            f0, df = ex.value_and_partial(F, "q", point)
            g0, dg = ex.value_and_partial(G, "q", point)
            dfg = ex.partial(FG, "q", point)
        except ExpressionDomainError:
            continue
        expected = df * g0 + f0 * dg
        scale = abs(df * g0) + abs(f0 * dg)
        assert abs(dfg - expected) <= 1e-14 * scale + 1e-300


def test_sum_and_chain_rules():
    rng = random.Random(5)
    for _ in range(300):
        f, g = random_ast(rng, 3), random_ast(rng, 3)
        point = {v: rng.uniform(-1, 1) for v in VARS}
        mk = lambda n: ex.ExpressionAst(n, frozenset(VARS))  # noqa: E731
        try:
            dsum = ex.partial(mk(ex.Binary("+", f, g)), "i", point)
            df, dg = ex.partial(mk(f), "i", point), ex.partial(mk(g), "i", point)
            f0 = ex.eval(mk(f), point)
            dsin = ex.partial(mk(ex.Unary("sin", f)), "i", point)
        except ExpressionDomainError:
            continue
        assert dsum == df + dg
        assert abs(dsin - math.cos(f0) * df) <= 1e-14 * abs(math.cos(f0) * df) + 1e-300
