import math

import numpy as np
import pytest

from treebound import expr as ex
from treebound import make_ackley, make_levy

from helpers import central_diff, random_expression, second_central_diff


class TestParse:
    def test_basic_structure(self):
        f = ex.parse("x0^2 + sin(x1)", 2)
        assert f.kind == "add"
        left, right = f.args
        assert left.kind == "pow" and left.payload == 2
        assert left.args[0].kind == "var" and left.args[0].payload == 0
        assert right.kind == "sin"
        assert right.args[0].payload == 1

    def test_division_by_zero_is_not_a_parse_error(self):
        f = ex.parse("x0 / (x1 - x1)", 2)
        assert f.kind == "div"
        assert math.isnan(ex.evaluate(f, [1.0, 2.0]))

    def test_variable_out_of_range(self):
        with pytest.raises(ex.ParseError, match="x5 out of range"):
            ex.parse("x5", 2)

    def test_unknown_function(self):
        with pytest.raises(ex.ParseError, match="unknown function 'foo'"):
            ex.parse("foo(x0)", 1)

    def test_syntax_error_has_position(self):
        with pytest.raises(ex.ParseError) as err:
            ex.parse("x0 + ", 1)
        assert err.value.line == 1
        assert err.value.column == 6

    def test_fractional_exponent_rejected(self):
        with pytest.raises(ex.ParseError, match="integer"):
            ex.parse("x0^2.5", 1)

    def test_wrong_arity(self):
        with pytest.raises(ex.ParseError, match="max expects 2"):
            ex.parse("max(x0)", 1)
        with pytest.raises(ex.ParseError, match="sin expects 1"):
            ex.parse("sin(x0, x1)", 2)

    def test_step_is_not_in_the_grammar(self):
        with pytest.raises(ex.ParseError, match="unknown function"):
            ex.parse("step(x0)", 1)

    def test_precedence_and_unary_minus(self):
        f = ex.parse("-x0^2 + 2*x1", 2)
        assert ex.evaluate(f, [3.0, 5.0]) == 1.0

    @pytest.mark.parametrize("src,dims", [
        ("x0^2 + sin(x1)", 2),
        ("-x0 * (x1 - 3.5) / max(x0, 2)", 2),
        ("exp(-0.5 * x0^2) + log(abs(x1) + 1)", 2),
        ("min(x0, x1) - sqrt(abs(x0 - x1))", 2),
        ("1e-3 * x0 + 2.5e2", 1),
        ("cos(x0)^4", 1),
    ])
    def test_unparse_round_trip(self, src, dims):
        first = ex.parse(src, dims)
        again = ex.parse(ex.unparse(first), dims)
        assert ex.structurally_equal(first, again)

    def test_unparse_round_trip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            f = ex.with_dims(random_expression(rng, 3, 4, kinks=True), 3)
            again = ex.parse(ex.unparse(f), 3)
            assert ex.structurally_equal(f, again)


class TestEvaluate:
    def test_simple_product(self):
        f = ex.parse("x0*x1 + 2", 2)
        assert ex.evaluate(f, (3.0, 4.0)) == 14.0

    @pytest.mark.parametrize("n", [2, 5, 50])
    def test_ackley_origin(self, n):
        f = make_ackley(n).expression
        assert abs(ex.evaluate(f, np.zeros(n))) < 1e-12

    @pytest.mark.parametrize("n", [2, 7, 50])
    def test_levy_at_ones(self, n):
        f = make_levy(n).expression
        assert abs(ex.evaluate(f, np.ones(n))) < 1e-12

    def test_domain_errors_become_nan(self):
        assert math.isnan(ex.evaluate(ex.parse("log(x0)", 1), [-1.0]))
        assert math.isnan(ex.evaluate(ex.parse("sqrt(x0)", 1), [-4.0]))
        assert math.isnan(ex.evaluate(ex.parse("1 / x0", 1), [0.0]))
        assert math.isnan(ex.evaluate(ex.parse("x0^-1", 1), [0.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(ex.DimensionMismatch):
            ex.evaluate(ex.parse("x0 + x1", 2), [1.0])

    def test_never_raises_on_finite_input(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            f = ex.with_dims(random_expression(rng, 3, 5, kinks=True), 3)
            x = rng.uniform(-10, 10, size=3)
            v = ex.evaluate(f, x)
            assert isinstance(v, float)

    def test_compiled_matches_reference(self):
        rng = np.random.default_rng(13)
        for _ in range(400):
            f = ex.with_dims(random_expression(rng, 3, 5, kinks=True), 3)
            fn = ex.compile_function(f)
            x = rng.uniform(-10, 10, size=3)
            ref = ex.evaluate(f, x)
            got = fn(x)
            assert (got == ref) or (math.isnan(got) and math.isnan(ref))


class TestDifferentiate:
    def test_square(self):
        g = ex.gradient(ex.parse("x0^2", 1))
        assert ex.unparse(g[0]) == "2.0 * x0"

    def test_product_of_sin(self):
        g = ex.gradient(ex.parse("sin(x0) * x1", 2))
        assert ex.unparse(g[0]) == "cos(x0) * x1"
        assert ex.unparse(g[1]) == "sin(x0)"
        assert not g.subgradient_convention

    def test_ackley_2d_against_central_difference(self):
        f = make_ackley(2).expression
        g = ex.gradient(f)
        x = np.array([0.5, -0.3])
        for d in range(2):
            sym = ex.evaluate(g[d], x)
            fd = central_diff(f, x, d, 1e-5)
            assert abs(sym - fd) / max(1.0, abs(sym)) < 1e-6

    def test_cube_second_derivative(self):
        h = ex.hessian_diagonal(ex.parse("x0^3", 1))
        assert ex.evaluate(h[0], [2.0]) == 12.0
        assert ex.evaluate(h[0], [-1.5]) == -9.0

    def test_bilinear_has_zero_diagonal(self):
        h = ex.hessian_diagonal(ex.parse("x0 * x1", 2))
        for comp in h:
            assert comp.kind == "const" and comp.payload == 0.0

    def test_levy_3d_hessian_against_central_difference(self):
        f = make_levy(3).expression
        h = ex.hessian_diagonal(f)
        x = np.array([0.2, 0.7, -1.1])
        for d in range(3):
            sym = ex.evaluate(h[d], x)
            fd = second_central_diff(f, x, d, 1e-4 * (1.0 + abs(x[d])))
            assert abs(sym - fd) / max(1.0, abs(sym)) < 1e-4

    def test_abs_kink_convention(self):
        g = ex.gradient(ex.parse("abs(x0)", 1))
        assert g.subgradient_convention
        assert ex.evaluate(g[0], [0.0]) == 0.0
        assert ex.evaluate(g[0], [2.0]) == 1.0
        assert ex.evaluate(g[0], [-2.0]) == -1.0

    def test_max_tie_takes_first_branch(self):
        # both branches equal at 0; the first argument's slope (1) wins
        g = ex.gradient(ex.parse("max(x0, 2*x0)", 1))
        assert ex.evaluate(g[0], [0.0]) == 1.0

    def test_min_tie_takes_first_branch(self):
        g = ex.gradient(ex.parse("min(3*x0, x0)", 1))
        assert ex.evaluate(g[0], [0.0]) == 3.0

    def test_fuzz_against_finite_differences(self):
        rng = np.random.default_rng(17)
        checked = 0
        while checked < 300:
            f = ex.with_dims(random_expression(rng, 3, 4), 3)
            g = ex.gradient(f)
            x = rng.uniform(-2.0, 2.0, size=3)
            vals = [ex.evaluate(g[d], x) for d in range(3)]
            if not all(np.isfinite(v) and abs(v) < 1e6 for v in vals):
                continue
            if not all(abs(ex.evaluate(f, p)) < 1e4 and np.isfinite(ex.evaluate(f, p))
                       for p in (x,)):
                continue
            ok = True
            fds = []
            for d in range(3):
                h = 1e-6 * (1.0 + abs(x[d]))
                fd = central_diff(f, x, d, h)
                if not np.isfinite(fd):
                    ok = False
                    break
                fds.append(fd)
            if not ok:
                continue
            checked += 1
            for sym, fd in zip(vals, fds):
                assert abs(sym - fd) / max(1.0, abs(sym)) < 1e-5


class TestReluNet:
    def test_single_unit(self):
        w = ex.ReluNetWeights(n=1, h=1, w1=[[1.0]], b1=[0.0], w2=[1.0], b2=0.0)
        f = ex.relu_net_to_expression(w)
        assert f.kind == "max"
        assert ex.evaluate(f, [3.0]) == 3.0
        assert ex.evaluate(f, [-3.0]) == 0.0

    def test_absolute_value_net(self):
        w = ex.ReluNetWeights(n=1, h=2, w1=[[1.0], [-1.0]], b1=[0.0, 0.0],
                              w2=[1.0, 1.0], b2=0.0)
        f = ex.relu_net_to_expression(w)
        assert ex.evaluate(f, [-3.0]) == 3.0
        assert ex.evaluate(f, [2.5]) == 2.5

    def test_random_net_matches_forward_pass_exactly(self):
        rng = np.random.default_rng(23)
        w = ex.ReluNetWeights(n=2, h=4,
                              w1=rng.normal(size=(4, 2)),
                              b1=rng.normal(size=4),
                              w2=rng.normal(size=4),
                              b2=float(rng.normal()))
        f = ex.relu_net_to_expression(w)
        fn = ex.compile_function(f)
        for _ in range(100):
            x = rng.uniform(-5, 5, size=2)
            assert fn(x) == w.forward(x)
            assert ex.evaluate(f, x) == w.forward(x)

    def test_hessian_diagonal_is_identically_zero(self):
        rng = np.random.default_rng(29)
        w = ex.ReluNetWeights(n=3, h=5,
                              w1=rng.normal(size=(5, 3)),
                              b1=rng.normal(size=5),
                              w2=rng.normal(size=5),
                              b2=0.0)
        h = ex.hessian_diagonal(ex.relu_net_to_expression(w))
        for comp in h:
            assert comp.kind == "const" and comp.payload == 0.0

    def test_shape_validation(self):
        with pytest.raises(ValueError, match="w1 must be"):
            ex.ReluNetWeights(n=2, h=2, w1=[[1.0, 2.0]], b1=[0.0, 0.0],
                              w2=[1.0, 1.0], b2=0.0)
        with pytest.raises(ValueError, match="non-finite"):
            ex.ReluNetWeights(n=1, h=1, w1=[[np.inf]], b1=[0.0], w2=[1.0],
                              b2=0.0)


class TestConstruction:
    def test_operator_sugar(self):
        x0, x1 = ex.var(0), ex.var(1)
        f = 2.0 * x0 + x1 ** 2 - 1.0
        assert ex.evaluate(f, [3.0, 4.0]) == 21.0

    def test_constant_folding(self):
        f = ex.add(ex.const(2.0), ex.const(3.0))
        assert f.kind == "const" and f.payload == 5.0
        assert ex.mul(ex.const(0.0), ex.var(0)).payload == 0.0
        assert ex.pow_int(ex.var(0), 1).kind == "var"

    def test_balanced_sum_depth(self):
        terms = [ex.var(i) for i in range(1000)]
        f = ex.balanced_sum(terms)
        assert ex.evaluate(f, np.ones(1000)) == 1000.0

    def test_with_dims_narrowing_rejected(self):
        f = ex.parse("x0 + x2", 3)
        with pytest.raises(ex.DimensionMismatch):
            ex.with_dims(f, 2)
