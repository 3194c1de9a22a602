import numpy as np
import pytest
import sympy as sp

from tworate.errors import ConfigurationError, DegenerateKernelError
from tworate.kernels import (
    KernelSpec,
    eval_kernel,
    kernel_constant_a,
    load_kernel_table,
    require_admissible,
    validate_kernel,
)


def analytic_constant_a(expr):
    """Independent oracle: a = int(kappa^2) / int(nu^2 kappa)^2 by symbolic integration."""
    nu = sp.symbols("nu")
    roughness = sp.integrate(expr**2, (nu, -1, 1))
    second = sp.integrate(nu**2 * expr, (nu, -1, 1))
    return float(roughness / second**2)


NU = sp.symbols("nu")
EPANECHNIKOV_EXPR = sp.Rational(3, 4) * (1 - NU**2)
TRIANGULAR_EXPR = 1 - sp.Abs(NU)
QUARTIC_EXPR = sp.Rational(15, 16) * (1 - NU**2) ** 2


def tabulated_epanechnikov(n=401):
    grid = np.linspace(-1.0, 1.0, n)
    return KernelSpec("custom", table=np.column_stack([grid, 0.75 * (1 - grid**2)]))


class TestEvalKernel:
    def test_epanechnikov_center(self):
        assert eval_kernel(KernelSpec("epanechnikov"), 0.0) == pytest.approx(0.75)

    def test_epanechnikov_half(self):
        # 0.75 * (1 - 0.25)
        assert eval_kernel(KernelSpec("epanechnikov"), 0.5) == pytest.approx(0.5625)

    def test_boundary_is_exactly_zero(self):
        spec = KernelSpec("epanechnikov")
        assert eval_kernel(spec, 1.0) == 0.0
        assert eval_kernel(spec, -1.0) == 0.0
        assert eval_kernel(spec, 3.7) == 0.0

    @pytest.mark.parametrize("family", ["epanechnikov", "triangular", "quartic"])
    def test_outside_support_exact_zero_no_tolerance(self, family):
        spec = KernelSpec(family)
        nu = np.array([-5.0, -1.0, 1.0, 1.0 + 1e-12, 42.0])
        assert np.all(eval_kernel(spec, nu) == 0.0)

    @pytest.mark.parametrize("family", ["epanechnikov", "triangular", "quartic"])
    def test_even_symmetry_property(self, family):
        spec = KernelSpec(family)
        rng = np.random.default_rng(7)
        nu = rng.uniform(-1.5, 1.5, size=400)
        np.testing.assert_allclose(
            eval_kernel(spec, nu), eval_kernel(spec, -nu), atol=1e-12
        )

    def test_custom_table_interpolates(self):
        spec = tabulated_epanechnikov()
        nu = np.linspace(-0.95, 0.95, 113)
        np.testing.assert_allclose(
            eval_kernel(spec, nu), 0.75 * (1 - nu**2), atol=5e-5
        )

    def test_rejects_non_spec(self):
        with pytest.raises(ConfigurationError):
            eval_kernel("epanechnikov", 0.0)


class TestKernelConstant:
    def test_epanechnikov_matches_symbolic(self):
        expected = analytic_constant_a(EPANECHNIKOV_EXPR)
        assert expected == pytest.approx(15.0)
        assert kernel_constant_a(KernelSpec("epanechnikov")) == pytest.approx(
            expected, abs=1e-6
        )

    def test_triangular_matches_symbolic(self):
        expected = analytic_constant_a(TRIANGULAR_EXPR)
        assert expected == pytest.approx(24.0)
        assert kernel_constant_a(KernelSpec("triangular")) == pytest.approx(
            expected, abs=1e-6
        )

    def test_quartic_matches_symbolic(self):
        expected = analytic_constant_a(QUARTIC_EXPR)
        assert expected == pytest.approx(35.0)
        assert kernel_constant_a(KernelSpec("quartic")) == pytest.approx(
            expected, abs=1e-6
        )

    def test_tabulated_epanechnikov_copy(self):
        assert kernel_constant_a(tabulatedepan := tabulated_epanechnikov(2049)) == pytest.approx(
            15.0, abs=1e-3
        )
        # finer table converges further
        del tabulatedepan

    def test_invariant_under_doubled_resolution(self, monkeypatch):
        import tworate.kernels as kernels

        base = kernel_constant_a(KernelSpec("epanechnikov"))
        monkeypatch.setattr(kernels, "QUADRATURE_POINTS", 4097)
        doubled = kernel_constant_a(KernelSpec("epanechnikov"))
        assert doubled == pytest.approx(base, rel=1e-6)

    def test_degenerate_second_moment(self):
        # A spike at 0 only: second moment vanishes on the quadrature grid.
        table = np.array([[-1e-9, 0.0], [0.0, 1.0], [1e-9, 0.0]])
        with pytest.raises(DegenerateKernelError):
            kernel_constant_a(KernelSpec("custom", table=table))


class TestValidateKernel:
    def test_epanechnikov_all_pass(self):
        report = validate_kernel(KernelSpec("epanechnikov"))
        assert report.all_passed
        assert {c.name for c in report.checks} == {
            "finite_support",
            "even_symmetry",
            "positive_inside",
            "differentiable",
            "nonincreasing",
            "bounded",
        }

    def test_quartic_all_pass(self):
        assert validate_kernel(KernelSpec("quartic")).all_passed

    def test_uniform_table_all_pass(self):
        grid = np.linspace(-1.0, 1.0, 201)
        spec = KernelSpec("custom", table=np.column_stack([grid, np.ones_like(grid)]))
        report = validate_kernel(spec)
        assert report.all_passed, report.failures()

    def test_asymmetric_table_fails_even_symmetry(self):
        grid = np.linspace(-1.0, 1.0, 201)
        values = np.where(grid > 0, 0.5, 1.0)
        spec = KernelSpec("custom", table=np.column_stack([grid, values]))
        report = validate_kernel(spec)
        failed = {c.name for c in report.failures()}
        assert "even_symmetry" in failed

    def test_triangular_fails_differentiability_at_zero(self):
        report = validate_kernel(KernelSpec("triangular"))
        failed = {c.name for c in report.failures()}
        assert failed == {"differentiable"}

    def test_tabulated_epanechnikov_passes(self):
        assert validate_kernel(tabulated_epanechnikov()).all_passed

    def test_require_admissible_gate(self):
        require_admissible(KernelSpec("epanechnikov"))
        with pytest.raises(ConfigurationError, match="differentiable"):
            require_admissible(KernelSpec("triangular"))


class TestSpecConstruction:
    def test_unknown_family(self):
        with pytest.raises(ConfigurationError):
            KernelSpec("gaussian")

    def test_custom_requires_table(self):
        with pytest.raises(ConfigurationError):
            KernelSpec("custom")

    def test_table_only_for_custom(self):
        with pytest.raises(ConfigurationError):
            KernelSpec("epanechnikov", table=np.zeros((5, 2)))

    def test_unsorted_table_rejected(self):
        table = np.array([[0.0, 1.0], [-0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(ConfigurationError):
            KernelSpec("custom", table=table)

    def test_negative_values_rejected(self):
        table = np.array([[-1.0, 0.0], [0.0, -0.2], [1.0, 0.0]])
        with pytest.raises(ConfigurationError):
            KernelSpec("custom", table=table)


class TestLoadKernelTable:
    def test_round_trip_with_header(self, tmp_path):
        path = tmp_path / "kern.csv"
        grid = np.linspace(-1.0, 1.0, 101)
        lines = ["nu,kappa"]
        lines += [f"{float(g)!r},{float(0.75 * (1 - g * g))!r}" for g in grid]
        path.write_text("\n".join(lines) + "\n")
        spec = load_kernel_table(path)
        assert spec.family == "custom"
        assert eval_kernel(spec, 0.0) == pytest.approx(0.75)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("nu,kappa\n")
        with pytest.raises(ConfigurationError):
            load_kernel_table(path)
