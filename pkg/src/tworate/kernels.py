"""Kernel functions with finite support and their derived constants.

Both the state filter and the regression oracle weight samples with a kernel
``kappa`` that is bounded, even, positive inside (-1, 1) and exactly zero
outside.  Named families are evaluated in closed form; custom kernels are
tabulated on a grid and interpolated linearly.  ``kernel_constant_a`` supplies
the roughness/moment ratio used by the plug-in bandwidth rule, and
``validate_kernel`` audits the five admissibility axioms on a grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateKernelError

FAMILIES = ("epanechnikov", "triangular", "quartic", "custom")

# Composite-Simpson resolution for moment integrals on [-1, 1].
QUADRATURE_POINTS = 2049


@dataclass(frozen=True)
class KernelSpec:
    """A kernel selection: a named family or a tabulated custom kernel.

    Parameters
    ----------
    family : str
        One of ``epanechnikov``, ``triangular``, ``quartic``, ``custom``.
    table : ndarray, optional
        For ``custom`` only: shape (n, 2) array of (nu, kappa(nu)) samples on
        [-1, 1], sorted by nu.  Values between grid points interpolate
        linearly; the finite-support rule still forces 0 at ``|nu| >= 1``.
    """

    family: str
    table: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}"
            )
        if self.family == "custom":
            if self.table is None:
                raise ConfigurationError("custom kernel requires a (nu, kappa) table")
            table = np.asarray(self.table, dtype=float)
            if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 3:
                raise ConfigurationError(
                    f"kernel table must be (n >= 3, 2), got shape {table.shape}"
                )
            if not np.all(np.isfinite(table)):
                raise ConfigurationError("kernel table contains non-finite entries")
            nu = table[:, 0]
            if np.any(np.diff(nu) <= 0):
                raise ConfigurationError("kernel table grid must be strictly increasing")
            if nu[0] < -1 or nu[-1] > 1:
                raise ConfigurationError("kernel table grid must lie within [-1, 1]")
            if np.any(table[:, 1] < 0):
                raise ConfigurationError("kernel table values must be nonnegative")
            object.__setattr__(self, "table", table)
        elif self.table is not None:
            raise ConfigurationError("table is only meaningful for the custom family")


@dataclass(frozen=True)
class AxiomCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    """Per-axiom pass/fail record produced by :func:`validate_kernel`."""

    checks: tuple[AxiomCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AxiomCheck]:
        return [c for c in self.checks if not c.passed]


def eval_kernel(spec: KernelSpec, nu) -> np.ndarray | float:
    """Evaluate ``kappa(nu)``; exactly 0 wherever ``|nu| >= 1``.

    Accepts scalars or arrays and returns the matching shape.
    """
    if not isinstance(spec, KernelSpec):
        raise ConfigurationError(f"expected a KernelSpec, got {type(spec).__name__}")
    nu_arr = np.asarray(nu, dtype=float)
    a = np.abs(nu_arr)
    if spec.family == "epanechnikov":
        values = 0.75 * (1.0 - nu_arr**2)
    elif spec.family == "triangular":
        values = 1.0 - a
    elif spec.family == "quartic":
        values = (15.0 / 16.0) * (1.0 - nu_arr**2) ** 2
    else:
        values = np.interp(nu_arr, spec.table[:, 0], spec.table[:, 1])
    values = np.where(a >= 1.0, 0.0, values)
    if np.isscalar(nu) or nu_arr.ndim == 0:
        return float(values)
    return values


def kernel_constant_a(spec: KernelSpec) -> float:
    """Roughness-to-moment ratio used by the plug-in bandwidth rule.

    Returns ``integral(kappa^2) / integral(nu^2 kappa)^2`` over [-1, 1],
    computed by composite Simpson quadrature on a fixed uniform grid.
    """
    nu = np.linspace(-1.0, 1.0, QUADRATURE_POINTS)
    k = np.asarray(eval_kernel(spec, nu))
    roughness = _simpson(k**2, nu)
    second_moment = _simpson(nu**2 * k, nu)
    if second_moment <= 1e-12:
        raise DegenerateKernelError(
            f"kernel second moment {second_moment:.3e} is numerically zero"
        )
    return float(roughness / second_moment**2)


def validate_kernel(spec: KernelSpec, grid_points: int = 2001) -> ValidationReport:
    """Audit the five kernel axioms; failures are reported, not raised.

    Named families are checked on a uniform grid of ``grid_points`` (>= 1001)
    nodes spanning [-1, 1]; custom kernels are checked on their own table grid.
    Differentiability is assessed as finite-difference slope continuity away
    from the support boundary, with a tolerance scaled to the grid spacing
    (a genuine kink jumps by O(1) while a smooth kernel's slope moves by
    O(spacing) between adjacent cells).
    """
    if spec.family == "custom":
        grid = spec.table[:, 0]
        if grid.size < 3:
            raise ConfigurationError("custom kernel table too small to validate")
    else:
        if grid_points < 1001:
            raise ConfigurationError("validation grid must have at least 1001 points")
        if grid_points % 2 == 0:
            grid_points += 1
        grid = np.linspace(-1.0, 1.0, grid_points)

    values = np.asarray(eval_kernel(spec, grid))
    amp = float(np.max(np.abs(values))) if values.size else 0.0
    checks = []

    # (a) finite support: exactly zero at and beyond the boundary.
    probes = np.array([-2.0, -1.5, -1.0, 1.0, 1.5, 2.0])
    outside = np.asarray(eval_kernel(spec, probes))
    support_ok = bool(np.all(outside == 0.0))
    checks.append(
        AxiomCheck(
            "finite_support",
            support_ok,
            "kappa == 0 at |nu| >= 1" if support_ok else f"nonzero outside support: {outside}",
        )
    )

    # (b) even symmetry on the evaluation grid.
    mirrored = np.asarray(eval_kernel(spec, -grid))
    asym = float(np.max(np.abs(values - mirrored))) if values.size else 0.0
    even_ok = asym <= 1e-12 * max(1.0, amp)
    checks.append(
        AxiomCheck(
            "even_symmetry",
            even_ok,
            f"max |kappa(nu) - kappa(-nu)| = {asym:.3e}",
        )
    )

    # (c) strictly positive inside the open support.
    interior = grid[np.abs(grid) < 1.0]
    interior_vals = np.asarray(eval_kernel(spec, interior))
    pos_ok = bool(np.all(interior_vals > 0.0))
    checks.append(
        AxiomCheck(
            "positive_inside",
            pos_ok,
            "kappa > 0 on |nu| < 1"
            if pos_ok
            else f"min interior value {float(np.min(interior_vals)):.3e}",
        )
    )

    # (d) differentiability: slope continuity away from +-1.
    diff_ok, diff_detail = _slope_continuity(spec, grid)
    checks.append(AxiomCheck("differentiable", diff_ok, diff_detail))

    # (e) nonincreasing over nu >= 0 (grid check).
    right = grid[grid >= 0.0]
    right_vals = np.asarray(eval_kernel(spec, right))
    increases = np.diff(right_vals)
    mono_ok = bool(np.all(increases <= 1e-12 * max(1.0, amp)))
    checks.append(
        AxiomCheck(
            "nonincreasing",
            mono_ok,
            "nonincreasing on [0, 1]"
            if mono_ok
            else f"max increase {float(np.max(increases)):.3e}",
        )
    )

    # Boundedness rides along with the axioms (finite everywhere on the grid).
    finite_ok = bool(np.all(np.isfinite(values)))
    checks.append(
        AxiomCheck("bounded", finite_ok, f"max |kappa| = {amp:.6g}")
    )

    return ValidationReport(tuple(checks))


def require_admissible(spec: KernelSpec) -> None:
    """Raise unless every axiom passes; gate for filter banks and oracles."""
    report = validate_kernel(spec)
    if not report.all_passed:
        names = ", ".join(c.name for c in report.failures())
        raise ConfigurationError(f"kernel fails axiom check(s): {names}")


def load_kernel_table(path) -> KernelSpec:
    """Build a custom KernelSpec from a two-column CSV of (nu, kappa) rows.

    A single header row is skipped if its first field is not numeric.
    """
    rows = []
    with open(path, newline="") as fh:
        for record in csv.reader(fh):
            if not record:
                continue
            try:
                rows.append((float(record[0]), float(record[1])))
            except ValueError:
                if rows:
                    raise ConfigurationError(f"malformed kernel table row: {record}")
                continue  # header
    if not rows:
        raise ConfigurationError(f"no kernel table rows found in {path}")
    return KernelSpec("custom", table=np.array(rows, dtype=float))


def _simpson(values: np.ndarray, grid: np.ndarray) -> float:
    """Composite Simpson rule on a uniform grid with an odd point count."""
    n = grid.size
    if n < 3 or n % 2 == 0:
        raise ConfigurationError("Simpson quadrature needs an odd number of points >= 3")
    h = (grid[-1] - grid[0]) / (n - 1)
    weights = np.ones(n)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(h / 3.0 * np.dot(weights, values))


def _slope_continuity(spec: KernelSpec, grid: np.ndarray) -> tuple[bool, str]:
    values = np.asarray(eval_kernel(spec, grid))
    # Keep away from the support boundary where a kink is allowed.
    inner = np.abs(grid) <= 0.98
    idx = np.where(inner)[0]
    if idx.size < 3:
        return True, "grid too small for a slope check"
    g = grid[idx]
    v = values[idx]
    dx = np.diff(g)
    slopes = np.diff(v) / dx
    jumps = np.abs(np.diff(slopes))
    spacing = float(np.max(dx))
    amp = float(np.max(np.abs(values))) if values.size else 1.0
    tol = np.sqrt(spacing) * max(1.0, amp)
    worst = float(np.max(jumps)) if jumps.size else 0.0
    ok = worst <= tol
    return ok, f"max slope jump {worst:.4g} (tolerance {tol:.4g})"
