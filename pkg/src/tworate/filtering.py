"""Two-sided local polynomial state filter for two-rate sampled measurements.

A window of k+1 measurements spans one input-hold period.  Each window is
fitted twice with kernel-weighted polynomial regression: once with the target
at the window start (the "right" side of that sample, since the data lie to
its right) and once with the target at the window end (its "left" side).  A
window-boundary state therefore receives two one-sided estimates, which are
averaged once both exist, and the result is saturated into the band the noise
bounds allow around the raw measurement.

Coefficients depend only on (order, bandwidth, side), so they are precomputed
over a bandwidth grid into a :class:`FilterBank` and selected at run time by a
plug-in rule driven by a model-based curvature estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import csvio
from .errors import (
    BandwidthTooSmallError,
    ConfigurationError,
    IncompleteWindowError,
)
from .kernels import KernelSpec, eval_kernel, kernel_constant_a, require_admissible

CONDITION_LIMIT = 1e12
CURVATURE_FLOOR = 1e-12
DEFAULT_GRID_SIZE = 16


@dataclass(frozen=True)
class SamplingScheme:
    """Two-rate sampling: inputs held for ``input_period``, measurements every
    ``input_period / samples_per_window`` seconds."""

    input_period: float
    samples_per_window: int

    def __post_init__(self):
        if self.input_period <= 0:
            raise ConfigurationError(f"input_period must be positive, got {self.input_period}")
        if int(self.samples_per_window) != self.samples_per_window or self.samples_per_window < 1:
            raise ConfigurationError(
                f"samples_per_window must be a positive integer, got {self.samples_per_window}"
            )
        object.__setattr__(self, "samples_per_window", int(self.samples_per_window))

    @property
    def measurement_period(self) -> float:
        return self.input_period / self.samples_per_window


@dataclass(frozen=True)
class NoiseBounds:
    """Component-wise measurement noise band ``lower_j <= eps_j <= upper_j``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ConfigurationError(
                f"noise bound shapes differ: {lower.shape} vs {upper.shape}"
            )
        if np.any(lower > 0) or np.any(upper < 0):
            raise ConfigurationError(
                "zero-mean noise requires lower <= 0 <= upper component-wise"
            )
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self) -> int:
        return self.lower.size

    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.lower, -self.upper))

    def default_variance(self) -> np.ndarray:
        # Uniform-on-[l, s] variance, consistent with the known-bounds setting.
        return (self.upper - self.lower) ** 2 / 12.0


def filter_coefficients(
    samples_per_window: int,
    measurement_period: float,
    order: int,
    bandwidth: float,
    side: str,
    spec: KernelSpec,
    convention: str = "target",
) -> np.ndarray:
    """Weights of the one-sided local polynomial fit, length k+1.

    ``side="right"`` places the target at the window start (data to its
    right); ``side="left"`` places it at the window end.  The returned vector
    ``c`` gives the state estimate ``sum_j c_j xi(t_j)`` at the target time,
    and always sums to 1 (a degree-0 polynomial is reproduced exactly).

    With ``convention="target"`` the polynomial design is centered on the
    target so the intercept is read off at the estimation time for both
    sides.  ``convention="window-start"`` keeps the design anchored at the
    window start regardless of side, for comparison; it coincides with
    "target" on the right side.

    Raises
    ------
    BandwidthTooSmallError
        If fewer than order+1 samples carry positive weight, or the local
        normal matrix is singular / has condition number above 1e12.
    """
    if bandwidth <= 0:
        raise ConfigurationError(f"bandwidth must be positive, got {bandwidth}")
    if order < 0:
        raise ConfigurationError(f"order must be nonnegative, got {order}")
    if side not in ("left", "right"):
        raise ConfigurationError(f"side must be 'left' or 'right', got {side!r}")
    if convention not in ("target", "window-start"):
        raise ConfigurationError(f"unknown convention {convention!r}")

    k = int(samples_per_window)
    times = np.arange(k + 1) * measurement_period
    target = 0.0 if side == "right" else k * measurement_period
    weights = np.asarray(eval_kernel(spec, (times - target) / bandwidth))

    if np.count_nonzero(weights > 0) < order + 1:
        raise BandwidthTooSmallError(
            f"only {np.count_nonzero(weights > 0)} samples have positive weight "
            f"at bandwidth {bandwidth:.6g}; order {order} needs {order + 1}"
        )

    anchor = target if convention == "target" else 0.0
    tau = (times - anchor) / bandwidth  # scaled to keep the normal matrix well-conditioned
    design = np.vander(tau, order + 1, increasing=True)
    weighted = design * weights[:, None]
    normal = design.T @ weighted
    cond = np.linalg.cond(normal)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise BandwidthTooSmallError(
            f"local fit condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e} "
            f"at bandwidth {bandwidth:.6g}"
        )
    coefficients = np.linalg.solve(normal, weighted.T)[0]
    return coefficients


@dataclass(frozen=True)
class FilterBank:
    """Precomputed per-bandwidth coefficient vectors for both sides.

    ``left[i]`` / ``right[i]`` hold the k+1 weights for ``grid[i]``.  Entries
    whose fit was singular are filled from the next larger usable bandwidth
    (or order-0 weights when none exists); ``promoted`` records which.
    """

    scheme: SamplingScheme
    order: int
    kernel: KernelSpec
    grid: np.ndarray
    left: np.ndarray
    right: np.ndarray
    promoted: tuple[bool, ...]

    @property
    def size(self) -> int:
        return self.grid.size

    def coefficients(self, index: int, side: str) -> np.ndarray:
        if side == "left":
            return self.left[index]
        if side == "right":
            return self.right[index]
        raise ConfigurationError(f"side must be 'left' or 'right', got {side!r}")

    def to_csv(self, path) -> None:
        k = self.scheme.samples_per_window
        header = ["h", "side"] + [f"c_{j}" for j in range(k + 1)]
        rows = []
        for i, h in enumerate(self.grid):
            rows.append([h, "left", *self.left[i]])
            rows.append([h, "right", *self.right[i]])
        csvio.write_csv(path, header, rows)


def build_filter_bank(
    scheme: SamplingScheme,
    order: int,
    spec: KernelSpec,
    grid=None,
    convention: str = "target",
) -> FilterBank:
    """Precompute coefficient vectors over a bandwidth grid.

    The default grid is 16 log-spaced bandwidths spanning one measurement
    period up to one full window.  Bandwidths whose local fit is singular are
    promoted to the next larger grid entry; if every entry fails, order-0
    (normalized kernel) weights stand in.
    """
    require_admissible(spec)
    k = scheme.samples_per_window
    if k < order + 1:
        raise ConfigurationError(
            f"samples_per_window={k} cannot support order {order}; need k >= order + 1"
        )
    if grid is None:
        grid = np.geomspace(scheme.measurement_period, scheme.input_period, DEFAULT_GRID_SIZE)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0 or np.any(grid <= 0):
        raise ConfigurationError("bandwidth grid must be nonempty and positive")
    if np.any(np.diff(grid) <= 0):
        raise ConfigurationError("bandwidth grid must be strictly increasing")

    n = grid.size
    left = np.full((n, k + 1), np.nan)
    right = np.full((n, k + 1), np.nan)
    ok = np.zeros(n, dtype=bool)
    for i, h in enumerate(grid):
        try:
            left[i] = filter_coefficients(
                k, scheme.measurement_period, order, h, "left", spec, convention
            )
            right[i] = filter_coefficients(
                k, scheme.measurement_period, order, h, "right", spec, convention
            )
            ok[i] = True
        except BandwidthTooSmallError:
            ok[i] = False

    promoted = [False] * n
    for i in range(n):
        if ok[i]:
            continue
        larger = np.where(ok[i + 1 :])[0]
        promoted[i] = True
        if larger.size:
            j = i + 1 + larger[0]
            left[i] = left[j]
            right[i] = right[j]
        else:
            # No usable bandwidth at this order anywhere above: order-0 weights.
            left[i] = filter_coefficients(
                k, scheme.measurement_period, 0, grid[i], "left", spec, convention
            )
            right[i] = filter_coefficients(
                k, scheme.measurement_period, 0, grid[i], "right", spec, convention
            )

    return FilterBank(
        scheme=scheme,
        order=order,
        kernel=spec,
        grid=grid,
        left=left,
        right=right,
        promoted=tuple(promoted),
    )


def estimate_curvature(A_c: np.ndarray, B_c: np.ndarray, measurement, held_input) -> np.ndarray:
    """Model-based second-derivative estimate ``A_c^2 xi + A_c B_c u``.

    The caller chooses the side by passing the input held on the data window
    being filtered.
    """
    A_c = np.asarray(A_c, dtype=float)
    B_c = np.asarray(B_c, dtype=float)
    xi = np.atleast_1d(np.asarray(measurement, dtype=float))
    u = np.atleast_1d(np.asarray(held_input, dtype=float))
    p = A_c.shape[0]
    if A_c.ndim != 2 or A_c.shape != (p, p):
        raise ConfigurationError(f"A_c must be square, got {A_c.shape}")
    if B_c.shape != (p, u.size):
        raise ConfigurationError(
            f"B_c shape {B_c.shape} inconsistent with state dim {p} and input dim {u.size}"
        )
    if xi.shape != (p,):
        raise ConfigurationError(f"measurement shape {xi.shape} != ({p},)")
    return A_c @ (A_c @ xi) + (A_c @ B_c) @ u


def select_bandwidth(
    noise_variance: float,
    input_period: float,
    samples_per_window: int,
    curvature: float,
    kernel_constant: float,
) -> float:
    """Plug-in bandwidth for an order-1 fit, clamped to [T_s, T_u].

    Evaluates ``(a sigma^2 T_u / (2 |curvature| k))^(1/5)``.  Zero noise
    clamps to the measurement period (no smoothing needed); negligible
    curvature clamps to the full window (no bias to trade against).
    """
    if noise_variance < 0:
        raise ConfigurationError(f"noise variance must be >= 0, got {noise_variance}")
    if samples_per_window < 1:
        raise ConfigurationError("samples_per_window must be >= 1")
    if kernel_constant <= 0:
        raise ConfigurationError(f"kernel constant must be positive, got {kernel_constant}")
    h_min = input_period / samples_per_window
    h_max = input_period
    if noise_variance == 0.0:
        return h_min
    if abs(curvature) < CURVATURE_FLOOR:
        return h_max
    h = (
        kernel_constant
        * noise_variance
        * input_period
        / (2.0 * abs(curvature) * samples_per_window)
    ) ** 0.2
    return float(min(max(h, h_min), h_max))


def quantize_bandwidth(bandwidth: float, bank: FilterBank) -> int:
    """Index of the grid entry nearest to ``bandwidth``; ties pick the smaller."""
    if bank.size == 0:
        raise ConfigurationError("filter bank is empty")
    # argmin returns the first minimum and the grid is ascending, so exact
    # ties already resolve toward the smaller bandwidth.
    return int(np.argmin(np.abs(bank.grid - bandwidth)))


def saturate_estimate(raw, anchor_measurement, bounds: NoiseBounds) -> np.ndarray:
    """Clamp a raw estimate into the noise band around its anchor measurement.

    Component-wise ``min(xi - l, max(xi - s, raw))``.
    """
    raw = np.atleast_1d(np.asarray(raw, dtype=float))
    xi = np.atleast_1d(np.asarray(anchor_measurement, dtype=float))
    if raw.shape != xi.shape or raw.shape != bounds.lower.shape:
        raise ConfigurationError(
            f"shape mismatch: raw {raw.shape}, measurement {xi.shape}, "
            f"bounds {bounds.lower.shape}"
        )
    return np.minimum(xi - bounds.lower, np.maximum(xi - bounds.upper, raw))


class EstimateLedger:
    """Recursive window-boundary estimates, finalized once both sides exist.

    ``raw[m]`` is the unclamped estimate of the state at window boundary m,
    ``saturated[m]`` its noise-band clamp around the boundary measurement.
    After an update that consumed window w, ``time_index == w + 1`` and every
    entry ``m < time_index`` is finalized: later updates never touch it.
    """

    def __init__(self, bounds: NoiseBounds):
        self.bounds = bounds
        self.time_index = 0
        self.raw: list[np.ndarray] = []
        self.saturated: list[np.ndarray] = []
        self.anchors: list[np.ndarray] = []

    def is_finalized(self, m: int) -> bool:
        return m < self.time_index

    def raw_array(self) -> np.ndarray:
        return np.array(self.raw)

    def saturated_array(self) -> np.ndarray:
        return np.array(self.saturated)


def filter_update(
    ledger: EstimateLedger,
    window_samples,
    bank: FilterBank | None,
    left_coeffs,
    right_coeffs,
) -> EstimateLedger:
    """Consume one completed measurement window and advance the ledger.

    ``window_samples`` are the k+1 measurements of the window just finished.
    The left-side fit produces the first estimate of the new boundary state;
    the right-side fit re-estimates the previous boundary state, which is
    averaged half-and-half with its existing left-side estimate (or stored
    directly for the very first window, which has no prior).  Entries older
    than the previous boundary are untouched.
    """
    samples = np.asarray(window_samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if bank is not None:
        expected = bank.scheme.samples_per_window + 1
        if samples.shape[0] != expected:
            raise IncompleteWindowError(
                f"window has {samples.shape[0]} samples, expected {expected}"
            )
    if samples.shape[0] < 2:
        raise IncompleteWindowError("a window needs at least 2 samples")
    if not np.all(np.isfinite(samples)):
        raise IncompleteWindowError("window contains non-finite samples")

    p = samples.shape[1]
    left = _per_component(left_coeffs, p, samples.shape[0])
    right = _per_component(right_coeffs, p, samples.shape[0])

    w = ledger.time_index  # index of the window being consumed
    new_boundary = np.einsum("pj,jp->p", left, samples)
    prev_update = np.einsum("pj,jp->p", right, samples)

    if w == 0:
        # First window: boundary 0 has no prior left-side estimate to average.
        ledger.raw.append(prev_update)
        ledger.anchors.append(samples[0].copy())
        ledger.saturated.append(
            saturate_estimate(prev_update, samples[0], ledger.bounds)
        )
    else:
        averaged = 0.5 * ledger.raw[w] + 0.5 * prev_update
        ledger.raw[w] = averaged
        ledger.saturated[w] = saturate_estimate(averaged, ledger.anchors[w], ledger.bounds)

    ledger.raw.append(new_boundary)
    ledger.anchors.append(samples[-1].copy())
    ledger.saturated.append(
        saturate_estimate(new_boundary, samples[-1], ledger.bounds)
    )
    ledger.time_index = w + 1
    return ledger


@dataclass
class FilterRun:
    """Estimates and bandwidth bookkeeping from a full filtering pass.

    ``bandwidth_left[m, i]`` is the bandwidth used by the left-side fit of
    boundary m for component i (NaN where that side does not exist, i.e.
    m = 0), and likewise ``bandwidth_right`` (NaN at the final boundary).
    """

    scheme: SamplingScheme
    raw: np.ndarray
    estimates: np.ndarray
    anchors: np.ndarray
    bandwidth_left: np.ndarray
    bandwidth_right: np.ndarray

    @property
    def boundary_times(self) -> np.ndarray:
        return np.arange(self.estimates.shape[0]) * self.scheme.input_period

    def to_csv(self, path) -> None:
        p = self.estimates.shape[1]
        header = (
            ["m", "t"]
            + [f"xhat_{i + 1}" for i in range(p)]
            + ["h_used_left", "h_used_right"]
        )
        rows = []
        for m, t in enumerate(self.boundary_times):
            rows.append(
                [
                    m,
                    t,
                    *self.estimates[m],
                    float(np.median(self.bandwidth_left[m])),
                    float(np.median(self.bandwidth_right[m])),
                ]
            )
        csvio.write_csv(path, header, rows)


def run_filter(
    measurements,
    scheme: SamplingScheme,
    bank: FilterBank,
    A_c,
    B_c,
    inputs,
    bounds: NoiseBounds,
    noise_variance=None,
    fixed_bandwidth: float | None = None,
) -> FilterRun:
    """Filter a full two-rate measurement record window by window.

    ``measurements`` has shape (n k + 1, p) with rows at times j T_s; row
    m k is the boundary sample shared by windows m-1 and m.  ``inputs`` has
    one row per window.  For an order-1 bank the bandwidth of each one-sided
    fit is chosen per component by the plug-in rule, using the curvature
    estimate at the fit target with the input held on the window being
    filtered; other orders require ``fixed_bandwidth``.
    """
    measurements = np.asarray(measurements, dtype=float)
    if measurements.ndim == 1:
        measurements = measurements[:, None]
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    k = scheme.samples_per_window
    n_windows = inputs.shape[0]
    if measurements.shape[0] != n_windows * k + 1:
        raise ConfigurationError(
            f"{measurements.shape[0]} samples inconsistent with "
            f"{n_windows} windows of {k} measurements"
        )
    p = measurements.shape[1]
    if bounds.dimension != p:
        raise ConfigurationError(
            f"noise bounds dimension {bounds.dimension} != state dimension {p}"
        )

    if fixed_bandwidth is None and bank.order != 1:
        raise ConfigurationError(
            "the plug-in bandwidth rule covers order 1 only; pass fixed_bandwidth"
        )
    if noise_variance is None:
        variance = bounds.default_variance()
    else:
        variance = np.broadcast_to(np.asarray(noise_variance, dtype=float), (p,)).copy()

    a_const = kernel_constant_a(bank.kernel)
    ledger = EstimateLedger(bounds)
    h_left = np.full((n_windows + 1, p), np.nan)
    h_right = np.full((n_windows + 1, p), np.nan)

    for w in range(n_windows):
        samples = measurements[w * k : (w + 1) * k + 1]
        u_w = inputs[w]
        if fixed_bandwidth is not None:
            idx = quantize_bandwidth(float(fixed_bandwidth), bank)
            left = np.tile(bank.left[idx], (p, 1))
            right = np.tile(bank.right[idx], (p, 1))
            h_left[w + 1, :] = bank.grid[idx]
            h_right[w, :] = bank.grid[idx]
        else:
            curv_right = estimate_curvature(A_c, B_c, samples[0], u_w)
            curv_left = estimate_curvature(A_c, B_c, samples[-1], u_w)
            left = np.empty((p, k + 1))
            right = np.empty((p, k + 1))
            for i in range(p):
                hr = select_bandwidth(
                    variance[i], scheme.input_period, k, curv_right[i], a_const
                )
                hl = select_bandwidth(
                    variance[i], scheme.input_period, k, curv_left[i], a_const
                )
                ir = quantize_bandwidth(hr, bank)
                il = quantize_bandwidth(hl, bank)
                right[i] = bank.right[ir]
                left[i] = bank.left[il]
                h_right[w, i] = bank.grid[ir]
                h_left[w + 1, i] = bank.grid[il]
        filter_update(ledger, samples, bank, left, right)

    return FilterRun(
        scheme=scheme,
        raw=ledger.raw_array(),
        estimates=ledger.saturated_array(),
        anchors=np.array(ledger.anchors),
        bandwidth_left=h_left,
        bandwidth_right=h_right,
    )


def _per_component(coeffs, p: int, length: int) -> np.ndarray:
    arr = np.asarray(coeffs, dtype=float)
    if arr.ndim == 1:
        arr = np.tile(arr, (p, 1))
    if arr.shape != (p, length):
        raise ConfigurationError(
            f"coefficient shape {arr.shape} incompatible with "
            f"{p} components and window length {length}"
        )
    return arr
