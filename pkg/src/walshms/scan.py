"""Parameter sweeps, suppression-order fits and high-fidelity window widths."""
from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import gate_model as gm
from . import oracle
from .errors import DomainError
from .gate_model import GateParams

log = logging.getLogger(__name__)

AXES = ("delta", "delta_error", "nbar", "gate_time")
ENGINES = ("analytic", "oracle", "both")
OBSERVABLES = ("spin_revival", "bell_fidelity", "alpha_magnitude")

PAPER_OMEGA = 2 * math.pi * 1.47e3
FIT_WINDOW = (1e-12, 1e-3)


@dataclass(frozen=True)
class ScanSpec:
    base: GateParams
    axis: str
    grid: tuple[float, ...]
    engine: str = "analytic"
    observable: str = "spin_revival"
    oracle_config: oracle.OracleConfig = field(default_factory=oracle.OracleConfig)
    include_error_in_phase: bool = False
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if self.axis not in AXES:
            raise DomainError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.engine not in ENGINES:
            raise DomainError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.observable not in OBSERVABLES:
            raise DomainError(f"observable must be one of {OBSERVABLES}, got {self.observable!r}")
        if not self.grid:
            raise DomainError("scan grid is empty")
        steps = np.diff(self.grid)
        if len(steps) and not (np.all(steps > 0) or np.all(steps < 0)):
            raise DomainError("scan grid must be strictly monotone")

    def point(self, value: float) -> GateParams:
        if self.axis == "nbar":
            return self.base.replace(nbar=value)
        return self.base.replace(**{self.axis: value})


@dataclass(frozen=True)
class ScanRow:
    axis_value: float
    analytic: float | None
    oracle: float | None
    status: str = "ok"


@dataclass(frozen=True)
class ScanResult:
    spec: ScanSpec
    rows: tuple[ScanRow, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def failed(self) -> int:
        return sum(r.status != "ok" for r in self.rows)


def _analytic_value(params: GateParams, spec: ScanSpec) -> float:
    if spec.observable == "spin_revival":
        return gm.fidelity_one_ion(params)
    if spec.observable == "bell_fidelity":
        return gm.fidelity_two_ion(params, include_error=spec.include_error_in_phase)
    return abs(gm.alpha_k(params))


def _oracle_value(params: GateParams, spec: ScanSpec) -> float:
    cfg = spec.oracle_config
    if spec.observable == "alpha_magnitude":
        return abs(oracle.displacement_from_oracle(params, cfg))
    if spec.observable == "bell_fidelity" and params.ion_count != 2:
        raise DomainError("bell_fidelity requires ion_count == 2")
    if spec.observable == "spin_revival" and params.ion_count != 1:
        raise DomainError("spin_revival is defined for ion_count == 1")
    return oracle.thermal_fidelity(params, cfg, spec.observable)


def _describe(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}".replace("\n", " ")


def _evaluate(spec: ScanSpec, value: float) -> ScanRow:
    errors = []
    analytic = oracle_val = None
    try:
        params = spec.point(value)
    except DomainError as exc:
        return ScanRow(value, None, None, "error: " + _describe(exc))
    if spec.engine in ("analytic", "both"):
        try:
            analytic = float(_analytic_value(params, spec))
        except Exception as exc:  # recorded per point, scan continues
            errors.append("analytic " + _describe(exc))
    if spec.engine in ("oracle", "both"):
        try:
            oracle_val = float(_oracle_value(params, spec))
        except Exception as exc:
            errors.append("oracle " + _describe(exc))
    status = "ok" if not errors else "error: " + "; ".join(errors)
    return ScanRow(value, analytic, oracle_val, status)


def thread_count() -> int:
    raw = os.environ.get("WALSHMS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_scan(spec: ScanSpec, threads: int | None = None) -> ScanResult:
    """Evaluate the observable at every grid point; rows come back in grid order."""
    threads = thread_count() if threads is None else max(1, threads)
    started = time.time()
    if threads == 1 or len(spec.grid) == 1:
        rows = [_evaluate(spec, v) for v in spec.grid]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda v: _evaluate(spec, v), spec.grid))
    meta = {
        "version": __version__,
        "backend": spec.oracle_config.backend or oracle._kernels.default_backend(),
        "oracle_tol": spec.oracle_config.tol,
        "thermal_weight_cutoff": spec.oracle_config.thermal_weight_cutoff,
        "timestamp": started,
        "elapsed": time.time() - started,
    }
    return ScanResult(spec=spec, rows=tuple(rows), metadata=meta)


# ---------------------------------------------------------------- analysis


def default_slope_grid(gate_time: float = 1.0, num: int = 32) -> np.ndarray:
    return np.logspace(-3, -1, num) / gate_time


def _check_slope_grid(grid: np.ndarray, gate_time: float) -> None:
    if grid.size < 8:
        raise DomainError("suppression fit needs at least 8 grid points")
    if np.any(grid <= 0):
        raise DomainError("delta_error grid must be positive")
    scaled = grid * gate_time
    if scaled.min() < 1e-3 * (1 - 1e-9) or scaled.max() > 1e-1 * (1 + 1e-9):
        raise DomainError("delta_error * gate_time must lie in [1e-3, 1e-1]")
    ratios = np.diff(np.log(grid))
    if not np.allclose(ratios, ratios[0], rtol=1e-6, atol=0):
        raise DomainError("delta_error grid must be log-spaced")


def suppression_slope(n: int, delta_error_grid=None, *, gate_time: float = 1.0,
                      nbar: float = 0.0, omega: float | None = None) -> tuple[float, float]:
    """Log-log slope of single-ion infidelity versus detuning error.

    Evaluated for W(2^n - 1) at its closure detuning 2^(n+1) pi / t_g.
    Only points with infidelity inside [1e-12, 1e-3] enter the fit. The drive
    strength only shifts the curve vertically; by default it is chosen so
    the largest grid point sits at the top of that window.

    Returns ``(slope, r_squared)``.
    """
    if n < 0:
        raise DomainError("order n must be non-negative")
    grid = default_slope_grid(gate_time) if delta_error_grid is None else np.asarray(delta_error_grid, float)
    grid = np.sort(grid)
    _check_slope_grid(grid, gate_time)
    base = GateParams(
        omega=1.0, delta=2 ** (n + 1) * math.pi / gate_time, gate_time=gate_time,
        nbar=nbar, walsh_index=2**n - 1, ion_count=1,
    )
    if omega is None:
        unit = abs(2 * gm.alpha_k(base.replace(delta_error=grid[-1]))) ** 2 * (nbar + 0.5)
        if unit == 0:
            raise DomainError("residual displacement vanishes on the grid")
        target = -math.log1p(-2 * FIT_WINDOW[1])
        omega = math.sqrt(target / unit)
    base = base.replace(omega=omega)
    infid = np.array([gm.infidelity_one_ion(base.replace(delta_error=d)) for d in grid])
    lo, hi = FIT_WINDOW
    keep = (infid >= lo) & (infid <= hi * (1 + 1e-9))
    if keep.sum() < 4:
        raise DomainError(f"only {int(keep.sum())} grid points inside the fit window {FIT_WINDOW}")
    x, y = np.log(grid[keep]), np.log(infid[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def _window_edge(f, x0, step, threshold, limit):
    """Walk from x0 in steps until f drops below threshold; bisect the crossing."""
    good = x0
    bad = None
    x = x0
    while abs(x - x0) < limit:
        x = x + step
        if f(x) < threshold:
            bad = x
            break
        good = x
    if bad is None:
        return good
    for _ in range(200):
        mid = 0.5 * (good + bad)
        if f(mid) >= threshold:
            good = mid
        else:
            bad = mid
        scale = max(abs(good - x0), 1e-300)
        if abs(bad - good) <= 1e-7 * scale:
            break
    return good


def fidelity_window(n: int, threshold: float = 0.99, nbar: float = 0.0, *,
                    omega: float = PAPER_OMEGA, include_error: bool = False,
                    step: float = 1e-3) -> float:
    """Width, in units of delta t_g / 2 pi, of the high-fidelity region.

    The two-ion gate is the planned W(2^n - 1) gate; the detuning is swept
    around its closure value until ``fidelity_two_ion`` first drops below
    ``threshold`` on each side.
    """
    if not 0.9 <= threshold < 1:
        raise DomainError("threshold must lie in [0.9, 1)")
    base = gm.planned_params(n, omega, nbar=nbar)
    tg = base.gate_time
    x0 = 2.0**n

    def f(x):
        if x <= 0:
            return -math.inf
        return gm.fidelity_two_ion(base.replace(delta=2 * math.pi * x / tg), include_error)

    if f(x0) < threshold:
        log.warning("fidelity %.6g at the planned point never reaches threshold %g", f(x0), threshold)
        return 0.0
    right = _window_edge(f, x0, step, threshold, x0)
    left = _window_edge(f, x0, -step, threshold, x0)
    return right - left


# ---------------------------------------------------------------- figure presets

FIG2_GATE_TIME = 100e-6
FIG2_OMEGA = math.pi / FIG2_GATE_TIME  # planned W(0) gate at 100 us


def fig2_specs(nbar: float = 7.0, num: int = 801, engine: str = "analytic") -> dict[str, ScanSpec]:
    """Single-ion spin revival versus detuning for W(0), W(1), W(3).

    Each sequence runs for its planned duration 2^(n/2) x 100 us and the
    detuning grid spans delta t_g / 2 pi in [0, 4] with t_g the sequence's own
    duration.
    """
    specs = {}
    for tag, n in (("a", 0), ("b", 1), ("c", 2)):
        tg = 2 ** (n / 2) * FIG2_GATE_TIME
        x = np.linspace(0.0, 4.0, num)
        base = GateParams(omega=FIG2_OMEGA, delta=0.0, gate_time=tg, nbar=nbar,
                          walsh_index=2**n - 1, ion_count=1)
        specs[tag] = ScanSpec(base=base, axis="delta", grid=tuple(2 * math.pi * x / tg),
                              engine=engine, observable="spin_revival", label=f"W({2**n - 1})")
    return specs


def fig3d_specs(span: float = 1.5, num: int = 601, omega: float = PAPER_OMEGA) -> list[ScanSpec]:
    """Two-ion Bell fidelity around each planned closure point, n = 0..4.

    Alignment: every curve is centred on its own closure detuning, so the
    natural abscissa is (delta t_g / 2 pi) - 2^n.
    """
    out = []
    for n in range(5):
        base = gm.planned_params(n, omega)
        tg = base.gate_time
        u = np.linspace(-span, span, num)
        x = 2.0**n + u
        x = x[x > 0]
        out.append(ScanSpec(base=base, axis="delta", grid=tuple(2 * math.pi * x / tg),
                            observable="bell_fidelity", label=f"W({2**n - 1})"))
    return out
