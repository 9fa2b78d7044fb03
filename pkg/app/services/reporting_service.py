import os
import json
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
from matplotlib import pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from app.errors import ReportingError  # noqa: E402
from app.models import ActuatorFamily, Method, RunMetrics, ScenarioConfig  # noqa: E402
from app.services.controller import wrap_angle  # noqa: E402
from app.services.simulation_service import SimRecord  # noqa: E402

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "t", "x", "y", "psi", "u", "v", "r", "xd", "yd", "psid",
    "tau1", "tau2", "tau3", "taud1", "taud2", "taud3",
    "b1", "b2", "b3", "bhat1", "bhat2", "bhat3",
    "z11", "z12", "z13", "V",
]

PLOT_FILES = [
    "xy_track.svg",
    "control_inputs.svg",
    "pose.svg",
    "errors.svg",
    "body_rates.svg",
    "disturbance.svg",
    "input_rate.svg",
]

RATE_TOLERANCE = 1e-3


@dataclass
class InputBounds:
    """Bound overlay for the input plots; empty lists mean no overlay."""
    upper: List[float]
    lower: List[float]
    rate: List[float]

    @classmethod
    def none(cls) -> "InputBounds":
        return cls(upper=[], lower=[], rate=[])


def input_bounds(cfg: Optional[ScenarioConfig]) -> InputBounds:
    """
    Actuator limits a run is judged against. The unbounded baseline has none.
    """
    if cfg is None or cfg.method == Method.UNBOUNDED:
        return InputBounds.none()
    return _judged_bounds(cfg)


def _judged_bounds(cfg: ScenarioConfig) -> InputBounds:
    # Violations are counted against the scenario's actuator family for every method
    if cfg.actuator_model == ActuatorFamily.MAGRATE:
        tau_M = list(cfg.magrate.tau_M)
        return InputBounds(upper=tau_M, lower=[-v for v in tau_M], rate=list(cfg.magrate.tau_dM))
    return InputBounds(upper=list(cfg.asym.tau_M), lower=[-v for v in cfg.asym.tau_m], rate=[])


def _stack(records: Sequence[SimRecord], attr: str) -> np.ndarray:
    return np.array([np.asarray(getattr(r, attr), dtype=float) for r in records])


def tracking_errors(records: Sequence[SimRecord]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Planar position error norm and wrapped heading error per record.
    """
    eta, eta_d = _stack(records, "eta"), _stack(records, "eta_d")
    position = np.hypot(eta[:, 0] - eta_d[:, 0], eta[:, 1] - eta_d[:, 1])
    heading = wrap_angle(eta[:, 2] - eta_d[:, 2])
    return position, heading


def settle_time(
    times: np.ndarray,
    position: np.ndarray,
    heading: np.ndarray,
    position_threshold: float,
    heading_threshold: float,
) -> Optional[float]:
    """
    First time after which both errors stay inside their thresholds, None if never.
    """
    inside = (position < position_threshold) & (np.abs(heading) < heading_threshold)
    if not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    if outside.size == 0:
        return float(times[0])
    return float(times[outside[-1] + 1])


def count_violations(records: Sequence[SimRecord], cfg: ScenarioConfig) -> int:
    """
    Records whose tau leaves the actuator bounds, plus, for the rate family,
    steps whose finite-difference rate exceeds tau_dM + 1e-3.

    The asymmetric bounds are open, so tau sitting exactly on tau_iM or
    -tau_im counts; the rate family's |tau_i| <= tau_iM is closed.
    """
    bounds = _judged_bounds(cfg)
    tau = _stack(records, "tau")
    upper, lower = np.asarray(bounds.upper), np.asarray(bounds.lower)
    if cfg.actuator_model == ActuatorFamily.MAGRATE:
        outside = np.any((tau > upper) | (tau < lower), axis=1)
    else:
        outside = np.any((tau >= upper) | (tau <= lower), axis=1)
    count = int(np.count_nonzero(outside))
    if bounds.rate and len(records) > 1:
        times = np.array([r.t for r in records])
        rate = np.abs(np.diff(tau, axis=0)) / np.diff(times)[:, None]
        count += int(np.count_nonzero(np.any(rate > np.asarray(bounds.rate) + RATE_TOLERANCE, axis=1)))
    return count


def compute_metrics(records: Sequence[SimRecord], cfg: ScenarioConfig) -> RunMetrics:
    """
    Summarise a completed run.
    """
    if not records:
        raise ValueError("compute_metrics needs at least one record")
    records = sorted(records, key=lambda r: r.t)
    times = np.array([r.t for r in records])
    position, heading = tracking_errors(records)

    tail = max(1, int(np.ceil(len(records) * cfg.output.final_fraction)))
    b, b_hat = _stack(records, "b"), _stack(records, "b_hat")
    settle = settle_time(times, position, heading, cfg.output.settle_position, cfg.output.settle_heading)

    metrics = RunMetrics(
        rmse_position=float(np.sqrt(np.mean(position ** 2))),
        rmse_heading=float(np.sqrt(np.mean(heading ** 2))),
        final_rmse_position=float(np.sqrt(np.mean(position[-tail:] ** 2))),
        final_rmse_heading=float(np.sqrt(np.mean(heading[-tail:] ** 2))),
        max_abs_tau=np.max(np.abs(_stack(records, "tau")), axis=0).tolist(),
        max_abs_tau_rate=np.max(np.abs(_stack(records, "tau_rate")), axis=0).tolist(),
        max_drive_norm=float(max(getattr(r, "drive_norm", 0.0) for r in records)),
        constraint_violation_count=count_violations(records, cfg),
        drive_limit_events=sum(1 for r in records if getattr(r, "drive_limited", False)),
        settle_time_s=settle,
        final_disturbance_error=float(np.linalg.norm(b[-1] - b_hat[-1])),
    )
    if settle is None:
        logger.warning(f"{cfg.name}: tracking error never settled inside the threshold band")
    return metrics


def records_to_frame(records: Sequence[SimRecord]) -> pd.DataFrame:
    data = np.column_stack([
        np.array([r.t for r in records]),
        _stack(records, "eta"),
        _stack(records, "nu"),
        _stack(records, "eta_d"),
        _stack(records, "tau"),
        _stack(records, "tau_rate"),
        _stack(records, "b"),
        _stack(records, "b_hat"),
        _stack(records, "z1"),
        np.array([r.lyapunov for r in records]),
    ])
    return pd.DataFrame(data, columns=CSV_COLUMNS)


def write_csv(records: Sequence[SimRecord], path: str) -> str:
    """
    One header row plus one row per record, 9 significant digits, LF endings.
    """
    frame = records_to_frame(records)
    try:
        frame.to_csv(path, index=False, float_format="%.9g", lineterminator="\n")
    except OSError as e:
        logger.error(f"Error writing CSV {path}: {str(e)}")
        raise ReportingError("failed to write CSV", path) from e
    return path


def read_csv(path: str) -> List[SimRecord]:
    """
    Parse a trace written by ``write_csv`` back into records.
    """
    try:
        frame = pd.read_csv(path, header=0)
    except (OSError, pd.errors.ParserError) as e:
        logger.error(f"Error reading CSV {path}: {str(e)}")
        raise ReportingError("failed to read CSV", path) from e
    if list(frame.columns) != CSV_COLUMNS:
        raise ReportingError(f"unexpected CSV header {list(frame.columns)}", path)

    values = frame.to_numpy(dtype=float)
    return [
        SimRecord(
            t=float(row[0]),
            eta=row[1:4].copy(),
            nu=row[4:7].copy(),
            eta_d=row[7:10].copy(),
            tau=row[10:13].copy(),
            tau_rate=row[13:16].copy(),
            b=row[16:19].copy(),
            b_hat=row[19:22].copy(),
            z1=row[22:25].copy(),
            lyapunov=float(row[25]),
        )
        for row in values
    ]


def _bound_lines(ax, values: List[float], axis: int, label: str) -> None:
    if values:
        ax.axhline(values[axis], color="red", linestyle="--", linewidth=0.8, label=label)


def render_plots(
    records: Sequence[SimRecord],
    out_dir: str,
    bounds: Optional[InputBounds] = None,
    title: str = "",
) -> List[str]:
    """
    Render the seven trace figures as SVG into ``out_dir``.
    """
    if not records:
        raise ValueError("render_plots needs at least one record")
    bounds = bounds or InputBounds.none()
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        logger.error(f"Error creating plot directory {out_dir}: {str(e)}")
        raise ReportingError("failed to create plot directory", out_dir) from e

    t = np.array([r.t for r in records])
    eta, eta_d, nu = _stack(records, "eta"), _stack(records, "eta_d"), _stack(records, "nu")
    tau, tau_rate = _stack(records, "tau"), _stack(records, "tau_rate")
    b, b_hat, z1 = _stack(records, "b"), _stack(records, "b_hat"), _stack(records, "z1")
    drive = _stack(records, "drive")
    has_demand = bool(np.any(drive))
    axes_names = ["surge", "sway", "yaw"]
    figures: Dict[str, plt.Figure] = {}

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(eta_d[:, 1], eta_d[:, 0], "--", label="reference")
    ax.plot(eta[:, 1], eta[:, 0], label="vessel")
    ax.set_xlabel("y [m]")
    ax.set_ylabel("x [m]")
    ax.axis("equal")
    ax.legend()
    figures["xy_track.svg"] = fig

    fig, axs = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    for i, ax in enumerate(axs):
        ax.plot(t, tau[:, i], label=f"tau{i + 1}")
        if has_demand:
            ax.plot(t, drive[:, i], alpha=0.5, linewidth=0.8, label=f"demand{i + 1}")
        _bound_lines(ax, bounds.upper, i, "upper bound")
        _bound_lines(ax, bounds.lower, i, "lower bound")
        ax.set_ylabel(f"{axes_names[i]} [N, Nm]")
        ax.legend(loc="upper right")
    axs[-1].set_xlabel("t [s]")
    figures["control_inputs.svg"] = fig

    fig, axs = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    for i, (ax, label) in enumerate(zip(axs, ["x [m]", "y [m]", "psi [rad]"])):
        ax.plot(t, eta_d[:, i], "--", label="reference")
        ax.plot(t, eta[:, i], label="vessel")
        ax.set_ylabel(label)
        ax.legend(loc="upper right")
    axs[-1].set_xlabel("t [s]")
    figures["pose.svg"] = fig

    fig, axs = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    for i, (ax, label) in enumerate(zip(axs, ["x error [m]", "y error [m]", "psi error [rad]"])):
        ax.plot(t, z1[:, i])
        ax.set_ylabel(label)
    axs[-1].set_xlabel("t [s]")
    figures["errors.svg"] = fig

    fig, axs = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    for i, (ax, label) in enumerate(zip(axs, ["u [m/s]", "v [m/s]", "r [rad/s]"])):
        ax.plot(t, nu[:, i])
        ax.set_ylabel(label)
    axs[-1].set_xlabel("t [s]")
    figures["body_rates.svg"] = fig

    fig, axs = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    for i, ax in enumerate(axs):
        ax.plot(t, b[:, i], label=f"b{i + 1}")
        ax.plot(t, b_hat[:, i], "--", label=f"b_hat{i + 1}")
        ax.set_ylabel(f"{axes_names[i]} [N, Nm]")
        ax.legend(loc="upper right")
    axs[-1].set_xlabel("t [s]")
    figures["disturbance.svg"] = fig

    fig, axs = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    for i, ax in enumerate(axs):
        ax.plot(t, tau_rate[:, i], label=f"tau_dot{i + 1}")
        if bounds.rate:
            ax.axhline(bounds.rate[i], color="red", linestyle="--", linewidth=0.8, label="rate bound")
            ax.axhline(-bounds.rate[i], color="red", linestyle="--", linewidth=0.8)
        ax.set_ylabel(f"{axes_names[i]} rate")
        ax.legend(loc="upper right")
    axs[-1].set_xlabel("t [s]")
    figures["input_rate.svg"] = fig

    paths = []
    for name in PLOT_FILES:
        fig = figures[name]
        if title:
            fig.suptitle(title)
        path = os.path.join(out_dir, name)
        try:
            fig.savefig(path, format="svg")
        except OSError as e:
            logger.error(f"Error writing plot {path}: {str(e)}")
            raise ReportingError("failed to write plot", path) from e
        finally:
            plt.close(fig)
        paths.append(path)
    return paths


class ReportingService:
    """
    Writes the artifacts of a finished run under the configured output directory.
    """
    def __init__(self):
        self.output_dir = os.getenv("SIM_OUTPUT_DIR", "./runs")

    def run_dir(self, cfg: ScenarioConfig, out_dir: Optional[str] = None) -> str:
        return out_dir or os.path.join(self.output_dir, cfg.name)

    def publish(self, records: Sequence[SimRecord], cfg: ScenarioConfig, out_dir: Optional[str] = None) -> RunMetrics:
        """
        Compute metrics and write the CSV, plots and metrics.json the scenario asks for.
        """
        metrics = compute_metrics(records, cfg)
        target = self.run_dir(cfg, out_dir)
        try:
            os.makedirs(target, exist_ok=True)
            with open(os.path.join(target, "metrics.json"), "w") as f:
                json.dump(metrics.dict(), f, indent=2)
        except OSError as e:
            logger.error(f"Error writing metrics to {target}: {str(e)}")
            raise ReportingError("failed to write metrics", target) from e

        if cfg.output.csv:
            write_csv(records, os.path.join(target, "trace.csv"))
        if cfg.output.plots:
            render_plots(records, target, input_bounds(cfg), title=cfg.name)

        logger.info(
            f"{cfg.name}: rmse_position={metrics.rmse_position:.4f} m "
            f"rmse_heading={metrics.rmse_heading:.4f} rad "
            f"violations={metrics.constraint_violation_count} "
            f"settle={metrics.settle_time_s} -> {target}"
        )
        return metrics
