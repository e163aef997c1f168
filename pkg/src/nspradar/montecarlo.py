"""Seeded Monte Carlo sweeps over SNR and P_FA grids.

Each trial runs the full pipeline (channels -> projectors -> selection ->
echo synthesis -> GLRT) for the enabled waveform modes.  Trials own RNG
substreams keyed by (master seed, SNR index, trial id), so results are
independent of execution order and worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import detection, radar, sharing
from .errors import ConfigurationError
from .numerics import complex_normal, rng_substream

MODE_ORTHOGONAL = "orthogonal"
MODE_NSP_PER_BS = "nsp-per-bs"
MODE_NSP_SELECTED = "nsp-selected"
_KNOWN_MODES = (MODE_ORTHOGONAL, MODE_NSP_PER_BS, MODE_NSP_SELECTED)

CHANNEL_FIXED = "fixed-per-experiment"
CHANNEL_REDRAWN = "redrawn-per-trial"

# Substream layout: stream 0 holds the fixed-per-experiment channel draw;
# redraw streams live at _REDRAW_BASE + r; per-trial streams are packed as
# 1 + 4 * ((snr_index << 32) | trial_id) + phase.
_CHANNEL_STREAM = 0
_REDRAW_BASE = 2**62
_PHASE_H1_NOISE = 0
_PHASE_H0_NOISE = 1
_PHASE_CHANNELS = 2

_GAIN_FLOOR_FRAC = 1e-10
_WILSON_Z = 1.959963984540054  # 95%
_CHUNK = 2000


@dataclass(frozen=True)
class ExperimentPlan:
    m: int = 4
    n_bs: int = 2
    k: int = 5
    l: int = 16
    theta_target_deg: float = 10.0
    snr_grid_db: tuple[float, ...] = tuple(float(s) for s in range(-10, 26))
    pfa_list: tuple[float, ...] = (1e-3,)
    trials_per_point: int = 1000
    master_seed: int = 42
    channel_mode: str = CHANNEL_FIXED
    waveform_modes: tuple[str, ...] = (MODE_ORTHOGONAL, MODE_NSP_SELECTED)
    scan: bool = False
    theta_step_deg: float = 0.5
    rank_tol_factor: float | None = None
    wavelength: float = radar.DEFAULT_WAVELENGTH

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "pfa_list", tuple(float(p) for p in self.pfa_list))
        object.__setattr__(self, "waveform_modes", tuple(self.waveform_modes))
        self.validate()

    def validate(self):
        if self.trials_per_point < 1:
            raise ConfigurationError("trials_per_point must be >= 1")
        if not self.snr_grid_db:
            raise ConfigurationError("snr grid must be non-empty")
        if not self.pfa_list or not all(0 < p < 1 for p in self.pfa_list):
            raise ConfigurationError("pfa values must lie in (0, 1)")
        if self.l < self.m:
            raise ConfigurationError(f"need l >= m, got l={self.l}, m={self.m}")
        if self.channel_mode not in (CHANNEL_FIXED, CHANNEL_REDRAWN):
            raise ConfigurationError(f"unknown channel_mode {self.channel_mode!r}")
        unknown = [w for w in self.waveform_modes if w not in _KNOWN_MODES]
        if unknown or not self.waveform_modes:
            raise ConfigurationError(f"unknown waveform modes: {unknown}")
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if not 0 < self.theta_step_deg <= 180:
            raise ConfigurationError("theta_step_deg must lie in (0, 180]")
        if abs(self.theta_target_deg) > 90:
            raise ConfigurationError("theta_target_deg must lie in [-90, 90]")

    def geometry(self) -> radar.ArrayGeometry:
        return radar.ArrayGeometry(m=self.m, wavelength=self.wavelength)

    @property
    def theta_target(self) -> float:
        return math.radians(self.theta_target_deg)

    def theta_grid(self) -> np.ndarray:
        return np.deg2rad(np.arange(-90.0, 90.0 + self.theta_step_deg / 2,
                                     self.theta_step_deg))


@dataclass(frozen=True)
class CurvePoint:
    snr_db: float
    pfa: float
    trials: int
    detections: int
    false_alarms: int
    pd_emp: float
    ci_lo: float
    ci_hi: float
    pd_theory_paper: float
    pd_theory_calibrated: float
    degenerate: int = 0


@dataclass(frozen=True)
class DetectionCurve:
    label: str          # "orthogonal", "nsp-bs<N>", "nsp-selected"
    bs_id: str          # "orthogonal", "<N>", "selected"
    points: tuple[CurvePoint, ...]


@dataclass(frozen=True)
class ExperimentResult:
    plan: ExperimentPlan
    curves: tuple[DetectionCurve, ...]
    degenerate_trials: int
    selection: sharing.ChannelSelection | None  # fixed-channel runs only


@dataclass(frozen=True)
class TrialOutcome:
    statistic_h1: float
    statistic_h0: float
    detected_h1: bool
    detected_h0: bool
    theta_ml: float
    degenerate: bool


@dataclass(frozen=True)
class SnrGapReport:
    target_pd: float
    pfa: float
    source: str
    snr_at_target: dict
    gap_db: dict


def _stream_id(snr_index: int, trial_id: int, phase: int) -> int:
    return 1 + 4 * ((snr_index << 32) | trial_id) + phase


def wilson_interval(successes: int, n: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial rate."""
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class _ModeSetup:
    label: str
    bs_id: str
    x_tx: np.ndarray
    corr: np.ndarray
    gain: float           # c = a^H R^T a at the target angle
    rho_paper_unit: float  # noncentrality at SNR = 1
    rho_cal_unit: float


def _mode_labels(plan: ExperimentPlan) -> list[tuple[str, str]]:
    """Expanded (label, bs_id) pairs in deterministic output order."""
    out = []
    for mode in plan.waveform_modes:
        if mode == MODE_ORTHOGONAL:
            out.append((MODE_ORTHOGONAL, "orthogonal"))
        elif mode == MODE_NSP_PER_BS:
            out.extend((f"nsp-bs{i}", str(i)) for i in range(1, plan.k + 1))
        else:
            out.append((MODE_NSP_SELECTED, "selected"))
    return out


def _build_modes(
    plan: ExperimentPlan,
    channels: list[sharing.InterferenceChannel],
) -> tuple[list[_ModeSetup], sharing.ChannelSelection]:
    geom = plan.geometry()
    a = radar.steering_vector(geom, plan.theta_target)
    x = radar.orthogonal_waveforms(plan.m, plan.l)
    projs = [sharing.projection_matrix(ch, plan.rank_tol_factor) for ch in channels]
    selection = sharing.select_channel(projs, x)
    projected = {pr.bs_id: sharing.project_waveform(pr, x) for pr in projs}

    def setup(label, bs_id, x_tx, corr):
        gain = detection.direction_gain(a, corr)
        if label == MODE_ORTHOGONAL:
            rho_paper = detection.noncentrality_orthogonal(plan.m, 1.0, 1.0)
        else:
            rho_paper = detection.noncentrality_nsp(a, corr, 1.0, 1.0)
        rho_cal = detection.calibrated_noncentrality(a, corr, plan.m, 1.0, 1.0)
        return _ModeSetup(label, bs_id, x_tx, corr, gain, rho_paper, rho_cal)

    modes = []
    for label, bs_id in _mode_labels(plan):
        if label == MODE_ORTHOGONAL:
            modes.append(setup(label, bs_id, x, np.eye(plan.m, dtype=complex)))
        elif label == MODE_NSP_SELECTED:
            pw = projected[selection.selected]
            modes.append(setup(label, bs_id, pw.samples, pw.correlation))
        else:
            pw = projected[int(bs_id)]
            modes.append(setup(label, bs_id, pw.samples, pw.correlation))
    return modes, selection


def _trial_channels(plan: ExperimentPlan, snr_index: int, trial_id: int):
    rng = rng_substream(
        plan.master_seed, _stream_id(snr_index, trial_id, _PHASE_CHANNELS)
    )
    return sharing.draw_channels(plan.k, plan.n_bs, plan.m, rng)


def _fixed_channels(plan: ExperimentPlan):
    rng = rng_substream(plan.master_seed, _CHANNEL_STREAM)
    return sharing.draw_channels(plan.k, plan.n_bs, plan.m, rng)


def _noise_batch(plan: ExperimentPlan, snr_index: int, trial_ids, phase: int):
    out = np.empty((len(trial_ids), plan.m, plan.l), dtype=complex)
    for i, t in enumerate(trial_ids):
        rng = rng_substream(plan.master_seed, _stream_id(snr_index, int(t), phase))
        out[i] = complex_normal(rng, (plan.m, plan.l))
    return out


class _PointEngine:
    """Vectorized statistic evaluation for one set of mode setups.

    The factored expressions below are exact rewrites of
    glrt_statistic(sufficient_statistic(Y, X_tx), ...) for Y = alpha A X_tx + N.
    """

    def __init__(self, plan: ExperimentPlan, modes: list[_ModeSetup]):
        self.plan = plan
        geom = plan.geometry()
        self.a = radar.steering_vector(geom, plan.theta_target)
        self.a_mat = radar.transmit_receive_matrix(self.a)
        self.modes = modes
        self.floor = _GAIN_FLOOR_FRAC * plan.m
        if plan.scan:
            grid = plan.theta_grid()
            self.grid = grid
            self.a_grid = np.stack(
                [radar.steering_vector(geom, t) for t in grid], axis=1
            )
        self._per_mode = [self._prepare(ms) for ms in modes]

    def _prepare(self, ms: _ModeSetup):
        if not self.plan.scan:
            if ms.gain < self.floor:
                return None
            w = ms.x_tx.conj().T @ self.a.conj()                 # (L,)
            sig = complex(self.a.conj() @ (self.a_mat @ ms.x_tx) @ w)
            return {"w": w, "sig": sig, "c": ms.gain}
        wmat = ms.x_tx.conj().T @ self.a_grid.conj()             # (L, G)
        c_g = np.real(
            np.einsum("mg,mn,ng->g", self.a_grid.conj(), ms.corr.T, self.a_grid)
        )
        valid = c_g >= self.floor
        if not np.any(valid):
            return None
        sig_g = np.einsum(
            "mg,mg->g", self.a_grid.conj(), (self.a_mat @ ms.x_tx) @ wmat
        )
        return {"wmat": wmat, "sig_g": sig_g, "c_g": c_g, "valid": valid}

    def statistics(self, mode_index: int, noise: np.ndarray, alpha: float):
        """Scaled GLRT statistic per trial (scan max or at the true angle);
        None when the mode is fully degenerate."""
        prep = self._per_mode[mode_index]
        if prep is None:
            return None
        m = self.plan.m
        if not self.plan.scan:
            g_noise = np.einsum("m,tml,l->t", self.a.conj(), noise, prep["w"])
            g = alpha * prep["sig"] + g_noise
            return 2.0 * np.abs(g) ** 2 / (m * prep["c"])
        proj = noise @ prep["wmat"]                              # (T, M, G)
        g_noise = np.einsum("mg,tmg->tg", self.a_grid.conj(), proj)
        g = alpha * prep["sig_g"][None, :] + g_noise
        stats = np.full(g.shape, -np.inf)
        valid = prep["valid"]
        stats[:, valid] = 2.0 * np.abs(g[:, valid]) ** 2 / (m * prep["c_g"][valid])
        return stats.max(axis=1)


def _run_point(plan: ExperimentPlan, snr_index: int) -> dict:
    """All trials for one SNR grid point; returns per-mode tallies."""
    snr = 10 ** (plan.snr_grid_db[snr_index] / 10)
    alpha = math.sqrt(snr)
    thresholds = {p: detection.chi2_central_inv(1 - p) for p in plan.pfa_list}
    labels = _mode_labels(plan)
    tally = {
        label: {
            "detections": {p: 0 for p in plan.pfa_list},
            "false_alarms": {p: 0 for p in plan.pfa_list},
            "degenerate": 0,
            "rho_paper_sum": 0.0,
            "rho_cal_sum": 0.0,
        }
        for label, _ in labels
    }

    fixed = plan.channel_mode == CHANNEL_FIXED
    if fixed:
        modes, _ = _build_modes(plan, _fixed_channels(plan))
        engine = _PointEngine(plan, modes)

    trials = plan.trials_per_point
    for start in range(0, trials, _CHUNK):
        ids = range(start, min(start + _CHUNK, trials))
        if not fixed:
            # Channels redrawn per trial: no batch structure to exploit.
            for t in ids:
                modes, _ = _build_modes(plan, _trial_channels(plan, snr_index, t))
                engine = _PointEngine(plan, modes)
                n1 = _noise_batch(plan, snr_index, [t], _PHASE_H1_NOISE)
                n0 = _noise_batch(plan, snr_index, [t], _PHASE_H0_NOISE)
                _tally_chunk(plan, engine, modes, tally, thresholds, alpha, n1, n0)
            continue
        n1 = _noise_batch(plan, snr_index, ids, _PHASE_H1_NOISE)
        n0 = _noise_batch(plan, snr_index, ids, _PHASE_H0_NOISE)
        _tally_chunk(plan, engine, modes, tally, thresholds, alpha, n1, n0)
    return {"snr_index": snr_index, "snr": snr, "tally": tally}


def _tally_chunk(plan, engine, modes, tally, thresholds, alpha, n1, n0):
    n_trials = n1.shape[0]
    for mi, ms in enumerate(modes):
        rec = tally[ms.label]
        rec["rho_paper_sum"] += ms.rho_paper_unit * alpha * alpha * n_trials
        rec["rho_cal_sum"] += ms.rho_cal_unit * alpha * alpha * n_trials
        s1 = engine.statistics(mi, n1, alpha)
        s0 = engine.statistics(mi, n0, 0.0)
        if s1 is None:
            rec["degenerate"] += n_trials
            continue
        for p, delta in thresholds.items():
            rec["detections"][p] += int(np.sum(s1 > delta))
            rec["false_alarms"][p] += int(np.sum(s0 > delta))


def run_trial(plan: ExperimentPlan, snr_db: float, pfa: float, trial_id: int) -> dict:
    """Single-trial reference path through the explicit pipeline.

    Returns {mode label: TrialOutcome}; deterministic in (plan, snr_db, trial_id).
    """
    if snr_db not in plan.snr_grid_db:
        raise ConfigurationError(f"snr_db {snr_db} not on the plan's grid")
    if pfa not in plan.pfa_list:
        raise ConfigurationError(f"pfa {pfa} not in the plan's list")
    snr_index = plan.snr_grid_db.index(snr_db)
    geom = plan.geometry()
    alpha = math.sqrt(10 ** (snr_db / 10))
    if plan.channel_mode == CHANNEL_FIXED:
        channels = _fixed_channels(plan)
    else:
        channels = _trial_channels(plan, snr_index, trial_id)
    modes, _ = _build_modes(plan, channels)
    cfg = detection.DetectorConfig(pfa=pfa, theta_grid=plan.theta_grid())
    threshold = detection.chi2_central_inv(1 - pfa)

    out = {}
    for ms in modes:
        scn1 = radar.TargetScenario(theta=plan.theta_target, alpha=alpha)
        scn0 = radar.TargetScenario(theta=plan.theta_target, alpha=0.0)
        rng1 = rng_substream(
            plan.master_seed, _stream_id(snr_index, trial_id, _PHASE_H1_NOISE)
        )
        rng0 = rng_substream(
            plan.master_seed, _stream_id(snr_index, trial_id, _PHASE_H0_NOISE)
        )
        y1 = radar.synthesize_echo(scn1, geom, ms.x_tx, rng1)
        y0 = radar.synthesize_echo(scn0, geom, ms.x_tx, rng0)
        e1 = detection.sufficient_statistic(y1, ms.x_tx)
        e0 = detection.sufficient_statistic(y0, ms.x_tx)
        if plan.scan:
            r1 = detection.glrt_scan(e1, ms.corr, geom, cfg, 1.0)
            r0 = detection.glrt_scan(e0, ms.corr, geom, cfg, 1.0)
            out[ms.label] = TrialOutcome(
                statistic_h1=r1.statistic, statistic_h0=r0.statistic,
                detected_h1=r1.detected, detected_h0=r0.detected,
                theta_ml=r1.theta_ml, degenerate=r1.degenerate,
            )
        else:
            if ms.gain < _GAIN_FLOOR_FRAC * plan.m:
                out[ms.label] = TrialOutcome(0.0, 0.0, False, False,
                                             plan.theta_target, True)
                continue
            s1 = detection.glrt_statistic(e1, ms.corr, geom, plan.theta_target, 1.0)
            s0 = detection.glrt_statistic(e0, ms.corr, geom, plan.theta_target, 1.0)
            out[ms.label] = TrialOutcome(
                statistic_h1=s1, statistic_h0=s0,
                detected_h1=s1 > threshold, detected_h0=s0 > threshold,
                theta_ml=plan.theta_target, degenerate=False,
            )
    return out


def run_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentResult:
    """Full sweep over (snr, pfa, trial); deterministic for a fixed seed
    regardless of worker count."""
    indices = list(range(len(plan.snr_grid_db)))
    if workers > 1 and len(indices) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            payloads = list(pool.map(_run_point, [plan] * len(indices), indices))
    else:
        payloads = [_run_point(plan, si) for si in indices]
    payloads.sort(key=lambda d: d["snr_index"])

    selection = None
    if plan.channel_mode == CHANNEL_FIXED:
        _, selection = _build_modes(plan, _fixed_channels(plan))

    trials = plan.trials_per_point
    curves = []
    total_degenerate = 0
    for label, bs_id in _mode_labels(plan):
        points = []
        for payload in payloads:
            si = payload["snr_index"]
            rec = payload["tally"][label]
            rho_paper = rec["rho_paper_sum"] / trials
            rho_cal = rec["rho_cal_sum"] / trials
            total_degenerate += rec["degenerate"]
            for p in plan.pfa_list:
                det = rec["detections"][p]
                pd_emp = det / trials
                lo, hi = wilson_interval(det, trials)
                points.append(CurvePoint(
                    snr_db=plan.snr_grid_db[si], pfa=p, trials=trials,
                    detections=det, false_alarms=rec["false_alarms"][p],
                    pd_emp=pd_emp, ci_lo=lo, ci_hi=hi,
                    pd_theory_paper=detection.theoretical_pd(rho_paper, p),
                    pd_theory_calibrated=detection.theoretical_pd(rho_cal, p),
                    degenerate=rec["degenerate"],
                ))
        curves.append(DetectionCurve(label=label, bs_id=bs_id, points=tuple(points)))
    return ExperimentResult(
        plan=plan, curves=tuple(curves),
        degenerate_trials=total_degenerate, selection=selection,
    )


def _isotonic(y: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators fit, nondecreasing, equal weights."""
    vals = list(y.astype(float))
    weights = [1.0] * len(vals)
    i = 0
    while i < len(vals) - 1:
        if vals[i] > vals[i + 1] + 1e-15:
            merged = (vals[i] * weights[i] + vals[i + 1] * weights[i + 1]) / (
                weights[i] + weights[i + 1]
            )
            vals[i] = merged
            weights[i] += weights[i + 1]
            del vals[i + 1], weights[i + 1]
            if i > 0:
                i -= 1
        else:
            i += 1
    return np.repeat(vals, [int(w) for w in weights])


def _snr_at_target(snr_db: np.ndarray, pd: np.ndarray, target: float):
    pd = _isotonic(pd)
    if pd[-1] < target:
        return None
    if pd[0] >= target:
        return float(snr_db[0])
    j = int(np.searchsorted(pd, target))
    x0, x1 = snr_db[j - 1], snr_db[j]
    y0, y1 = pd[j - 1], pd[j]
    if y1 == y0:
        return float(x1)
    return float(x0 + (target - y0) * (x1 - x0) / (y1 - y0))


def snr_gap(
    curves,
    target_pd: float = 0.9,
    pfa: float | None = None,
    source: str = "emp",
) -> SnrGapReport:
    """SNR (dB) each mode needs to reach the target detection probability,
    and the gap versus the orthogonal curve.

    source selects which probability the interpolation reads: "emp",
    "theory_paper", or "theory_calibrated".  Modes that never reach the
    target report None.
    """
    attr = {
        "emp": "pd_emp",
        "theory_paper": "pd_theory_paper",
        "theory_calibrated": "pd_theory_calibrated",
    }[source]
    if pfa is None:
        pfa = curves[0].points[0].pfa
    snr_at, gaps = {}, {}
    for curve in curves:
        pts = [pt for pt in curve.points if pt.pfa == pfa]
        snr_db = np.array([pt.snr_db for pt in pts])
        pd = np.array([getattr(pt, attr) for pt in pts])
        snr_at[curve.label] = _snr_at_target(snr_db, pd, target_pd)
    base = snr_at.get(MODE_ORTHOGONAL)
    for label, val in snr_at.items():
        if val is None or base is None:
            gaps[label] = None
        else:
            gaps[label] = val - base
    return SnrGapReport(
        target_pd=target_pd, pfa=pfa, source=source,
        snr_at_target=snr_at, gap_db=gaps,
    )


def mean_selected_gap_db(
    plan: ExperimentPlan,
    n_redraws: int = 50,
    convention: str = "paper",
) -> float:
    """Mean SNR gap of the selected-BS projected waveform over independent
    channel redraws, from the closed-form gap at the target angle."""
    geom = plan.geometry()
    a = radar.steering_vector(geom, plan.theta_target)
    x = radar.orthogonal_waveforms(plan.m, plan.l)
    gaps = []
    for r in range(n_redraws):
        rng = rng_substream(plan.master_seed, _REDRAW_BASE + r)
        channels = sharing.draw_channels(plan.k, plan.n_bs, plan.m, rng)
        projs = [sharing.projection_matrix(ch, plan.rank_tol_factor) for ch in channels]
        sel = sharing.select_channel(projs, x)
        pw = sharing.project_waveform(projs[sel.selected - 1], x)
        gain = detection.direction_gain(a, pw.correlation)
        gaps.append(detection.theory_snr_gap_db(plan.m, gain, convention))
    return float(np.mean(gaps))


def make_plan(**kwargs) -> ExperimentPlan:
    """Convenience constructor used by the CLI and tests."""
    return ExperimentPlan(**kwargs)


def with_overrides(plan: ExperimentPlan, **kwargs) -> ExperimentPlan:
    return replace(plan, **kwargs)
