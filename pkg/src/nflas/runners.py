"""Experiment drivers behind the CLI subcommands.

Each ``run_*`` takes a validated :class:`ScenarioConfig` and an output
directory, writes CSV/PGM files plus ``report.json`` and returns the
:class:`RunReport`.  Outputs depend only on the config and its seeds.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .beamforming import conjugate_focus_weights, focal_point, gain_field
from .channel import complex_noise
from .config import _CATALOG, ConfigError, ScenarioConfig, echo_config
from .estimators import (DirectPositioner, NumericalError, RisPositioner, dft_profile_schedule,
                         ris_observation, tdoa_localize)
from .fisher import (ArrayLayout, calibrate_snr_ref, mean_observation, peb,
                     peb_bandwidth_sweep, scenario_peb, tdoa_fim)
from .geometry import SPEED_OF_LIGHT
from .io import emit_heatmap, write_table
from .sensing import Scatterer, detect_peaks, matched_filter_image, range_resolution, scatterer_observation


@dataclass
class RunReport:
    scenario: str
    command: str
    outputs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    config: str = ""
    version: str = __version__

    def write(self, out_dir: Path) -> Path:
        missing = [p for p in self.outputs.values() if not (out_dir / p).exists()]
        if missing:
            raise RuntimeError(f"report references missing files: {missing}")
        path = out_dir / "report.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _start(cfg: ScenarioConfig, command: str, out_dir) -> tuple[Path, RunReport]:
    entry = _CATALOG[cfg.scenario]
    if command not in entry.commands:
        raise ConfigError(f"scenario {cfg.scenario} does not support '{command}' "
                          f"(supported: {', '.join(entry.commands)})")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out, RunReport(cfg.scenario, command, config=echo_config(cfg))


def _finish(report: RunReport, out: Path) -> RunReport:
    report.summary = _jsonable(report.summary)
    report.write(out)
    return report


def _heatmaps(report: RunReport, cfg: ScenarioConfig, out: Path, field_, stem: str):
    for fmt in cfg.output.heatmap_formats:
        name = f"{stem}.{fmt}"
        emit_heatmap(field_, out / name, fmt)
        report.outputs[f"{stem}_{fmt}"] = name


def _one_array(cfg: ScenarioConfig, role: str):
    arrays = cfg.arrays_with_role(role)
    if len(arrays) != 1:
        raise ConfigError(f"scenario {cfg.scenario}: expected exactly one array with role '{role}'")
    return arrays[0]


def _layout(cfg: ScenarioConfig):
    cfg.require("ue")
    if cfg.dmimo is not None:
        return cfg.dmimo.layout(cfg.ue.position, cfg.ofdm)
    bs = cfg.arrays_with_role("bs")
    if not bs:
        raise ConfigError(f"scenario {cfg.scenario}: needs [dmimo] or [[arrays]] with role 'bs'")
    if any(a.blocked for a in bs):
        raise ConfigError("arrays.blocked: blockage is not modelled for LOS bounds and estimators")
    return ArrayLayout(tuple(a.build(cfg.ofdm.fc) for a in bs), cfg.ue.position, cfg.ofdm.fc,
                       cfg.ofdm.n_subcarriers)


def _m(cfg: ScenarioConfig):
    return cfg.dmimo.m if cfg.dmimo is not None else None


def _snr_ref(cfg: ScenarioConfig, layout) -> float:
    n = cfg.noise
    if n.calibrate_peb is not None:
        m = n.calibration_m if cfg.dmimo is not None else None
        try:
            snr = calibrate_snr_ref(layout, n.calibrate_peb, n.calibration_bandwidth, m)
        except ValueError as exc:
            raise NumericalError(f"SNR calibration failed: {exc}") from None
    elif n.snr_db is not None:
        snr = 10 ** (n.snr_db / 10)
    else:
        raise ConfigError("noise: set snr_db or calibrate_peb")
    return snr * 10 ** (n.snr_offset_db / 10)


# Beam squint ------------------------------------------------------------------------

def run_beamfocus(cfg: ScenarioConfig, out_dir) -> RunReport:
    """Gain fields per subcarrier and focal points for every beam target."""
    out, report = _start(cfg, "beamfocus", out_dir)
    cfg.require("beam", "region")
    arr_cfg = _one_array(cfg, "bs")
    array = arr_cfg.build(cfg.ofdm.fc)
    mask = arr_cfg.mask()
    grid = cfg.ofdm.grid()
    base = cfg.region.build()
    rows, curves = [], []
    for i, target in enumerate(cfg.beam.targets):
        region = base.anchored_at(target) if cfg.beam.anchor_region else base
        w = conjugate_focus_weights(array, target, grid.fc)
        curve = []
        for n, f in enumerate(grid.frequencies):
            g = gain_field(w, array, region, f, mask)
            try:
                p = focal_point(g)
            except ValueError as exc:
                raise NumericalError(f"target {i}, subcarrier {n}: {exc}") from None
            _heatmaps(report, cfg, out, g, f"gain_t{i}_f{n}")
            rows.append((i, float(f), float(p[0]), float(p[1])))
            curve.append([float(f), float(p[0]), float(p[1])])
        curves.append({"target": list(target), "focal_curve": curve})
    write_table(out / "focal_curve.csv", ["target", "frequency_hz", "x_m", "y_m"], rows)
    report.outputs["focal_curve"] = "focal_curve.csv"
    report.summary = {"targets": curves}
    return _finish(report, out)


# PEB sweep --------------------------------------------------------------------------

def run_peb_sweep(cfg: ScenarioConfig, out_dir) -> RunReport:
    """PEB vs bandwidth per (M, mode) at a fixed reference SNR."""
    out, report = _start(cfg, "peb", out_dir)
    cfg.require("sweep")
    layout = _layout(cfg)
    snr = _snr_ref(cfg, layout)
    m_values = cfg.sweep.m_values if cfg.dmimo is not None else (None,)
    rows, tables = [], {}
    for m in m_values:
        m_label = m if m is not None else layout.arrays()[0].n_elements
        for mode in cfg.sweep.modes:
            table = peb_bandwidth_sweep(layout, cfg.sweep.bandwidths, m, mode, snr)
            tables[f"{mode}/M={m_label}"] = [list(r) for r in table]
            rows += [(m_label, mode, b, p) for b, p in table]
    write_table(out / "peb.csv", ["m", "mode", "bandwidth_hz", "peb_m"], rows)
    report.outputs["peb"] = "peb.csv"
    report.summary = {"snr_ref": snr, "peb": tables}
    return _finish(report, out)


# Monte-Carlo localization -----------------------------------------------------------

def run_localize(cfg: ScenarioConfig, out_dir) -> RunReport:
    """Estimator errors over the configured seeds, compared against the bound."""
    out, report = _start(cfg, "localize", out_dir)
    layout = _layout(cfg)
    est = cfg.estimator
    ue = np.asarray(cfg.ue.position)
    rows = []
    if est.method == "tdoa":
        sigma = cfg.noise.delay_std
        if sigma is None:
            raise ConfigError("noise.delay_std: required for the TDOA estimator")
        bs = np.array([a.reference_center for a in layout.arrays(_m(cfg))])
        tau = np.linalg.norm(ue - bs, axis=1) / SPEED_OF_LIGHT
        true_dtau = np.delete(tau - tau[0], 0)
        bound = peb(tdoa_fim(bs, ue, sigma)).peb
        for seed in cfg.seeds:
            noise = np.random.default_rng(seed).normal(0.0, sigma, true_dtau.size)
            e = tdoa_localize(true_dtau + noise, bs, ue_height=ue[2])
            rows.append((seed, e.position, e))
    else:
        cfg.require("region")
        snr = _snr_ref(cfg, layout)
        scen = layout.scenario(_m(cfg), est.mode, snr)
        grid = cfg.ofdm.grid()
        bound = scenario_peb(scen, grid).peb
        mu = mean_observation(scen, grid)
        pos = DirectPositioner(scen, grid, cfg.region.build(), fine_step=est.fine_step,
                               fine_half_width=est.fine_half_width)
        for seed in cfg.seeds:
            y = mu + complex_noise(mu.shape, 1.0, np.random.default_rng(seed))
            e = pos.estimate(y, refine=est.refine)
            rows.append((seed, e.position, e))
    errors = np.array([np.linalg.norm(p[:2] - ue[:2]) for _, p, _ in rows])
    write_table(out / "trials.csv", ["seed", "x_hat_m", "y_hat_m", "error_m", "converged", "iterations"],
                [(s, float(p[0]), float(p[1]), float(err), int(e.converged), e.iterations)
                 for (s, p, e), err in zip(rows, errors)])
    report.outputs["trials"] = "trials.csv"
    rmse = float(np.sqrt(np.mean(errors ** 2)))
    report.summary = {"method": est.method, "mode": est.mode, "n_trials": len(rows),
                      "rmse_m": rmse, "median_error_m": float(np.median(errors)),
                      "bound_m": bound, "rmse_over_bound": rmse / bound,
                      "n_converged": int(sum(e.converged for _, _, e in rows))}
    return _finish(report, out)


# RIS tracking -----------------------------------------------------------------------

def ris_noise_std(fc: float, snr_db: float) -> float:
    """Noise std for ``snr_db`` on a single-element cascade with 1 m hops."""
    lam = SPEED_OF_LIGHT / fc
    return (lam / (4 * np.pi)) ** 2 * 10 ** (-snr_db / 20)


def run_ris_track(cfg: ScenarioConfig, out_dir) -> RunReport:
    """Per-trajectory-point errors of RIS-only positioning under LOS blockage."""
    out, report = _start(cfg, "ris-track", out_dir)
    cfg.require("ris", "trajectory", "region")
    ris_cfg = _one_array(cfg, "ris")
    ris = ris_cfg.build(cfg.ofdm.fc)
    grid = cfg.ofdm.grid()
    region = cfg.region.build()
    points = cfg.trajectory.build().points()
    if np.any(np.abs(points[:, 2] - region.z) > 1e-12):
        raise ConfigError("trajectory: z must equal region.z")
    bs = cfg.ris.bs_position
    n = cfg.noise
    if n.noise_std is not None:
        sigma = n.noise_std
    elif n.snr_db is not None:
        sigma = ris_noise_std(grid.fc, n.snr_db + n.snr_offset_db)
    else:
        raise ConfigError("noise: set noise_std or snr_db")
    profiles = dft_profile_schedule(ris, bs, grid.fc)
    true_mask = ris_cfg.mask()
    est = cfg.estimator
    pos = RisPositioner(ris, bs, profiles, grid, region, mask=true_mask if cfg.ris.mask_known else None,
                        n_subarrays=est.n_subarrays, fine_step=est.fine_step,
                        fine_half_width=est.fine_half_width)
    rows, errors = [], []
    for seed in cfg.seeds:
        for i, ue in enumerate(points):
            z = ris_observation(ris, bs, ue, profiles, grid, mask=true_mask)
            z = z + complex_noise(z.shape, sigma, np.random.default_rng([seed, i]))
            e = pos.estimate(z, refine=est.refine)
            err = float(np.linalg.norm(e.position[:2] - ue[:2]))
            errors.append(err)
            rows.append((seed, i, float(ue[0]), float(ue[1]), float(e.position[0]),
                         float(e.position[1]), err))
    write_table(out / "track.csv", ["seed", "index", "x_m", "y_m", "x_hat_m", "y_hat_m", "error_m"], rows)
    report.outputs["track"] = "track.csv"
    errors = np.array(errors)
    report.summary = {"noise_std": sigma, "blocked_elements": int(ris.n_elements - (
        ris.n_elements if true_mask is None else true_mask.sum())),
        "median_error_m": float(np.median(errors)), "rmse_m": float(np.sqrt(np.mean(errors ** 2))),
        "p90_error_m": float(np.percentile(errors, 90)), "max_error_m": float(errors.max())}
    return _finish(report, out)


# Bistatic imaging -------------------------------------------------------------------

def run_sense(cfg: ScenarioConfig, out_dir) -> RunReport:
    """Matched-filter image and detected peaks for the configured targets."""
    out, report = _start(cfg, "sense", out_dir)
    cfg.require("targets", "region")
    tx = _one_array(cfg, "tx").build(cfg.ofdm.fc)
    rx = _one_array(cfg, "rx").build(cfg.ofdm.fc)
    grid = cfg.ofdm.grid()
    region = cfg.region.build()
    targets = [Scatterer(t.position, t.complex_reflectivity) for t in cfg.targets]
    y = scatterer_observation(tx, rx, targets, grid, cfg.noise.noise_std or 0.0, cfg.seeds[0])
    image = matched_filter_image(y, tx, rx, grid, region)
    if image.values.max() <= 0:
        raise NumericalError("matched-filter image is identically zero")
    peaks = detect_peaks(image, cfg.estimator.threshold, cfg.estimator.min_separation)
    _heatmaps(report, cfg, out, image, "image")
    write_table(out / "peaks.csv", ["rank", "x_m", "y_m", "value"],
                [(k, float(p[0]), float(p[1]), image.value_at(p)) for k, p in enumerate(peaks)])
    report.outputs["peaks"] = "peaks.csv"
    report.summary = {"n_peaks": len(peaks), "peaks": [p[:2] for p in peaks],
                      "range_resolution_m": range_resolution(grid.bandwidth) if grid.bandwidth > 0 else None}
    return _finish(report, out)


RUNNERS = {
    "beamfocus": run_beamfocus,
    "peb": run_peb_sweep,
    "localize": run_localize,
    "ris-track": run_ris_track,
    "sense": run_sense,
}
