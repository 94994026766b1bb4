"""Acceptance checks, one per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from nflas.beamforming import superlevel_components
from nflas.channel import complex_noise, nf_steering
from nflas.config import load_config
from nflas.estimators import nf_music_spectrum, sample_covariance
from nflas.fisher import equivalent_fim, fim, observation_jacobian
from nflas.geometry import SPEED_OF_LIGHT, Region2D, build_ula
from nflas.io import emit_heatmap, read_heatmap_csv, read_table
from nflas.runners import run_beamfocus, run_localize, run_peb_sweep, run_ris_track, run_sense
from nflas.sensing import range_resolution

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))
from conftest import VERDICTS  # noqa: E402
from test_fisher import finite_difference, random_scenario  # noqa: E402

CONFIGS = HERE.parent / "configs"


def verdict(number, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f} s / {limit:.0f} s]"
    VERDICTS.append(line)
    assert ok, line


def table(path):
    header, rows = read_table(path)
    return [dict(zip(header, r)) for r in rows]


def focal_curve(name, out):
    run_beamfocus(load_config(CONFIGS / f"{name}.toml"), out)
    rows = table(out / "focal_curve.csv")
    curve = {}
    for r in rows:
        curve.setdefault(int(r["target"]), []).append(np.array([float(r["x_m"]), float(r["y_m"])]))
    return curve


def test_criterion_1_squint_focal_points(tmp_path):
    t0 = time.perf_counter()
    curve = focal_curve("beam_squint_128", tmp_path)
    expect = {0: [(1.263, 1.815), (2.610, 2.693)], 1: [(2.661, -0.768), (3.131, -0.783)]}
    dist = [np.linalg.norm(curve[t][k] - expect[t][j]) for t in expect for j, k in ((0, 0), (1, -1))]
    verdict(1, max(dist) <= 0.25, f"max focal-point offset {max(dist):.3f} m (tol 0.25 m)",
            time.perf_counter() - t0, 60)


def test_criterion_2_design_frequency_focus(tmp_path):
    t0 = time.perf_counter()
    worst = 0.0
    for name in ("beam_squint_128", "beam_squint_256", "beam_squint_512_blocked"):
        cfg = load_config(CONFIGS / f"{name}.toml")
        curve = focal_curve(name, tmp_path / name)
        cell = cfg.region.cell
        for t, target in enumerate(cfg.beam.targets):
            mid = curve[t][len(curve[t]) // 2]
            worst = max(worst, np.max(np.abs(mid - np.asarray(target[:2]))) / cell)
    verdict(2, worst <= 1.0, f"worst fc focus offset {worst:.2f} cells (tol 1 cell)", time.perf_counter() - t0, 60)


def test_criterion_3_peb_shapes(tmp_path):
    t0 = time.perf_counter()
    run_peb_sweep(load_config(CONFIGS / "dmimo_peb_sweep.toml"), tmp_path)
    peb = {}
    for r in table(tmp_path / "peb.csv"):
        peb.setdefault((int(r["m"]), r["mode"]), []).append((float(r["bandwidth_hz"]), float(r["peb_m"])))
    curves = {k: np.array(sorted(v)) for k, v in peb.items()}
    nc = [curves[(m, "noncoherent")][:, 1] for m in (4, 8, 16)]
    mono = all(np.all(np.diff(c) <= 1e-12 * c[:-1]) for c in nc)
    ratios = [nc[0][0] / nc[1][0], nc[1][0] / nc[2][0]]
    co = [curves[(m, "coherent")] for m in (4, 8, 16)]
    spread = max(c[(c[:, 0] >= 1e5) & (c[:, 0] <= 1e9), 1].max() / c[(c[:, 0] >= 1e5) & (c[:, 0] <= 1e9), 1].min()
                 for c in co) - 1
    gain = nc[0][0] / co[0][0, 1]
    ok = mono and all(abs(r - 2.0) <= 0.2 for r in ratios) and spread <= 0.2 and gain >= 50
    verdict(3, ok, f"(a) monotone={mono} (b) M-doubling ratios {ratios[0]:.3f}, {ratios[1]:.3f} "
            f"(c) coherent spread {100 * spread:.2f}% (d) coherent gain {gain:.1f}x", time.perf_counter() - t0, 120)


def test_criterion_4_fisher_self_consistency():
    t0 = time.perf_counter()
    jac, psd, schur, checked = 0.0, True, 0.0, 0
    for seed in range(20):
        scen, grid = random_scenario(1000 + seed)
        D = observation_jacobian(scen, grid)
        N = finite_difference(scen, grid)
        jac = max(jac, max(np.linalg.norm(D[:, i] - N[:, i]) / np.linalg.norm(D[:, i]) for i in range(D.shape[1])))
        J = fim(D, 1.0).J
        psd &= bool(np.linalg.eigvalsh(J).min() >= -1e-9 * np.abs(J).max())
        # EFIM via Schur complement equals the inverse of the position block of J^-1
        full = np.linalg.eigvalsh(J)
        if full.min() > 1e-8 * full.max():
            ref = np.linalg.inv(np.linalg.inv(J)[:2, :2])
            checked += 1
            schur = max(schur, np.linalg.norm(equivalent_fim(J) - ref) / np.linalg.norm(ref))
    verdict(4, jac <= 1e-4 and psd and schur <= 1e-9 and checked >= 10,
            f"Jacobian FD error {jac:.1e}, FIM PSD={psd}, Schur identity error {schur:.1e} "
            f"({checked} well-conditioned of 20)",
            time.perf_counter() - t0, 30)


def test_criterion_5_music_range_resolution():
    t0 = time.perf_counter()
    fc = 30e9
    lam = SPEED_OF_LIGHT / fc
    reg = Region2D.from_cell((1, 5), (-1, 1), 0.02)
    counts = {}
    for n in (512, 8):
        arr = build_ula(n, lam / 2)
        A = np.stack([nf_steering(arr, s, fc, "free_space") for s in [(2, 0, 0), (4, 0, 0)]], 1)
        A = A / np.abs(A).mean(axis=0)
        rng = np.random.default_rng(1)
        Y = complex_noise((200, 2), 1.0, rng) @ A.T + complex_noise((200, n), 0.1, rng)
        counts[n] = superlevel_components(nf_music_spectrum(sample_covariance(Y), arr, reg, fc, 2), 0.5)[0]
    verdict(5, counts[512] == 2 and counts[8] == 1,
            f"half-max components: 512 elements -> {counts[512]}, 8 elements -> {counts[8]}",
            time.perf_counter() - t0, 60)


def test_criterion_6_bistatic_imaging(tmp_path):
    t0 = time.perf_counter()
    cfg = load_config(CONFIGS / "bistatic_two_targets.toml")
    run_sense(cfg, tmp_path)
    peaks = [np.array([float(r["x_m"]), float(r["y_m"])]) for r in table(tmp_path / "peaks.csv")]
    cell = cfg.region.cell
    hit = all(any(np.max(np.abs(p - np.asarray(t.position[:2]))) <= cell + 1e-9 for p in peaks) for t in cfg.targets)
    comps = superlevel_components(read_heatmap_csv(tmp_path / "image.csv"), 0.5)[0]
    rr = range_resolution(cfg.ofdm.bandwidth)
    verdict(6, len(peaks) == 2 and hit and comps == 2 and abs(rr - 16.66) <= 0.02,
            f"{len(peaks)} peaks (at truth: {hit}), {comps} half-max components, range resolution {rr:.3f} m",
            time.perf_counter() - t0, 60)


def test_criterion_7_ris_track(tmp_path):
    t0 = time.perf_counter()
    med = {}
    for name in ("ris_track", "ris_track_blocked"):
        med[name] = run_ris_track(load_config(CONFIGS / f"{name}.toml"), tmp_path / name).summary["median_error_m"]
    verdict(7, med["ris_track"] <= 0.3 and med["ris_track_blocked"] > med["ris_track"],
            f"median error {med['ris_track']:.4f} m unblocked, {med['ris_track_blocked']:.4f} m with 50% blocked",
            time.perf_counter() - t0, 300)


def test_criterion_8_ml_efficiency(tmp_path):
    t0 = time.perf_counter()
    s = run_localize(load_config(CONFIGS / "dmimo_coherent_ml.toml"), tmp_path).summary
    verdict(8, s["rmse_over_bound"] <= 3.0,
            f"RMSE {s['rmse_m']:.3e} m over PEB {s['bound_m']:.3e} m = {s['rmse_over_bound']:.3f} (tol 3)",
            time.perf_counter() - t0, 300)


def test_criterion_9_determinism_and_round_trip(tmp_path):
    t0 = time.perf_counter()
    cfg = load_config(HERE / "data" / "es1_sense.toml")
    run_sense(cfg, tmp_path / "a")
    run_sense(cfg, tmp_path / "b")
    identical = all(p.read_bytes() == (tmp_path / "b" / p.name).read_bytes() for p in (tmp_path / "a").glob("*.csv"))
    field = read_heatmap_csv(tmp_path / "a" / "image.csv")
    again = read_heatmap_csv(emit_heatmap(field, tmp_path / "again.csv"))
    rel = np.max(np.abs(again.values - field.values) / np.maximum(np.abs(field.values), 1e-300))
    verdict(9, identical and rel <= 1e-9, f"byte-identical CSVs={identical}, round-trip error {rel:.1e}",
            time.perf_counter() - t0, 10)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
