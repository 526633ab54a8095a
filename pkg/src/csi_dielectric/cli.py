"""Command-line pipeline: simulate -> calibrate -> estimate -> evaluate.

All randomness flows through explicit seeds; identical inputs and seeds
produce byte-identical outputs. Subcarrier positions are 1-based on the
grid's index list (position 16 is the carrier adjacent to the center
frequency on the default grid).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    CalibrationError,
    CalibrationSample,
    fit_coefficients,
    load_profile,
    save_profile,
)
from .estimator import estimate_per_subcarrier, relative_errors
from .materials import REFERENCE_MATERIALS
from .preprocess import DEFAULT_C_DB, DEFAULT_WINDOW_S, RescaleConfig, preprocess_trace, select_subcarrier
from .simulator import SimScenario, default_scenario_coefficients, synth_trace
from .trace import (
    DielectricProperties,
    SubcarrierGrid,
    Trace,
    TraceFormatError,
    load_trace,
    save_trace,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2

ESTIMATE_COLUMNS = [
    "material_label",
    "subcarrier_position",
    "eps_hat",
    "sigma_hat",
    "eps_truth",
    "sigma_truth",
    "delta_eps_pct",
    "delta_sigma_pct",
    "b",
    "theta_b",
    "error",
]

SUMMARY_COLUMNS = [
    "material_label",
    "eps_hat",
    "eps_truth",
    "delta_eps_pct",
    "sigma_hat",
    "sigma_truth",
    "delta_sigma_pct",
]


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _parse_window(text: str) -> tuple[float, float]:
    try:
        start_s, end_s = text.split(":")
        window = (float(start_s), float(end_s))
    except ValueError:
        raise CliError(f"invalid --window {text!r}, expected START:END", EXIT_USAGE) from None
    if not window[0] < window[1]:
        raise CliError(f"window start must be < end, got {text!r}", EXIT_USAGE)
    return window


def _load_json(path: Path, what: str) -> dict:
    if not path.exists():
        raise CliError(f"{what} not found: {path}", EXIT_USAGE)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed {what} {path}: {exc}", EXIT_ERROR) from None


def _material_entry(entry) -> tuple[str, DielectricProperties]:
    if isinstance(entry, str):
        if entry not in REFERENCE_MATERIALS:
            raise CliError(f"unknown builtin material {entry!r}", EXIT_ERROR)
        return entry, REFERENCE_MATERIALS[entry]
    return str(entry["label"]), DielectricProperties(float(entry["eps_r"]), float(entry["sigma"]))


def _complex_array(values) -> np.ndarray:
    return np.array([complex(re, im) for re, im in values], dtype=np.complex128)


def _scenario_from_config(config: dict, seed_override: int | None) -> tuple[SimScenario, list]:
    grid = SubcarrierGrid(
        center_freq_hz=float(config.get("center_freq_hz", 5.32e9)),
        bandwidth_hz=float(config.get("bandwidth_hz", 20e6)),
        spacing_hz=float(config.get("spacing_hz", 312.5e3)),
        subcarrier_indices=tuple(
            config.get("subcarrier_indices", SubcarrierGrid().subcarrier_indices)
        ),
    )
    seed = int(config.get("seed", 0)) if seed_override is None else seed_override
    coeff_cfg = config.get("coefficients", {})
    if "coeff_los" in coeff_cfg:
        coeff_los = _complex_array(coeff_cfg["coeff_los"])
        coeff_multipath = _complex_array(coeff_cfg["coeff_multipath"])
        reference_channel = _complex_array(coeff_cfg["reference_channel"])
    else:
        coeff_los, coeff_multipath, reference_channel = default_scenario_coefficients(
            grid,
            seed=int(coeff_cfg.get("seed", seed)),
            base_scale=float(coeff_cfg.get("base_scale", 0.05)),
        )
    snr = config.get("snr_db", 30.0)
    scenario = SimScenario(
        grid=grid,
        d_m=float(config["d_m"]),
        coeff_los=coeff_los,
        coeff_multipath=coeff_multipath,
        reference_channel=reference_channel,
        snr_db=None if snr is None else float(snr),
        n_packets=int(config.get("n_packets", 400)),
        packet_interval_s=float(config.get("packet_interval_s", 0.05)),
        c_db=float(config.get("c_db", DEFAULT_C_DB)),
        seed=seed,
        transient_s=float(config.get("transient_s", 0.0)),
        multipath_scale=float(config.get("multipath_scale", 1.0)),
        rssi_mode=str(config.get("rssi_mode", "quantized")),
        agc_db=float(config.get("agc_db", 30.0)),
    )
    materials = [_material_entry(m) for m in config.get("materials", [])]
    if not materials:
        raise CliError("scenario lists no materials", EXIT_ERROR)
    return scenario, materials


def cmd_simulate(args) -> int:
    config = _load_json(Path(args.scenario), "scenario")
    scenario, materials = _scenario_from_config(config, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_entries = []
    for offset, (label, props) in enumerate(materials):
        trace = synth_trace(replace(scenario, seed=scenario.seed + offset), props, label=label)
        trace_path = out_dir / f"{label}.jsonl"
        save_trace(trace, trace_path)
        manifest_entries.append(
            {"label": label, "trace": trace_path.name, "eps_r": props.eps_r, "sigma": props.sigma}
        )
        print(f"wrote {trace_path} ({len(trace.frames)} frames)")
    manifest = {
        "version": 1,
        "d_m": scenario.d_m,
        "center_freq_hz": scenario.grid.center_freq_hz,
        "materials": manifest_entries,
    }
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {manifest_path} ({len(manifest_entries)} materials)")
    return EXIT_OK


def _load_manifest(path: Path) -> tuple[dict, Path]:
    manifest = _load_json(path, "manifest")
    return manifest, path.parent


def _manifest_truth(manifest: dict) -> dict[str, DielectricProperties]:
    truth = {}
    for entry in manifest.get("materials", []):
        if entry.get("eps_r") is not None:
            truth[entry["label"]] = DielectricProperties(
                float(entry["eps_r"]), float(entry["sigma"])
            )
    return truth


def _positions(args, n_subcarriers: int) -> list[int]:
    if args.all_subcarriers:
        return list(range(1, n_subcarriers + 1))
    if not (1 <= args.subcarrier <= n_subcarriers):
        raise CliError(
            f"--subcarrier {args.subcarrier} out of range 1..{n_subcarriers}", EXIT_USAGE
        )
    return [args.subcarrier]


def _load_traces(args) -> list[Trace]:
    # explicit --traces wins; the manifest enumerates only when none are given
    paths: list[Path] = []
    if args.traces:
        for item in args.traces:
            p = Path(item)
            if p.is_dir():
                paths.extend(sorted(p.glob("*.jsonl")))
            else:
                paths.append(p)
    elif args.manifest:
        manifest, base = _load_manifest(Path(args.manifest))
        paths = [base / entry["trace"] for entry in manifest.get("materials", [])]
    if not paths:
        raise CliError("no traces given (use --traces and/or --manifest)", EXIT_USAGE)
    traces = []
    for p in paths:
        if not p.exists():
            raise CliError(f"trace not found: {p}", EXIT_USAGE)
        try:
            traces.append(load_trace(p))
        except TraceFormatError as exc:
            raise CliError(f"{p}: {exc}", EXIT_ERROR) from None
    return traces


def cmd_calibrate(args) -> int:
    window = _parse_window(args.window)
    cfg = RescaleConfig(c_db=args.c_db)
    if not args.manifest:
        raise CliError("--manifest with truth values is required for calibration", EXIT_USAGE)
    manifest, _ = _load_manifest(Path(args.manifest))
    truth = _manifest_truth(manifest)
    traces = _load_traces(args)

    usable = [t for t in traces if t.material_label in truth]
    if len(usable) < 2:
        raise CliError(
            f"insufficient calibration set: {len(usable)} trace(s) with known truth", EXIT_ERROR
        )
    d_m = usable[0].d_m
    grid = usable[0].grid
    for t in usable[1:]:
        if not math.isclose(t.d_m, d_m, rel_tol=1e-9) or t.grid != grid:
            raise CliError(f"geometry mismatch: trace {t.material_label!r} differs", EXIT_ERROR)

    averaged = [(t, preprocess_trace(t, window, cfg)) for t in usable]
    positions = _positions(args, grid.n_subcarriers)
    profile_dir = Path(args.profile_dir)
    profile_dir.mkdir(parents=True, exist_ok=True)
    worst = 0.0
    for position in positions:
        samples = []
        for trace, avg in averaged:
            value, freq = select_subcarrier(avg, position)
            samples.append(
                CalibrationSample(
                    measured=value, known=truth[trace.material_label], freq_hz=freq, d_m=d_m
                )
            )
        try:
            profile = fit_coefficients(samples, subcarrier_position=position)
        except CalibrationError as exc:
            raise CliError(f"subcarrier {position}: {exc}", EXIT_ERROR) from None
        save_profile(profile, profile_dir / f"profile_sc{position:02d}.json")
        worst = max(worst, profile.residual_rms)
        print(
            f"subcarrier {position:2d}: residual_rms = {profile.residual_rms:.3e} V "
            f"({profile.n_samples} materials)"
        )
    print(f"wrote {len(positions)} profile(s) to {profile_dir} (worst residual {worst:.3e} V)")
    return EXIT_OK


def _load_profiles(profile_dir: Path, positions: list[int]) -> dict:
    profiles = {}
    for position in positions:
        path = profile_dir / f"profile_sc{position:02d}.json"
        if not path.exists():
            raise CliError(f"profile not found: {path}", EXIT_USAGE)
        profiles[position] = load_profile(path)
    return profiles


def _fmt(value, precision: int = 10) -> str:
    return "" if value is None else f"{value:.{precision}g}"


def cmd_estimate(args) -> int:
    window = _parse_window(args.window)
    cfg = RescaleConfig(c_db=args.c_db)
    truth: dict[str, DielectricProperties] = {}
    if args.manifest:
        manifest, _ = _load_manifest(Path(args.manifest))
        truth = _manifest_truth(manifest)
    traces = _load_traces(args)
    positions = _positions(args, traces[0].grid.n_subcarriers)
    profiles = _load_profiles(Path(args.profile_dir), positions)

    profile_list = [profiles[p] for p in positions]
    rows: list[dict] = []
    for trace in traces:
        avg = preprocess_trace(trace, window, cfg)
        material_truth = truth.get(trace.material_label)
        for entry in estimate_per_subcarrier(avg, profile_list, wrap_hint=args.wrap_hint):
            row = {c: "" for c in ESTIMATE_COLUMNS}
            row["material_label"] = trace.material_label
            row["subcarrier_position"] = entry.subcarrier_position
            if entry.error is not None:
                row["error"] = entry.error
                rows.append(row)
                continue
            result = entry.estimate
            row["eps_hat"] = _fmt(result.est.eps_r)
            row["sigma_hat"] = _fmt(result.est.sigma)
            row["b"] = _fmt(result.magnitude)
            row["theta_b"] = _fmt(result.phase_rad)
            if material_truth is not None:
                report = relative_errors(result.est, material_truth)
                row["eps_truth"] = _fmt(material_truth.eps_r)
                row["sigma_truth"] = _fmt(material_truth.sigma)
                row["delta_eps_pct"] = _fmt(100.0 * report.delta_eps, 6)
                row["delta_sigma_pct"] = (
                    "undef" if report.delta_sigma is None else _fmt(100.0 * report.delta_sigma, 6)
                )
            rows.append(row)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ESTIMATE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {out_path} ({len(rows)} rows)")

    if args.figures:
        from . import plots

        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        for trace in traces:
            avg = preprocess_trace(trace, window, cfg)
            plots.save_response_figure(avg, trace.material_label, fig_dir / f"response_{trace.material_label}.png")
            material_rows = [r for r in rows if r["material_label"] == trace.material_label]
            if len(material_rows) > 1:
                plots.save_sweep_figure(
                    material_rows, trace.material_label, fig_dir / f"sweep_{trace.material_label}.png"
                )
        print(f"wrote figures to {fig_dir}")
    return EXIT_OK


def _median_or_single(values: list[float]) -> float:
    return statistics.median(values)


def cmd_evaluate(args) -> int:
    est_path = Path(args.estimates)
    if not est_path.exists():
        raise CliError(f"estimates not found: {est_path}", EXIT_USAGE)
    truth: dict[str, DielectricProperties] = {}
    if args.manifest:
        manifest, _ = _load_manifest(Path(args.manifest))
        truth = _manifest_truth(manifest)

    with open(est_path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise CliError(f"no rows in {est_path}", EXIT_ERROR)

    by_material: dict[str, list[dict]] = {}
    for row in rows:
        by_material.setdefault(row["material_label"], []).append(row)

    summary: list[dict] = []
    eps_errors: list[float] = []
    sigma_errors: list[float] = []
    for label, mrows in by_material.items():
        ok = [r for r in mrows if r.get("eps_hat")]
        out = {c: "" for c in SUMMARY_COLUMNS}
        out["material_label"] = label
        if not ok:
            summary.append(out)
            continue
        # multi-subcarrier runs are summarized by the per-carrier median
        eps_hat = _median_or_single([float(r["eps_hat"]) for r in ok])
        sigma_hat = _median_or_single([float(r["sigma_hat"]) for r in ok])
        out["eps_hat"] = _fmt(eps_hat, 6)
        out["sigma_hat"] = _fmt(sigma_hat, 6)
        material_truth = truth.get(label)
        if material_truth is None and ok[0].get("eps_truth"):
            material_truth = DielectricProperties(
                float(ok[0]["eps_truth"]), float(ok[0]["sigma_truth"])
            )
        if material_truth is not None:
            report = relative_errors(
                DielectricProperties(eps_hat, max(sigma_hat, 0.0)), material_truth
            )
            out["eps_truth"] = _fmt(material_truth.eps_r, 6)
            out["sigma_truth"] = _fmt(material_truth.sigma, 6)
            out["delta_eps_pct"] = f"{100.0 * report.delta_eps:.1f}"
            eps_errors.append(100.0 * report.delta_eps)
            if report.delta_sigma is None:
                out["delta_sigma_pct"] = "undef"
            else:
                out["delta_sigma_pct"] = f"{100.0 * report.delta_sigma:.1f}"
                sigma_errors.append(100.0 * report.delta_sigma)
        summary.append(out)

    widths = {c: max(len(c), *(len(str(r[c])) for r in summary)) for c in SUMMARY_COLUMNS}
    header = "  ".join(c.ljust(widths[c]) for c in SUMMARY_COLUMNS)
    print(header)
    print("-" * len(header))
    for row in summary:
        print("  ".join(str(row[c]).ljust(widths[c]) for c in SUMMARY_COLUMNS))
    if eps_errors:
        avg_eps = sum(eps_errors) / len(eps_errors)
        line = f"average delta_eps: {avg_eps:.1f}%"
        if sigma_errors:
            avg_sigma = sum(sigma_errors) / len(sigma_errors)
            line += f"  delta_sigma: {avg_sigma:.1f}%"
        line += f"  ({len(eps_errors)} materials; undefined conductivity rows excluded)"
        print(line)

    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(summary)
        print(f"wrote {out_path}")

    if args.figures:
        from . import plots

        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        with_truth = [r for r in summary if r["delta_eps_pct"] != ""]
        if with_truth:
            plots.save_error_summary_figure(with_truth, fig_dir / "error_summary.png")
            print(f"wrote figures to {fig_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csi-dielectric",
        description="Estimate material dielectric properties from WiFi CSI traces.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize traces from a scenario config")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON file")
    p_sim.add_argument("--out", required=True, help="output directory for traces + manifest")
    p_sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_sim.set_defaults(func=cmd_simulate)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--window", default=f"{DEFAULT_WINDOW_S[0]:g}:{DEFAULT_WINDOW_S[1]:g}",
                        help="averaging window START:END in seconds (default %(default)s)")
    common.add_argument("--c-db", type=float, default=DEFAULT_C_DB,
                        help="internal reference constant in dB (default %(default)s)")
    common.add_argument("--subcarrier", type=int, default=16,
                        help="1-based subcarrier position (default %(default)s)")
    common.add_argument("--all-subcarriers", action="store_true",
                        help="process every subcarrier position")

    p_cal = sub.add_parser("calibrate", parents=[common],
                           help="fit system coefficients from known-material traces")
    p_cal.add_argument("--traces", nargs="*", help="trace files or directories")
    p_cal.add_argument("--manifest", required=True, help="manifest JSON with truth values")
    p_cal.add_argument("--profile-dir", required=True, help="output directory for profiles")
    p_cal.set_defaults(func=cmd_calibrate)

    p_est = sub.add_parser("estimate", parents=[common],
                           help="estimate dielectric properties from traces")
    p_est.add_argument("--traces", nargs="*", help="trace files or directories")
    p_est.add_argument("--manifest", help="manifest JSON (trace list and/or truth values)")
    p_est.add_argument("--profile-dir", required=True, help="directory with calibration profiles")
    p_est.add_argument("--out", required=True, help="output CSV path")
    p_est.add_argument("--wrap-hint", type=int, default=0,
                       help="extra whole phase turns across the slab (default %(default)s)")
    p_est.add_argument("--figures", help="directory for PNG figures (optional)")
    p_est.set_defaults(func=cmd_estimate)

    p_eval = sub.add_parser("evaluate", help="summarize estimate errors against truth")
    p_eval.add_argument("--estimates", required=True, help="estimate CSV from the estimate command")
    p_eval.add_argument("--manifest", help="manifest JSON with truth values")
    p_eval.add_argument("--out", help="output summary CSV path")
    p_eval.add_argument("--figures", help="directory for PNG figures (optional)")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (TraceFormatError, CalibrationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
