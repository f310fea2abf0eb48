"""Command-line interface: characterize, simulate, sweep, ingest-check.

Outputs are plot-ready CSV tables plus a key=value run manifest; no
rendering.  All emitted CSVs re-read through the loaders in this module
without loss, and a fixed seed reproduces report files byte-identically.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, counting, devices, montecarlo, spectral
from .counting import DetectorParams, SourceParams
from .exceptions import ConfigurationError, QPairSimError
from .montecarlo import ExperimentConfig, default_plan

REPORT_COLUMNS = [
    "device", "channel_pair",
    "v0", "v0_sigma", "v45", "v45_sigma", "s", "s_sigma",
    "brightness_cpm", "zeta_q", "eta_hat", "eta_hat_sigma",
]

CHARACTERIZE_COLUMNS = ["device", "channel_a", "channel_b",
                        "i1_a_ghz", "i1_b_ghz", "i2_ghz", "zeta_q"]

STATE_COLUMNS = ["device", "channel_pair"] + [f"m{i}{j}" for i in range(4)
                                              for j in range(4)]


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.10g}{z.imag:+.10g}j"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def read_csv(path):
    """Read an emitted CSV back into dict rows with floats restored."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, value in row.items():
                try:
                    parsed[key] = float(value)
                except (TypeError, ValueError):
                    parsed[key] = value
            rows.append(parsed)
    return rows


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, entries: dict):
    lines = [f"{key} = {entries[key]}" for key in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    entries = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            entries[key] = value
    return entries


def _detector_from(section) -> DetectorParams:
    return DetectorParams(
        quantum_efficiency=section.getfloat("quantum_efficiency", 0.1),
        trigger_rate_hz=section.getfloat("trigger_rate_hz", 2e6),
        gate_width_s=section.getfloat("gate_width_s", 20e-9),
        dead_time_s=section.getfloat("dead_time_s", 10e-6),
        dark_count_rate_hz=section.getfloat("dark_count_rate_hz", 500.0),
        coincidence_window_s=section.getfloat("coincidence_window_s", 1e-9),
    )


def paper_mode_detector(det: DetectorParams) -> DetectorParams:
    """Ideal detector of the bare rate equations: unit efficiency, no darks,
    no dead time."""
    return replace(det, quantum_efficiency=1.0, dark_count_rate_hz=0.0,
                   dead_time_s=0.0)


class RunSpec:
    """Parsed simulate/sweep configuration file."""

    def __init__(self, path):
        self.path = Path(path)
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(self.path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        try:
            self._load(parser)
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc

    def _load(self, parser):
        if "source" not in parser:
            raise ConfigurationError(f"{self.path}: missing [source] section")
        src = parser["source"]
        self.pair_rate_density = src.getfloat("pair_rate_density")
        if self.pair_rate_density is None:
            raise ConfigurationError(f"{self.path}: source.pair_rate_density is required")
        self.baseline_v0 = src.getfloat("baseline_v0", 1.0)
        self.pump_override_thz = src.getfloat("pump_frequency_thz", fallback=None)

        pol = parser["polarization"] if "polarization" in parser else {}
        eta_raw = pol.get("eta", "derive") if pol else "derive"
        self.eta = None if str(eta_raw).strip().lower() == "derive" else float(eta_raw)

        self.detector_a = _detector_from(parser["detector_a"]) \
            if "detector_a" in parser else DetectorParams()
        self.detector_b = _detector_from(parser["detector_b"]) \
            if "detector_b" in parser else self.detector_a

        link = parser["link"] if "link" in parser else {}
        self.attenuation_db_a = float(link.get("attenuation_db_a", 0.0)) if link else 0.0
        self.attenuation_db_b = float(link.get("attenuation_db_b", 0.0)) if link else 0.0

        if "device" not in parser or "path" not in parser["device"]:
            raise ConfigurationError(f"{self.path}: missing [device] path")
        self.device_dir = (self.path.parent / parser["device"]["path"]).resolve()

        plan = parser["plan"] if "plan" in parser else {}
        self.fringe_duration_s = float(plan.get("fringe_duration_s", 30.0)) if plan else 30.0
        self.chsh_duration_s = float(plan.get("chsh_duration_s", 30.0)) if plan else 30.0

    def load_device(self) -> devices.DeviceProfile:
        profile = devices.ingest_device(self.device_dir)
        if self.pump_override_thz is not None:
            profile = devices.DeviceProfile(
                name=profile.name, technology=profile.technology,
                channels=profile.channels,
                pump_frequency_thz=self.pump_override_thz, pmd_ps=profile.pmd_ps)
        return profile

    def experiment_config(self, profile, pair, seed, mode, pair_salt) -> ExperimentConfig:
        low, high = pair
        det_a, det_b = self.detector_a, self.detector_b
        if mode == "paper":
            det_a, det_b = paper_mode_detector(det_a), paper_mode_detector(det_b)
        source = SourceParams(
            pair_rate_density=self.pair_rate_density,
            pump_frequency_thz=profile.pump_frequency_thz,
            baseline_v0=self.baseline_v0,
        )
        return ExperimentConfig(
            source=source,
            signal_channel=profile.channels[low],
            idler_channel=profile.channels[high],
            detector_a=det_a,
            detector_b=det_b,
            plan=default_plan(self.fringe_duration_s, self.chsh_duration_s),
            seed=seed,
            attenuation_db_a=self.attenuation_db_a,
            attenuation_db_b=self.attenuation_db_b,
            eta=self.eta,
            pair_salt=pair_salt,
        )


def _parse_pairs(text):
    """'21-27,22-26' -> [(21, 27), (22, 26)]"""
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        low, _, high = chunk.partition("-")
        pairs.append((int(low), int(high)))
    return pairs


def _select_pairs(profile, pairs_arg):
    available = devices.symmetric_pairs(profile)
    if not pairs_arg:
        return available
    requested = _parse_pairs(pairs_arg)
    missing = [p for p in requested if p not in available]
    if missing:
        raise ConfigurationError(
            f"requested pairs {missing} are not symmetric pairs of this device "
            f"(available: {available})")
    return requested


def cmd_characterize(args) -> int:
    profile = devices.ingest_device(args.device)
    pairs = _select_pairs(profile, args.pairs)
    if not pairs:
        print("error: no symmetric channel pairs for this device", file=sys.stderr)
        return 1
    rows = []
    for low, high in pairs:
        overlap = spectral.pair_overlap(profile.channels[low], profile.channels[high],
                                        profile.pump_frequency_thz)
        rows.append({
            "device": profile.name, "channel_a": low, "channel_b": high,
            "i1_a_ghz": overlap.i1_signal, "i1_b_ghz": overlap.i1_idler,
            "i2_ghz": overlap.i2, "zeta_q": overlap.zeta_q,
        })
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "characterize.csv"
    write_csv(out_path, CHARACTERIZE_COLUMNS, rows)
    for row in rows:
        print(f"{row['device']} ({row['channel_a']},{row['channel_b']}): "
              f"zeta_Q = {row['zeta_q']:.4f}")
    print(f"wrote {out_path}")
    return 0


def cmd_simulate(args) -> int:
    spec = RunSpec(args.config)
    profile = spec.load_device()
    pairs = _select_pairs(profile, args.pairs)
    if not pairs:
        print("error: no symmetric channel pairs selected", file=sys.stderr)
        return 1

    rows = []
    state_rows = []
    failures = 0
    for salt, (low, high) in enumerate(pairs):
        try:
            config = spec.experiment_config(profile, (low, high), args.seed,
                                            args.mode, salt)
            zeta = config.overlap().zeta_q
            state = config.polarization_model().state()
            result, _ = montecarlo.run_bell_experiment(config, jobs=args.jobs)
            state_row = {"device": profile.name, "channel_pair": f"{low}-{high}"}
            state_row.update({
                col: _fmt_complex(z)
                for col, z in zip(STATE_COLUMNS[2:], state.to_flat())})
            state_rows.append(state_row)
            rows.append({
                "device": profile.name, "channel_pair": f"{low}-{high}",
                "v0": result.v0, "v0_sigma": result.v0_sigma,
                "v45": result.v45, "v45_sigma": result.v45_sigma,
                "s": result.s, "s_sigma": result.s_sigma,
                "brightness_cpm": result.brightness_cpm, "zeta_q": zeta,
                "eta_hat": result.eta_hat, "eta_hat_sigma": result.eta_hat_sigma,
            })
        except QPairSimError as exc:
            failures += 1
            print(f"pair ({low},{high}) failed: {exc}", file=sys.stderr)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.csv"
    write_csv(report_path, REPORT_COLUMNS, rows)
    write_csv(out_dir / "states.csv", STATE_COLUMNS, state_rows)
    write_manifest(out_dir / "manifest.txt", {
        "command": "simulate",
        "config": str(args.config),
        "config_sha256": _sha256(args.config),
        "device_sha256": _device_sha(spec.device_dir),
        "seed": args.seed,
        "mode": args.mode,
        "pairs": args.pairs or "all",
        "jobs": args.jobs,
        "qpairsim_version": __version__,
        "numpy_version": np.__version__,
    })
    for row in rows:
        print(f"{row['device']} {row['channel_pair']}: "
              f"V0={row['v0']:.3f} V45={row['v45']:.3f} S={row['s']:.3f} "
              f"B={row['brightness_cpm']:.0f}/min")
    print(f"wrote {report_path}")
    return 1 if failures else 0


def _device_sha(device_dir) -> str:
    digest = hashlib.sha256()
    for path in sorted(Path(device_dir).iterdir()):
        if path.is_file():
            digest.update(path.name.encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def _sweep_figure2(args):
    spec = RunSpec(args.config)
    dirs = args.device or [spec.device_dir]
    triples = []
    for directory in dirs:
        profile = devices.ingest_device(directory)
        for low, high in devices.symmetric_pairs(profile):
            triples.append((f"{profile.name}:{low}-{high}",
                            profile.channels[low], profile.channels[high]))
    if not triples:
        raise ConfigurationError("no symmetric pairs across the given devices")
    base_profile = devices.ingest_device(dirs[0])
    base = spec.experiment_config(
        base_profile, devices.symmetric_pairs(base_profile)[0],
        args.seed, args.mode, 0)
    rows = montecarlo.sweep_figure2(triples, base, jobs=args.jobs)
    return ["device", "zeta_q", "v0", "v0_sigma"], rows, "sweep_figure2.csv"


def _sweep_figure3(args):
    grid = np.linspace(0.0, 1.0, args.grid)
    rows = montecarlo.sweep_figure3(grid, grid)
    return ["kind", "v0", "eta", "s"], rows, "sweep_figure3.csv"


def _sweep_attenuation(args):
    spec = RunSpec(args.config)
    profile = spec.load_device()
    pairs = _select_pairs(profile, args.pairs)
    lengths = [float(x) for x in args.lengths_km.split(",") if x.strip()]
    config = spec.experiment_config(profile, pairs[0], args.seed, args.mode, 0)
    results = montecarlo.run_attenuation_study(config, lengths,
                                               db_per_km=args.db_per_km,
                                               jobs=args.jobs)
    rows = []
    for length, res in zip(lengths, results):
        rows.append({
            "length_km_per_arm": length,
            "v0": res.v0, "v0_sigma": res.v0_sigma,
            "v45": res.v45, "v45_sigma": res.v45_sigma,
            "s": res.s, "s_sigma": res.s_sigma,
            "brightness_cpm": res.brightness_cpm,
        })
    columns = ["length_km_per_arm", "v0", "v0_sigma", "v45", "v45_sigma",
               "s", "s_sigma", "brightness_cpm"]
    return columns, rows, "sweep_attenuation.csv"


def _sweep_slope(args):
    spec = RunSpec(args.config)
    det_a = paper_mode_detector(spec.detector_a)
    det_b = paper_mode_detector(spec.detector_b)
    pump = spec.pump_override_thz or 2.0 * devices.itu_channel_frequency_thz(24)
    shapes = [("rectangular", {}), ("gaussian", {}),
              ("flattop", {"order": 4}), ("flattop", {"order": 2})]
    p0_values = spec.pair_rate_density * np.linspace(0.2, 1.0, 6)
    rows = []
    for shape, extra in shapes:
        ch_s = spectral.make_channel(shape, pump / 2.0 - 0.3, 100.0, 1.0, 5.0, **extra)
        ch_i = spectral.make_channel(shape, pump / 2.0 + 0.3, 100.0, 1.0, 5.0, **extra)
        overlap = spectral.pair_overlap(ch_s, ch_i, pump)
        slope = counting.slope_quality(p0_values, overlap, det_a, det_b, mode="paper")
        label = shape if not extra else f"{shape}{extra['order']}"
        rows.append({"shape": label, "zeta_q": overlap.zeta_q,
                     "slope": slope, "inv_slope": 1.0 / slope})
    return ["shape", "zeta_q", "slope", "inv_slope"], rows, "sweep_slope.csv"


def cmd_sweep(args) -> int:
    handlers = {
        "figure2": _sweep_figure2,
        "figure3": _sweep_figure3,
        "attenuation": _sweep_attenuation,
        "slope": _sweep_slope,
    }
    if args.kind not in handlers:
        print(f"error: unknown sweep kind {args.kind!r}", file=sys.stderr)
        return 2
    columns, rows, filename = handlers[args.kind](args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / filename
    write_csv(out_path, columns, rows)
    print(f"wrote {out_path} ({len(rows)} rows)")
    return 0


def cmd_ingest_check(args) -> int:
    try:
        profile = devices.ingest_device(args.device)
    except QPairSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    pairs = devices.symmetric_pairs(profile)
    print(f"{profile.name} ({profile.technology}): {len(profile.channels)} channels, "
          f"{len(pairs)} symmetric pairs about {profile.pump_frequency_thz / 2:.4f} THz")
    for low, high in pairs:
        print(f"  pair ({low},{high})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpairsim",
        description="Entangled-pair distribution over DWDM channels: "
                    "characterization and Bell-test simulation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("characterize", help="per-pair quality factors from channel spectra")
    p.add_argument("--device", required=True, help="device directory")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--pairs", default="", help="channel pairs, e.g. 21-27,22-26")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("simulate", help="run the Bell-test simulation per channel pair")
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--seed", type=int, default=1, help="master RNG seed")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--mode", choices=("paper", "full"), default="full",
                   help="bare rate model vs extended detector model")
    p.add_argument("--pairs", default="", help="channel pairs, e.g. 21-27")
    p.add_argument("--jobs", type=int, default=1, help="parallel settings workers")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="emit plot-ready sweep tables")
    p.add_argument("--kind", required=True,
                   choices=("figure2", "figure3", "attenuation", "slope"))
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--device", action="append", help="device directory (repeatable)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=".")
    p.add_argument("--mode", choices=("paper", "full"), default="full")
    p.add_argument("--pairs", default="")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--grid", type=int, default=11, help="grid points per axis (figure3)")
    p.add_argument("--lengths-km", default="0,10", help="per-arm lengths (attenuation)")
    p.add_argument("--db-per-km", type=float, default=0.2)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ingest-check", help="validate a device directory")
    p.add_argument("--device", required=True)
    p.set_defaults(func=cmd_ingest_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QPairSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
