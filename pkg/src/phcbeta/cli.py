"""Command-line front end.

Each command is a thin client: it loads input files, posts them to the
service (in-process by default, remote with ``--server``), and writes the
response as CSV/JSON/SVG artifacts named ``<command>-<stamp>.*``. A
``manifest.json`` records inputs, hashes, seed, and versions; wall-clock
time appears only there, so reruns with a pinned ``--stamp`` are
byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__, fileio, svgplot
from .bands import DispersionCurve
from .errors import PhcBetaError
from .service import ServiceClient, ServiceError
from .service.schemas import DispersionModel, GeometryModel, HistogramModel
from .spectrum import SpectralModel

COMMANDS = (
    "bands",
    "simulate-decay",
    "fit-decay",
    "fit-spectrum",
    "calibrate",
    "extract-beta",
    "reproduce-paper",
    "serve",
)

# published summary numbers the reproduction run must land on
REFERENCE_CHECKS = {
    "beta_headline": (0.860, 0.015),  # beta(5.7, 0.8)
    "purcell_headline": (5.18, 0.01),  # purcell(5.7, 1.1)
    "beta_nonres_0.43": (0.925, 0.01),
    "beta_nonres_0.05": (0.991, 0.01),
    "calibrated_edge_nm": (968.4, 0.1),
}

DEFAULT_DECAY_PARAMS = {
    "amp_fast": 0.8,
    "gamma_fast": 2.0,
    "amp_slow": 0.2,
    "gamma_slow": 0.5,
}


class CliError(PhcBetaError):
    """Unrecoverable command-line problem; message is user-facing."""


def _utc_stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"input file not found: {p}")
    return p


def _load_config(value: str | None) -> dict:
    """``--config`` takes either a JSON file path or an inline JSON object."""
    if value is None:
        return {}
    p = Path(value)
    if p.is_file():
        try:
            obj = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(f"{p}:{exc.lineno}: invalid JSON in config") from exc
    else:
        try:
            obj = json.loads(value)
        except json.JSONDecodeError:
            if value.lstrip().startswith(("{", "[")):
                raise CliError(f"invalid inline JSON config: {value!r}") from None
            raise CliError(f"config file not found: {value}") from None
    if not isinstance(obj, dict):
        raise CliError("config must be a JSON object")
    return obj


class Run:
    """One command invocation: artifact naming, manifest bookkeeping."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.command: str = args.command
        self.out_dir = Path(args.out)
        self.stamp: str = args.stamp or _utc_stamp()
        self.config = _load_config(args.config)
        self.seed = getattr(args, "seed", None)
        self.plot = getattr(args, "plot", False)
        self.inputs: list[Path] = []
        self.artifacts: list[str] = []
        self.client = ServiceClient(base_url=args.server)

    def input_file(self, path) -> Path:
        p = _require_file(path)
        self.inputs.append(p)
        return p

    def artifact_path(self, suffix: str) -> Path:
        name = f"{self.command}-{self.stamp}{suffix}"
        self.artifacts.append(name)
        return self.out_dir / name

    def emit_plot(self, kind: str, data: dict) -> None:
        if not self.plot:
            return
        path = self.artifact_path(".svg")
        if svgplot.emit_plot(kind, data, path) is None:
            self.artifacts.remove(path.name)

    def write_manifest(self) -> None:
        fileio.dump_json(
            self.out_dir / "manifest.json",
            {
                "command": self.command,
                "stamp": self.stamp,
                "written_utc": datetime.now(timezone.utc).isoformat(),
                "seed": self.seed,
                "plot": self.plot,
                "server": self.args.server,
                "config": self.config,
                "inputs": [
                    {"path": str(p), "sha256": _sha256(p)} for p in self.inputs
                ],
                "artifacts": self.artifacts,
                "versions": {
                    "phcbeta": __version__,
                    "numpy": np.__version__,
                    "scipy": scipy.__version__,
                },
            },
        )


def _geometry_payload(run: Run) -> dict:
    if run.args.geometry is None:
        return {}
    geometry = fileio.load_geometry(run.input_file(run.args.geometry))
    return GeometryModel.from_core(geometry).model_dump()


def cmd_bands(run: Run) -> int:
    resp = run.client.post("/bands/solve", {"geometry": _geometry_payload(run)})
    curve = DispersionCurve.from_dict(resp["dispersion"])
    fileio.write_dispersion_csv(run.artifact_path(".csv"), curve)
    fileio.dump_json(
        run.artifact_path(".json"),
        {
            "band_edge_frequency": curve.band_edge_frequency,
            "band_edge_wavelength_nm": curve.band_edge_wavelength_nm,
            "effective_index": curve.effective_index,
            "lattice_constant": curve.lattice_constant,
            "gap_window": list(curve.gap_window) if curve.gap_window else None,
        },
    )
    run.emit_plot(
        "dispersion",
        {
            "points_k": curve.points_k,
            "points_freq": curve.points_freq,
            "edge_k": float(curve.points_k[-1]),
            "edge_freq": curve.band_edge_frequency,
        },
    )
    print(f"band edge {curve.band_edge_wavelength_nm:.3f} nm "
          f"({curve.band_edge_frequency:.6f} a/lambda)")
    return 0


def cmd_calibrate(run: Run) -> int:
    resp = run.client.post(
        "/bands/calibrate",
        {
            "geometry": _geometry_payload(run),
            "target_wavelength_nm": run.config.get("target_nm", 968.4),
            "tolerance_nm": run.config.get("tolerance_nm", 0.05),
        },
    )
    fileio.dump_json(run.artifact_path(".json"), resp)
    print(f"effective index {resp['effective_index']:.6f} puts the edge at "
          f"{resp['band_edge_wavelength_nm']:.3f} nm "
          f"(target {resp['target_nm']} nm, {resp['iterations']} iterations)")
    return 0


def cmd_simulate_decay(run: Run) -> int:
    if run.seed is None:
        raise CliError("simulate-decay requires --seed")
    resp = run.client.post(
        "/decay/simulate",
        {
            "params": run.config.get("params", DEFAULT_DECAY_PARAMS),
            "irf": run.config.get("irf", {}),
            "acquisition": run.config.get("acquisition", {}),
            "seed": run.seed,
        },
    )
    hist = HistogramModel(**resp["histogram"]).to_core()
    _, sidecar = fileio.write_histogram(run.artifact_path(".csv"), hist)
    run.artifacts.append(Path(sidecar).name)
    run.emit_plot(
        "decay",
        {
            "time_ns": resp["time_ns"],
            "counts": [float(c) for c in hist.counts],
            "expected": resp["expected"],
        },
    )
    print(f"simulated {hist.total_counts:.0f} counts over "
          f"{hist.counts.size} bins (seed {run.seed})")
    return 0


def cmd_fit_decay(run: Run) -> int:
    source = run.input_file(run.args.input)
    restart_seed = run.seed if run.seed is not None else 0

    if source.suffix == ".json":
        tagged = fileio.read_batch_manifest(source)
        items = [
            {"tag": tag, "histogram": HistogramModel.from_core(h).model_dump()}
            for tag, h in tagged
        ]
        for rec in fileio.load_json(source):
            run.inputs.append(source.parent / rec["file"])
            if rec.get("sidecar"):
                run.inputs.append(source.parent / rec["sidecar"])
        resp = run.client.post(
            "/decay/fit-batch", {"items": items, "restart_seed": restart_seed}
        )
        fileio.dump_json(run.artifact_path(".json"), resp)
        for entry in resp["entries"]:
            flag = "" if entry["converged"] else "  [unconverged]"
            print(f"{entry['tag']}: gamma_tot {entry['gamma_tot']:.4f} /ns "
                  f"({entry['model_selected']}){flag}")
        return 0

    hist = fileio.load_histogram(source)
    sidecar = source.with_suffix(".json")
    if sidecar.is_file():
        run.inputs.append(sidecar)
    resp = run.client.post(
        "/decay/fit",
        {
            "histogram": HistogramModel.from_core(hist).model_dump(),
            "restart_seed": restart_seed,
        },
    )
    fileio.dump_json(run.artifact_path(".json"), resp["fit"])
    run.emit_plot(
        "decay",
        {
            "time_ns": resp["time_ns"],
            "counts": [float(c) for c in hist.counts],
            "expected": resp["model"],
        },
    )
    fit = resp["fit"]
    print(f"gamma_tot {fit['gamma_fast']:.4f} /ns "
          f"({fit['model_selected']}, reduced C {fit['reduced_cstat']:.3f})")
    return 0


def cmd_fit_spectrum(run: Run) -> int:
    source = run.input_file(run.args.input)
    spec = fileio.load_spectrum_csv(source)
    payload = {
        "spectrum": {
            "wavelength_nm": [float(w) for w in spec.wavelength_nm],
            "intensity": [float(i) for i in spec.intensity],
            "resolution_nm": run.config.get("resolution_nm", spec.resolution_nm),
        },
        "fit_gaussian": run.config.get("fit_gaussian", True),
    }
    if "candidates" in run.config:
        payload["candidates"] = run.config["candidates"]
    if "min_prominence" in run.config:
        payload["min_prominence"] = run.config["min_prominence"]
    resp = run.client.post("/spectrum/fit", payload)
    model = SpectralModel.from_dict(resp["model"])
    fileio.dump_spectral_model_json(run.artifact_path(".json"), model)
    run.emit_plot(
        "spectrum",
        {
            "wavelength_nm": spec.wavelength_nm,
            "intensity": spec.intensity,
            "model": model,
        },
    )
    lines = ", ".join(f"{c:.3f}" for c, _, _ in model.lorentzians)
    print(f"{len(model.lorentzians)} lines at [{lines}] nm; "
          + ("band edge at %.3f nm" % model.gaussian[0]
             if model.gaussian else "no band-edge component"))
    return 0


def cmd_extract_beta(run: Run) -> int:
    source = run.input_file(run.args.input)
    series = fileio.load_json(source)
    gamma_0 = run.config.get("gamma_0", 1.1)
    resp = run.client.post("/beta/extract", {"series": series, "gamma_0": gamma_0})
    result = resp["result"]
    out = {"result": result}

    model_curve = None
    if "dispersion" in run.config:
        disp_path = run.input_file(run.config["dispersion"])
        disp = DispersionModel.from_core(
            fileio.load_dispersion_json(disp_path)
        ).model_dump()
        fit_resp = run.client.post(
            "/beta/fit-model",
            {
                "series": series,
                "dispersion": disp,
                "gamma_0": gamma_0,
                "fixed_broadening": run.config.get("fixed_broadening"),
            },
        )
        out["rate_model"] = fit_resp["fit"]
        model_curve = fit_resp["model_curve"]

    fileio.dump_json(run.artifact_path(".json"), out)
    points = series["points"]
    run.emit_plot(
        "rates-vs-detuning",
        {
            "detuning_nm": [p["detuning_nm"] for p in points],
            "gamma_tot": [p["gamma_tot"] for p in points],
            "sigma": [p["sigma"] for p in points],
            "gamma_res": result["gamma_res"],
            "gamma_nonres": result["gamma_nonres"],
            "model_detuning": model_curve["detuning_nm"] if model_curve else None,
            "model_gamma": model_curve["gamma_tot"] if model_curve else None,
        },
    )
    print(f"beta >= {result['beta']:.3f} "
          f"(G_res {result['gamma_res']:.3f}, G_nonres {result['gamma_nonres']:.3f}, "
          f"F_p {result['purcell']:.3f})")
    return 0


def _check(name: str, value: float, expected: float, tolerance: float) -> dict:
    return {
        "name": name,
        "value": value,
        "expected": expected,
        "tolerance": tolerance,
        "passed": bool(abs(value - expected) <= tolerance),
    }


def cmd_reproduce_paper(run: Run) -> int:
    checks: list[dict] = []
    seed = run.seed if run.seed is not None else 0

    head = run.client.post(
        "/beta/headline", {"gamma_res": 5.7, "gamma_nonres": 0.8, "gamma_0": 1.1}
    )
    checks.append(_check("beta_headline", head["beta"],
                         *REFERENCE_CHECKS["beta_headline"]))
    checks.append(_check("purcell_headline", head["purcell"],
                         *REFERENCE_CHECKS["purcell_headline"]))
    for gamma_nonres in (0.43, 0.05):
        resp = run.client.post(
            "/beta/headline", {"gamma_res": 5.7, "gamma_nonres": gamma_nonres}
        )
        checks.append(_check(f"beta_nonres_{gamma_nonres}", resp["beta"],
                             *REFERENCE_CHECKS[f"beta_nonres_{gamma_nonres}"]))

    effective_index = run.config.get("effective_index")
    calibration = None
    if effective_index is None:
        calibration = run.client.post("/bands/calibrate", {"geometry": {}})
        effective_index = calibration["effective_index"]
        checks.append(_check("calibrated_edge_nm",
                             calibration["band_edge_wavelength_nm"],
                             *REFERENCE_CHECKS["calibrated_edge_nm"]))

    scenario = run.client.post(
        "/scenario/qd3", {"seed": seed, "effective_index": effective_index}
    )
    sc = scenario["checks"]
    checks.append(_check("scenario_beta_recovery",
                         sc["beta_recovered"], sc["beta_injected"], 0.02))
    checks.append(_check("scenario_coupling_recovery",
                         sc["coupling_fitted"], sc["coupling_true"],
                         0.20 * sc["coupling_true"]))

    four_dot = None
    if run.config.get("four_dot"):
        four_dot = run.client.post(
            "/scenario/four-dot",
            {"seed": seed, "effective_index": effective_index},
        )

    failed = [c["name"] for c in checks if not c["passed"]]
    report_lines = [
        f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: "
        f"{c['value']:.4f} (expected {c['expected']:.4f} "
        f"+- {c['tolerance']:.4f})"
        for c in checks
    ]
    beta = scenario["beta"]
    report_lines.append(
        f"recovered beta >= {beta['beta']:.3f} with F_p {beta['purcell']:.3f} "
        f"from {len(scenario['series']['points'])} temperature points"
    )
    if four_dot is not None:
        report_lines.append("")
        report_lines.append(four_dot["text"])
    text = "\n".join(report_lines) + "\n"

    fileio.atomic_write_text(run.artifact_path(".txt"), text)
    payload = {
        "checks": checks,
        "scenario": {
            "checks": sc,
            "beta": scenario["beta"],
            "rate_fit": scenario["rate_fit"],
            "broadening_fwhm": scenario["broadening_fwhm"],
        },
        "calibration": calibration,
        "seed": seed,
    }
    if four_dot is not None:
        payload["four_dot"] = four_dot["report"]
    fileio.dump_json(run.artifact_path(".json"), payload)

    points = scenario["series"]["points"]
    run.emit_plot(
        "rates-vs-detuning",
        {
            "detuning_nm": [p["detuning_nm"] for p in points],
            "gamma_tot": [p["gamma_tot"] for p in points],
            "sigma": [p["sigma"] for p in points],
            "gamma_res": beta["gamma_res"],
            "gamma_nonres": beta["gamma_nonres"],
            "model_detuning": scenario["model_curve"]["detuning_nm"],
            "model_gamma": scenario["model_curve"]["gamma_tot"],
        },
    )
    print(text, end="")
    if failed:
        raise CliError(f"{len(failed)} of {len(checks)} checks failed: "
                       + ", ".join(failed))
    return 0


def cmd_serve(run: Run) -> int:
    import uvicorn  # server only needed for this command

    from .service import create_app

    uvicorn.run(create_app(), host=run.args.host, port=run.args.port)
    return 0


HANDLERS = {
    "bands": cmd_bands,
    "calibrate": cmd_calibrate,
    "simulate-decay": cmd_simulate_decay,
    "fit-decay": cmd_fit_decay,
    "fit-spectrum": cmd_fit_spectrum,
    "extract-beta": cmd_extract_beta,
    "reproduce-paper": cmd_reproduce_paper,
    "serve": cmd_serve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phcbeta",
        description="Waveguide beta-factor toolkit: band structure, decay "
        "simulation and fitting, spectra, tuning, beta extraction.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--out", default=".", help="output directory")
    shared.add_argument("--stamp", default=None,
                        help="artifact name stamp (default: UTC time)")
    shared.add_argument("--seed", type=int, default=None,
                        help="RNG seed (simulation) or fit restart seed")
    shared.add_argument("--plot", action="store_true",
                        help="also write an SVG figure")
    shared.add_argument("--config", default=None,
                        help="JSON file or inline JSON with command options")
    shared.add_argument("--server", default=None,
                        help="base URL of a running service "
                        "(default: run in-process)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bands", parents=[shared],
                       help="solve the guided band and tabulate dispersion")
    p.add_argument("--geometry", default=None,
                   help="geometry file (JSON or key=value)")

    p = sub.add_parser("calibrate", parents=[shared],
                       help="tune the effective index to a band-edge target")
    p.add_argument("--geometry", default=None)

    sub.add_parser("simulate-decay", parents=[shared],
                   help="simulate one decay histogram (requires --seed)")

    p = sub.add_parser("fit-decay", parents=[shared],
                       help="fit a histogram CSV or a JSON batch manifest")
    p.add_argument("input", help="histogram CSV (with sidecar) or batch JSON")

    p = sub.add_parser("fit-spectrum", parents=[shared],
                       help="fit lines and band edge in a spectrum CSV")
    p.add_argument("input", help="spectrum CSV")

    p = sub.add_parser("extract-beta", parents=[shared],
                       help="extract beta from a rate-vs-detuning series")
    p.add_argument("input", help="rate series JSON")

    sub.add_parser("reproduce-paper", parents=[shared],
                   help="run the bundled scenario and check published numbers")

    p = sub.add_parser("serve", parents=[shared], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def run(args: argparse.Namespace) -> int:
    runner = Run(args)
    try:
        if runner.command != "serve":
            runner.out_dir.mkdir(parents=True, exist_ok=True)
        status = HANDLERS[runner.command](runner)
        if runner.command != "serve":
            runner.write_manifest()
        return status
    finally:
        runner.client.close()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (PhcBetaError, ServiceError, OSError, json.JSONDecodeError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ServiceError) and isinstance(exc.body, dict):
            record["error"] = exc.body.get("error", record["error"])
            record["message"] = exc.body.get("message", record["message"])
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
