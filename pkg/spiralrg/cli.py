"""Command-line entry point.

Every command writes CSV datasets under the output directory, prints a JSON
summary to stdout and exits 0; library errors exit with their category code
after printing ``error category=... message=...`` to stderr.
"""

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from spiralrg import tracking
from spiralrg.config import FIG3_SEEDS, Preset, RunConfig, load_config
from spiralrg.decimation import DecimationSettings, decimate_to, decimation_trace, trace_rows
from spiralrg.eigensolver import SpectrumRequest, lowest_eigenvalues, verify_renormalization
from spiralrg.errors import SpiralRGError
from spiralrg.fixedpoints import analytic_pair, find_numeric, floating_fp_sequence
from spiralrg.hamiltonian import ModelVariant, build_matrix, xi_dimension
from spiralrg.output import write_csv, write_text
from spiralrg.rgt import EventKind, FlowParams, StepperKind, run_flow
from spiralrg.spiral import build_frames, circle_dispersion, cone_classify, local_constants, projection_f, rotation_angle

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "SPIRALRG_LOG_LEVEL"


def _write(config: RunConfig, name: str, frame: pd.DataFrame, extra: Optional[dict] = None) -> Path:
    return write_csv(Path(config.out) / name, frame, config.echo(), extra, timestamp=not config.no_timestamp)


@tracking.traced
def cmd_build(config: RunConfig) -> dict:
    matrix = build_matrix(ModelVariant(config.variant, config.g), config.N)
    frame = pd.DataFrame(matrix.triplets(), columns=["row", "col", "value"])
    path = _write(config, "build.csv", frame)
    summary = {"file": str(path), "dim": matrix.dim, "half_bandwidth": matrix.half_bandwidth, "nonzeros": len(frame)}
    if config.dense:
        text = write_text(Path(config.out) / "build.txt", matrix.dense_text(), config.echo(),
                          timestamp=not config.no_timestamp)
        summary["dense_file"] = str(text)
    return summary


@tracking.traced
def cmd_decimate(config: RunConfig) -> dict:
    matrix = build_matrix(ModelVariant(config.variant, config.g), config.N)
    settings = DecimationSettings(
        target_cutoff=config.n_final, E=config.E, parity=config.decimation_parity,
        precision_bits=config.precision_bits,
    )
    rows = trace_rows(decimation_trace(matrix, settings, config.variant))
    path = _write(config, "decimation.csv", pd.DataFrame(rows))
    events = [[row["k"], row["event"]] for row in rows if row["event"]]
    return {"file": str(path), "rows": len(rows), "events": events, "final_n": rows[-1]["n"] if rows else config.N}


@tracking.traced
def cmd_flow(config: RunConfig) -> dict:
    trace = run_flow(config.flow_params(), config.start_xi())
    path = _write(config, "flow.csv", pd.DataFrame(trace.rows()))
    return {
        "file": str(path),
        "frames": len(trace),
        "events": [[k, kind.value] for k, kind in trace.events],
        "final_n": trace.final.n,
        "final_xi": [float(x) for x in trace.final.xi],
    }


@tracking.traced
def cmd_fixed_points(config: RunConfig) -> dict:
    kind = config.stepper_kind
    if kind is StepperKind.EXACT_QUARTIC:
        kind = StepperKind.APPROX_QUARTIC
    dim = xi_dimension(config.variant)
    records = find_numeric(kind, dim, config.N, config.g, seeds=config.seeds or None)
    rows = []
    for index, record in enumerate(records):
        row = {"index": index, "classification": record.classification.value, "residual": record.residual}
        for i, value in enumerate(record.location, start=1):
            row[f"xi_{i}"] = value
        for i, z in enumerate(record.jacobian_eigenvalues, start=1):
            row[f"eig_re_{i}"] = z.real
            row[f"eig_im_{i}"] = z.imag
            row[f"modulus_{i}"] = abs(z)
        rows.append(row)
    path = _write(config, "fixed_points.csv", pd.DataFrame(rows))
    counts: Dict[str, int] = {}
    for record in records:
        counts[record.classification.value] = counts.get(record.classification.value, 0) + 1
    return {"file": str(path), "count": len(records), "classes": counts, "roots": [r.as_dict() for r in records]}


def _spiral_frames(config: RunConfig):
    trace = run_flow(config.flow_params(), config.start_xi())
    reference = floating_fp_sequence(
        config.n_final, config.g, config.E, config.reference_N, precision_bits=config.precision_bits
    )
    frames = build_frames(trace, reference, config.g, k_min=config.k_min, k_max=config.k_max)
    return trace, frames


def _spiral_summary(config: RunConfig, frames) -> dict:
    summary = {"frames": len(frames)}
    if len(frames) >= 3:
        for system in ("fig1", "scaling1", "scaling3"):
            summary[f"dispersion_{system}"] = circle_dispersion(frames, system, k_min=0)
        angles = rotation_angle(frames, basis="floating")
        expected = [2 * math.asin(float(local_constants(f.n, config.g)[0])) for f in frames[1:]]
        summary["mean_rotation"] = float(np.mean(angles))
        summary["mean_expected_rotation"] = float(np.mean(expected))
    return summary


@tracking.traced
def cmd_spiral(config: RunConfig, name: str = "spiral.csv") -> dict:
    _, frames = _spiral_frames(config)
    path = _write(config, name, pd.DataFrame([f.row() for f in frames]))
    return {"file": str(path), **_spiral_summary(config, frames)}


@tracking.traced
def cmd_spectrum(config: RunConfig) -> dict:
    matrix = build_matrix(ModelVariant(config.variant, config.g), config.N)
    if config.decimate:
        settings = DecimationSettings(target_cutoff=config.n_final, E=config.E, parity=config.decimation_parity)
        matrix = decimate_to(matrix, settings)
    values = lowest_eigenvalues(SpectrumRequest(matrix, min(config.count, matrix.dim)))
    path = _write(config, "spectrum.csv", pd.DataFrame({"index": range(len(values)), "eigenvalue": values}))
    return {"file": str(path), "dim": matrix.dim, "eigenvalues": values}


@tracking.traced
def cmd_verify(config: RunConfig) -> dict:
    report = verify_renormalization(config.g, config.E, config.N, config.n_final, config.variant)
    path = _write(config, "verify.csv", pd.DataFrame([report.as_dict()]))
    return {"file": str(path), **report.as_dict()}


def _fig3(config: RunConfig) -> dict:
    precision = config.precision
    params = FlowParams(
        g=config.g, E=config.E, N=config.N, n_final=config.n_final,
        stepper=StepperKind.APPROX_QUARTIC, precision_bits=config.precision_bits,
    )
    with precision.active():
        plus, minus, constants = analytic_pair(precision.number(config.g) * config.N)
        seeds = {
            color: minus.shifted(tuple(precision.number(x) for x in offsets))
            for color, offsets in FIG3_SEEDS.items()
        }
    summary = {"six_gN": 6 * config.g * config.N, "p": float(constants.p), "r": float(constants.r)}
    for color, seed in seeds.items():
        trace = run_flow(params, seed)
        f = projection_f(trace, plus, minus)
        cone = cone_classify(trace, minus, "approx")
        frame = pd.DataFrame(trace.rows())
        frame.insert(frame.columns.get_loc("event"), "h", list(cone.h_values))
        frame.insert(frame.columns.get_loc("event"), "f", f)
        cone_header = {f"cone_{k}": v for k, v in cone.summary().items()}
        path = _write(config, f"fig3_{color}.csv", frame, extra={"trajectory": color, **cone_header})
        summary[f"{color}_file"] = str(path)
        summary[f"{color}_final_f"] = f[-1]
        summary[f"{color}_classification"] = cone.classification.value
        summary[f"{color}_sign_events"] = len(trace.events_of(EventKind.DENOMINATOR_SIGN_CHANGE))
    return summary


@tracking.traced
def cmd_figure(config: RunConfig) -> dict:
    if config.figure is Preset.FIG3:
        return _fig3(config)
    return cmd_spiral(config, name=f"{config.figure.value}.csv")


COMMANDS: Dict[str, Callable[[RunConfig], dict]] = {
    "build": cmd_build,
    "decimate": cmd_decimate,
    "flow": cmd_flow,
    "fixed-points": cmd_fixed_points,
    "spiral": cmd_spiral,
    "spectrum": cmd_spectrum,
    "verify": cmd_verify,
    "figure": cmd_figure,
}


def _common_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="key=value configuration file")
    parent.add_argument("--variant", choices=["quartic", "sextic", "ssb"])
    parent.add_argument("--stepper", choices=[k.value for k in StepperKind])
    parent.add_argument("--g", type=float)
    parent.add_argument("--E", type=float)
    parent.add_argument("--N", type=int)
    parent.add_argument("--n-final", dest="n_final", type=int)
    parent.add_argument("--precision-bits", dest="precision_bits", type=int)
    parent.add_argument("--parity", choices=["even", "odd", "both"])
    parent.add_argument("--preset", choices=[p.value for p in Preset])
    parent.add_argument("--xi-start", dest="xi_start", help="comma-separated start vector")
    parent.add_argument("--seeds", help="semicolon-separated list of comma-separated seeds")
    parent.add_argument("--reference-cutoff", dest="reference_cutoff", type=int)
    parent.add_argument("--k-min", dest="k_min", type=int)
    parent.add_argument("--k-max", dest="k_max", type=int)
    parent.add_argument("--count", type=int)
    parent.add_argument("--decimate", action="store_true", default=None)
    parent.add_argument("--dense", action="store_true", default=None, help="build: also write a dense text grid")
    parent.add_argument("--out", help=f"output directory (default ${{SPIRALRG_OUTPUT_DIR}} or ./out)")
    parent.add_argument("--no-timestamp", dest="no_timestamp", action="store_true", default=None)
    parent.add_argument("--track", action="store_true", default=None, help="log the run to Braintrust")
    parent.add_argument("--log-level", dest="log_level")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spiralrg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _common_flags()
    for name in COMMANDS:
        command = sub.add_parser(name, parents=[parent])
        if name == "figure":
            command.add_argument("figure", choices=["fig1", "fig2", "fig3"])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    flags = vars(args).copy()
    command = flags.pop("command")
    config_file = flags.pop("config")
    level = flags.pop("log_level") or os.getenv(LOG_LEVEL_ENV, "WARNING")
    logging.basicConfig(level=level.upper(), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        config = load_config(command, flags, config_file)
        if config.track:
            tracking.start()
        summary = tracking.run_traced(command, lambda: COMMANDS[command](config), config.echo())
    except SpiralRGError as exc:
        print(f"error category={exc.category} message={exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(summary, indent=2, default=str))
    return 0
