"""Run configuration: defaults, figure presets, key=value files and flags.

Later sources win: model defaults, per-command defaults, config file, flags.
Figure presets are applied last and pin the parameters they name.
"""

import enum
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from spiralrg.decimation import Parity
from spiralrg.errors import ConfigError
from spiralrg.hamiltonian import MIN_CUTOFF, Variant, xi_dimension
from spiralrg.precision import DEFAULT_BITS, DOUBLE_BITS, Precision
from spiralrg.rgt import FlowParams, StepperKind, XiVector

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "SPIRALRG_OUTPUT_DIR"
COMMANDS = ("build", "decimate", "flow", "fixed-points", "spiral", "spectrum", "verify", "figure")


class Preset(str, enum.Enum):
    NONE = "none"
    FIG1 = "fig1"
    FIG2 = "fig2"
    FIG3 = "fig3"


_SPIRAL_PRESET = {
    "variant": "quartic",
    "stepper": "exact_quartic",
    "g": 1.0,
    "E": 0.0,
    "N": 1000,
    "n_final": 600,
    "xi_start": [1.0, 1.0, 1.0],
    "reference_cutoff": 1200,
    "k_min": 8,
    "k_max": 200,
    "parity": "even",
    "precision_bits": DEFAULT_BITS,
}

PRESETS: Dict[Preset, dict] = {
    Preset.FIG1: dict(_SPIRAL_PRESET),
    Preset.FIG2: dict(_SPIRAL_PRESET),
    # 6gN = 10^3 over 500 approximate steps
    Preset.FIG3: {
        "variant": "quartic",
        "stepper": "approx_quartic",
        "g": 1.0 / 6.0,
        "E": 0.0,
        "N": 1000,
        "n_final": 0,
        "parity": "even",
        "precision_bits": DEFAULT_BITS,
    },
}

# offsets from ξ⁻, kept as decimal strings so extended precision sees them exactly
FIG3_SEEDS = {
    "black": ("1e-6", "1e-6", "1e-6"),
    "red": ("1e-6", "1e-6", "2e-6"),
    "blue": ("1e-6", "1e-6", "1.5e-6"),
}

COMMAND_DEFAULTS = {
    "verify": {"g": 10.0, "N": 200, "n_final": 10, "E": 0.0},
    "fixed-points": {"N": 1000, "g": 1.0},
}

_DEFAULT_STEPPER = {
    Variant.QUARTIC: StepperKind.EXACT_QUARTIC,
    Variant.SEXTIC: StepperKind.SEXTIC_LARGE_N,
    Variant.SSB: StepperKind.SSB_LARGE_N,
}


def _default_output() -> Path:
    return Path(os.getenv(OUTPUT_DIR_ENV, "out"))


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, use_enum_values=False)

    command: str
    figure: Optional[Preset] = None
    preset: Preset = Preset.NONE
    variant: Variant = Variant.QUARTIC
    stepper: Optional[StepperKind] = None
    g: float = 1.0
    E: float = 0.0
    N: int = 1000
    n_final: int = 8
    precision_bits: int = DEFAULT_BITS
    parity: Parity = Parity.EVEN
    xi_start: Optional[List[float]] = None
    seeds: List[List[float]] = []
    reference_cutoff: Optional[int] = None
    k_min: int = 0
    k_max: Optional[int] = None
    count: int = 5
    decimate: bool = False
    dense: bool = False
    out: Path = Path("out")
    no_timestamp: bool = False
    track: bool = False

    @field_validator("xi_start", mode="before")
    @classmethod
    def _split_vector(cls, value):
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("seeds", mode="before")
    @classmethod
    def _split_seeds(cls, value):
        if isinstance(value, str):
            return [[p.strip() for p in chunk.split(",") if p.strip()] for chunk in value.split(";") if chunk.strip()]
        return value

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        problems = []
        if self.command not in COMMANDS:
            problems.append(f"command: unknown command {self.command!r}")
        if not self.g > 0:
            problems.append(f"g: must be positive, got {self.g}")
        if self.N < MIN_CUTOFF and self.command in ("build", "decimate", "spectrum", "verify"):
            problems.append(f"N: must be at least {MIN_CUTOFF}, got {self.N}")
        if self.n_final < 0:
            problems.append(f"n_final: must be non-negative, got {self.n_final}")
        if self.N < self.n_final:
            problems.append(f"N: {self.N} is below n_final={self.n_final}")
        if self.precision_bits < DOUBLE_BITS:
            problems.append(f"precision_bits: must be at least {DOUBLE_BITS}, got {self.precision_bits}")
        if self.command in ("spiral", "figure") and self.variant is not Variant.QUARTIC:
            problems.append(f"variant: spiral frames need the quartic variant, got {self.variant.value}")
        stepper = self.stepper_kind
        if stepper.variant is not self.variant:
            problems.append(f"stepper: {stepper.value} does not act on the {self.variant.value} variant")
        if self.command in ("flow", "spiral") and (self.N - self.n_final) % stepper.stride:
            problems.append(f"n_final: N - n_final must be a multiple of {stepper.stride}")
        if (
            stepper is StepperKind.EXACT_QUARTIC
            and self.command in ("flow", "spiral")
            and not self.parity.admits(self.N)
        ):
            problems.append(f"parity: N={self.N} is not in the {self.parity.value} sector")
        dim = xi_dimension(self.variant)
        if self.xi_start is not None and len(self.xi_start) != dim:
            problems.append(f"xi_start: needs {dim} components, got {len(self.xi_start)}")
        for i, seed in enumerate(self.seeds):
            if len(seed) != dim:
                problems.append(f"seeds: seed {i} needs {dim} components, got {len(seed)}")
        if self.reference_cutoff is not None and (
            self.reference_cutoff <= self.N or (self.reference_cutoff - self.N) % 2
        ):
            problems.append(f"reference_cutoff: must exceed N={self.N} with the same parity")
        if self.k_min < 0 or (self.k_max is not None and self.k_max < self.k_min):
            problems.append("k_min/k_max: need 0 <= k_min <= k_max")
        if self.count < 1:
            problems.append(f"count: must be at least 1, got {self.count}")
        if self.command == "figure" and self.figure is None:
            problems.append("figure: name one of fig1, fig2, fig3")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def stepper_kind(self) -> StepperKind:
        return self.stepper or _DEFAULT_STEPPER[self.variant]

    @property
    def precision(self) -> Precision:
        return Precision(self.precision_bits)

    @property
    def decimation_parity(self) -> Parity:
        """Sector eliminated alongside n_final; SSB mixes parities."""
        if self.variant is Variant.SSB:
            return Parity.BOTH
        return Parity.EVEN if self.n_final % 2 == 0 else Parity.ODD

    @property
    def reference_N(self) -> int:
        return self.reference_cutoff or self.N + 200

    def flow_params(self) -> FlowParams:
        return FlowParams(
            g=self.g, E=self.E, N=self.N, n_final=self.n_final, stepper=self.stepper_kind,
            precision_bits=self.precision_bits, parity=self.parity.value,
        )

    def start_xi(self) -> XiVector:
        if self.xi_start is None:
            return XiVector.ones(self.variant)
        return XiVector(self.variant, tuple(self.xi_start))

    def echo(self) -> Dict[str, str]:
        """Every parameter as text, for file headers."""
        out = {}
        for key, value in self.model_dump(mode="json").items():
            if key in ("out", "track"):
                continue
            out[key] = ",".join(str(v) for v in value) if isinstance(value, list) else str(value)
        return out


def parse_config_file(path) -> Dict[str, str]:
    """key=value per line; blank lines and # comments ignored."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc}"]) from exc
    values, problems = {}, []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"config line {number}: expected key=value, got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    if problems:
        raise ConfigError(problems)
    return values


def _problems(error: ValidationError) -> List[str]:
    out = []
    for item in error.errors():
        message = item["msg"]
        if message.startswith("Value error, "):
            out.extend(message[len("Value error, "):].split("; "))
            continue
        location = ".".join(str(part) for part in item["loc"]) or "config"
        out.append(f"{location}: {message}")
    return out


def load_config(command: str, flags: Optional[dict] = None, config_file=None) -> RunConfig:
    """Merge every configuration source into a validated RunConfig."""
    merged: dict = {"command": command, "out": _default_output()}
    merged.update(COMMAND_DEFAULTS.get(command, {}))
    if config_file is not None:
        merged.update(parse_config_file(config_file))
    merged.update({k: v for k, v in (flags or {}).items() if v is not None})
    preset = merged.get("figure") if command == "figure" else merged.get("preset")
    if preset not in (None, "none", Preset.NONE):
        try:
            pinned = PRESETS[Preset(preset)]
        except ValueError:
            raise ConfigError([f"preset: unknown preset {preset!r}"]) from None
        overridden = sorted(k for k in pinned if k in merged and k != "command" and str(merged[k]) != str(pinned[k]))
        if overridden:
            logger.warning("preset %s pins %s; ignoring the supplied values", preset, ", ".join(overridden))
        merged.update(pinned)
        merged["preset"] = preset
    try:
        return RunConfig(**merged)
    except ValidationError as exc:
        raise ConfigError(_problems(exc)) from None
