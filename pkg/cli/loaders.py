"""
JSON codecs and validated loading of experiment inputs.

Complex matrices are stored row-major as nested lists of [re, im] pairs;
plain numbers are accepted as real entries.

Channel file: {"d_in": int, "d_out": int, "kraus": [matrix, ...]}
State / observable file: {"matrix": matrix}
Petz instance file: {"channel": path or inline channel, "sigma": matrix,
"omega": matrix, "observable": matrix, "support_tol": optional float}
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from backend.channels import CPTP_TOL, DensityOperator, Observable, QuantumChannel
from backend.errors import DualChanError
from backend.linalg import HERMITIAN_TOL, ComplexMatrix
from backend.petz import SUPPORT_TOL, PetzInstance

logger = logging.getLogger(__name__)


class InputError(DualChanError):
    """An input file is missing or cannot be parsed."""


@dataclass
class LoadedInputs:
    channel: Optional[QuantumChannel] = None
    state: Optional[DensityOperator] = None
    observable: Optional[Observable] = None
    petz: Optional[PetzInstance] = None


def matrix_from_json(data: Any) -> ComplexMatrix:
    """Decode a nested [re, im] matrix."""
    try:
        arr = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InputError(f"malformed matrix: {e}")
    if arr.ndim == 3 and arr.shape[2] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(np.complex128)
    raise InputError(f"matrix must be rows of [re, im] pairs, got array of shape {arr.shape}")


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def channel_to_json(channel: QuantumChannel) -> Dict:
    return {
        "d_in": channel.d_in,
        "d_out": channel.d_out,
        "kraus": [matrix_to_json(k) for k in channel.kraus],
    }


def channel_from_json(data: Dict, tol: float = CPTP_TOL, name: Optional[str] = None) -> QuantumChannel:
    """Decode and validate a channel record."""
    try:
        d_in, d_out = int(data["d_in"]), int(data["d_out"])
        kraus = [matrix_from_json(k) for k in data["kraus"]]
    except (KeyError, TypeError) as e:
        raise InputError(f"channel record missing or malformed field: {e}")
    if not kraus:
        raise InputError("channel record has no Kraus operators")
    # Kraus form is CP by construction; the constructor enforces trace preservation
    return QuantumChannel(kraus, d_in, d_out, tol=tol, name=name)


def read_json(path: str) -> Any:
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    try:
        with open(path, "r") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot parse {path}: {e}")


def write_json(path: str, data: Any):
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def load_channel(path: str, tol: float = CPTP_TOL) -> QuantumChannel:
    return channel_from_json(read_json(path), tol, name=os.path.basename(path))


def _matrix_field(data: Any, key: str, source: str) -> ComplexMatrix:
    if not isinstance(data, dict) or key not in data:
        raise InputError(f"{source}: missing field '{key}'")
    return matrix_from_json(data[key])


def load_state(path: str, tol: float = HERMITIAN_TOL) -> DensityOperator:
    return DensityOperator(_matrix_field(read_json(path), "matrix", path), tol)


def load_observable(path: str, tol: float = HERMITIAN_TOL, unit_range: bool = False) -> Observable:
    observable = Observable(_matrix_field(read_json(path), "matrix", path), tol)
    if unit_range:
        observable.require_unit_range(tol)
    return observable


def load_petz_instance(path: str, tol: float = HERMITIAN_TOL, unit_range: bool = True) -> PetzInstance:
    """Load an instance file; a string channel field is resolved relative to the file."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: instance must be a JSON object")
    channel_field = data.get("channel")
    if isinstance(channel_field, str):
        channel_path = os.path.join(os.path.dirname(os.path.abspath(path)), channel_field)
        channel = load_channel(channel_path, max(tol, CPTP_TOL))
    elif isinstance(channel_field, dict):
        channel = channel_from_json(channel_field, max(tol, CPTP_TOL))
    else:
        raise InputError(f"{path}: 'channel' must be a path or an inline channel record")
    observable = Observable(_matrix_field(data, "observable", path), tol)
    if unit_range:
        observable.require_unit_range(tol)
    return PetzInstance(
        channel,
        DensityOperator(_matrix_field(data, "sigma", path), tol),
        DensityOperator(_matrix_field(data, "omega", path), tol),
        observable,
        float(data.get("support_tol", SUPPORT_TOL)),
    )


def load_instance(paths: Dict[str, str], validation_tol: float = HERMITIAN_TOL,
                  estimator: bool = False) -> LoadedInputs:
    """
    Load and validate every input named in paths.

    Args:
        paths: any of the keys "channel", "state", "observable", "petz"
        validation_tol: tolerance for state and observable invariants
        estimator: enforce the [-1, 1] observable range required by estimators

    Raises:
        InputError: on missing or unparsable files
        ValidationError: on invariant violations, naming the constraint and magnitude
    """
    loaded = LoadedInputs()
    if paths.get("channel"):
        loaded.channel = load_channel(paths["channel"], max(validation_tol, CPTP_TOL))
    if paths.get("state"):
        loaded.state = load_state(paths["state"], validation_tol)
    if paths.get("observable"):
        loaded.observable = load_observable(paths["observable"], validation_tol, unit_range=estimator)
    if paths.get("petz"):
        loaded.petz = load_petz_instance(paths["petz"], validation_tol, unit_range=estimator)
    logger.debug("Loaded inputs: %s", {k: v for k, v in paths.items() if v})
    return loaded
