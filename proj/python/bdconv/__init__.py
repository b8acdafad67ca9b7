"""Bayesian sparse blind deconvolution samplers."""

import json
import os
from pathlib import Path

_data = Path(__file__).with_name("data")
if _data.is_dir():
    os.environ.setdefault("BDCONV_DATA_DIR", str(_data))

from . import _bdconv  # noqa: E402
from ._bdconv import (  # noqa: E402
    DiagnosticUndefined,
    InvalidArgument,
    NumericalFailure,
    StepFailure,
    convolve,
    dps_basis,
    mpsrf,
    nmse,
    pulse_cosine_decay,
    pulse_gaussian_derivative,
)

DEFAULT_TAUS = (0.01, 0.04, 0.07, 0.1)


def _dump(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def default_spec(**overrides):
    """Full experiment spec as a dict, with optional field overrides."""
    return json.loads(_bdconv.canonical_spec(json.dumps(overrides)))


def spec_hash(spec):
    return _bdconv.spec_hash(_dump(spec))


def simulate(spec=None):
    """Synthetic x, h, y for a spec."""
    return _bdconv.simulate(_dump(spec or {}))


def run(spec=None, jobs=1):
    """Runs an experiment; the result holds the RunRecord as a dict under 'record'."""
    out = _bdconv.run(_dump(spec or {}), jobs)
    out["record"] = json.loads(out.pop("record_json"))
    return out


def sweep(grid, taus=DEFAULT_TAUS, jobs=1):
    """Success-rate rows for a scenario grid."""
    return _bdconv.sweep(_dump(grid), list(taus), jobs)


__all__ = [
    "DEFAULT_TAUS",
    "DiagnosticUndefined",
    "InvalidArgument",
    "NumericalFailure",
    "StepFailure",
    "convolve",
    "default_spec",
    "dps_basis",
    "mpsrf",
    "nmse",
    "pulse_cosine_decay",
    "pulse_gaussian_derivative",
    "run",
    "simulate",
    "spec_hash",
    "sweep",
]
