"""Parametric sensitivities of hybrid multibody trajectories."""

import json

from . import _core
from ._core import ConfigurationError, Error

__all__ = ["default_scenario", "normalize", "propagate", "run", "compare", "validate", "Error", "ConfigurationError"]


def _text(scenario):
    return scenario if isinstance(scenario, str) else json.dumps(scenario)


def default_scenario(model_type):
    return json.loads(_core.default_scenario(model_type))


def normalize(scenario):
    return json.loads(_core.normalize_scenario(_text(scenario)))


def propagate(scenario):
    """Trajectory dict: t, regime, x (rows of [q, v, z, vec Q, vec V, Z]), events, psi, dpsi_drho."""
    return _core.propagate(_text(scenario))


def run(scenario):
    return _core.run(_text(scenario))


def compare(scenario, method=None, eps=None, threshold=None):
    s = normalize(scenario)
    if method is not None:
        s["compare"]["method"] = method
        if threshold is None:
            s["compare"]["threshold"] = 1e-10 if method == "complex" else 1e-3
    if eps is not None:
        s["compare"]["eps"] = eps
    if threshold is not None:
        s["compare"]["threshold"] = threshold
    return _core.compare(json.dumps(s))


def validate(scenario):
    return _core.validate(_text(scenario))
