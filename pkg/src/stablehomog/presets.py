"""Built-in coefficient models used by the command line and the test bench."""

import numpy as np

from .fields import FourierField, VectorField
from .jumpmaps import LinearJumpMap, MatrixField
from .model import CoefficientModel


def constant_model() -> CoefficientModel:
    """Constant coefficients: the oscillating equation already equals its limit."""
    return CoefficientModel(
        dim=1, alpha=1.5, beta_target=0.5,
        drift_fast=VectorField.zero(1),
        drift_slow=VectorField.constant(1, 0.3),
        potential_fast=FourierField.zero(1),
        potential_slow=FourierField.constant(1, 0.2),
        initial_data=FourierField.from_harmonics(1, cos={1: 1.0}),
        jump_map=LinearJumpMap(1.0),
    )


def oscillating_sigma_model() -> CoefficientModel:
    """Driftless model with an oscillating noise amplitude 1 + 0.5 sin(2 pi x)."""
    amp = FourierField.from_harmonics(1, const=1.0, sin={1: 0.5})
    return CoefficientModel(
        dim=1, alpha=1.5, beta_target=0.5,
        drift_fast=VectorField.zero(1),
        drift_slow=VectorField.constant(1, 0.3),
        potential_fast=FourierField.zero(1),
        potential_slow=FourierField.constant(1, 0.2),
        initial_data=FourierField.from_harmonics(1, cos={1: 1.0}),
        jump_map=LinearJumpMap(amp),
    )


def drift_model() -> CoefficientModel:
    """Nontrivial fast drift and potential: all correctors genuinely active."""
    b = VectorField([FourierField.from_harmonics(1, cos={1: 1.2}, sin={2: 0.2})])
    return CoefficientModel(
        dim=1, alpha=1.5, beta_target=0.5,
        drift_fast=b,
        drift_slow=VectorField.constant(1, 0.3),
        potential_fast=FourierField.from_harmonics(1, cos={1: 0.3}),
        potential_slow=FourierField.constant(1, 0.1),
        initial_data=FourierField.from_harmonics(1, cos={1: 1.0}),
        jump_map=LinearJumpMap(0.4),
    )


def plane_model() -> CoefficientModel:
    """Small two dimensional demo with an isotropic jump map."""
    u0 = FourierField.from_harmonics(2, cos={(1, 1): 1.0})
    return CoefficientModel(
        dim=2, alpha=1.5, beta_target=0.5,
        drift_fast=VectorField.zero(2),
        drift_slow=VectorField([
            FourierField.constant(2, 0.3),
            FourierField.constant(2, -0.1),
        ]),
        potential_fast=FourierField.zero(2),
        potential_slow=FourierField.constant(2, 0.2),
        initial_data=u0,
        jump_map=LinearJumpMap(MatrixField.constant(2, np.eye(2))),
    )


PRESETS = {
    "constant": constant_model,
    "oscillating": oscillating_sigma_model,
    "drift": drift_model,
    "plane": plane_model,
}


def preset_names():
    return sorted(PRESETS)


def get_preset(name: str) -> CoefficientModel:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
