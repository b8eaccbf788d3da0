"""Underactuated synchronization of soft fingers driven by a single pump."""

from .plant import ChannelCoeffs, GripperModel
from .ratcore import Polynomial, RationalFunction
from .ratmat import LeftInverseKind, RationalMatrix
from .sim import ScenarioSpec, run_scenario
from .synth import Controller, synthesize_feedforward, wire_feedback

__version__ = "0.1.0"
