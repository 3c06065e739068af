"""Finite-time stability of conformable fractional-order systems with delayed impulses.

Simulation, settling-time certificates, runtime Lyapunov monitoring and a
drive-response memristive network application.
"""
from .calculus import Order, SegmentFrame, conformable_time, inverse_conformable_time, make_frame
from .certificates import (
    Certificate, FlowConditionParams, JumpConditionParams, beta_from_linear_gain, certify, gamma_s0,
)
from .errors import ConfigurationError, DomainError, FTSError, IntegrationError
from .monitor import LyapunovSpec, MonitorReport, monitor
from .simulator import ImpulseEvent, ImpulseSchedule, Trajectory, VectorField, simulate

__version__ = "0.1.0"

__all__ = [
    "Order", "SegmentFrame", "conformable_time", "inverse_conformable_time", "make_frame",
    "Certificate", "FlowConditionParams", "JumpConditionParams", "beta_from_linear_gain", "certify",
    "gamma_s0", "ConfigurationError", "DomainError", "FTSError", "IntegrationError",
    "LyapunovSpec", "MonitorReport", "monitor",
    "ImpulseEvent", "ImpulseSchedule", "Trajectory", "VectorField", "simulate",
]
