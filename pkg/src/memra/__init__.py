"""Structural analysis and simulation of circuits with memristors."""

from .analysis import AnalysisReport, analyze_circuit
from .model import assemble, find_equilibrium, jacobian_K
from .netlist import Circuit, DeviceClass, format_netlist, parse_netlist, validate
from .sim import consistent_initialization, integrate

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport", "Circuit", "DeviceClass", "analyze_circuit", "assemble",
    "consistent_initialization", "find_equilibrium", "format_netlist", "integrate",
    "jacobian_K", "parse_netlist", "validate",
]
