"""Simulator for reconfigurable circuits on arbitrary graphs."""

from .engine import Simulation, Step, form_circuits, run_until_halt
from .graph import Graph, generate, load_graph, save_graph

__version__ = "0.1.0"

__all__ = ["Graph", "Simulation", "Step", "form_circuits", "generate", "load_graph",
           "run_until_halt", "save_graph"]
