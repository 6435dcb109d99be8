"""Multi-objective adaptive signal control on a deterministic intersection microsimulation."""

__version__ = "0.1.0"
