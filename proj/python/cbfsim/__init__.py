"""Multi-agent collision avoidance: QP safety filters, simulation, analysis."""

from ._cbfsim import *  # noqa: F401,F403
