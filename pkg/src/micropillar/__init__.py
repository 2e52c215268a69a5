"""Efficiency and phonon-sideband design tools for semiconductor micropillar cavities."""

from .channels import ChannelSpectra, PurcellCurve, synthesize_channels
from .designer import FigureOfMerit, ScanConfig, scan
from .geometry import LayerStack, PillarDesign, build_stack
from .tmm import cavity_resonance, stack_response

__version__ = "0.1.0"

__all__ = [
    "ChannelSpectra",
    "PurcellCurve",
    "synthesize_channels",
    "FigureOfMerit",
    "ScanConfig",
    "scan",
    "LayerStack",
    "PillarDesign",
    "build_stack",
    "cavity_resonance",
    "stack_response",
]
