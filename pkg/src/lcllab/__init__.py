"""Locally checkable labeling lab: gadgets, detectors, GHZ strategies and locality simulations."""

from .graph import BOT, Edge, LabeledGraph
from .lcl import Labeling, LclProblem, brute_force_solve, check_all

__all__ = ["BOT", "Edge", "LabeledGraph", "Labeling", "LclProblem", "brute_force_solve", "check_all"]
