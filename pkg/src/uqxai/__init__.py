"""Aleatoric/epistemic uncertainty for routing, rejecting and evaluating explanations."""

from .dataset import Dataset, SplitSpec, load_csv, make_toy_moons, normalize_minmax, split
from .evidence import MassFunction, betp, dempster_combine, discord, eknn_fit, eknn_predict_mass, nonspecificity
from .uncertainty import UncertaintyEstimate, belief_uncertainty, centroid_fit, centroid_uncertainty, entropy_decompose

__version__ = "0.1.0"
