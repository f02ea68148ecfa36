"""Hierarchical TSK fuzzy controllers for a planar biped walk cycle."""

from . import anfis, biped, controller, fuzzy, hierarchy
from .anfis import TrainingConfig, TrainingSet, train_hybrid
from .biped import BipedParams, GaitConfig, generate_reference_gait
from .controller import all_specs, train_assembly
from .fuzzy import FuzzyLogicUnit, MFKind, infer

__version__ = "0.1.0"

__all__ = [
    "anfis", "biped", "controller", "fuzzy", "hierarchy",
    "TrainingConfig", "TrainingSet", "train_hybrid",
    "BipedParams", "GaitConfig", "generate_reference_gait",
    "all_specs", "train_assembly",
    "FuzzyLogicUnit", "MFKind", "infer",
]
