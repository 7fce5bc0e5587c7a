"""Online learning of augmentation policies alongside network training."""

from .augment import NUM_ELEMENTS, NUM_OPERATIONS, AugElement, AugOperation, apply_element, apply_operation
from .engine import SearchSettings, cost_iterations, run_search
from .policy import PolicyParams, probabilities

__all__ = [
    "NUM_ELEMENTS",
    "NUM_OPERATIONS",
    "AugElement",
    "AugOperation",
    "PolicyParams",
    "SearchSettings",
    "apply_element",
    "apply_operation",
    "cost_iterations",
    "probabilities",
    "run_search",
]

__version__ = "0.1.0"
