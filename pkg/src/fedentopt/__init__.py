"""Federated learning simulator with entropy-maximizing client selection."""

from .errors import (
    DimensionError,
    DomainError,
    EmptyClassError,
    FedEntOptError,
    FormatError,
    InfeasibleError,
    NumericalError,
    ZeroMassError,
)
from .labelstats import (
    LabelCounts,
    LabelDistribution,
    aggregate_counts,
    all_labels_present_threshold,
    entropy,
    normalize,
)
from .selection import (
    ClientRegistry,
    SelectionResult,
    SelectionState,
    greedy_step_oracle,
    select_fedentopt,
    select_random,
)

__version__ = "0.1.0"
