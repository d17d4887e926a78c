"""Differentially private weighted average treatment effects for binary outcomes."""

from .dataset import CausalDataset, Schema, load_csv, partition_health, random_partition
from .exceptions import (
    AggregationError,
    DataError,
    DegenerateSubsetError,
    DPWateError,
    FitError,
    ParameterError,
    PlanningError,
)
from .pipeline import dp_wate, nonprivate_wate
from .posterior import PosteriorConfig, PosteriorSummary, summarize
from .privacy import PrivacyBudget, PrivacyLedger, PrivateRelease, privatize
from .simlab import SimulationConfig, run_study, simulate_dataset
from .wate import Estimand, estimate_pair, estimate_tau, estimate_variance

__version__ = "0.1.0"
