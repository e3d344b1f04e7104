"""Differentially private synthetic data generation and utility evaluation."""
from .data import (
    Dataset,
    Schema,
    discretize,
    load_dataset,
    load_schema,
    serialize_dataset,
)
from .privacy import BudgetAccountant, PrivacyParams, SeededRng

__version__ = "0.1.0"

__all__ = [
    "BudgetAccountant",
    "Dataset",
    "PrivacyParams",
    "Schema",
    "SeededRng",
    "discretize",
    "load_dataset",
    "load_schema",
    "serialize_dataset",
]
