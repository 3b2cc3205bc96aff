"""Private company valuation: estimation, filtering, pricing and default probabilities."""

from ._core import (
    DomainError,
    Error,
    ModelParams,
    NoSolutionError,
    NumericalError,
    ObservedSeries,
    calibrate_threshold,
    default_initial_params,
    default_probability,
    derive_series,
    em_fit,
    filter,
    ingest_csv,
    price,
    read_csv,
    simulate_company,
    smooth,
)

__all__ = [
    "DomainError",
    "Error",
    "ModelParams",
    "NoSolutionError",
    "NumericalError",
    "ObservedSeries",
    "calibrate_threshold",
    "default_initial_params",
    "default_probability",
    "derive_series",
    "em_fit",
    "filter",
    "ingest_csv",
    "price",
    "read_csv",
    "simulate_company",
    "smooth",
]
