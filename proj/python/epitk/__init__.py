"""Epidemic surveillance toolkit."""

from ._epitk import (
    ArgumentError,
    Date,
    DomainError,
    Error,
    EstimationError,
    IncidenceSeries,
    IntegrationError,
    ParseError,
    PredictionInterval,
    SeriesSchema,
    __version__,
    changepoint,
    compartmental,
    count_ts,
    derive_seed,
    format_series,
    load_series,
    parse_series,
    rt,
    run_cli,
)

__all__ = [
    "ArgumentError",
    "Date",
    "DomainError",
    "Error",
    "EstimationError",
    "IncidenceSeries",
    "IntegrationError",
    "ParseError",
    "PredictionInterval",
    "SeriesSchema",
    "__version__",
    "changepoint",
    "compartmental",
    "count_ts",
    "derive_seed",
    "format_series",
    "load_series",
    "parse_series",
    "rt",
    "run_cli",
]
