"""Typed coercion of experiment-file values, bound by callers to their error type."""

from cellflow.toml_coerce._mappings import optional_table, reject_unknown_keys
from cellflow.toml_coerce._scalars import (
    boolean,
    choice,
    non_negative_int,
    optional_string,
    positive_int,
    real_number,
)
from cellflow.toml_coerce._sequences import expect_sequence, real_tuple

__all__ = [
    "boolean",
    "choice",
    "expect_sequence",
    "non_negative_int",
    "optional_string",
    "optional_table",
    "positive_int",
    "real_number",
    "real_tuple",
    "reject_unknown_keys",
]
