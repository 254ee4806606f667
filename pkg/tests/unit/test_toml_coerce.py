"""Property tests for :mod:`cellflow.toml_coerce`."""

from __future__ import annotations

import math
import typing as typ

import hypothesis.strategies as st
import pytest
from hypothesis import given

from cellflow import toml_coerce
from cellflow.config import ConfigurationError
from cellflow.model import ParameterError

if typ.TYPE_CHECKING:
    import collections.abc as cabc

_ERRORS = (ConfigurationError, ParameterError)
_error_type = st.sampled_from(_ERRORS)
_finite = st.floats(allow_nan=False, allow_infinity=False)
_non_numbers = st.one_of(st.text(max_size=8), st.booleans(), st.lists(st.integers()))


def _assert_rejection(
    call: cabc.Callable[[], object],
    expected_prefix: str,
    bad_value: object,
    error: type[Exception],
) -> None:
    """Assert *call* raises *error* naming the field and the offending type."""
    with pytest.raises(error) as excinfo:
        call()
    message = str(excinfo.value)
    assert expected_prefix in message
    assert type(bad_value).__name__ in message


@given(value=_finite, error=_error_type)
def test_real_number_accepts_finite_numbers(
    value: float, error: type[ConfigurationError]
) -> None:
    """Finite floats round-trip unchanged."""
    assert toml_coerce.real_number(value, "field", 0.0, error=error) == value


@given(value=_non_numbers, error=_error_type)
def test_real_number_rejects_non_numbers(
    value: object, error: type[ConfigurationError]
) -> None:
    """Strings, booleans and arrays are not numbers."""
    _assert_rejection(
        lambda: toml_coerce.real_number(value, "field", 0.0, error=error),
        "field must be a number",
        value,
        error,
    )


@pytest.mark.parametrize(
    ("value", "bound", "expected"),
    [
        pytest.param(-1.0, "non-negative", "a non-negative number", id="negative"),
        pytest.param(0.0, "positive", "a positive number", id="zero"),
        pytest.param(1.5, "unit-interval", "a number in [0, 1]", id="above-one"),
        pytest.param(math.inf, "any", "a finite number", id="infinite"),
    ],
)
def test_real_number_enforces_bounds(value: float, bound: str, expected: str) -> None:
    """Out-of-range values name the expected range."""
    with pytest.raises(ConfigurationError) as excinfo:
        toml_coerce.real_number(
            value, "network.x", 0.0, error=ConfigurationError, bound=bound
        )
    assert str(excinfo.value) == f"network.x must be {expected}."


def test_real_number_widens_integers_and_uses_default() -> None:
    """TOML integers become floats and ``None`` selects the default."""
    assert toml_coerce.real_number(3, "f", 1.0, error=ConfigurationError) == 3.0
    assert toml_coerce.real_number(None, "f", 0.5, error=ConfigurationError) == 0.5


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        pytest.param(None, 5, id="default"),
        pytest.param(7, 7, id="integer"),
        pytest.param(1e6, 1_000_000, id="integral-float"),
        pytest.param(0, 0, id="zero"),
    ],
)
def test_non_negative_int(value: object, expected: int) -> None:
    """Integral values, including exponent notation, are accepted."""
    assert (
        toml_coerce.non_negative_int(value, "f", 5, error=ConfigurationError)
        == expected
    )


@pytest.mark.parametrize(
    ("call", "fragment"),
    [
        pytest.param(
            lambda: toml_coerce.non_negative_int(-1, "f", 0, error=ConfigurationError),
            "f must be non-negative",
            id="negative",
        ),
        pytest.param(
            lambda: toml_coerce.positive_int(0, "f", 1, error=ConfigurationError),
            "f must be at least 1",
            id="zero",
        ),
        pytest.param(
            lambda: toml_coerce.positive_int(2.5, "f", 1, error=ConfigurationError),
            "f must be an integer; received float",
            id="fractional",
        ),
        pytest.param(
            lambda: toml_coerce.positive_int(
                True,  # noqa: FBT003
                "f",
                1,
                error=ConfigurationError,
            ),
            "f must be an integer; received bool",
            id="boolean",
        ),
    ],
)
def test_integer_rejections(call: cabc.Callable[[], object], fragment: str) -> None:
    """Integers are range checked and booleans refused."""
    with pytest.raises(ConfigurationError, match=fragment):
        call()


@given(error=_error_type)
def test_boolean(error: type[ConfigurationError]) -> None:
    """Booleans pass, ``None`` selects the default, anything else is rejected."""
    assert toml_coerce.boolean(None, "flag", error=error, default=True) is True
    assert toml_coerce.boolean(False, "flag", error=error) is False  # noqa: FBT003
    _assert_rejection(
        lambda: toml_coerce.boolean("yes", "flag", error=error),
        "flag must be a boolean",
        "yes",
        error,
    )


def test_choice() -> None:
    """Only listed spellings are accepted."""
    choices = ("exact", "discrete")
    assert toml_coerce.choice(None, "mode", choices, error=ConfigurationError) is None
    assert (
        toml_coerce.choice("exact", "mode", choices, error=ConfigurationError)
        == "exact"
    )
    with pytest.raises(ConfigurationError, match="one of 'discrete', 'exact'"):
        toml_coerce.choice("fast", "mode", choices, error=ConfigurationError)
    with pytest.raises(ConfigurationError, match="a string; received int"):
        toml_coerce.choice(3, "mode", choices, error=ConfigurationError)


@given(values=st.lists(_finite, max_size=6))
def test_real_tuple_accepts_finite_arrays(values: list[float]) -> None:
    """Arrays of finite numbers become tuples in input order."""
    parsed = toml_coerce.real_tuple(values, "levels", error=ConfigurationError)
    assert parsed == tuple(values)


@pytest.mark.parametrize(
    ("value", "fragment"),
    [
        pytest.param([1.0, "x"], r"levels\[1\] must be a finite number", id="string"),
        pytest.param([True], r"levels\[0\] must be a number", id="boolean"),
        pytest.param([0.5, math.nan], r"levels\[1\] must be a finite", id="nan"),
        pytest.param("0.5", "levels must be an array", id="scalar"),
    ],
)
def test_real_tuple_names_the_bad_entry(value: object, fragment: str) -> None:
    """Rejections point at the offending index."""
    with pytest.raises(ConfigurationError, match=fragment):
        toml_coerce.real_tuple(value, "levels", error=ConfigurationError)


def test_real_tuple_default() -> None:
    """``None`` selects the default tuple."""
    assert toml_coerce.real_tuple(
        None, "levels", (0.01,), error=ConfigurationError
    ) == (0.01,)


def test_optional_table() -> None:
    """Tables pass through, absent sections are ``None``, scalars fail."""
    assert toml_coerce.optional_table(None, "t", error=ConfigurationError) is None
    assert toml_coerce.optional_table({"a": 1}, "t", error=ConfigurationError) == {
        "a": 1
    }
    with pytest.raises(ConfigurationError, match="t must be a TOML table"):
        toml_coerce.optional_table([1], "t", error=ConfigurationError)


@pytest.mark.parametrize(
    ("context", "message"),
    [
        pytest.param("run", "Unknown run option(s): a, b.", id="options"),
        pytest.param(
            "configuration section",
            "Unknown configuration section(s): a, b.",
            id="sections",
        ),
    ],
)
def test_reject_unknown_keys(context: str, message: str) -> None:
    """Unknown keys are listed sorted; known keys and ``None`` pass."""
    toml_coerce.reject_unknown_keys(None, {"seed"}, context, error=ParameterError)
    toml_coerce.reject_unknown_keys(
        {"seed": 1}, {"seed"}, context, error=ParameterError
    )
    with pytest.raises(ParameterError) as excinfo:
        toml_coerce.reject_unknown_keys(
            {"b": 1, "seed": 2, "a": 3}, {"seed"}, context, error=ParameterError
        )
    assert str(excinfo.value) == message


def test_optional_string() -> None:
    """Missing strings become empty; other types are rejected."""
    assert toml_coerce.optional_string(None, "s", error=ConfigurationError) == ""
    assert toml_coerce.optional_string("out", "s", error=ConfigurationError) == "out"
    with pytest.raises(ConfigurationError, match="s must be a string"):
        toml_coerce.optional_string(1, "s", error=ConfigurationError)


def test_expect_sequence_rejects_strings() -> None:
    """Strings are sequences in Python but not TOML arrays."""
    with pytest.raises(ConfigurationError, match="an array; received str"):
        toml_coerce.expect_sequence("abc", "seq", error=ConfigurationError)
