"""Utility helpers for the :mod:`cellflow` package."""

from __future__ import annotations

from . import metrics

__all__ = ["metrics"]
