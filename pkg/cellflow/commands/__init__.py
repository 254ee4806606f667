"""Command implementations for the :mod:`cellflow` CLI."""

from __future__ import annotations

from . import critical, passage, simulate, solve_fo, solve_so, sweep_fo

__all__ = ["critical", "passage", "simulate", "solve_fo", "solve_so", "sweep_fo"]
