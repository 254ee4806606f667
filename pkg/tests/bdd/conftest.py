"""Local conftest for the BDD scenarios.

Step and fixture modules are registered via ``tests/conftest.py``.
"""

from __future__ import annotations
