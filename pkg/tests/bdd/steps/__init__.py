"""Step packages for pytest-bdd scenarios."""
