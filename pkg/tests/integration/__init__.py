"""Integration tests that drive the cellflow CLI end to end."""
