"""Persistent, reproducible run artefacts: CSV tables, JSON records, manifests."""

from __future__ import annotations

from cellflow.outputs import records
from cellflow.outputs.errors import OutputError
from cellflow.outputs.manifest import (
    MANIFEST_FILENAME,
    ManifestRecorder,
    RunManifest,
    file_sha256,
    recording,
    tool_version,
)
from cellflow.outputs.records import finite_or_none, read_json, write_json
from cellflow.outputs.tables import read_csv, write_csv

__all__ = [
    "MANIFEST_FILENAME",
    "ManifestRecorder",
    "OutputError",
    "RunManifest",
    "file_sha256",
    "finite_or_none",
    "read_csv",
    "read_json",
    "records",
    "recording",
    "tool_version",
    "write_csv",
    "write_json",
]
