"""Tests for ``cellflow.outputs``."""

from __future__ import annotations

import json
import math
import typing as typ

import pytest

from cellflow.model import baseline_params
from cellflow.outputs import (
    MANIFEST_FILENAME,
    ManifestRecorder,
    OutputError,
    RunManifest,
    file_sha256,
    finite_or_none,
    read_csv,
    read_json,
    records,
    recording,
    write_csv,
    write_json,
)

if typ.TYPE_CHECKING:
    from pathlib import Path


def test_write_csv_formats_cells(tmp_path: Path) -> None:
    """Floats keep full precision; missing and boolean cells are spelled out."""
    path = write_csv(
        tmp_path / "nested" / "table.csv",
        ("r_m", "value", "flag", "note"),
        [(1, 0.1 + 0.2, True, None), (2, math.nan, False, "x")],
    )
    header, rows = read_csv(path)
    assert header == ["r_m", "value", "flag", "note"]
    assert rows == [
        ["1", "0.30000000000000004", "true", ""],
        ["2", "nan", "false", "x"],
    ]
    assert float(rows[0][1]) == 0.1 + 0.2


def test_write_csv_rejects_ragged_rows(tmp_path: Path) -> None:
    """Every row must match the header width."""
    with pytest.raises(OutputError, match="row 1 of t.csv has 1 cells; expected 2"):
        write_csv(tmp_path / "t.csv", ("a", "b"), [(1, 2), (3,)])


def test_write_csv_wraps_os_errors(tmp_path: Path) -> None:
    """A parent that is a file cannot hold the table."""
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    with pytest.raises(OutputError, match="cannot write"):
        write_csv(blocker / "t.csv", ("a",), [])


def test_json_records_round_trip(tmp_path: Path) -> None:
    """Records decode back into equal structs and encode optional fields as null."""
    report = records.CriticalReport(
        network=records.NetworkRecord.from_params(baseline_params()),
        critical_rate_per_m2_s=0.459,
        metastable_upper_edge_per_m2_s=None,
        regime="stable",
        regime_map=(records.RegimePoint(arrival_rate_per_m2_s=0.3, regime="stable"),),
    )
    path = write_json(tmp_path / "critical.json", report)
    assert read_json(path, records.CriticalReport) == report
    raw = json.loads(path.read_text(encoding="utf-8"))
    assert raw["network"]["rate_mode"] == "low-sinr"
    assert raw["metastable_upper_edge_per_m2_s"] is None


def test_read_json_reports_missing_and_mismatched_files(tmp_path: Path) -> None:
    """Decoding failures name the file and the expected record."""
    with pytest.raises(OutputError, match="cannot read"):
        read_json(tmp_path / "absent.json", records.PassageReport)
    path = tmp_path / "wrong.json"
    path.write_text('{"epsilon": "x"}', encoding="utf-8")
    with pytest.raises(OutputError, match="not a valid PassageReport"):
        read_json(path, records.PassageReport)


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        pytest.param(None, None, id="missing"),
        pytest.param(math.nan, None, id="nan"),
        pytest.param(-math.inf, None, id="infinite"),
        pytest.param(2, 2.0, id="integer"),
    ],
)
def test_finite_or_none(value: float | None, expected: float | None) -> None:
    """Only finite numbers survive into JSON."""
    assert finite_or_none(value) == expected


def test_manifest_hashes_registered_outputs(tmp_path: Path) -> None:
    """Finished manifests map relative paths to their SHA-256."""
    recorder = ManifestRecorder(tmp_path, "passage", "abc", seeds=(3,))
    recorder.start()
    running = read_json(tmp_path / MANIFEST_FILENAME, RunManifest)
    assert running.status == "running"
    assert running.finished_at is None

    table = write_csv(tmp_path / "sub" / "t.csv", ("a",), [(1,)])
    recorder.register(table)
    recorder.register(tmp_path / "never-written.csv")
    manifest = recorder.finish("complete")

    assert manifest.outputs == {"sub/t.csv": file_sha256(table)}
    assert manifest.seeds == (3,)
    assert read_json(tmp_path / MANIFEST_FILENAME, RunManifest) == manifest


def test_recording_is_stable_across_reruns(tmp_path: Path) -> None:
    """Identical runs differ only in their timestamps."""

    def _run(directory: Path) -> RunManifest:
        with recording(directory, "critical", "digest") as recorder:
            recorder.register(write_csv(directory / "t.csv", ("a",), [(0.5,)]))
        return read_json(directory / MANIFEST_FILENAME, RunManifest)

    first = _run(tmp_path / "a")
    second = _run(tmp_path / "b")
    assert first.outputs == second.outputs
    assert first.tool_version == second.tool_version
    assert first.status == second.status == "complete"
