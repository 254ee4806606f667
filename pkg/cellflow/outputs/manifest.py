"""Run manifests tying outputs to the configuration that produced them.

A manifest is written with status ``running`` before a command body executes
and rewritten when it finishes, with the SHA-256 of every registered output.
Timestamps are the only fields that differ between identical reruns.
"""

from __future__ import annotations

import contextlib
import datetime as dt
import hashlib
import importlib.metadata
import logging
import typing as typ

import msgspec

from cellflow.outputs.records import write_json

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    from pathlib import Path

LOGGER = logging.getLogger(__name__)

MANIFEST_FILENAME = "manifest.json"

ManifestStatus = typ.Literal["running", "complete", "failed"]


class RunManifest(msgspec.Struct, frozen=True, kw_only=True):
    """Provenance of one command invocation."""

    command: str
    tool_version: str
    config_sha256: str
    seeds: tuple[int, ...]
    started_at: str
    finished_at: str | None
    status: ManifestStatus
    outputs: dict[str, str]


def tool_version() -> str:
    """Return the installed :mod:`cellflow` version."""
    try:
        return importlib.metadata.version("cellflow")
    except importlib.metadata.PackageNotFoundError:
        return "0+unknown"


def file_sha256(path: Path) -> str:
    """Return the hex SHA-256 of the file at ``path``."""
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _now() -> str:
    """Return the current UTC time in ISO 8601 form."""
    return dt.datetime.now(dt.UTC).isoformat(timespec="seconds")


class ManifestRecorder:
    """Collect the outputs of one command and keep its manifest current."""

    def __init__(
        self,
        directory: Path,
        command: str,
        config_sha256: str,
        seeds: cabc.Sequence[int] = (),
    ) -> None:
        self.directory = directory
        self.path = directory / MANIFEST_FILENAME
        self._outputs: list[Path] = []
        self._manifest = RunManifest(
            command=command,
            tool_version=tool_version(),
            config_sha256=config_sha256,
            seeds=tuple(seeds),
            started_at=_now(),
            finished_at=None,
            status="running",
            outputs={},
        )

    @property
    def manifest(self) -> RunManifest:
        """The manifest as last written."""
        return self._manifest

    def start(self) -> None:
        """Write the ``running`` manifest."""
        write_json(self.path, self._manifest)

    def register(self, path: Path) -> Path:
        """Record ``path`` as an output of this run and return it."""
        self._outputs.append(path)
        return path

    def finish(self, status: ManifestStatus) -> RunManifest:
        """Hash the registered outputs and write the final manifest."""
        outputs = {
            str(path.relative_to(self.directory)): file_sha256(path)
            for path in self._outputs
            if path.is_file()
        }
        self._manifest = msgspec.structs.replace(
            self._manifest, finished_at=_now(), status=status, outputs=outputs
        )
        write_json(self.path, self._manifest)
        LOGGER.info("manifest %s: %s, %d output(s)", self.path, status, len(outputs))
        return self._manifest


@contextlib.contextmanager
def recording(
    directory: Path,
    command: str,
    config_sha256: str,
    seeds: cabc.Sequence[int] = (),
) -> cabc.Iterator[ManifestRecorder]:
    """Write a manifest around a command body.

    The manifest is finalised as ``complete`` when the body returns and as
    ``failed`` when it raises; the exception propagates.

    Yields
    ------
    ManifestRecorder
        Recorder the body registers its outputs with.
    """
    recorder = ManifestRecorder(directory, command, config_sha256, seeds)
    recorder.start()
    try:
        yield recorder
    except BaseException:
        recorder.finish("failed")
        raise
    recorder.finish("complete")
