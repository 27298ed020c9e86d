import hashlib
import importlib.metadata
import json
import time
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd

from nh_spinwave.backend.models import RunManifest
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log
from nh_spinwave.backend.exception.custom_exception import DomainError, SpinWaveException

TOOL_NAME = "nh_spinwave"
RECORDED_LIBRARIES = ("numpy", "scipy", "pandas", "pydantic", "structlog", "python-dotenv")
MANIFEST_LOG = "manifests.jsonl"


# ------------------------------------------------------------------
# CSV
# ------------------------------------------------------------------
def write_csv(table: pd.DataFrame, path: str | Path) -> Path:
    """Write with round-trip float repr, '\\n' line endings and no index column."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, lineterminator="\n", na_rep="nan")
    except OSError as e:
        log.error("Failed to write CSV", path=str(path), error=str(e))
        raise SpinWaveException(f"Failed to write {path}", e) from e
    log.info("CSV written", path=str(path), rows=len(table), columns=list(table.columns))
    return path


def read_csv(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        log.error("Input table not found", path=str(path))
        raise DomainError(f"Input file not found: {path}")
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        log.error("Failed to read CSV", path=str(path), error=str(e))
        raise SpinWaveException(f"Failed to read {path}", e) from e


# ------------------------------------------------------------------
# VERSIONS AND DIGESTS
# ------------------------------------------------------------------
def get_installed_version(pkg_name: str) -> Optional[str]:
    try:
        return importlib.metadata.version(pkg_name)
    except importlib.metadata.PackageNotFoundError:
        return None


def library_versions() -> Dict[str, str]:
    return {name: get_installed_version(name) or "not installed" for name in RECORDED_LIBRARIES}


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def manifest_id(subcommand: str, parameters: Dict[str, Any], integrator: Dict[str, Any]) -> str:
    canonical = json.dumps(
        {"subcommand": subcommand, "parameters": parameters, "integrator": integrator},
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def manifest_path_for(output: str | Path) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def read_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    if not path.is_file():
        raise DomainError(f"Manifest not found: {path}")
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))


class RunRecorder:
    """Collects inputs and outputs of one run and writes its manifest.

    The manifest lands next to the primary output as ``<output>.manifest.json``
    and is appended to ``manifests.jsonl`` in the same directory.
    """

    def __init__(self, subcommand: str, parameters: Dict[str, Any], integrator: Optional[Dict[str, Any]] = None):
        self.subcommand = subcommand
        self.parameters = dict(parameters)
        self.integrator = dict(integrator or {})
        self.inputs: Dict[str, str] = {}
        self.outputs: Dict[str, str] = {}
        self._started = time.perf_counter()
        log.info("Run started", subcommand=subcommand, **{k: str(v) for k, v in self.parameters.items()})

    # ----- FILES -----
    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = file_digest(path)

    def write_table(self, table: pd.DataFrame, path: str | Path) -> Path:
        path = write_csv(table, path)
        self.add_output(path)
        return path

    def write_text(self, text: str, path: str | Path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8", newline="\n")
        except OSError as e:
            log.error("Failed to write file", path=str(path), error=str(e))
            raise SpinWaveException(f"Failed to write {path}", e) from e
        self.add_output(path)
        return path

    # ----- MANIFEST -----
    def finish(self, primary_output: str | Path, divergence: Optional[Dict[str, Any]] = None) -> RunManifest:
        manifest = RunManifest(
            manifest_id=manifest_id(self.subcommand, self.parameters, self.integrator),
            subcommand=self.subcommand,
            parameters=self.parameters,
            integrator=self.integrator,
            inputs=self.inputs,
            outputs=self.outputs,
            tool_version=get_installed_version(TOOL_NAME) or "unknown",
            library_versions=library_versions(),
            duration_seconds=time.perf_counter() - self._started,
            divergence=divergence,
        )

        path = manifest_path_for(primary_output)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8", newline="\n")
            with open(path.parent / MANIFEST_LOG, "a", encoding="utf-8", newline="\n") as handle:
                handle.write(manifest.model_dump_json() + "\n")
        except OSError as e:
            log.error("Failed to write manifest", path=str(path), error=str(e))
            raise SpinWaveException(f"Failed to write manifest {path}", e) from e

        log.info(
            "Run completed",
            subcommand=self.subcommand,
            manifest=str(path),
            manifest_id=manifest.manifest_id,
            duration_seconds=round(manifest.duration_seconds, 3),
        )
        return manifest
