"""Pipeline configuration: one JSON document driving the CLI.

A config file collects the inputs and parameters a pipeline run needs; any
individual value can be overridden by a command-line flag.  Validation is
strict: unknown keys are rejected so typos fail loudly, every referenced
input path must exist at load time, and errors name the offending field with
its dotted path (for example ``mixture.sources[1].path``).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .data_pipeline import ExampleFormat, MixtureSource, MixtureSpec, ScheduleMode
from .errors import ConfigError
from .train_config import TrainConfig

# Input-path fields; each must point at an existing file when present.
_PATH_FIELDS = (
    "corpus",
    "pairs",
    "base_model",
    "donor_model",
    "expanded_model",
    "addition",
    "base_matrix",
    "expanded_matrix",
)
_INT_FIELDS = (
    "seed",
    "target_vocab_size",
    "sample",
    "context_length",
    "separator_id",
    "pad_id",
)
_KNOWN_KEYS = set(_PATH_FIELDS) | set(_INT_FIELDS) | {
    "format",
    "schedule",
    "threshold",
    "mixture",
    "train",
}


@dataclass(frozen=True)
class PipelineConfig:
    """Validated view of a config document; every field optional."""

    seed: int | None = None
    corpus: str | None = None
    pairs: str | None = None
    base_model: str | None = None
    donor_model: str | None = None
    expanded_model: str | None = None
    addition: str | None = None
    base_matrix: str | None = None
    expanded_matrix: str | None = None
    target_vocab_size: int | None = None
    sample: int | None = None
    context_length: int | None = None
    separator_id: int | None = None
    pad_id: int | None = None
    format: ExampleFormat | None = None
    schedule: ScheduleMode | None = None
    threshold: float | None = None
    mixture: MixtureSpec | None = None
    train: TrainConfig | None = None
    document: dict = field(default_factory=dict, compare=False)


def _require_type(value, types, label: str):
    if not isinstance(value, types) or isinstance(value, bool):
        names = "/".join(t.__name__ for t in types) if isinstance(types, tuple) else types.__name__
        raise ConfigError(f"{label}: expected {names}, got {value!r}")
    return value


def _check_path(path: str, label: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"{label}: no such file: {path}")
    return path


def _parse_mixture(doc: dict, label: str = "mixture") -> MixtureSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"{label}: expected an object")
    unknown = set(doc) - {"total_tokens", "seed", "sources"}
    if unknown:
        raise ConfigError(f"{label}: unknown key {sorted(unknown)[0]!r}")
    if "total_tokens" not in doc:
        raise ConfigError(f"{label}.total_tokens: required")
    total = _require_type(doc["total_tokens"], (int,), f"{label}.total_tokens")
    seed = _require_type(doc.get("seed", 0), (int,), f"{label}.seed")
    raw_sources = doc.get("sources")
    if not isinstance(raw_sources, list) or not raw_sources:
        raise ConfigError(f"{label}.sources: expected a non-empty list")
    sources = []
    for i, entry in enumerate(raw_sources):
        where = f"{label}.sources[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected an object")
        unknown = set(entry) - {"id", "weight", "cap", "path"}
        if unknown:
            raise ConfigError(f"{where}: unknown key {sorted(unknown)[0]!r}")
        if "id" not in entry or "weight" not in entry:
            raise ConfigError(f"{where}: both 'id' and 'weight' are required")
        sid = _require_type(entry["id"], (str,), f"{where}.id")
        weight = _require_type(entry["weight"], (int, float), f"{where}.weight")
        cap = entry.get("cap")
        if cap is not None:
            cap = _require_type(cap, (int,), f"{where}.cap")
        path = entry.get("path")
        if path is not None:
            path = _check_path(_require_type(path, (str,), f"{where}.path"), f"{where}.path")
        sources.append(MixtureSource(sid, float(weight), token_cap=cap, path=path))
    return MixtureSpec(tuple(sources), total_tokens=total, seed=seed)


def _parse_train(doc: dict, label: str = "train") -> TrainConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{label}: expected an object")
    allowed = {
        "total_steps", "max_lr", "warmup_steps", "final_lr_fraction",
        "batch_sequences", "context_length", "beta1", "beta2", "eps",
        "weight_decay", "grad_clip",
    }
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{label}: unknown key {sorted(unknown)[0]!r}")
    if "total_steps" not in doc:
        raise ConfigError(f"{label}.total_steps: required")
    return TrainConfig(**doc)


def parse_config(document: dict, base_dir: str = ".") -> PipelineConfig:
    """Validate a parsed JSON document into a PipelineConfig.

    Relative paths are resolved against ``base_dir``, normally the directory
    containing the config file, so a config travels with its fixtures.
    """
    if not isinstance(document, dict):
        raise ConfigError("config root must be an object")
    unknown = set(document) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"config: unknown key {sorted(unknown)[0]!r}")
    values: dict = {}
    for key in _PATH_FIELDS:
        if key in document:
            path = _require_type(document[key], (str,), key)
            resolved = os.path.join(base_dir, path) if not os.path.isabs(path) else path
            values[key] = _check_path(resolved, key)
    for key in _INT_FIELDS:
        if key in document:
            values[key] = _require_type(document[key], (int,), key)
    if "threshold" in document:
        values["threshold"] = float(
            _require_type(document["threshold"], (int, float), "threshold")
        )
    if "format" in document:
        raw = _require_type(document["format"], (str,), "format")
        try:
            values["format"] = ExampleFormat(raw)
        except ValueError:
            raise ConfigError(f"format: unknown value {raw!r}") from None
    if "schedule" in document:
        raw = _require_type(document["schedule"], (str,), "schedule")
        try:
            values["schedule"] = ScheduleMode(raw)
        except ValueError:
            raise ConfigError(f"schedule: unknown value {raw!r}") from None
    if "mixture" in document:
        mixture_doc = dict(document["mixture"]) if isinstance(document["mixture"], dict) else document["mixture"]
        if isinstance(mixture_doc, dict) and isinstance(mixture_doc.get("sources"), list):
            resolved_sources = []
            for entry in mixture_doc["sources"]:
                if isinstance(entry, dict) and isinstance(entry.get("path"), str) and not os.path.isabs(entry["path"]):
                    entry = {**entry, "path": os.path.join(base_dir, entry["path"])}
                resolved_sources.append(entry)
            mixture_doc["sources"] = resolved_sources
        values["mixture"] = _parse_mixture(mixture_doc)
    if "train" in document:
        values["train"] = _parse_train(document["train"])
    return PipelineConfig(document=document, **values)


def load_config(path: str) -> PipelineConfig:
    """Load and validate a JSON config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            document = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from None
    return parse_config(document, base_dir=os.path.dirname(os.path.abspath(path)))


def config_digest(options: dict) -> str:
    """Short stable digest of an effective option set, for run logs."""
    canonical = json.dumps(options, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
