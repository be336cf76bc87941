"""Pipeline configuration loaded from a single JSON file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .chunking import DEFAULT_MARGIN, DEFAULT_STRIDE, DEFAULT_WINDOW
from .corpus import DEFAULT_HIERARCHY_PATTERNS, SplitConfig
from .errors import ConfigError
from .phonetics import DEFAULT_LENGTH
from .retrieval.pv import PVHyperParams
from .retrieval.ranking import DEFAULT_TOP_K, DEFAULT_WEIGHT
from .tokenization import DEFAULT_DEFINITION_KEYWORDS

__all__ = ["PipelineConfig", "load_config"]

_DEFAULT_PATHS = {
    "store": "paragraphs.json",
    "tokenized_store": "paragraphs.tokenized.json",
    "registry": "registry.json",
    "warnings": "warnings.jsonl",
    "index": "index.json",
    "predictions": "predictions.json",
    "report": "report.json",
}


@dataclass
class PipelineConfig:
    split: SplitConfig = field(default_factory=SplitConfig)
    definition_keywords: frozenset[str] = DEFAULT_DEFINITION_KEYWORDS
    lexicon_path: Path | None = None
    stopwords_path: Path | None = None
    dependency_provider: str = "heuristic"
    definitions_enabled: bool = True
    dependency_enabled: bool = True
    soundex_enabled: bool = False
    soundex_length: int = DEFAULT_LENGTH
    weight: float = DEFAULT_WEIGHT
    top_k: int = DEFAULT_TOP_K
    pv: PVHyperParams = field(default_factory=PVHyperParams)
    window_size: int = DEFAULT_WINDOW
    stride: int = DEFAULT_STRIDE
    margin: float = DEFAULT_MARGIN
    qa_endpoint: str | None = None
    qa_timeout: float = 30.0
    max_in_flight: int = 4
    paths: dict[str, Path] = field(default_factory=lambda: {k: Path(v) for k, v in _DEFAULT_PATHS.items()})

    def validate(self) -> "PipelineConfig":
        if not 0.0 <= self.weight <= 1.0:
            raise ConfigError(f"ranking.weight must be in [0, 1], got {self.weight}")
        if self.top_k < 1:
            raise ConfigError("ranking.top_k must be positive")
        if self.soundex_length < 4:
            raise ConfigError("soundex.length must be >= 4")
        if self.window_size < 1 or not 1 <= self.stride <= self.window_size:
            raise ConfigError("chunking requires 1 <= stride <= window_size")
        if not 0 < self.margin <= 1:
            raise ConfigError("chunking.margin must be in (0, 1]")
        kind, _, target = self.dependency_provider.partition(":")
        if kind not in {"heuristic", "conllu", "remote"} or (kind != "heuristic" and not target):
            raise ConfigError(
                f"dependency_provider must be 'heuristic', 'conllu:<path>' or 'remote:<url>', "
                f"got {self.dependency_provider!r}"
            )
        for label, path in (("lexicon_path", self.lexicon_path), ("stopwords_path", self.stopwords_path)):
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{label} does not exist: {path}")
        if kind == "conllu" and not Path(target).is_file():
            raise ConfigError(f"CoNLL-U file does not exist: {target}")
        return self


def _sub(obj: dict, key: str) -> dict:
    value = obj.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {key!r} must be an object")
    return value


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read a config file; relative paths inside it resolve against the file's directory."""
    if path is None:
        return PipelineConfig().validate()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    base = path.parent

    def resolve(p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        split_raw = _sub(raw, "split")
        split = SplitConfig(
            hierarchy_patterns=tuple(split_raw.get("hierarchy_patterns", DEFAULT_HIERARCHY_PATTERNS)),
            min_tokens=int(split_raw.get("min_tokens", 30)),
            max_tokens=int(split_raw.get("max_tokens", 300)),
            merge_short=bool(split_raw.get("merge_short", True)),
            keep_headings=bool(split_raw.get("keep_headings", False)),
        )
        ranking = _sub(raw, "ranking")
        pv_fields = {f.name for f in fields(PVHyperParams)}
        pv_raw = _sub(ranking, "pv")
        bad = set(pv_raw) - pv_fields
        if bad:
            raise ConfigError(f"unknown ranking.pv keys: {sorted(bad)}")
        soundex = _sub(raw, "soundex")
        chunking = _sub(raw, "chunking")
        stages = _sub(raw, "stages")
        provider = str(raw.get("dependency_provider", "heuristic"))
        kind, sep, target = provider.partition(":")
        if kind == "conllu" and target:
            provider = f"conllu:{resolve(target)}"
        # explicit artifact paths follow the config file; defaults stay relative to the cwd
        paths = {k: Path(v) for k, v in _DEFAULT_PATHS.items()}
        paths.update({k: resolve(v) for k, v in _sub(raw, "paths").items()})
        cfg = PipelineConfig(
            split=split,
            definition_keywords=frozenset(raw.get("definition_keywords", DEFAULT_DEFINITION_KEYWORDS)),
            lexicon_path=resolve(raw.get("lexicon_path")),
            stopwords_path=resolve(raw.get("stopwords_path")),
            dependency_provider=provider,
            definitions_enabled=bool(stages.get("definitions", True)),
            dependency_enabled=bool(stages.get("dependency", True)),
            soundex_enabled=bool(soundex.get("enabled", False)),
            soundex_length=int(soundex.get("length", DEFAULT_LENGTH)),
            weight=float(ranking.get("weight", DEFAULT_WEIGHT)),
            top_k=int(ranking.get("top_k", DEFAULT_TOP_K)),
            pv=PVHyperParams(**pv_raw),
            window_size=int(chunking.get("window_size", DEFAULT_WINDOW)),
            stride=int(chunking.get("stride", DEFAULT_STRIDE)),
            margin=float(chunking.get("margin", DEFAULT_MARGIN)),
            qa_endpoint=raw.get("qa_endpoint"),
            qa_timeout=float(raw.get("qa_timeout", 30.0)),
            max_in_flight=int(raw.get("max_in_flight", 4)),
            paths=paths,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg.validate()
