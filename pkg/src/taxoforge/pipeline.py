"""Stage-oriented pipeline: configuration, artifacts and content-addressed caching.

Each stage reads upstream artifacts from the work directory, writes its own,
and records input/config/output hashes in ``manifest.json``.  A stage whose
recorded hashes still match is a no-op, so reruns are cheap and results are
reproducible from the manifest alone.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from . import candidates as cand_mod
from . import features as feat_mod
from . import ghap as ghap_mod
from . import pu as pu_mod
from . import similarity as sim_mod
from . import taxonomy as taxo_mod
from .corpus import load_corpus

__all__ = [
    "ConfigError",
    "MissingArtifactError",
    "PipelineConfig",
    "STAGES",
    "load_config",
    "run_stage",
    "EXIT_OK",
    "EXIT_MISSING_ARTIFACT",
    "EXIT_BAD_CONFIG",
    "EXIT_NUMERICAL",
]

EXIT_OK = 0
EXIT_MISSING_ARTIFACT = 2
EXIT_BAD_CONFIG = 3
EXIT_NUMERICAL = 4

STAGES = (
    "extract",
    "featurize",
    "train",
    "filter",
    "similarity",
    "cluster",
    "map",
    "export",
)


class ConfigError(ValueError):
    """Invalid or unparsable pipeline configuration."""


class MissingArtifactError(FileNotFoundError):
    """A stage was started before its upstream artifact exists."""


@dataclass(frozen=True)
class PathsConfig:
    corpus: str = "corpus.jsonl"
    stopwords: str = "stopwords.txt"
    workdir: str = "taxoforge-work"


@dataclass(frozen=True)
class ExportConfig:
    formats: tuple[str, ...] = ("json", "dot", "csv")

    def __post_init__(self) -> None:
        for fmt in self.formats:
            if fmt not in ("json", "dot", "csv"):
                raise ValueError(f"unknown export format {fmt!r}")


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    templates: cand_mod.TemplateConfig = field(default_factory=cand_mod.TemplateConfig)
    markers: feat_mod.MarkerConfig = field(default_factory=feat_mod.MarkerConfig)
    pu: pu_mod.PUConfig = field(default_factory=pu_mod.PUConfig)
    similarity: sim_mod.SimilarityConfig = field(default_factory=sim_mod.SimilarityConfig)
    ghap: ghap_mod.APConfig = field(default_factory=ghap_mod.APConfig)
    export: ExportConfig = field(default_factory=ExportConfig)
    seed: int = 0

    @property
    def workdir(self) -> Path:
        override = os.environ.get("TAXOFORGE_WORKDIR")
        return Path(override) if override else Path(self.paths.workdir)


_SET_PARSERS: dict[str, Callable] = {}

_SECTION_TYPES = {
    "paths": PathsConfig,
    "templates": cand_mod.TemplateConfig,
    "markers": feat_mod.MarkerConfig,
    "pu": pu_mod.PUConfig,
    "similarity": sim_mod.SimilarityConfig,
    "ghap": ghap_mod.APConfig,
    "export": ExportConfig,
}

_FROZENSET_FIELDS = {
    ("templates", "noun_tags"),
    ("templates", "extra_tags"),
    ("templates", "excluded_words"),
    ("markers", "followed_by"),
    ("markers", "following"),
}


def config_from_dict(obj: dict) -> PipelineConfig:
    if not isinstance(obj, dict):
        raise ConfigError("configuration root must be a JSON object")
    known = set(_SECTION_TYPES) | {"seed"}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    for section, cls in _SECTION_TYPES.items():
        raw = obj.get(section, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"section {section!r} must be an object")
        fields = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        bad = set(raw) - fields
        if bad:
            raise ConfigError(f"section {section!r}: unknown keys {sorted(bad)}")
        coerced = {}
        for key, value in raw.items():
            if (section, key) in _FROZENSET_FIELDS:
                value = frozenset(value)
            elif key == "formats":
                value = tuple(value)
            coerced[key] = value
        try:
            kwargs[section] = cls(**coerced)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"section {section!r}: {exc}") from exc
    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return PipelineConfig(seed=seed, **kwargs)


def config_to_dict(cfg: PipelineConfig) -> dict:
    out = {}
    for section in _SECTION_TYPES:
        data = asdict(getattr(cfg, section))
        for key, value in data.items():
            if isinstance(value, frozenset):
                data[key] = sorted(value)
            elif isinstance(value, tuple):
                data[key] = list(value)
        out[section] = data
    out["seed"] = cfg.seed
    return out


def apply_overrides(obj: dict, overrides: list[str]) -> dict:
    """Apply dotted-path ``--set section.key=value`` assignments."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        dotted, raw_value = item.split("=", 1)
        parts = dotted.split(".")
        if not all(parts):
            raise ConfigError(f"bad --set key {dotted!r}")
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        node = obj
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {dotted!r} crosses a non-object")
        node[parts[-1]] = value
    return obj


def load_config(path: str | Path, overrides: list[str] | None = None) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc.msg})") from exc
    if overrides:
        obj = apply_overrides(obj, list(overrides))
    return config_from_dict(obj)


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_obj(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()


@dataclass(frozen=True)
class _Stage:
    name: str
    config_sections: tuple[str, ...]
    inputs: Callable[[PipelineConfig], list[Path]]
    outputs: Callable[[PipelineConfig], list[Path]]
    run: Callable[[PipelineConfig, int], None]


def _wd(cfg: PipelineConfig, *names: str) -> list[Path]:
    return [cfg.workdir / n for n in names]


def _stage_extract(cfg: PipelineConfig, threads: int) -> None:
    corpus = load_corpus(cfg.paths.corpus)
    stopwords = cand_mod.load_stopwords(cfg.paths.stopwords)
    table = cand_mod.collect_candidates(corpus, cfg.templates)
    table = cand_mod.label_negatives(table, stopwords)
    cand_mod.save_candidates(table, cfg.workdir / "candidates.jsonl")


def _stage_featurize(cfg: PipelineConfig, threads: int) -> None:
    corpus = load_corpus(cfg.paths.corpus)
    table = cand_mod.load_candidates(cfg.workdir / "candidates.jsonl")
    matrix = feat_mod.featurize(table, corpus, cfg.markers)
    feat_mod.save_features_csv(matrix, cfg.workdir / "features.csv")
    feat_mod.save_scaler(matrix, cfg.workdir / "scaler.json")


def _stage_train(cfg: PipelineConfig, threads: int) -> None:
    table = cand_mod.load_candidates(cfg.workdir / "candidates.jsonl")
    matrix = feat_mod.load_features_csv(
        cfg.workdir / "features.csv", cfg.workdir / "scaler.json"
    )
    labels = [c.pu_label for c in table.candidates]
    model = pu_mod.train(matrix, labels, cfg.pu)
    model = pu_mod.calibrate(model, matrix, labels)
    pu_mod.save_model(model, cfg.workdir / "model.json")


def _stage_filter(cfg: PipelineConfig, threads: int) -> None:
    table = cand_mod.load_candidates(cfg.workdir / "candidates.jsonl")
    matrix = feat_mod.load_features_csv(
        cfg.workdir / "features.csv", cfg.workdir / "scaler.json"
    )
    model = pu_mod.load_model(cfg.workdir / "model.json")
    terms = pu_mod.filter_terms(table, matrix, model, cfg.pu.threshold)
    pu_mod.save_term_set(terms, cfg.workdir / "terms.jsonl")


def _stage_similarity(cfg: PipelineConfig, threads: int) -> None:
    corpus = load_corpus(cfg.paths.corpus)
    table = cand_mod.load_candidates(cfg.workdir / "candidates.jsonl")
    terms = pu_mod.load_term_set(cfg.workdir / "terms.jsonl", table)
    if not terms:
        raise ValueError("no terms passed the filter; cannot build a similarity matrix")
    matrix = sim_mod.build_similarity_matrix(
        terms, corpus, cfg.similarity, threads=threads
    )
    sim_mod.save_matrix(matrix, cfg.workdir / "similarity.simmat")
    if matrix.n <= 200:
        sim_mod.save_matrix_csv(matrix, cfg.workdir / "similarity.csv")


def _stage_cluster(cfg: PipelineConfig, threads: int) -> None:
    matrix = sim_mod.load_matrix(cfg.workdir / "similarity.simmat")
    taxonomy = ghap_mod.build_hierarchy(matrix, cfg.ghap)
    taxonomy.validate()
    ghap_mod.save_taxonomy(taxonomy, cfg.workdir / "taxonomy.json")


def _stage_map(cfg: PipelineConfig, threads: int) -> None:
    corpus = load_corpus(cfg.paths.corpus)
    table = cand_mod.load_candidates(cfg.workdir / "candidates.jsonl")
    taxonomy = ghap_mod.load_taxonomy(cfg.workdir / "taxonomy.json")
    mapping = taxo_mod.map_companies(taxonomy, table, corpus)
    mapping.check_inverse()
    taxo_mod.save_mapping(mapping, cfg.workdir / "mapping.json")


def _stage_export(cfg: PipelineConfig, threads: int) -> None:
    taxonomy = ghap_mod.load_taxonomy(cfg.workdir / "taxonomy.json")
    mapping = taxo_mod.load_mapping(cfg.workdir / "mapping.json")
    matrix = sim_mod.load_matrix(cfg.workdir / "similarity.simmat")
    stats = taxo_mod.hypernym_statistics(taxonomy, mapping, matrix)
    outdir = cfg.workdir / "export"
    outdir.mkdir(parents=True, exist_ok=True)
    names = {"json": "taxonomy.json", "dot": "taxonomy.dot", "csv": "stats.csv"}
    for fmt in cfg.export.formats:
        taxo_mod.export_taxonomy(taxonomy, mapping, stats, fmt, outdir / names[fmt])


def _export_outputs(cfg: PipelineConfig) -> list[Path]:
    names = {"json": "taxonomy.json", "dot": "taxonomy.dot", "csv": "stats.csv"}
    return [cfg.workdir / "export" / names[f] for f in cfg.export.formats]


_STAGE_DEFS: dict[str, _Stage] = {
    s.name: s
    for s in (
        _Stage(
            "extract",
            ("paths", "templates"),
            lambda c: [Path(c.paths.corpus), Path(c.paths.stopwords)],
            lambda c: _wd(c, "candidates.jsonl"),
            _stage_extract,
        ),
        _Stage(
            "featurize",
            ("paths", "markers"),
            lambda c: [Path(c.paths.corpus)] + _wd(c, "candidates.jsonl"),
            lambda c: _wd(c, "features.csv", "scaler.json"),
            _stage_featurize,
        ),
        _Stage(
            "train",
            ("pu",),
            lambda c: _wd(c, "candidates.jsonl", "features.csv", "scaler.json"),
            lambda c: _wd(c, "model.json"),
            _stage_train,
        ),
        _Stage(
            "filter",
            ("pu",),
            lambda c: _wd(c, "candidates.jsonl", "features.csv", "scaler.json", "model.json"),
            lambda c: _wd(c, "terms.jsonl"),
            _stage_filter,
        ),
        _Stage(
            "similarity",
            ("paths", "similarity"),
            lambda c: [Path(c.paths.corpus)] + _wd(c, "candidates.jsonl", "terms.jsonl"),
            lambda c: _wd(c, "similarity.simmat", "similarity.simmat.meta.json"),
            _stage_similarity,
        ),
        _Stage(
            "cluster",
            ("ghap",),
            lambda c: _wd(c, "similarity.simmat"),
            lambda c: _wd(c, "taxonomy.json"),
            _stage_cluster,
        ),
        _Stage(
            "map",
            ("paths",),
            lambda c: [Path(c.paths.corpus)] + _wd(c, "candidates.jsonl", "taxonomy.json"),
            lambda c: _wd(c, "mapping.json"),
            _stage_map,
        ),
        _Stage(
            "export",
            ("export",),
            lambda c: _wd(c, "taxonomy.json", "mapping.json", "similarity.simmat"),
            _export_outputs,
            _stage_export,
        ),
    )
}


def _load_manifest(cfg: PipelineConfig) -> dict:
    path = cfg.workdir / "manifest.json"
    if path.exists():
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    return {"version": 1, "stages": {}}


def _save_manifest(cfg: PipelineConfig, manifest: dict) -> None:
    path = cfg.workdir / "manifest.json"
    tmp = path.with_suffix(".json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    tmp.replace(path)


def _stage_fingerprint(stage: _Stage, cfg: PipelineConfig) -> dict:
    inputs = {}
    for p in stage.inputs(cfg):
        if not p.exists():
            raise MissingArtifactError(str(p))
        inputs[str(p)] = _sha256_file(p)
    full = config_to_dict(cfg)
    relevant = {s: full[s] for s in stage.config_sections}
    return {"inputs": inputs, "config": _hash_obj(relevant), "version": 1}


def run_stage(
    stage: str, cfg: PipelineConfig, threads: int = 1, log=print
) -> bool:
    """Run one stage (or ``all``); returns True if any work was executed.

    A stage is skipped when its recorded input hashes, config hash and
    output hashes in the manifest all still match.
    """
    if stage == "all":
        ran = False
        for name in STAGES:
            ran = run_stage(name, cfg, threads=threads, log=log) or ran
        return ran
    if stage not in _STAGE_DEFS:
        raise ConfigError(f"unknown stage {stage!r}")
    sdef = _STAGE_DEFS[stage]
    cfg.workdir.mkdir(parents=True, exist_ok=True)
    fingerprint = _stage_fingerprint(sdef, cfg)
    manifest = _load_manifest(cfg)
    recorded = manifest["stages"].get(stage)
    outputs = sdef.outputs(cfg)
    if recorded is not None and {
        k: recorded[k] for k in ("inputs", "config", "version")
    } == fingerprint:
        if all(p.exists() for p in outputs) and all(
            _sha256_file(p) == recorded["outputs"].get(str(p)) for p in outputs
        ):
            log(f"[{stage}] cached")
            return False
    sdef.run(cfg, threads)
    missing = [p for p in outputs if not p.exists()]
    if missing:
        raise RuntimeError(f"stage {stage} did not produce {missing}")
    manifest["stages"][stage] = {
        **fingerprint,
        "outputs": {str(p): _sha256_file(p) for p in outputs},
    }
    _save_manifest(cfg, manifest)
    log(f"[{stage}] done")
    return True
