"""End-to-end orchestration of the three summarization architectures.

Approach "single" trains one dialogue→note summarizer. Approach "section-wise"
trains one summarizer per chart-note section and assembles the outputs.
Approach "multi-layer" feeds the assembled section-wise output through a second
summarizer. Oracle/identity/extractive backends exercise the same plumbing
without any training.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from abc import ABC, abstractmethod
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from io import StringIO
from typing import Callable, Iterable, Mapping, Sequence, TypeVar

from .corpus import Corpus, PredictionSet
from .errors import ChartsumError
from .rouge import AggregateScores, corpus_rouge, rouge_n, tokenize
from .sections import (
    SECTION_ORDER,
    ChartNote,
    Division,
    NoteSection,
    Section,
    UnknownSection,
    assemble_note,
    division_of,
    segment_note,
)
from .tinylsg import (
    LsgConfig,
    ModelConfig,
    TinyModel,
    TrainConfig,
    build_vocab,
    init_model,
    train,
)
from .tinylsg.train import summarize_ids

BACKEND_KINDS = ("identity", "oracle", "extractive", "tiny-lsg")
APPROACHES = ("single", "section-wise", "multi-layer")
DIVISIONS = (Division.SUBJECTIVE, Division.EXAM, Division.RESULTS, Division.ASSESSMENT_AND_PLAN)

# Per-slot training seeds: section models use seed + canonical section index,
# the multi-layer second stage uses seed + this offset.
_STAGE2_SEED_OFFSET = len(SECTION_ORDER)


_T = TypeVar("_T")
_R = TypeVar("_R")


class PipelineError(ChartsumError):
    pass


def _map_ordered(fn: Callable[[_T], _R], items: Iterable[_T], jobs: int) -> list[_R]:
    """Apply fn to each item, optionally on a thread pool; result order matches input."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


class MissingReference(PipelineError):
    def __init__(self, encounter_id: str):
        super().__init__(f"no reference note for encounter {encounter_id!r}")
        self.encounter_id = encounter_id


class SectionNeverObserved(PipelineError):
    def __init__(self, section: Section):
        super().__init__(
            f"section {section.value} is configured but appears in no training reference"
        )
        self.section = section


class Summarizer(ABC):
    """Deterministic text → text map; encounter_id lets lookup backends find their row."""

    @abstractmethod
    def summarize(self, text: str, *, encounter_id: str | None = None) -> str:
        raise NotImplementedError


class IdentitySummarizer(Summarizer):
    def summarize(self, text: str, *, encounter_id: str | None = None) -> str:
        return text


class OracleSummarizer(Summarizer):
    """Returns the stored reference for the encounter, ignoring the input text."""

    def __init__(self, references: Mapping[str, str]):
        self._references = dict(references)

    def summarize(self, text: str, *, encounter_id: str | None = None) -> str:
        if encounter_id is None or encounter_id not in self._references:
            raise MissingReference(str(encounter_id))
        return self._references[encounter_id]


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    """Newline-then-punctuation sentence split, dropping token-free fragments."""
    sentences = []
    for line in text.splitlines():
        for part in _SENTENCE_SPLIT.split(line):
            part = part.strip()
            if part and tokenize(part):
                sentences.append(part)
    return sentences


class ExtractiveSummarizer(Summarizer):
    """Picks the k sentences whose words are most frequent across the whole text.

    Sentence score = mean corpus frequency of its tokens; ties go to the
    earlier sentence; output keeps source order.
    """

    def __init__(self, k: int = 3):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = k

    def summarize(self, text: str, *, encounter_id: str | None = None) -> str:
        sentences = split_sentences(text)
        if not sentences:
            return ""
        freq = Counter(tokenize(text))
        scored = []
        for idx, sentence in enumerate(sentences):
            tokens = tokenize(sentence)
            scored.append((-sum(freq[t] for t in tokens) / len(tokens), idx, sentence))
        top = sorted(sorted(scored)[: self.k], key=lambda item: item[1])
        return " ".join(sentence for _, _, sentence in top)


class TinyLsgSummarizer(Summarizer):
    def __init__(self, model: TinyModel, lsg: LsgConfig, max_summary_tokens: int):
        self.model = model
        self.lsg = lsg
        self.max_summary_tokens = max_summary_tokens

    def summarize(self, text: str, *, encounter_id: str | None = None) -> str:
        return self.model.vocab.decode(
            summarize_ids(self.model, text, self.max_summary_tokens, self.lsg)
        )


@dataclass(frozen=True)
class BackendSpec:
    """Which summarizer fills a model slot, plus everything needed to train it."""

    kind: str = "tiny-lsg"
    extract_k: int = 3
    model: ModelConfig = field(default_factory=ModelConfig)
    lsg: LsgConfig = field(default_factory=LsgConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    max_summary_tokens: int = 128
    min_freq: int = 1
    init_scale: float = 0.02

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")


@dataclass(frozen=True)
class ApproachConfig:
    approach: str
    backend: BackendSpec
    sections: tuple[Section, ...] | None = None
    stage2: BackendSpec | None = None
    seed: int = 0
    stage2_split: bool = False
    stage2_headers: bool = True

    def __post_init__(self):
        if self.approach not in APPROACHES:
            raise ValueError(f"unknown approach {self.approach!r}")
        if self.approach == "multi-layer" and self.stage2 is None:
            raise ValueError("multi-layer runs need a stage2 backend")
        if self.sections is not None and len(self.sections) == 0:
            raise ValueError("section-wise runs need at least one section")


def _to_jsonable(value):
    if isinstance(value, Enum):
        return value.value
    if hasattr(value, "__dataclass_fields__"):
        return {
            name: _to_jsonable(getattr(value, name)) for name in value.__dataclass_fields__
        }
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    return value


def config_hash(cfg) -> str:
    """SHA-256 of the canonical JSON form of a config dataclass."""
    canonical = json.dumps(_to_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _reference_lookup(*corpora: Corpus) -> dict[str, str]:
    refs: dict[str, str] = {}
    for corpus in corpora:
        for e in corpus:
            if e.note is not None:
                refs[e.id] = e.note
    return refs


def _build_summarizer(
    backend: BackendSpec,
    pairs: Sequence[tuple[str, str]],
    references: Mapping[str, str],
    seed: int,
) -> Summarizer:
    if backend.kind == "identity":
        return IdentitySummarizer()
    if backend.kind == "oracle":
        return OracleSummarizer(references)
    if backend.kind == "extractive":
        return ExtractiveSummarizer(backend.extract_k)
    vocab = build_vocab(
        [text for pair in pairs for text in pair], min_freq=backend.min_freq
    )
    model = init_model(backend.model, vocab, seed=seed, init_scale=backend.init_scale)
    trained, _ = train(model, pairs, replace(backend.train, seed=seed), backend.lsg)
    return TinyLsgSummarizer(trained, backend.lsg, backend.max_summary_tokens)


def _labeled_pairs(corpus: Corpus) -> list[tuple[str, str, str]]:
    return [(e.id, e.dialogue, e.note) for e in corpus if e.note is not None]


def run_approach1(
    train_corpus: Corpus, eval_corpus: Corpus, cfg: ApproachConfig, jobs: int = 1
) -> PredictionSet:
    """One summarizer over full dialogue → full note."""
    if cfg.approach != "single":
        raise ValueError(f"run_approach1 needs approach 'single', got {cfg.approach!r}")
    pairs = [(dialogue, note) for _, dialogue, note in _labeled_pairs(train_corpus)]
    summarizer = _build_summarizer(
        cfg.backend, pairs, _reference_lookup(train_corpus, eval_corpus), cfg.seed
    )
    outputs = _map_ordered(
        lambda e: summarizer.summarize(e.dialogue, encounter_id=e.id), eval_corpus, jobs
    )
    entries = {e.id: text for e, text in zip(eval_corpus, outputs)}
    return PredictionSet(
        approach="single", entries=entries, config_hash=config_hash(cfg), seed=cfg.seed
    )


def _configured_sections(cfg: ApproachConfig, segmented: Mapping[str, ChartNote]) -> list[Section]:
    """Explicit section list, or every known section observed in training references."""
    if cfg.sections is not None:
        return sorted(set(cfg.sections), key=SECTION_ORDER.index)
    observed = {
        sec.id
        for note in segmented.values()
        for sec in note.sections
        if isinstance(sec.id, Section)
    }
    if not observed:
        raise PipelineError("no known sections found in any training reference")
    return sorted(observed, key=SECTION_ORDER.index)


def _train_section_models(
    train_corpus: Corpus, eval_corpus: Corpus, cfg: ApproachConfig
) -> dict[Section, Summarizer]:
    labeled = _labeled_pairs(train_corpus)
    segmented = {eid: segment_note(note) for eid, _, note in labeled}
    eval_segmented = {
        e.id: segment_note(e.note) for e in eval_corpus if e.note is not None
    }
    models: dict[Section, Summarizer] = {}
    for section in _configured_sections(cfg, segmented):
        pairs = []
        for eid, dialogue, _ in labeled:
            body = segmented[eid].bodies().get(section)
            if body is not None:
                pairs.append((dialogue, body))
        if not pairs:
            raise SectionNeverObserved(section)
        references = {
            eid: note.bodies()[section]
            for eid, note in {**segmented, **eval_segmented}.items()
            if section in note.bodies()
        }
        seed = cfg.seed + SECTION_ORDER.index(section)
        models[section] = _build_summarizer(cfg.backend, pairs, references, seed)
    return models


def _apply_section_models(
    models: Mapping[Section, Summarizer], corpus: Corpus, jobs: int = 1
) -> dict[str, str]:
    ordered = sorted(models, key=SECTION_ORDER.index)

    def render(e) -> str:
        produced = []
        for section in ordered:
            text = models[section].summarize(e.dialogue, encounter_id=e.id)
            if text:
                produced.append(NoteSection(id=section, body=text))
        return assemble_note(ChartNote(sections=tuple(produced)))

    outputs = _map_ordered(render, corpus, jobs)
    return {e.id: text for e, text in zip(corpus, outputs)}


def run_approach2(
    train_corpus: Corpus, eval_corpus: Corpus, cfg: ApproachConfig, jobs: int = 1
) -> PredictionSet:
    """Per-section summarizers, outputs assembled in canonical order."""
    if cfg.approach != "section-wise":
        raise ValueError(f"run_approach2 needs approach 'section-wise', got {cfg.approach!r}")
    models = _train_section_models(train_corpus, eval_corpus, cfg)
    entries = _apply_section_models(models, eval_corpus, jobs)
    return PredictionSet(
        approach="section-wise", entries=entries, config_hash=config_hash(cfg), seed=cfg.seed
    )


def run_approach3(
    train_corpus: Corpus, eval_corpus: Corpus, cfg: ApproachConfig, jobs: int = 1
) -> PredictionSet:
    """Section-wise stage 1, then a second summarizer over the assembled text."""
    if cfg.approach != "multi-layer":
        raise ValueError(f"run_approach3 needs approach 'multi-layer', got {cfg.approach!r}")
    stage1_cfg = replace(cfg, approach="section-wise", stage2=None)
    models = _train_section_models(train_corpus, eval_corpus, stage1_cfg)
    stage1_train = _apply_section_models(models, train_corpus, jobs)
    stage1_eval = _apply_section_models(models, eval_corpus, jobs)
    stage2_pairs = [
        (stage1_train[eid], note) for eid, _, note in _labeled_pairs(train_corpus)
    ]
    stage2 = _build_summarizer(
        cfg.stage2,
        stage2_pairs,
        _reference_lookup(train_corpus, eval_corpus),
        cfg.seed + _STAGE2_SEED_OFFSET,
    )
    outputs = _map_ordered(
        lambda e: stage2.summarize(stage1_eval[e.id], encounter_id=e.id), eval_corpus, jobs
    )
    entries = {e.id: text for e, text in zip(eval_corpus, outputs)}
    extra = {
        "stage1_config_hash": config_hash(stage1_cfg),
        "stage2_split": str(cfg.stage2_split).lower(),
        "stage2_headers": str(cfg.stage2_headers).lower(),
        "stage1_empty_train": str(sum(1 for text in stage1_train.values() if not text)),
        "stage1_empty_eval": str(sum(1 for text in stage1_eval.values() if not text)),
    }
    return PredictionSet(
        approach="multi-layer",
        entries=entries,
        config_hash=config_hash(cfg),
        seed=cfg.seed,
        extra=extra,
    )


def run_approach(
    train_corpus: Corpus, eval_corpus: Corpus, cfg: ApproachConfig, jobs: int = 1
) -> PredictionSet:
    runner = {
        "single": run_approach1,
        "section-wise": run_approach2,
        "multi-layer": run_approach3,
    }[cfg.approach]
    return runner(train_corpus, eval_corpus, cfg, jobs)


@dataclass(frozen=True)
class RunReport:
    """Full-note aggregate plus the four-division breakdown for one prediction run."""

    approach: str
    scores: AggregateScores
    division_f1: dict[Division, float]
    division_average: float
    config_hash: str
    seed: int
    n_documents: int
    skipped_divisions: int
    unknown_sections: int
    division_metric: str = "rouge1_f1"


def _division_texts(note: ChartNote) -> tuple[dict[Division, str], int]:
    """Concatenated body text per division, plus how many sections were unknown."""
    buckets: dict[Division, list[str]] = {}
    unknown = 0
    for sec in note.sections:
        if isinstance(sec.id, UnknownSection):
            unknown += 1
            continue
        buckets.setdefault(division_of(sec.id), []).append(sec.body)
    return {div: "\n".join(parts) for div, parts in buckets.items()}, unknown


def evaluate(predictions: PredictionSet, eval_corpus: Corpus) -> RunReport:
    """Score predictions against eval references, whole-note and per division."""
    references = {e.id: e.note for e in eval_corpus}
    pairs = []
    for eid in sorted(predictions.entries):
        if references.get(eid) is None:
            raise MissingReference(eid)
        pairs.append((eid, predictions.entries[eid], references[eid]))
    scores = corpus_rouge(pairs)
    division_sums = {div: 0.0 for div in DIVISIONS}
    skipped = 0
    unknown = 0
    for _, candidate, reference in pairs:
        cand_texts, cand_unknown = _division_texts(segment_note(candidate))
        ref_texts, ref_unknown = _division_texts(segment_note(reference))
        unknown += cand_unknown + ref_unknown
        for div in DIVISIONS:
            if div not in cand_texts or div not in ref_texts:
                skipped += 1
                continue
            division_sums[div] += rouge_n(tokenize(cand_texts[div]), tokenize(ref_texts[div]), 1).f1
    division_f1 = {div: division_sums[div] / len(pairs) for div in DIVISIONS}
    return RunReport(
        approach=predictions.approach,
        scores=scores,
        division_f1=division_f1,
        division_average=sum(division_f1.values()) / len(DIVISIONS),
        config_hash=predictions.config_hash,
        seed=predictions.seed,
        n_documents=len(pairs),
        skipped_divisions=skipped,
        unknown_sections=unknown,
    )


def round4(value: float) -> str:
    """Half-up rounding to four decimals, e.g. 0.52675 → '0.5268'."""
    return str(Decimal(str(value)).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


_DIVISION_LABELS = {
    Division.SUBJECTIVE: "Subjective",
    Division.EXAM: "Exam",
    Division.RESULTS: "Results",
    Division.ASSESSMENT_AND_PLAN: "AssessmentAndPlan",
}


def _report_rows(runs: Sequence[RunReport]) -> list[dict[str, str]]:
    rows = []
    for run in runs:
        row = {
            "approach": run.approach,
            "rouge1": round4(run.scores.rouge1.f1),
            "rouge2": round4(run.scores.rouge2.f1),
            "rougeL": round4(run.scores.rougeL.f1),
        }
        for div in DIVISIONS:
            row[_DIVISION_LABELS[div]] = round4(run.division_f1[div])
        row["Average"] = round4(run.division_average)
        rows.append(row)
    return rows


def _render_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [
        max(len(header), *(len(row[i]) for row in rows)) for i, header in enumerate(headers)
    ]
    lines = [
        "  ".join(header.ljust(widths[i]) for i, header in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def report(runs: Sequence[RunReport], format: str = "table") -> str:
    """Two comparison tables (full-note metrics; division breakdown), one row per run."""
    if not runs:
        raise ValueError("need at least one run to report")
    rows = _report_rows(runs)
    division_cols = [_DIVISION_LABELS[d] for d in DIVISIONS] + ["Average"]
    if format == "table":
        full = _render_table(
            ["approach", "rouge1", "rouge2", "rougeL"],
            [[r["approach"], r["rouge1"], r["rouge2"], r["rougeL"]] for r in rows],
        )
        division = _render_table(
            ["approach"] + division_cols,
            [[r["approach"]] + [r[c] for c in division_cols] for r in rows],
        )
        metric = runs[0].division_metric
        return (
            "Full-note scores (F1)\n\n"
            + full
            + f"\n\nDivision scores (metric: {metric})\n\n"
            + division
            + "\n"
        )
    if format == "csv":
        buffer = StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        columns = ["approach", "rouge1", "rouge2", "rougeL"] + division_cols
        writer.writerow(columns)
        for r in rows:
            writer.writerow([r[c] for c in columns])
        return buffer.getvalue()
    if format == "json":
        payload = [
            {
                **{k: (v if k == "approach" else float(v)) for k, v in r.items()},
                "config_hash": run.config_hash,
                "seed": run.seed,
                "n_documents": run.n_documents,
                "skipped_divisions": run.skipped_divisions,
                "unknown_sections": run.unknown_sections,
                "division_metric": run.division_metric,
            }
            for r, run in zip(rows, runs)
        ]
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def _score_to_dict(score) -> dict[str, float]:
    return {"precision": score.precision, "recall": score.recall, "f1": score.f1}


def run_report_to_dict(run: RunReport) -> dict:
    """Loss-free JSON form of a RunReport (floats unrounded)."""
    return {
        "approach": run.approach,
        "scores": {
            "rouge1": _score_to_dict(run.scores.rouge1),
            "rouge2": _score_to_dict(run.scores.rouge2),
            "rougeL": _score_to_dict(run.scores.rougeL),
            "per_document": {
                doc_id: {
                    "rouge1": _score_to_dict(doc.rouge1),
                    "rouge2": _score_to_dict(doc.rouge2),
                    "rougeL": _score_to_dict(doc.rougeL),
                }
                for doc_id, doc in run.scores.per_document.items()
            },
        },
        "division_f1": {div.value: run.division_f1[div] for div in DIVISIONS},
        "division_average": run.division_average,
        "division_metric": run.division_metric,
        "config_hash": run.config_hash,
        "seed": run.seed,
        "n_documents": run.n_documents,
        "skipped_divisions": run.skipped_divisions,
        "unknown_sections": run.unknown_sections,
    }


def run_report_from_dict(payload: Mapping) -> RunReport:
    from .rouge import DocumentScores, RougeScore

    def score(d) -> RougeScore:
        return RougeScore(precision=d["precision"], recall=d["recall"], f1=d["f1"])

    raw = payload["scores"]
    scores = AggregateScores(
        rouge1=score(raw["rouge1"]),
        rouge2=score(raw["rouge2"]),
        rougeL=score(raw["rougeL"]),
        per_document={
            doc_id: DocumentScores(
                rouge1=score(doc["rouge1"]),
                rouge2=score(doc["rouge2"]),
                rougeL=score(doc["rougeL"]),
            )
            for doc_id, doc in raw["per_document"].items()
        },
    )
    return RunReport(
        approach=payload["approach"],
        scores=scores,
        division_f1={div: payload["division_f1"][div.value] for div in DIVISIONS},
        division_average=payload["division_average"],
        division_metric=payload["division_metric"],
        config_hash=payload["config_hash"],
        seed=payload["seed"],
        n_documents=payload["n_documents"],
        skipped_divisions=payload["skipped_divisions"],
        unknown_sections=payload["unknown_sections"],
    )
