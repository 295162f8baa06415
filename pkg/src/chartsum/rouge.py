"""Exact ROUGE-1/2/L scoring with deterministic tokenization and corpus aggregation.

The longest-common-subsequence step runs on a compiled kernel when the
extension was built, and on a pure-Python twin otherwise; both implement the
same rolling-row dynamic program. `lcs_backend()` reports which one is active.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ChartsumError

try:
    from . import _lcs as _lcs_kernel

    _LCS_BACKEND = "cython"
except ImportError:  # extension not built
    from . import _lcs_py as _lcs_kernel

    _LCS_BACKEND = "python"


class EmptyEvaluation(ChartsumError):
    """Raised when corpus-level scoring receives no candidate/reference pairs."""


_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Small closed-class list used only when drop_stopwords=True; not applied by default.
_STOPWORDS = frozenset(
    "a an and are as at be but by for from had has have he her his i in is it its "
    "of on or she that the their they this to was were will with you".split()
)


def lcs_backend() -> str:
    """Name of the active LCS kernel: "cython" or "python"."""
    return _LCS_BACKEND


def tokenize(text: str, *, stem: bool = False, drop_stopwords: bool = False) -> list[str]:
    """Lowercase `text` and split on any run of non-alphanumeric characters.

    Digits are kept. Stemming and stopword removal are off by default and only
    applied when the corresponding flag is set.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if drop_stopwords:
        tokens = [t for t in tokens if t not in _STOPWORDS]
    if stem:
        tokens = [_light_stem(t) for t in tokens]
    return tokens


def _light_stem(token: str) -> str:
    # Plural-style suffix stripping only; deliberately much weaker than Porter.
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith("ss") or len(token) <= 3:
        return token
    if token.endswith("s"):
        return token[:-1]
    return token


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        denom = precision + recall
        f1 = 2.0 * precision * recall / denom if denom > 0.0 else 0.0
        return cls(precision, recall, f1)

    @classmethod
    def zero(cls) -> "RougeScore":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class DocumentScores:
    rouge1: RougeScore
    rouge2: RougeScore
    rougeL: RougeScore


@dataclass(frozen=True)
class AggregateScores:
    """Corpus means (component-wise over documents) plus the per-document detail."""

    rouge1: RougeScore
    rouge2: RougeScore
    rougeL: RougeScore
    per_document: dict[str, DocumentScores]


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram multiset overlap between two token sequences."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand = _ngram_counts(candidate, n)
    ref = _ngram_counts(reference, n)
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    if cand_total == 0 or ref_total == 0:
        return RougeScore.zero()
    overlap = sum((cand & ref).values())
    return RougeScore.from_pr(overlap / cand_total, overlap / ref_total)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence of two token sequences."""
    if not a or not b:
        return 0
    ids: dict[str, int] = {}
    enc_a = np.fromiter((ids.setdefault(t, len(ids)) for t in a), dtype=np.intc, count=len(a))
    enc_b = np.fromiter((ids.setdefault(t, len(ids)) for t in b), dtype=np.intc, count=len(b))
    return _lcs_kernel.lcs_length_ids(enc_a, enc_b)


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """LCS-based score over whole token sequences (sentence-agnostic)."""
    if not candidate or not reference:
        return RougeScore.zero()
    length = lcs_length(candidate, reference)
    return RougeScore.from_pr(length / len(candidate), length / len(reference))


def score_pair(
    candidate_text: str,
    reference_text: str,
    *,
    stem: bool = False,
    drop_stopwords: bool = False,
) -> DocumentScores:
    """Tokenize two texts and score ROUGE-1, ROUGE-2, and ROUGE-L."""
    cand = tokenize(candidate_text, stem=stem, drop_stopwords=drop_stopwords)
    ref = tokenize(reference_text, stem=stem, drop_stopwords=drop_stopwords)
    return DocumentScores(
        rouge1=rouge_n(cand, ref, 1),
        rouge2=rouge_n(cand, ref, 2),
        rougeL=rouge_l(cand, ref),
    )


def _mean_scores(scores: Iterable[RougeScore]) -> RougeScore:
    scores = list(scores)
    k = len(scores)
    return RougeScore(
        precision=sum(s.precision for s in scores) / k,
        recall=sum(s.recall for s in scores) / k,
        f1=sum(s.f1 for s in scores) / k,
    )


def corpus_rouge(
    pairs: Sequence[tuple[str, str, str]],
    *,
    stem: bool = False,
    drop_stopwords: bool = False,
) -> AggregateScores:
    """Score (id, candidate text, reference text) triples and average per document.

    Corpus values are unweighted arithmetic means of the per-document scores,
    independent of pair order.
    """
    if not pairs:
        raise EmptyEvaluation("no candidate/reference pairs to score")
    per_document: dict[str, DocumentScores] = {}
    for doc_id, cand_text, ref_text in pairs:
        per_document[doc_id] = score_pair(
            cand_text, ref_text, stem=stem, drop_stopwords=drop_stopwords
        )
    docs = [per_document[doc_id] for doc_id in sorted(per_document)]
    return AggregateScores(
        rouge1=_mean_scores(d.rouge1 for d in docs),
        rouge2=_mean_scores(d.rouge2 for d in docs),
        rougeL=_mean_scores(d.rougeL for d in docs),
        per_document=per_document,
    )
