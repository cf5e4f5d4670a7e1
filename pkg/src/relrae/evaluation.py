"""Evaluation harness: embedding similarity against reference labels,
threshold acceptance rates, temperature sweeps, and verdict/human agreement.

The default embedding provider for tests is a deterministic hash stub so the
suite stays hermetic; real runs plug in a precomputed vector file or a remote
endpoint.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import requests

from .errors import (
    DimensionMismatch,
    EmptyInput,
    MissingHumanRating,
    MissingPrecomputedVector,
    ProviderError,
    ZeroVector,
)
from .judge import JudgeRecord, LikertVerdict
from .rubrex import LabelledRelationship

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.6, 0.85)

RelKey = tuple[str, str]


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a,b)/(|a||b|), clamped to [-1,1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector dimensions differ: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity is undefined for zero-norm vectors")
    value = float(np.dot(a, b)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


# --- embedding providers -----------------------------------------------------


class HashStubEmbeddingProvider:
    """Unit-norm vector seeded by the label bytes; hermetic and cross-platform
    stable (PCG64 stream seeded from a SHA-256 of the text)."""

    def __init__(self, dimension: int = 64):
        self.dimension = dimension

    def embed(self, labels: Sequence[str]) -> list[np.ndarray]:
        vectors = []
        for label in labels:
            seed = int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")
            rng = np.random.default_rng(seed)
            vec = rng.standard_normal(self.dimension)
            vectors.append(vec / np.linalg.norm(vec))
        return vectors


class PrecomputedEmbeddingProvider:
    """Vectors from a JSON Lines file of {label, vector} objects."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.vectors: dict[str, np.ndarray] = {}
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                self.vectors[obj["label"]] = np.asarray(obj["vector"], dtype=np.float64)

    def embed(self, labels: Sequence[str]) -> list[np.ndarray]:
        out = []
        for label in labels:
            if label not in self.vectors:
                raise MissingPrecomputedVector(label)
            out.append(self.vectors[label])
        return out


class RemoteEmbeddingProvider:
    """OpenAI-style /v1/embeddings endpoint, same auth convention as the
    chat gateway."""

    def __init__(self, base_url: str, api_key: str | None = None,
                 model: str = "phrase-embedding", path: str = "/v1/embeddings",
                 timeout: float = 60.0):
        self.url = base_url.rstrip("/") + path
        self.api_key = api_key
        self.model = model
        self.timeout = timeout

    def embed(self, labels: Sequence[str]) -> list[np.ndarray]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = requests.post(self.url, json={"model": self.model, "input": list(labels)},
                                     headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ProviderError(None, str(exc)) from exc
        if response.status_code != 200:
            raise ProviderError(response.status_code, response.text[:500])
        try:
            data = response.json()["data"]
            return [np.asarray(item["embedding"], dtype=np.float64) for item in data]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProviderError(response.status_code, "unexpected embeddings response") from exc


def embed(labels: Sequence[str], provider) -> list[np.ndarray]:
    """One vector per label, same order."""
    return provider.embed(labels)


# --- reference set and similarity scoring ------------------------------------


@dataclass(frozen=True)
class ReferenceSet:
    entries: dict[RelKey, tuple[str, ...]]

    @staticmethod
    def from_csv(path: str | Path) -> "ReferenceSet":
        """CSV columns domain,range,reference_label; repeated rows collect
        multiple references per key."""
        entries: dict[RelKey, list[str]] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                key = (row["domain"], row["range"])
                entries.setdefault(key, []).append(row["reference_label"])
        return ReferenceSet({k: tuple(v) for k, v in entries.items()})

    def labels_for(self, key: RelKey) -> tuple[str, ...]:
        return self.entries.get(key, ())


@dataclass(frozen=True)
class LabelScore:
    key: RelKey
    generated_label: str
    best_reference: str
    similarity: float


@dataclass(frozen=True)
class SimilarityReport:
    per_label: tuple[LabelScore, ...]
    mean_similarity: float
    rate_at: dict[float, float] = field(default_factory=dict)


def _scored_items(generated: Iterable) -> list[tuple[RelKey, str]]:
    items: list[tuple[RelKey, str]] = []
    for entry in generated:
        if isinstance(entry, LabelledRelationship):
            if not entry.label:
                continue
            items.append(((entry.domain_name, entry.range_name), entry.label))
        else:
            domain, range_, label = entry
            if label:
                items.append(((domain, range_), label))
    return items


def score_labels(generated: Iterable, refs: ReferenceSet, provider,
                 thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                 aggregate: str = "max") -> SimilarityReport:
    """Similarity of each generated label against its key's references.

    Per label the similarity is the max (or, behind the flag, the mean) over
    that key's reference labels; keys absent from the reference set are
    excluded with a warning. Accepts labelled relationships or bare
    (domain, range, label) triples.
    """
    if aggregate not in ("max", "mean"):
        raise ValueError(f"aggregate must be 'max' or 'mean', got {aggregate!r}")
    items = _scored_items(generated)
    if not items:
        raise EmptyInput("no labelled relationships to score")

    included = []
    for key, label in items:
        if refs.labels_for(key):
            included.append((key, label))
        else:
            logger.warning("no reference labels for %s; excluded from scoring", key)
    if not included:
        raise EmptyInput("no generated label has a reference entry")

    texts: list[str] = []
    index: dict[str, int] = {}
    for key, label in included:
        if label not in index:
            index[label] = len(texts)
            texts.append(label)
        for ref in refs.labels_for(key):
            if ref not in index:
                index[ref] = len(texts)
                texts.append(ref)
    vectors = provider.embed(texts)

    scores: list[LabelScore] = []
    for key, label in included:
        best_ref = ""
        best_sim: float | None = None
        sims = []
        for ref in refs.labels_for(key):
            sim = cosine_similarity(vectors[index[label]], vectors[index[ref]])
            sims.append(sim)
            if best_sim is None or sim > best_sim:
                best_sim, best_ref = sim, ref
        similarity = best_sim if aggregate == "max" else sum(sims) / len(sims)
        scores.append(LabelScore(key, label, best_ref, similarity))

    mean = sum(s.similarity for s in scores) / len(scores)
    rate_at = {
        float(tau): sum(1 for s in scores if s.similarity >= tau) / len(scores)
        for tau in thresholds
    }
    return SimilarityReport(per_label=tuple(scores), mean_similarity=mean, rate_at=rate_at)


def temperature_sweep(config, temps: Sequence[float], refs: ReferenceSet, provider,
                      thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                      run_for_temperature: Callable[[float], list[LabelledRelationship]] | None = None,
                      ) -> dict[float, SimilarityReport]:
    """Score one labelling run per temperature; failures skip that row.

    Temperatures share any replay cache safely: the request fingerprint
    includes the temperature.
    """
    if run_for_temperature is None:
        from .pipeline import label_for_temperature  # deferred: pipeline imports this module
        run_for_temperature = lambda t: label_for_temperature(config, t)  # noqa: E731

    reports: dict[float, SimilarityReport] = {}
    for temp in temps:
        try:
            final = run_for_temperature(temp)
            reports[temp] = score_labels(final, refs, provider, thresholds)
        except Exception as exc:  # a failed temperature must not kill the sweep
            logger.warning("temperature %s failed: %s", temp, exc)
    return reports


# --- verdict / human agreement -----------------------------------------------


@dataclass(frozen=True)
class AgreementItem:
    key: tuple[str, str, str]
    verdict: LikertVerdict
    human_rating: bool


@dataclass(frozen=True)
class AgreementReport:
    n: int
    tight_agreement: float
    loose_agreement: float
    per_item: tuple[AgreementItem, ...]


TIGHT_ACCEPT = frozenset({LikertVerdict.LIKELY, LikertVerdict.YES})
LOOSE_ACCEPT = frozenset({LikertVerdict.POSSIBLE, LikertVerdict.LIKELY, LikertVerdict.YES})


def _agreement_items(records: Iterable) -> list[tuple[tuple[str, str, str], LikertVerdict]]:
    items = []
    for record in records:
        if isinstance(record, JudgeRecord):
            key = (record.relationship.domain_name, record.relationship.range_name,
                   record.judged_label)
            items.append((key, record.verdict))
        else:
            domain, range_, label, verdict = record
            items.append(((domain, range_, label), LikertVerdict(verdict)))
    return items


def likert_agreement(records: Iterable,
                     human: dict[tuple[str, str, str], bool]) -> AgreementReport:
    """Fraction of records where the verdict-derived acceptability matches the
    human true/false rating, under the tight ({Likely,Yes}) and loose
    ({Possible,Likely,Yes}) criteria."""
    items = _agreement_items(records)
    if not items:
        raise EmptyInput("no judge records")
    per_item = []
    tight_matches = 0
    loose_matches = 0
    for key, verdict in items:
        if key not in human:
            raise MissingHumanRating(key)
        rating = human[key]
        per_item.append(AgreementItem(key, verdict, rating))
        if (verdict in TIGHT_ACCEPT) == rating:
            tight_matches += 1
        if (verdict in LOOSE_ACCEPT) == rating:
            loose_matches += 1
    n = len(items)
    return AgreementReport(
        n=n,
        tight_agreement=tight_matches / n,
        loose_agreement=loose_matches / n,
        per_item=tuple(per_item),
    )


def human_ratings_from_csv(path: str | Path) -> dict[tuple[str, str, str], bool]:
    """CSV columns domain,range,label,rating with rating in {true,false}."""
    ratings: dict[tuple[str, str, str], bool] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            raw = row["rating"].strip().lower()
            if raw not in ("true", "false"):
                raise ValueError(f"rating must be true or false, got {row['rating']!r}")
            ratings[(row["domain"], row["range"], row["label"])] = raw == "true"
    return ratings


# --- report rendering ---------------------------------------------------------


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Aligned plain-text table."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(headers), fmt("-" * w for w in widths)]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines) + "\n"


def similarity_csv_rows(report: SimilarityReport) -> list[dict]:
    rows = []
    for score in report.per_label:
        rows.append({
            "domain": score.key[0],
            "range": score.key[1],
            "generated_label": score.generated_label,
            "best_reference": score.best_reference,
            "similarity": f"{score.similarity:.6f}",
        })
    return rows


def sweep_table(reports: dict[float, SimilarityReport], method: str,
                thresholds: Sequence[float]) -> str:
    headers = ["temp", f"{method} mean"]
    headers += [f"{method} >= {tau:g} (%)" for tau in thresholds]
    rows = []
    for temp in sorted(reports):
        report = reports[temp]
        row = [f"{temp:.2f}", f"{report.mean_similarity:.3f}"]
        row += [f"{100 * report.rate_at[float(tau)]:.1f}" for tau in thresholds]
        rows.append(row)
    return render_table(headers, rows)


def write_csv(path: str | Path, fieldnames: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
