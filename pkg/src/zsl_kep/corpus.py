"""Data model and file I/O: claims, per-claim knowledge stores, predictions.

Knowledge stores are JSON Lines files (one URL entry per line with its list
of scraped passages). Every passage is addressable as ``{url_index}_{text_index}``,
both indices positional within the file, and that string is the citation id
used everywhere downstream.
"""

import json
import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import MalformedInput, UnknownDocRef

_DOC_REF_RE = re.compile(r"^(\d+)_(\d+)$")


def _squash(text: str) -> str:
    """Lowercase and drop everything that is not a letter or digit."""
    return re.sub(r"[^a-z0-9]+", "", text.lower())


class VerdictLabel(Enum):
    SUPPORTED = "Supported"
    REFUTED = "Refuted"
    NOT_ENOUGH_EVIDENCE = "Not Enough Evidence"
    CONFLICTING = "Conflicting Evidence/Cherry-Picking"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_string(cls, raw: str) -> "VerdictLabel":
        for label in cls:
            if label.value == raw:
                return label
        raise MalformedInput(f"unknown verdict label {raw!r}")

    @classmethod
    def parse_lenient(cls, raw: str) -> "VerdictLabel | None":
        """Case-insensitive match with punctuation stripped; None if no match."""
        squashed = _squash(raw)
        for label in cls:
            if squashed == _squash(label.value):
                return label
        return None


class AnswerType(Enum):
    EXTRACTIVE = "Extractive"
    ABSTRACTIVE = "Abstractive"
    BOOLEAN = "Boolean"
    UNANSWERABLE = "Unanswerable"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_string(cls, raw: str) -> "AnswerType":
        for at in cls:
            if at.value == raw:
                return at
        raise MalformedInput(f"unknown answer type {raw!r}")

    @classmethod
    def parse_lenient(cls, raw: str) -> "AnswerType | None":
        squashed = _squash(raw)
        for at in cls:
            if squashed == _squash(at.value):
                return at
        return None


@dataclass(frozen=True)
class DocRef:
    """Address of one scraped passage: URL position in the store file plus
    passage position under that URL."""

    url_index: int
    text_index: int

    def serialize(self) -> str:
        return f"{self.url_index}_{self.text_index}"

    @classmethod
    def parse(cls, raw: str) -> "DocRef":
        m = _DOC_REF_RE.match(raw.strip())
        if not m:
            raise MalformedInput(f"bad document id {raw!r}")
        return cls(int(m.group(1)), int(m.group(2)))


@dataclass
class GoldQA:
    question: str
    answers: list[str]


@dataclass
class ClaimRecord:
    claim_id: int
    text: str
    gold_verdict: "VerdictLabel | None" = None
    gold_evidence: "list[GoldQA] | None" = None


@dataclass
class UrlEntry:
    url: str
    passages: list[str]


@dataclass
class KnowledgeStore:
    claim_id: int
    entries: list[UrlEntry] = field(default_factory=list)


@dataclass
class EvidenceItem:
    question: str
    answer: str
    answer_type: AnswerType
    citation: DocRef
    url: str
    scraped_text: str


@dataclass
class Diagnostics:
    n_keypoints: int = 0
    truncated: bool = False
    parse_fallbacks: int = 0
    failed: bool = False


@dataclass
class VerdictReport:
    claim_id: int
    claim: str
    evidence: list[EvidenceItem]
    justification: str
    verdict: VerdictLabel
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


def load_claims(path) -> list[ClaimRecord]:
    """Read a claims file: a JSON array of objects with ``claim`` and,
    in gold files, ``label`` plus ``questions``."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, list):
        raise MalformedInput(f"{path}: expected a JSON array of claim objects")

    records = []
    for idx, row in enumerate(data):
        if not isinstance(row, dict) or "claim" not in row:
            raise MalformedInput(f"{path}: element {idx} has no 'claim' field")
        text = row["claim"]
        if not isinstance(text, str) or not text.strip():
            raise MalformedInput(f"{path}: element {idx} has an empty claim")

        has_label = "label" in row
        has_questions = "questions" in row
        if has_label != has_questions:
            raise MalformedInput(
                f"{path}: element {idx} must carry both 'label' and 'questions' or neither"
            )

        verdict = evidence = None
        if has_label:
            verdict = VerdictLabel.from_string(row["label"])
            if not isinstance(row["questions"], list):
                raise MalformedInput(f"{path}: element {idx} 'questions' must be an array")
            evidence = []
            for q_idx, q in enumerate(row["questions"]):
                if not isinstance(q, dict) or "question" not in q or "answers" not in q:
                    raise MalformedInput(
                        f"{path}: element {idx} question {q_idx} needs 'question' and 'answers'"
                    )
                answers = [a.get("answer", "") for a in q["answers"]]
                if not answers or any(not isinstance(a, str) or not a for a in answers):
                    raise MalformedInput(
                        f"{path}: element {idx} question {q_idx} has empty answers"
                    )
                evidence.append(GoldQA(question=q["question"], answers=answers))

        records.append(ClaimRecord(claim_id=idx, text=text, gold_verdict=verdict,
                                   gold_evidence=evidence))
    return records


def load_store(path, claim_id: int) -> KnowledgeStore:
    """Read one knowledge store: JSON Lines, each line
    ``{"url": ..., "url2text": [...]}``. Line order defines the indices."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedInput(f"{path}: line {line_no} is not valid JSON") from exc
            if not isinstance(row, dict) or "url" not in row or "url2text" not in row:
                raise MalformedInput(f"{path}: line {line_no} needs 'url' and 'url2text'")
            passages = row["url2text"]
            if not isinstance(passages, list) or any(not isinstance(p, str) for p in passages):
                raise MalformedInput(f"{path}: line {line_no} 'url2text' must be a string array")
            entries.append(UrlEntry(url=str(row["url"]), passages=list(passages)))
    return KnowledgeStore(claim_id=claim_id, entries=entries)


def iter_docs(store: KnowledgeStore):
    """Yield every (DocRef, passage) pair in store order, empty passages included."""
    for u, entry in enumerate(store.entries):
        for t, passage in enumerate(entry.passages):
            yield DocRef(u, t), passage


def resolve(store: KnowledgeStore, ref: DocRef) -> tuple[str, str]:
    """Return (url, passage) for a citation id; inverse of the id attached to
    each document in the unified retrieval string."""
    if not 0 <= ref.url_index < len(store.entries):
        raise UnknownDocRef(f"no url index {ref.url_index} in store {store.claim_id}")
    entry = store.entries[ref.url_index]
    if not 0 <= ref.text_index < len(entry.passages):
        raise UnknownDocRef(
            f"no passage {ref.text_index} under url {ref.url_index} in store {store.claim_id}"
        )
    return entry.url, entry.passages[ref.text_index]


def write_predictions(path, reports: list[VerdictReport]) -> None:
    """Write the predictions file, preserving claim order."""
    rows = []
    for rep in reports:
        rows.append({
            "claim_id": rep.claim_id,
            "claim": rep.claim,
            "pred_label": rep.verdict.value,
            "justification": rep.justification,
            "evidence": [
                {
                    "question": ev.question,
                    "answer": ev.answer,
                    "answer_type": ev.answer_type.value,
                    "url": ev.url,
                    "scraped_text": ev.scraped_text,
                    "citation_id": ev.citation.serialize(),
                }
                for ev in rep.evidence
            ],
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def load_predictions(path) -> list[VerdictReport]:
    """Read a predictions file back into reports (used by scoring and tests)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, list):
        raise MalformedInput(f"{path}: expected a JSON array of prediction objects")

    reports = []
    for idx, row in enumerate(data):
        try:
            evidence = [
                EvidenceItem(
                    question=ev["question"],
                    answer=ev["answer"],
                    answer_type=AnswerType.from_string(ev["answer_type"]),
                    citation=DocRef.parse(ev["citation_id"]),
                    url=ev["url"],
                    scraped_text=ev["scraped_text"],
                )
                for ev in row["evidence"]
            ]
            reports.append(VerdictReport(
                claim_id=int(row["claim_id"]),
                claim=row["claim"],
                evidence=evidence,
                justification=row.get("justification", ""),
                verdict=VerdictLabel.from_string(row["pred_label"]),
            ))
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"{path}: element {idx} is malformed ({exc})") from exc
    return reports
