"""Per-claim orchestration: multi-query retrieval, unified retrieval string,
zero-shot prediction with overflow-truncation retries, and response parsing.

Every claim always ends in a VerdictReport. Parse problems degrade field by
field (and are counted), and an irrecoverable gateway failure produces a
Not Enough Evidence report rather than no report at all.
"""

import os
import re
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

from .bm25 import Bm25Params, build_index, retrieve
from .corpus import (AnswerType, ClaimRecord, Diagnostics, DocRef, EvidenceItem,
                     KnowledgeStore, VerdictLabel, VerdictReport, load_store, resolve)
from .errors import UnknownDocRef
from .keypoints import KeyPointSet, PromptLibrary, fill_placeholders, make_keypoints
from .llm_gateway import ChatRequest, ContextOverflow, GatewayError

GROUP_SEPARATOR = "\n\n-----\n\n"

FALLBACK_QUESTION = "What does the retrieved evidence say about the claim?"
FALLBACK_ANSWER_CHARS = 200

_FIELD_RE = re.compile(r"^\s*(Q|A|TYPE|CITE)(\d+)\s*:\s*(.*?)\s*$", re.IGNORECASE | re.MULTILINE)
_JUSTIFICATION_RE = re.compile(r"^\s*JUSTIFICATION\s*:", re.IGNORECASE | re.MULTILINE)
_VERDICT_RE = re.compile(r"^\s*VERDICT\s*:\s*(.+?)\s*$", re.IGNORECASE | re.MULTILINE)
_CITE_ID_RE = re.compile(r"(\d+)_(\d+)")


@dataclass
class RetrievalGroup:
    query: str
    kind: str  # "keypoint" | "claim"
    docs: list[tuple[DocRef, str]] = field(default_factory=list)


def run_retrieval(index, store: KnowledgeStore, keypoints: KeyPointSet, claim: str,
                  cfg) -> list[RetrievalGroup]:
    """One group per query, key points first and the claim last; the claim
    query uses the large top_k. A document already placed in an earlier group
    is omitted from later ones."""
    queries = keypoints.all_queries(claim)
    seen: set[DocRef] = set()
    groups: list[RetrievalGroup] = []
    for pos, query in enumerate(queries):
        is_claim = pos == len(queries) - 1
        top_k = cfg.claim_top_k if is_claim else cfg.keypoint_top_k
        docs = []
        for hit in retrieve(index, query, top_k):
            if hit.ref in seen:
                continue
            seen.add(hit.ref)
            docs.append((hit.ref, resolve(store, hit.ref)[1]))
        groups.append(RetrievalGroup(query=query, kind="claim" if is_claim else "keypoint",
                                     docs=docs))
    return groups


def build_unified_string(groups: list[RetrievalGroup]) -> str:
    """Each document rendered as ``{passage} <{i}_{j}>``, newline between
    documents of a group, dashed separator between groups. Empty groups
    contribute nothing, separators included."""
    parts = []
    for group in groups:
        if not group.docs:
            continue
        parts.append("\n".join(f"{text} <{ref.serialize()}>" for ref, text in group.docs))
    return GROUP_SEPARATOR.join(parts)


def build_prediction_prompt(claim: str, unified: str,
                            library: "PromptLibrary | None" = None) -> tuple[str, str]:
    """Prediction prompt carries the claim and the retrieval string only;
    key points are deliberately kept out of it."""
    library = library or PromptLibrary.load()
    user = fill_placeholders(library.prediction_user,
                             {"<claim>": claim, "<retrieval>": unified})
    return library.prediction_system, user


def _truncate_groups(groups: list[RetrievalGroup], claim_cap: int,
                     keypoint_cap: int) -> list[RetrievalGroup]:
    return [
        RetrievalGroup(
            query=g.query,
            kind=g.kind,
            docs=g.docs[: claim_cap if g.kind == "claim" else keypoint_cap],
        )
        for g in groups
    ]


def _top_doc(groups: list[RetrievalGroup]) -> "tuple[DocRef, str] | None":
    """First document of the claim group, or failing that of any group."""
    if groups and groups[-1].docs:
        return groups[-1].docs[0]
    for group in groups:
        if group.docs:
            return group.docs[0]
    return None


def parse_prediction(response: str, store: KnowledgeStore, groups: list[RetrievalGroup],
                     diagnostics: "Diagnostics | None" = None):
    """Parse the labeled-line prediction grammar into evidence, justification
    and verdict. Each unparseable field degrades individually: bad citation ->
    top claim-group document, bad answer type -> Abstractive, bad verdict ->
    Not Enough Evidence, no pairs at all -> one synthesized pair. Every
    degradation bumps diagnostics.parse_fallbacks."""
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    top = _top_doc(groups)

    questions: dict[int, str] = {}
    answers: dict[int, str] = {}
    types: dict[int, str] = {}
    cites: dict[int, str] = {}
    buckets = {"Q": questions, "A": answers, "TYPE": types, "CITE": cites}
    for m in _FIELD_RE.finditer(response):
        buckets[m.group(1).upper()].setdefault(int(m.group(2)), m.group(3))

    def resolve_citation(raw: str) -> "tuple[DocRef, str, str] | None":
        m = _CITE_ID_RE.search(raw)
        if m:
            ref = DocRef(int(m.group(1)), int(m.group(2)))
            try:
                url, text = resolve(store, ref)
                return ref, url, text
            except UnknownDocRef:
                pass
        return None

    def fallback_citation() -> tuple[DocRef, str, str]:
        if top is not None:
            ref, text = top
            return ref, resolve(store, ref)[0], text
        return DocRef(0, 0), "", ""

    evidence: list[EvidenceItem] = []
    for k in sorted(questions):
        if len(evidence) == 4:
            break
        question = questions[k]
        if not question:
            continue
        answer = answers.get(k, "")

        answer_type = AnswerType.parse_lenient(types.get(k, ""))
        if answer_type is None:
            answer_type = AnswerType.ABSTRACTIVE
            diagnostics.parse_fallbacks += 1

        resolved = resolve_citation(cites.get(k, ""))
        if resolved is None:
            ref, url, text = fallback_citation()
            diagnostics.parse_fallbacks += 1
        else:
            ref, url, text = resolved
        evidence.append(EvidenceItem(question=question, answer=answer,
                                     answer_type=answer_type, citation=ref,
                                     url=url, scraped_text=text))

    if not evidence:
        ref, url, text = fallback_citation()
        evidence.append(EvidenceItem(
            question=FALLBACK_QUESTION,
            answer=text[:FALLBACK_ANSWER_CHARS],
            answer_type=AnswerType.ABSTRACTIVE,
            citation=ref, url=url, scraped_text=text,
        ))
        diagnostics.parse_fallbacks += 1

    justification = ""
    just_headers = list(_JUSTIFICATION_RE.finditer(response))
    if just_headers:
        start = just_headers[-1].end()
        tail = response[start:]
        verdict_in_tail = re.search(r"^\s*VERDICT\s*:", tail, re.IGNORECASE | re.MULTILINE)
        justification = (tail[: verdict_in_tail.start()] if verdict_in_tail else tail).strip()

    verdict = None
    verdict_matches = _VERDICT_RE.findall(response)
    if verdict_matches:
        verdict = VerdictLabel.parse_lenient(verdict_matches[-1])
    if verdict is None:
        verdict = VerdictLabel.NOT_ENOUGH_EVIDENCE
        diagnostics.parse_fallbacks += 1

    return evidence, justification, verdict


def _failure_report(claim_id: int, claim: str, groups: list[RetrievalGroup],
                    store: KnowledgeStore, detail: str,
                    diagnostics: Diagnostics) -> VerdictReport:
    top = _top_doc(groups)
    if top is not None:
        ref, text = top
        url = resolve(store, ref)[0]
    else:
        ref, url, text = DocRef(0, 0), "", ""
    diagnostics.failed = True
    placeholder = EvidenceItem(question="", answer="", answer_type=AnswerType.UNANSWERABLE,
                               citation=ref, url=url, scraped_text=text)
    return VerdictReport(
        claim_id=claim_id,
        claim=claim,
        evidence=[placeholder],
        justification=f"No verdict could be generated: {detail}",
        verdict=VerdictLabel.NOT_ENOUGH_EVIDENCE,
        diagnostics=diagnostics,
    )


def predict_with_retry(gateway, groups: list[RetrievalGroup], claim: str,
                       store: KnowledgeStore, cfg, *, claim_id: int = 0,
                       diagnostics: "Diagnostics | None" = None,
                       library: "PromptLibrary | None" = None) -> VerdictReport:
    """Send the prediction prompt, shrinking the document set on context
    overflow: first to the configured truncation caps, then by halving them
    (floor one document per group) until the prompt fits or nothing is left
    to cut."""
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    library = library or PromptLibrary.load()

    caps: "tuple[int, int] | None" = None
    current = groups
    while True:
        unified = build_unified_string(current)
        system, user = build_prediction_prompt(claim, unified, library)
        request = ChatRequest(system_message=system, user_message=user,
                              temperature=cfg.temperature, top_p=cfg.top_p,
                              max_new_tokens=cfg.max_tokens_prediction)
        try:
            response = gateway.complete(request, claim_id)
            break
        except ContextOverflow as exc:
            if caps is None:
                caps = (cfg.truncate_claim, cfg.truncate_keypoint)
            elif caps == (1, 1):
                return _failure_report(claim_id, claim, current, store,
                                       f"context overflow persisted at minimum caps ({exc.detail})",
                                       diagnostics)
            else:
                caps = (max(1, caps[0] // 2), max(1, caps[1] // 2))
            current = _truncate_groups(groups, *caps)
            diagnostics.truncated = True
        except GatewayError as exc:
            return _failure_report(claim_id, claim, current, store,
                                   f"{exc.kind}: {exc.detail}", diagnostics)

    evidence, justification, verdict = parse_prediction(response.text, store, current,
                                                        diagnostics)
    return VerdictReport(claim_id=claim_id, claim=claim, evidence=evidence,
                         justification=justification, verdict=verdict,
                         diagnostics=diagnostics)


def run_claim(record: ClaimRecord, store: KnowledgeStore, gateway, cfg,
              library: "PromptLibrary | None" = None) -> VerdictReport:
    """Full pipeline for one claim: index, key points, retrieval, prediction."""
    library = library or PromptLibrary.load(getattr(cfg, "prompt_overrides", None))
    diagnostics = Diagnostics()

    index = build_index(store, Bm25Params(k1=cfg.k1, b=cfg.b))
    keypoints, fallbacks = make_keypoints(
        gateway, record.text, claim_id=record.claim_id, library=library,
        temperature=cfg.temperature, top_p=cfg.top_p,
        max_new_tokens=cfg.max_tokens_keypoints)
    diagnostics.parse_fallbacks += fallbacks
    diagnostics.n_keypoints = keypoints.n

    groups = run_retrieval(index, store, keypoints, record.text, cfg)
    return predict_with_retry(gateway, groups, record.text, store, cfg,
                              claim_id=record.claim_id, diagnostics=diagnostics,
                              library=library)


def store_path_for(store_dir: str, claim_id: int) -> str:
    return os.path.join(store_dir, f"{claim_id}.json")


def run_batch(claims: list[ClaimRecord], gateway, cfg,
              completed: "list[VerdictReport] | None" = None) -> list[VerdictReport]:
    """Process claims on a small worker pool; results come back in claim
    order regardless of completion order, so runs are reproducible.

    When a ``completed`` list is given, every finished report is appended to
    it as it arrives, so an interrupted run can still flush what it has.
    """
    library = PromptLibrary.load(getattr(cfg, "prompt_overrides", None))

    def work(record: ClaimRecord) -> VerdictReport:
        store = load_store(store_path_for(cfg.store_dir, record.claim_id), record.claim_id)
        return run_claim(record, store, gateway, cfg, library)

    def done(report: VerdictReport) -> VerdictReport:
        if completed is not None:
            completed.append(report)
        return report

    if cfg.workers <= 1 or len(claims) <= 1:
        return [done(work(record)) for record in claims]

    results: list["VerdictReport | None"] = [None] * len(claims)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = {pool.submit(work, record): pos for pos, record in enumerate(claims)}
        try:
            for future in as_completed(futures):
                results[futures[future]] = done(future.result())
        except BaseException:
            for future in futures:
                future.cancel()
            raise
    return results  # type: ignore[return-value]
