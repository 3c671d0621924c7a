"""Zero-shot key point construction.

One LLM call per claim turns the claim into at most four primitive key points
plus combined key points built from pairs of them; together with the claim
itself they become the retrieval query list. Anything that goes wrong here
degrades to claim-only retrieval — a claim never fails because its key points
did.
"""

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ParseFailure
from .llm_gateway import ChatRequest, GatewayError

MAX_PRIMITIVES = 4
MAX_COMBINED = 6  # pairs drawn from at most 4 primitives

TEMPLATE_NAMES = ("keypoint_system", "keypoint_user", "prediction_system", "prediction_user")

_PLACEHOLDER_RE = re.compile(r"<(?:claim|retrieval)>")
_ITEM_RE = re.compile(r"^\d+[.)]\s*(.+)$")
_PRIMITIVE_HEADER_RE = re.compile(r"^primitive\b\s*:?", re.IGNORECASE)
_COMBINED_HEADER_RE = re.compile(r"^combined\b\s*:?", re.IGNORECASE)


def fill_placeholders(template: str, values: dict[str, str]) -> str:
    """Substitute <claim> / <retrieval> tags; unknown tags are left alone."""
    return _PLACEHOLDER_RE.sub(lambda m: values.get(m.group(0), m.group(0)), template)


@dataclass(frozen=True)
class PromptLibrary:
    """The four prompt templates, shipped as editable text assets and
    overridable per template via config."""

    keypoint_system: str
    keypoint_user: str
    prediction_system: str
    prediction_user: str

    @classmethod
    def load(cls, overrides: "dict[str, str] | None" = None) -> "PromptLibrary":
        overrides = overrides or {}
        texts = {}
        for name in TEMPLATE_NAMES:
            if name in overrides:
                texts[name] = Path(overrides[name]).read_text(encoding="utf-8")
            else:
                texts[name] = (
                    resources.files(__package__) / "prompts" / f"{name}.txt"
                ).read_text(encoding="utf-8")
        return cls(**texts)


@dataclass
class KeyPointSet:
    primitives: list[str] = field(default_factory=list)
    combined: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.primitives) + len(self.combined)

    def all_queries(self, claim: str) -> list[str]:
        """Key points first, the original claim always last."""
        return [*self.primitives, *self.combined, claim]


def build_keypoint_prompt(claim: str, library: "PromptLibrary | None" = None) -> tuple[str, str]:
    if not claim or not claim.strip():
        raise ValueError("claim must be non-empty")
    library = library or PromptLibrary.load()
    return library.keypoint_system, fill_placeholders(library.keypoint_user, {"<claim>": claim})


def parse_keypoints(response: str) -> KeyPointSet:
    """Pull numbered lines out of the PRIMITIVE: and COMBINED: sections.

    Raises ParseFailure when no primitives are found; callers fall back to
    claim-only retrieval.
    """
    section = None
    primitives: list[str] = []
    combined: list[str] = []
    for raw in response.splitlines():
        line = raw.strip()
        if _PRIMITIVE_HEADER_RE.match(line):
            section = "primitive"
            continue
        if _COMBINED_HEADER_RE.match(line):
            section = "combined"
            continue
        m = _ITEM_RE.match(line)
        if not m or section is None:
            continue
        text = m.group(1).strip()
        if not text:
            continue
        (primitives if section == "primitive" else combined).append(text)

    if not primitives:
        raise ParseFailure("no primitive key points in response")
    return KeyPointSet(primitives[:MAX_PRIMITIVES], combined[:MAX_COMBINED])


def make_keypoints(gateway, claim: str, *, claim_id: "int | None" = None,
                   library: "PromptLibrary | None" = None, temperature: float = 0.0,
                   top_p: float = 0.8, max_new_tokens: int = 512) -> tuple[KeyPointSet, int]:
    """Build, send and parse the key point prompt.

    Returns (key point set, fallback count). Never raises: any gateway or
    parse failure yields the empty set, which downstream means retrieval runs
    on the claim alone.
    """
    library = library or PromptLibrary.load()
    system, user = build_keypoint_prompt(claim, library)
    request = ChatRequest(system_message=system, user_message=user,
                          temperature=temperature, top_p=top_p,
                          max_new_tokens=max_new_tokens)
    try:
        response = gateway.complete(request, claim_id)
    except GatewayError:
        return KeyPointSet(), 1
    try:
        return parse_keypoints(response.text), 0
    except ParseFailure:
        return KeyPointSet(), 1
