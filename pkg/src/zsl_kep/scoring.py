"""Evidence scoring: METEOR similarity, optimal assignment, conditioned labels.

METEOR here is the exact-match stage only: a maximum one-to-one token
alignment, chosen among the maximum alignments to minimize the number of
chunks (maximal runs matching contiguously on both sides), then

    P = m/|hyp|, R = m/|ref|, F = 10PR/(R+9P),
    penalty = gamma*(ch/m)**beta, score = F*(1-penalty)

with gamma=0.5 and beta=3. Stemming and synonym stages are deliberately out;
a trivial suffix-stripper can be switched on instead, off by default because
it changes scores.

Predicted evidence strings are matched to gold ones with a max-sum assignment
(Hungarian), and the matched similarity mass is normalized by the number of
gold strings. A claim counts toward the conditioned score only when its label
is right AND its question+answer evidence score reaches the 0.25 gate.
"""

import math
from collections import Counter
from dataclasses import dataclass, field

from .bm25 import tokenize
from .corpus import ClaimRecord, VerdictReport
from .errors import EmptyReferenceList, MissingGold, NonFiniteEntry

GATE_THRESHOLD = 0.25

# exhaustive minimal-chunk search gives up after this many nodes and keeps the
# best alignment found so far (the greedy seed at worst)
_ALIGN_NODE_BUDGET = 200_000


@dataclass(frozen=True)
class MeteorParams:
    gamma: float = 0.5
    beta: float = 3.0
    stemming: bool = False


def _stem(token: str) -> str:
    """Naive suffix stripping; intentionally much weaker than a real stemmer."""
    if len(token) >= 6 and token.endswith("ing"):
        return token[:-3]
    if len(token) >= 5 and token.endswith("ed"):
        return token[:-2]
    if len(token) >= 5 and token.endswith("es"):
        return token[:-2]
    if len(token) >= 4 and token.endswith("s") and not token.endswith("ss"):
        return token[:-1]
    return token


def _terms(text: str, params: MeteorParams) -> list[str]:
    tokens = tokenize(text)
    if params.stemming:
        tokens = [_stem(t) for t in tokens]
    return tokens


def _greedy_alignment(hyp: list[str], ref: list[str], need: dict[str, int]) -> int:
    """Chunk count of a left-to-right maximum alignment; upper bound seed."""
    need_left = dict(need)
    ref_free: dict[str, list[int]] = {}
    for pos, tok in enumerate(ref):
        if tok in need:
            ref_free.setdefault(tok, []).append(pos)
    used: set[int] = set()
    chunks = 0
    prev_ref = None
    for tok in hyp:
        if need_left.get(tok, 0) <= 0:
            prev_ref = None
            continue
        choice = None
        if prev_ref is not None:
            nxt = prev_ref + 1
            if nxt < len(ref) and ref[nxt] == tok and nxt not in used:
                choice = nxt
        if choice is None:
            for pos in ref_free[tok]:
                if pos not in used:
                    choice = pos
                    break
        if choice is None:
            prev_ref = None
            continue
        used.add(choice)
        need_left[tok] -= 1
        chunks += 0 if prev_ref is not None and choice == prev_ref + 1 else 1
        prev_ref = choice
    return chunks


def _alignment(hyp: list[str], ref: list[str]) -> tuple[int, int]:
    """(matches, chunks) of a maximum alignment with minimal chunk count.

    Branch and bound over hypothesis positions; each position is either
    matched to an unused reference slot of the same token or skipped when
    enough later occurrences remain. Minimal chunks is NP-hard in general,
    so a node budget caps pathological repetition-heavy inputs.
    """
    h_count = Counter(hyp)
    r_count = Counter(ref)
    need = {t: min(c, r_count[t]) for t, c in h_count.items() if t in r_count}
    m = sum(need.values())
    if m == 0:
        return 0, 0

    n = len(hyp)
    ref_positions: dict[str, list[int]] = {}
    for pos, tok in enumerate(ref):
        if tok in need:
            ref_positions.setdefault(tok, []).append(pos)

    # suffix[i][t]: occurrences of t in hyp[i:], for skip feasibility
    suffix: list[dict[str, int]] = [dict() for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        cur = dict(suffix[i + 1])
        tok = hyp[i]
        if tok in need:
            cur[tok] = cur.get(tok, 0) + 1
        suffix[i] = cur

    best = _greedy_alignment(hyp, ref, need)
    nodes = 0

    def search(i: int, remaining: int, need_left: dict[str, int], used: int,
               prev_ref: "int | None", chunks: int) -> None:
        nonlocal best, nodes
        if chunks >= best:
            return
        if remaining == 0:
            best = chunks
            return
        if i == n:
            return
        nodes += 1
        if nodes > _ALIGN_NODE_BUDGET:
            return

        tok = hyp[i]
        left = need_left.get(tok, 0)
        if left > 0:
            candidates = [p for p in ref_positions[tok] if not (used >> p) & 1]
            if prev_ref is not None and prev_ref + 1 in candidates:
                candidates.remove(prev_ref + 1)
                candidates.insert(0, prev_ref + 1)
            for pos in candidates:
                extend = prev_ref is not None and pos == prev_ref + 1
                need_left[tok] = left - 1
                search(i + 1, remaining - 1, need_left, used | (1 << pos), pos,
                       chunks if extend else chunks + 1)
                need_left[tok] = left
        # skip hypothesis position i if later occurrences can still cover the need
        if left == 0 or suffix[i + 1].get(tok, 0) >= left:
            search(i + 1, remaining, need_left, used, None, chunks)

    search(0, m, dict(need), 0, None, 0)
    return m, best


def meteor(hypothesis: str, references: list[str],
           params: "MeteorParams | None" = None) -> float:
    """Similarity in [0, 1]; with several references the best one counts."""
    if not references:
        raise EmptyReferenceList("meteor needs at least one reference")
    params = params or MeteorParams()

    hyp = _terms(hypothesis, params)
    best = 0.0
    for reference in references:
        ref = _terms(reference, params)
        if not hyp or not ref:
            continue
        m, chunks = _alignment(hyp, ref)
        if m == 0:
            continue
        precision = m / len(hyp)
        recall = m / len(ref)
        fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
        penalty = params.gamma * (chunks / m) ** params.beta
        best = max(best, fmean * (1.0 - penalty))
    return best


def _kuhn_min(cost: list[list[float]]) -> list[int]:
    """Min-cost complete assignment of all rows (requires rows <= cols);
    returns the column assigned to each row. Standard potentials method."""
    n_rows, n_cols = len(cost), len(cost[0])
    INF = math.inf
    u = [0.0] * (n_rows + 1)
    v = [0.0] * (n_cols + 1)
    p = [0] * (n_cols + 1)  # 1-based: p[j] = row assigned to column j
    way = [0] * (n_cols + 1)
    for i in range(1, n_rows + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n_cols + 1)
        used = [False] * (n_cols + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = -1
            for j in range(1, n_cols + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n_cols + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assign = [-1] * n_rows
    for j in range(1, n_cols + 1):
        if p[j]:
            assign[p[j] - 1] = j - 1
    return assign


def _max_assignment_value(matrix: list[list[float]]) -> float:
    """Max total of a complete matching of the smaller side."""
    n_rows = len(matrix)
    n_cols = len(matrix[0]) if n_rows else 0
    if n_rows == 0 or n_cols == 0:
        return 0.0
    if n_rows > n_cols:
        matrix = [[matrix[i][j] for i in range(n_rows)] for j in range(n_cols)]
        n_rows, n_cols = n_cols, n_rows
    assign = _kuhn_min([[-v for v in row] for row in matrix])
    return sum(matrix[i][assign[i]] for i in range(n_rows))


def hungarian_max(matrix) -> list[tuple[int, int]]:
    """Matching of size min(rows, cols) maximizing the sum of entries.

    Ties between optimal matchings (within 1e-9 of the optimum) break toward
    the lexicographically smallest (row, col) pair sequence, so results are
    reproducible.
    """
    matrix = [list(row) for row in matrix]
    n_rows = len(matrix)
    n_cols = len(matrix[0]) if n_rows else 0
    for row in matrix:
        if len(row) != n_cols:
            raise ValueError("matrix rows must all have the same length")
        for value in row:
            if not math.isfinite(value):
                raise NonFiniteEntry(f"matrix entry {value!r} is not finite")
    size = min(n_rows, n_cols)
    if size == 0:
        return []

    best = _max_assignment_value(matrix)
    tol = 1e-9 * max(1.0, abs(best))
    chosen: list[tuple[int, int]] = []
    used_cols: set[int] = set()
    fixed = 0.0
    for i in range(n_rows):
        if len(chosen) == size:
            break
        needed = size - len(chosen) - 1
        rows_left = list(range(i + 1, n_rows))
        for j in range(n_cols):
            if j in used_cols:
                continue
            cols_left = [y for y in range(n_cols) if y not in used_cols and y != j]
            if needed > min(len(rows_left), len(cols_left)):
                continue
            sub = [[matrix[x][y] for y in cols_left] for x in rows_left]
            if fixed + matrix[i][j] + _max_assignment_value(sub) >= best - tol:
                chosen.append((i, j))
                used_cols.add(j)
                fixed += matrix[i][j]
                break
    return chosen


def evidence_score(pred_strings: list[str], gold_strings,
                   params: "MeteorParams | None" = None) -> float:
    """Assignment-matched METEOR mass over gold evidence.

    Each gold entry may be one string or a list of acceptable variants (any
    variant satisfies the match). Returns assignment sum / number of gold
    entries; an empty prediction list scores 0.
    """
    if not gold_strings:
        raise EmptyReferenceList("evidence_score needs at least one gold string")
    params = params or MeteorParams()
    gold_variants = [[g] if isinstance(g, str) else list(g) for g in gold_strings]
    if not pred_strings:
        return 0.0
    matrix = [[meteor(pred, variants, params) for variants in gold_variants]
              for pred in pred_strings]
    total = sum(matrix[i][j] for i, j in hungarian_max(matrix))
    return total / len(gold_variants)


@dataclass
class ClaimScore:
    claim_id: int
    q_only: float
    q_plus_a: float
    label_correct: bool
    gated_correct: bool
    gold_evidence_empty: bool = False


@dataclass
class ScoreReport:
    per_claim: list[ClaimScore]
    aggregate: dict[str, float]
    params: MeteorParams = field(default_factory=MeteorParams)
    threshold: float = GATE_THRESHOLD
    normalization: str = "gold_count"

    def to_dict(self) -> dict:
        return {
            "params": {
                "fmean": "10PR/(R+9P)",
                "gamma": self.params.gamma,
                "beta": self.params.beta,
                "stemming": self.params.stemming,
                "threshold": self.threshold,
                "normalization": self.normalization,
            },
            "aggregate": dict(self.aggregate),
            "per_claim": [
                {
                    "claim_id": c.claim_id,
                    "q_only": c.q_only,
                    "q_plus_a": c.q_plus_a,
                    "label_correct": c.label_correct,
                    "gated_correct": c.gated_correct,
                    "gold_evidence_empty": c.gold_evidence_empty,
                }
                for c in self.per_claim
            ],
        }


def score_run(reports: list[VerdictReport], gold: list[ClaimRecord],
              params: "MeteorParams | None" = None,
              threshold: float = GATE_THRESHOLD) -> ScoreReport:
    """Score predicted reports against gold records.

    q_only matches question strings, q_plus_a matches "question answer"
    concatenations (gold side: each question joined with each of its
    answers). A claim is gated-correct when its label matches gold and
    q_plus_a clears the threshold; with empty gold evidence the gate passes
    vacuously and the row is flagged.
    """
    params = params or MeteorParams()
    by_id = {record.claim_id: record for record in gold}

    per_claim: list[ClaimScore] = []
    for report in reports:
        record = by_id.get(report.claim_id)
        if record is None:
            raise MissingGold(f"claim {report.claim_id} has no gold record")
        if record.gold_verdict is None or record.gold_evidence is None:
            raise MissingGold(f"claim {report.claim_id} gold record lacks label or evidence")

        label_correct = report.verdict == record.gold_verdict
        if record.gold_evidence:
            pred_q = [ev.question for ev in report.evidence]
            gold_q = [[g.question] for g in record.gold_evidence]
            q_only = evidence_score(pred_q, gold_q, params)

            pred_qa = [f"{ev.question} {ev.answer}" for ev in report.evidence]
            gold_qa = [[f"{g.question} {a}" for a in g.answers] for g in record.gold_evidence]
            q_plus_a = evidence_score(pred_qa, gold_qa, params)

            gated = label_correct and q_plus_a >= threshold
            empty_gold = False
        else:
            q_only = q_plus_a = 0.0
            gated = label_correct
            empty_gold = True

        per_claim.append(ClaimScore(claim_id=report.claim_id, q_only=q_only,
                                    q_plus_a=q_plus_a, label_correct=label_correct,
                                    gated_correct=gated, gold_evidence_empty=empty_gold))

    count = len(per_claim)
    aggregate = {
        "q_only": sum(c.q_only for c in per_claim) / count if count else 0.0,
        "q_plus_a": sum(c.q_plus_a for c in per_claim) / count if count else 0.0,
        "averitec": sum(1.0 for c in per_claim if c.gated_correct) / count if count else 0.0,
    }
    return ScoreReport(per_claim=per_claim, aggregate=aggregate, params=params,
                       threshold=threshold)
