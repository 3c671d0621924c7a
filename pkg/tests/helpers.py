"""Shared test utilities: independent oracles and fixture builders.

The oracles here deliberately re-derive results from first principles
(exhaustive enumeration, direct recounting) so the production code is checked
against a second, structurally different implementation.
"""

import itertools
import math
from collections import Counter

from zsl_kep.bm25 import tokenize
from zsl_kep.corpus import KnowledgeStore, UrlEntry


def make_store(passage_lists, claim_id=0):
    entries = [UrlEntry(url=f"https://example.test/{i}", passages=list(passages))
               for i, passages in enumerate(passage_lists)]
    return KnowledgeStore(claim_id=claim_id, entries=entries)


def naive_bm25_scores(passages, query, k1=1.2, b=0.75):
    """Score every passage by recounting term frequencies from the text."""
    docs = [tokenize(p) for p in passages]
    n = len(docs)
    lengths = [len(d) for d in docs]
    avg = sum(lengths) / n if n else 0.0
    df = Counter()
    for doc in docs:
        for term in set(doc):
            df[term] += 1

    seen = set()
    unique_terms = [t for t in tokenize(query) if not (t in seen or seen.add(t))]

    scores = []
    for doc, length in zip(docs, lengths):
        tf_map = Counter(doc)
        total = 0.0
        for term in unique_terms:
            tf = tf_map.get(term, 0)
            if tf == 0:
                continue
            idf = math.log(1.0 + (n - df[term] + 0.5) / (df[term] + 0.5))
            total += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * length / avg))
        scores.append(total)
    return scores


def brute_force_assignment(matrix):
    """(best sum, lexicographically smallest optimal pair list) by enumerating
    every complete matching of the smaller side."""
    n_rows = len(matrix)
    n_cols = len(matrix[0]) if n_rows else 0
    size = min(n_rows, n_cols)
    if size == 0:
        return 0.0, []

    best_sum = None
    best_pairs = None
    if n_rows <= n_cols:
        candidates = (sorted(zip(range(n_rows), perm))
                      for perm in itertools.permutations(range(n_cols), n_rows))
    else:
        candidates = (sorted(zip(perm, range(n_cols)))
                      for perm in itertools.permutations(range(n_rows), n_cols))
    for pairs in candidates:
        total = sum(matrix[i][j] for i, j in pairs)
        if best_sum is None or total > best_sum:
            best_sum, best_pairs = total, pairs
        elif total == best_sum and pairs < best_pairs:
            best_pairs = pairs
    return best_sum, [tuple(p) for p in best_pairs]


def independent_meteor(hypothesis, references):
    """Separate evaluation of the same similarity equations, enumerating every
    maximum token alignment to find the true minimal chunk count."""
    best = 0.0
    hyp = tokenize(hypothesis)
    for reference in references:
        ref = tokenize(reference)
        if not hyp or not ref:
            continue
        h_count, r_count = Counter(hyp), Counter(ref)
        need = {t: min(c, r_count[t]) for t, c in h_count.items() if t in r_count}
        m = sum(need.values())
        if m == 0:
            continue

        per_type = []
        for term, k in need.items():
            h_pos = [i for i, t in enumerate(hyp) if t == term]
            r_pos = [j for j, t in enumerate(ref) if t == term]
            options = [list(zip(chosen_h, chosen_r))
                       for chosen_h in itertools.combinations(h_pos, k)
                       for chosen_r in itertools.permutations(r_pos, k)]
            per_type.append(options)

        min_chunks = None
        for combo in itertools.product(*per_type):
            pairs = sorted(pair for group in combo for pair in group)
            pair_set = set(pairs)
            chunks = sum(1 for h, r in pairs if (h - 1, r - 1) not in pair_set)
            if min_chunks is None or chunks < min_chunks:
                min_chunks = chunks

        precision = m / len(hyp)
        recall = m / len(ref)
        fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
        score = fmean * (1.0 - 0.5 * (min_chunks / m) ** 3)
        best = max(best, score)
    return best
