"""Multi-reference corpus BLEU and ROUGE-1/2/L over token sequences.

BLEU is corpus-level BLEU-4 without smoothing: clipped n-gram precisions
summed over instances, geometric mean over the orders that are defined
(orders with zero candidate n-grams corpus-wide are excluded), brevity
penalty from closest-length references. Any defined order with zero matches
makes the corpus score 0. ROUGE scores are per-instance max over references,
averaged over the corpus.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass


@dataclass(frozen=True)
class EvalInstance:
    """One candidate token sequence with its (nonempty) reference set."""

    candidate: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.references:
            raise ValueError("EvalInstance needs at least one reference")


def _ngrams(seq, n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def _closest_ref_len(cand_len: int, refs) -> int:
    # closest reference length; ties resolved toward the shorter reference
    return min((abs(len(r) - cand_len), len(r)) for r in refs)[1]


def corpus_bleu(instances, max_order: int = 4) -> float:
    """Corpus BLEU in [0, 100]."""
    instances = list(instances)
    if not instances:
        raise ValueError("corpus_bleu: no instances")
    matches = [0] * max_order
    possible = [0] * max_order
    cand_len = 0
    ref_len = 0
    for inst in instances:
        cand = inst.candidate
        cand_len += len(cand)
        ref_len += _closest_ref_len(len(cand), inst.references)
        for n in range(1, max_order + 1):
            counts = _ngrams(cand, n)
            if not counts:
                continue
            clip: Counter = Counter()
            for ref in inst.references:
                ref_counts = _ngrams(ref, n)
                for gram in counts:
                    clip[gram] = max(clip[gram], ref_counts.get(gram, 0))
            matches[n - 1] += sum(min(c, clip[g]) for g, c in counts.items())
            possible[n - 1] += sum(counts.values())
    if cand_len == 0:
        return 0.0
    defined = [n for n in range(max_order) if possible[n] > 0]
    if not defined or any(matches[n] == 0 for n in defined):
        return 0.0
    import math

    log_p = sum(math.log(matches[n] / possible[n]) for n in defined) / len(defined)
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_p)


def _f1(overlap: float, cand_total: float, ref_total: float) -> float:
    if overlap == 0 or cand_total == 0 or ref_total == 0:
        return 0.0
    p = overlap / cand_total
    r = overlap / ref_total
    return 2.0 * p * r / (p + r)


def rouge_n(instance: EvalInstance, n: int) -> float:
    """Max-over-references F1 of n-gram overlap, in [0, 1]."""
    if n not in (1, 2):
        raise ValueError(f"rouge_n: n must be 1 or 2, got {n}")
    cand_counts = _ngrams(instance.candidate, n)
    cand_total = sum(cand_counts.values())
    best = 0.0
    for ref in instance.references:
        ref_counts = _ngrams(ref, n)
        overlap = sum(min(c, ref_counts.get(g, 0)) for g, c in cand_counts.items())
        best = max(best, _f1(overlap, cand_total, sum(ref_counts.values())))
    return best


def _lcs_len(a, b) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(instance: EvalInstance) -> float:
    """Max-over-references LCS F-measure (beta = 1), in [0, 1]."""
    best = 0.0
    for ref in instance.references:
        lcs = _lcs_len(instance.candidate, ref)
        best = max(best, _f1(lcs, len(instance.candidate), len(ref)))
    return best


def corpus_rouge_n(instances, n: int) -> float:
    instances = list(instances)
    return sum(rouge_n(i, n) for i in instances) / len(instances)


def corpus_rouge_l(instances) -> float:
    instances = list(instances)
    return sum(rouge_l(i) for i in instances) / len(instances)


def score_all(instances) -> dict[str, float]:
    """BLEU and ROUGE-1/2/L for a corpus, in Table-style units (x100)."""
    instances = list(instances)
    return {
        "BLEU": corpus_bleu(instances),
        "ROUGE-1": 100.0 * corpus_rouge_n(instances, 1),
        "ROUGE-2": 100.0 * corpus_rouge_n(instances, 2),
        "ROUGE-L": 100.0 * corpus_rouge_l(instances),
    }
