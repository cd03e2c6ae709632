"""Corpus BLEU and weight tuning.

BLEU follows the classic single-reference script behavior: clipped
n-gram precisions up to order 4 pooled over the corpus, brevity penalty
min(1, exp(1 - r/c)), case-sensitive on whatever tokens it is given, and
no smoothing whatsoever: if any precision is zero (or has an empty
denominator) the score is zero. Scores live in [0, 1].
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

MAX_ORDER = 4


def _ngrams(tokens, order: int) -> Counter:
    return Counter(tuple(tokens[i:i + order]) for i in range(len(tokens) - order + 1))


@dataclass(slots=True)
class BleuReport:
    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_length: int
    ref_length: int
    matched: tuple[int, int, int, int]
    totals: tuple[int, int, int, int]


def corpus_bleu(hypotheses, references) -> BleuReport:
    """Corpus-level BLEU of token sequences against single references.

    Sequences may hold any hashable tokens (strings, ids). An order whose
    denominator is zero counts as zero precision, which zeroes the score;
    identical corpora score exactly 1.0.
    """
    hyps = [tuple(h) for h in hypotheses]
    refs = [tuple(r) for r in references]
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses against {len(refs)} references")
    if not hyps:
        raise ValueError("empty corpus")

    matched = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_length = 0
    ref_length = 0
    for hyp, ref in zip(hyps, refs):
        hyp_length += len(hyp)
        ref_length += len(ref)
        for n in range(1, MAX_ORDER + 1):
            hyp_counts = _ngrams(hyp, n)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ref, n)
            totals[n - 1] += sum(hyp_counts.values())
            matched[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())

    precisions = tuple(m / t if t else 0.0 for m, t in zip(matched, totals))
    if hyp_length == 0:
        bp = 0.0
    elif hyp_length > ref_length:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_length / hyp_length)
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER)
    return BleuReport(score, precisions, bp, hyp_length, ref_length,
                      tuple(matched), tuple(totals))


@dataclass(slots=True)
class TuneResult:
    lambda_lat: float
    lambda_scorer: float
    bleu: BleuReport
    history: list[tuple[float, float]] = field(default_factory=list)


def tune_grid(lattices, references, scorer, grid, beam: int = 12,
              local_softmax: bool = False) -> TuneResult:
    """Pick lambda_lat by BLEU over a development set.

    Only the ratio of the two weights matters to the decoder's argmax, so
    lambda_scorer stays fixed at 1 and the grid sweeps lambda_lat. Ties
    go to the smaller lambda_lat. Decoding failures are re-raised naming
    the offending sentence.
    """
    from .decoder import DecoderConfig, decode

    lattices = list(lattices)
    references = list(references)
    if len(lattices) != len(references):
        raise ValueError("development lattices and references differ in length")
    best: TuneResult | None = None
    history: list[tuple[float, float]] = []
    for lam in sorted(grid):
        cfg = DecoderConfig(beam=beam, lambda_lat=lam, lambda_scorer=1.0,
                            local_softmax=local_softmax)
        hyps = []
        for i, lattice in enumerate(lattices):
            try:
                hyps.append(decode(lattice, scorer, cfg).best.prefix)
            except Exception as exc:
                raise RuntimeError(
                    f"decode failed on sentence {i} at lambda_lat={lam}") from exc
        report = corpus_bleu(hyps, references)
        history.append((lam, report.score))
        if best is None or report.score > best.bleu.score:
            best = TuneResult(lam, 1.0, report)
    assert best is not None
    best.history = history
    return best
