"""Reference decoding modes the lattice-fused decoder is measured against.

Three ways to use the scorer without walking the lattice arc by arc:
decode over the scorer's own vocabulary (no lattice at all), or rescore
an n-best list of lattice hypotheses either one hypothesis at a time or
with a depth-first sweep of their shared prefix trie. Rescoring cost is
counted in scorer predict calls, one per scored token (eos included),
the same unit as the decoder's node expansions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .decoder import DecoderConfig, DecodeResult, Hypothesis, _order_key
from .errors import SearchError
from .ops import n_shortest_strings
from .posterior import REJECT, PosteriorLattice
from .scorers import EOS_ID


@dataclass(slots=True)
class NBestList:
    """Distinct lattice hypotheses with their lattice log-probabilities,
    best first."""

    entries: list[tuple[tuple[int, ...], float]]
    source_id: str = ""

    def __post_init__(self):
        seen = set()
        last = math.inf
        for tokens, logprob in self.entries:
            if tokens in seen:
                raise ValueError(f"duplicate n-best entry {tokens!r}")
            seen.add(tokens)
            if logprob > last:
                raise ValueError("n-best log-probabilities must be non-increasing")
            last = logprob

    def __len__(self) -> int:
        return len(self.entries)


def nbest_from_posterior(lattice: PosteriorLattice, n: int,
                         source_id: str = "") -> NBestList:
    """Best n strings of a posterior lattice with normalized log-probs."""
    strings = n_shortest_strings(lattice.inner, n)
    return NBestList([(tokens, -cost) for tokens, cost in strings], source_id)


def decode_unconstrained(scorer, cfg: DecoderConfig | None = None,
                         max_steps: int = 100) -> DecodeResult:
    """Beam search over the scorer's full vocabulary, no lattice.

    Candidates are every vocabulary token plus finishing on eos; the
    lattice weight is unused and lambda_scorer must be positive. Raises
    SearchError when nothing finishes within max_steps iterations.
    """
    if cfg is None:
        cfg = DecoderConfig()
    if cfg.lambda_scorer <= 0:
        raise ValueError("unconstrained decoding needs lambda_scorer > 0")
    if cfg.max_steps is not None:
        max_steps = cfg.max_steps

    beam = [Hypothesis((), 0.0, -1, scorer.start())]
    expansions = 0
    predict_calls = 0
    best_finished: Hypothesis | None = None
    steps = 0
    while not beam[0].finished:
        if steps >= max_steps:
            if best_finished is None:
                raise SearchError(f"no finished hypothesis within {max_steps} steps")
            return DecodeResult(best_finished, beam, expansions, predict_calls)
        steps += 1
        candidates: list[Hypothesis] = []
        for hyp in beam:
            if hyp.finished:
                candidates.append(hyp)
                continue
            pred = scorer.predict(hyp.scorer_state)
            predict_calls += 1
            expansions += 1
            for token in sorted(pred.in_vocab):
                candidates.append(Hypothesis(
                    hyp.prefix + (token,),
                    hyp.score + cfg.lambda_scorer * pred.in_vocab[token],
                    -1,
                    scorer.consume(hyp.scorer_state, token),
                ))
            done = Hypothesis(hyp.prefix,
                              hyp.score + cfg.lambda_scorer * pred.eos_logprob,
                              -1, hyp.scorer_state, True)
            candidates.append(done)
            if best_finished is None or _order_key(done) < _order_key(best_finished):
                best_finished = done
        candidates.sort(key=_order_key)
        beam = candidates[:cfg.beam]
    return DecodeResult(beam[0], beam, expansions, predict_calls)


@dataclass(frozen=True, slots=True)
class RescoredEntry:
    tokens: tuple[int, ...]
    joint_score: float
    lattice_logprob: float
    scorer_logprob: float


@dataclass(slots=True)
class RescoreResult:
    ranked: list[RescoredEntry]
    predict_calls: int
    rejected: list[tuple[int, ...]] = field(default_factory=list)


def _entry_key(entry: RescoredEntry):
    return (-entry.joint_score, len(entry.tokens), entry.tokens)


def _combine(nbest: NBestList, scorer_logprobs, lambda_lat, lambda_scorer,
             lattice=None) -> tuple[list[RescoredEntry], list[tuple[int, ...]]]:
    entries = []
    rejected = []
    for tokens, stored_logprob in nbest.entries:
        if lattice is not None:
            lat = lattice.accepted_logprob(tokens)
            if lat is REJECT:
                rejected.append(tokens)
                continue
        else:
            lat = stored_logprob
        scorer_lp = scorer_logprobs[tokens]
        joint = (lambda_lat * lat if lambda_lat else 0.0) \
            + (lambda_scorer * scorer_lp if lambda_scorer else 0.0)
        entries.append(RescoredEntry(tokens, joint, lat, scorer_lp))
    entries.sort(key=_entry_key)
    return entries, rejected


def rescore_nbest_naive(nbest: NBestList, scorer, lambda_lat: float = 1.0,
                        lambda_scorer: float = 1.0,
                        lattice: PosteriorLattice | None = None) -> RescoreResult:
    """Rescore each hypothesis independently, left to right.

    Costs length+1 predict calls per hypothesis (one per token plus the
    eos term). The lattice term is taken from the list; pass lattice to
    recompute it instead, in which case hypotheses the lattice rejects
    are reported in rejected and left out of the ranking.
    """
    scorer_logprobs: dict[tuple[int, ...], float] = {}
    calls = 0
    for tokens, _ in nbest.entries:
        state = scorer.start()
        total = 0.0
        for token in tokens:
            pred = scorer.predict(state)
            calls += 1
            total += pred.logprob(token)
            state = scorer.consume(state, token)
        pred = scorer.predict(state)
        calls += 1
        total += pred.eos_logprob
        scorer_logprobs[tokens] = total
    ranked, rejected = _combine(nbest, scorer_logprobs, lambda_lat,
                                lambda_scorer, lattice)
    return RescoreResult(ranked, calls, rejected)


def rescore_nbest_dfs(nbest: NBestList, scorer, lambda_lat: float = 1.0,
                      lambda_scorer: float = 1.0,
                      lattice: PosteriorLattice | None = None) -> RescoreResult:
    """Rescore via depth-first traversal of the hypotheses' prefix trie.

    Scorer states are reused along shared prefixes, so the predict-call
    count equals the number of trie nodes (hypotheses terminated by eos,
    root excluded): never more than the naive sweep, strictly fewer as
    soon as two hypotheses share a prefix. The ranking is identical to
    rescore_nbest_naive, term by term.
    """
    trie: dict = {}
    for tokens, _ in nbest.entries:
        node = trie
        for token in tokens + (EOS_ID,):
            node = node.setdefault(token, {})

    scorer_logprobs: dict[tuple[int, ...], float] = {}
    calls = 0

    def walk(node: dict, state, prefix: tuple[int, ...], acc: float) -> None:
        nonlocal calls
        for token in sorted(node):
            # one predict per scored token: this models the per-position
            # cost of a left-to-right scorer, the same unit naive pays
            pred = scorer.predict(state)
            calls += 1
            if token == EOS_ID:
                scorer_logprobs[prefix] = acc + pred.eos_logprob
            else:
                walk(node[token], scorer.consume(state, token),
                     prefix + (token,), acc + pred.logprob(token))

    walk(trie, scorer.start(), (), 0.0)
    ranked, rejected = _combine(nbest, scorer_logprobs, lambda_lat,
                                lambda_scorer, lattice)
    return RescoreResult(ranked, calls, rejected)
