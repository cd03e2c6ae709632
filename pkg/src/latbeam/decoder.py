"""Beam search over a posterior lattice fused with an external scorer.

Each step of a hypothesis scores a lattice arc together with the scorer's
opinion of the same token:

    lambda_lat * cond_logprob + lambda_scorer * scorer term

where the scorer term is the token's own mass when the scorer knows it
and the unknown-word mass otherwise; several unknown arcs out of one
state each get the full unk mass. Finishing costs the lattice's stop
mass plus the scorer's eos mass, weighted the same way. The search is
breadth-first and output-synchronous: every live hypothesis is expanded
once per iteration (one node expansion = one scorer predict call), and
finished hypotheses ride along in the same beam untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .errors import EmptyLatticeError, SearchError
from .posterior import PosteriorLattice
from .scorers import Prediction, logsumexp

NEG_INF = -math.inf


@dataclass(slots=True)
class DecoderConfig:
    beam: int = 12
    lambda_lat: float = 1.0
    lambda_scorer: float = 1.0
    local_softmax: bool = False
    max_steps: int | None = None

    def __post_init__(self):
        if self.beam < 1:
            raise ValueError("beam must be at least 1")
        if self.lambda_lat < 0 or self.lambda_scorer < 0:
            raise ValueError("lambdas must be non-negative")
        if self.lambda_lat == 0 and self.lambda_scorer == 0:
            raise ValueError("at least one lambda must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(slots=True)
class Hypothesis:
    prefix: tuple[int, ...]
    score: float
    lattice_state: int
    scorer_state: Any
    finished: bool = False


def _order_key(hyp: Hypothesis):
    # best score first, then shorter prefix, then lexicographic token ids
    return (-hyp.score, len(hyp.prefix), hyp.prefix)


@dataclass(slots=True)
class DecodeResult:
    best: Hypothesis
    beam: list[Hypothesis]
    node_expansions: int
    scorer_predict_calls: int


def local_log_norm(pred: Prediction, state_tokens) -> float:
    """Scorer mass, in log space, of exactly the tokens the lattice allows.

    Out-of-vocabulary tokens each contribute the full unk mass, matching
    how they are scored.
    """
    return logsumexp(pred.logprob(t) for t in state_tokens)


def joint_step_logprob(succ, pred: Prediction, cfg: DecoderConfig,
                       state_tokens=None) -> float:
    """Joint log score of extending a hypothesis along one lattice arc.

    With local_softmax the scorer mass is renormalized over the tokens on
    the outgoing arcs of the current lattice state, which must be passed
    as state_tokens. Zero-weight terms are dropped outright so a lambda
    of 0 really removes that model.
    """
    score = cfg.lambda_lat * succ.cond_logprob if cfg.lambda_lat else 0.0
    if not cfg.lambda_scorer:
        return score
    lp = pred.logprob(succ.token)
    if cfg.local_softmax:
        if state_tokens is None:
            raise ValueError("local_softmax needs the current state's arc tokens")
        lp -= local_log_norm(pred, state_tokens)
    return score + cfg.lambda_scorer * lp


def _end_score(final_logprob: float, pred: Prediction, cfg: DecoderConfig) -> float:
    score = cfg.lambda_lat * final_logprob if cfg.lambda_lat else 0.0
    if cfg.lambda_scorer:
        score += cfg.lambda_scorer * pred.eos_logprob
    return score


def decode(lattice: PosteriorLattice, scorer,
           cfg: DecoderConfig | None = None) -> DecodeResult:
    """Fused beam decode; returns the best finished hypothesis.

    Terminates as soon as the top of the beam is finished (scores only
    drop as prefixes grow, all terms being log-probabilities, so nothing
    pending can overtake it within the beam), or after max_steps
    iterations, defaulting to three times the lattice depth, in which
    case the best finished hypothesis seen anywhere is returned. A search
    that never finishes anything raises SearchError. The output prefix is
    accepted by the lattice by construction.
    """
    if cfg is None:
        cfg = DecoderConfig()
    if not lattice.num_states:
        raise EmptyLatticeError("cannot decode an empty lattice")
    max_steps = cfg.max_steps if cfg.max_steps is not None else max(1, 3 * lattice.depth)

    beam = [Hypothesis((), 0.0, lattice.start, scorer.start())]
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
            arcs, final_logprob = lattice.successors(hyp.lattice_state)
            state_tokens = [s.token for s in arcs] if cfg.local_softmax else None
            for succ in arcs:
                step = joint_step_logprob(succ, pred, cfg, state_tokens)
                candidates.append(Hypothesis(
                    hyp.prefix + (succ.token,),
                    hyp.score + step,
                    succ.next_state,
                    scorer.consume(hyp.scorer_state, succ.token),
                ))
            if final_logprob != NEG_INF:
                done = Hypothesis(hyp.prefix,
                                  hyp.score + _end_score(final_logprob, pred, cfg),
                                  hyp.lattice_state, hyp.scorer_state, True)
                candidates.append(done)
                if best_finished is None or _order_key(done) < _order_key(best_finished):
                    best_finished = done
        candidates.sort(key=_order_key)
        beam = candidates[:cfg.beam]
    return DecodeResult(beam[0], beam, expansions, predict_calls)
