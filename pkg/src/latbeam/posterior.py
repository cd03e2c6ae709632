"""Predictive posterior view of a prepared lattice.

prepare() runs the full preprocessing pipeline and wraps the result in a
PosteriorLattice: a deterministic acyclic acceptor, stochastic in the log
semiring, whose arc costs are negative conditional log-probabilities and
whose final weights hold the explicit stop mass of each state. Walking a
token prefix through it yields the lattice's left-to-right conditionals.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import NamedTuple

from . import ops, semiring
from .errors import EmptyLatticeError, NotDeterministicError, NotStochasticError, SemiringError
from .semiring import INF
from .wfsa import Wfsa, topological_order

log = logging.getLogger(__name__)

NEG_INF = -math.inf


class _Reject:
    """Marker for prefixes the lattice does not accept.

    Deliberately distinct from -inf: a rejected prefix is outside the
    model, not merely improbable.
    """

    __slots__ = ()

    def __repr__(self) -> str:
        return "REJECT"


REJECT = _Reject()


@dataclass(frozen=True, slots=True)
class Successor:
    """One outgoing arc seen as a predictive event."""

    token: int
    cond_logprob: float
    next_state: int
    next_final_logprob: float


class SuccessorSet(NamedTuple):
    arcs: tuple[Successor, ...]
    final_logprob: float


class PosteriorLattice:
    """Deterministic stochastic acceptor with per-state token lookup.

    Construction verifies the contract (log semiring, acyclic,
    deterministic, stochastic within tol) and indexes each state's arcs
    by token for binary search. raw_total records the weight stripped off
    the initial state during pushing, i.e. the negative log of the raw
    lattice's total mass.
    """

    def __init__(self, inner: Wfsa, raw_total: float = 0.0, tol: float = 1e-6):
        if inner.semiring != semiring.LOG:
            raise SemiringError("posterior lattice must be tagged log")
        if not inner.num_states:
            raise EmptyLatticeError("posterior lattice has no states")
        order = topological_order(inner)
        if order is None:
            from .errors import CyclicLatticeError

            raise CyclicLatticeError("posterior lattice must be acyclic")
        if not inner.is_deterministic():
            raise NotDeterministicError("posterior lattice must be deterministic")
        if not ops.check_stochastic(inner, tol):
            raise NotStochasticError(
                f"outgoing mass differs from 1 by more than {tol}")
        self.inner = inner
        self.raw_total = raw_total

        self._final_logprob = [NEG_INF] * inner.num_states
        for q, f in inner.finals.items():
            self._final_logprob[q] = -f
        self._labels: list[list[int]] = []
        self._successors: list[tuple[Successor, ...]] = []
        for q in range(inner.num_states):
            arcs = sorted(inner.arcs_from(q), key=lambda a: a.label)
            self._labels.append([a.label for a in arcs])
            self._successors.append(tuple(
                Successor(a.label, -a.weight, a.dst, self._final_logprob[a.dst])
                for a in arcs))

        depth = [0] * inner.num_states
        for q in reversed(order):
            depth[q] = max((1 + depth[a.dst] for a in inner.arcs_from(q)), default=0)
        self.depth = depth[inner.start]

    @property
    def start(self) -> int:
        return self.inner.start

    @property
    def num_states(self) -> int:
        return self.inner.num_states

    @property
    def vocabulary(self) -> set[int]:
        return {label for labels in self._labels for label in labels}

    def successors(self, state: int) -> SuccessorSet:
        """All outgoing predictive events plus the state's own stop mass."""
        return SuccessorSet(self._successors[state], self._final_logprob[state])

    def arc_for(self, state: int, token: int) -> Successor | None:
        labels = self._labels[state]
        i = bisect_left(labels, token)
        if i < len(labels) and labels[i] == token:
            return self._successors[state][i]
        return None

    def final_logprob(self, state: int) -> float:
        return self._final_logprob[state]

    def walk(self, prefix) -> int | None:
        """Follow a token prefix from the start; None when it leaves the lattice."""
        state = self.start
        for token in prefix:
            succ = self.arc_for(state, token)
            if succ is None:
                return None
            state = succ.next_state
        return state

    def prefix_logprob(self, prefix):
        """Total conditional log-probability of a prefix, or REJECT.

        The stop mass of the state reached is not included; add
        final_logprob(walk(prefix)) for the probability of the complete
        string.
        """
        state = self.start
        total = 0.0
        for token in prefix:
            succ = self.arc_for(state, token)
            if succ is None:
                return REJECT
            total += succ.cond_logprob
            state = succ.next_state
        return total

    def accepted_logprob(self, tokens):
        """Log-probability of a complete accepted string, or REJECT.

        REJECT covers both leaving the lattice and ending at a state with
        no stop mass.
        """
        state = self.walk(tokens)
        if state is None or self._final_logprob[state] == NEG_INF:
            return REJECT
        lp = self.prefix_logprob(tokens)
        assert lp is not REJECT
        return lp + self._final_logprob[state]


def prepare(raw: Wfsa, tol: float = 1e-6) -> PosteriorLattice:
    """Full preprocessing pipeline: raw lattice in, posterior lattice out.

    The input costs are read as unnormalized log masses, so epsilon
    removal and determinization pool the probability of duplicate paths
    rather than keeping only the best one; pushing then normalizes the
    whole automaton. The stripped total (the negative log of the raw
    lattice's mass) is logged and kept on the result as raw_total.
    """
    lattice, total = _prepare_inner(raw)
    log.info("pushed lattice: discarded total weight %.6f", total)
    return PosteriorLattice(lattice, raw_total=total, tol=tol)


def prepare_timed(raw: Wfsa, tol: float = 1e-6) -> tuple[PosteriorLattice, ops.StageTimings]:
    """prepare() variant reporting per-stage wall-clock seconds."""
    work = _as_mass(raw)
    pushed, total, timings = ops.pipeline_timed(work)
    log.info("pushed lattice: discarded total weight %.6f", total)
    return PosteriorLattice(pushed, raw_total=total, tol=tol), timings


def _as_mass(raw: Wfsa) -> Wfsa:
    if not raw.num_states:
        raise EmptyLatticeError("cannot prepare an empty lattice")
    work = raw.retagged(semiring.LOG)
    if not work.finals:
        raise EmptyLatticeError("lattice accepts nothing")
    return work


def _prepare_inner(raw: Wfsa) -> tuple[Wfsa, float]:
    work = _as_mass(raw)
    work = ops.rm_epsilon(work)
    if not work.finals:
        raise EmptyLatticeError("lattice accepts nothing")
    work = ops.determinize(work)
    work = ops.minimize(work)
    return ops.push_log(work)
