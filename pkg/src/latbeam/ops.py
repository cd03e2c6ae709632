"""Algorithms over acyclic weighted acceptors.

Everything here treats its input as read-only and returns a new Wfsa.
The operations compose into the standard preprocessing pipeline

    rm_epsilon -> determinize -> minimize -> push_log

which turns an unnormalized lattice into a deterministic acceptor whose
arc weights are negative conditional log-probabilities. The enumeration
helpers at the bottom are deliberately naive; they exist as oracles for
the efficient code paths and for desk-scale analysis.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass

from . import semiring
from .errors import (
    CyclicLatticeError,
    EpsilonArcError,
    EpsilonCycleError,
    NotCoaccessibleError,
    NotDeterministicError,
    PathCountError,
    SemiringError,
)
from .semiring import INF
from .wfsa import EPS, Wfsa, _accessible, _coaccessible, topological_order


def _require_acyclic(w: Wfsa, op: str) -> list[int]:
    order = topological_order(w)
    if order is None:
        raise CyclicLatticeError(f"{op} requires an acyclic lattice")
    return order


def connect(w: Wfsa) -> Wfsa:
    """Drop states that are not both accessible and coaccessible.

    The initial state survives even when the language is empty, so the
    result is always a structurally valid automaton.
    """
    keep = _accessible(w) & _coaccessible(w)
    keep.add(w.start)
    old_order = sorted(keep)
    renum = {old: new for new, old in enumerate(old_order)}
    out = Wfsa(w.semiring)
    out.ensure_state(len(old_order) - 1)
    out.start = renum[w.start]
    for old in old_order:
        for arc in w.arcs_from(old):
            if arc.dst in keep:
                out.add_arc(renum[old], arc.label, arc.weight, renum[arc.dst])
    for old, weight in w.finals.items():
        if old in keep:
            out.finals[renum[old]] = weight
    return out


def rm_epsilon(w: Wfsa) -> Wfsa:
    """Remove epsilon arcs, preserving the weighted language exactly.

    Costs over parallel epsilon routes combine with the automaton's own
    addition (min for tropical, log_add for log), as do any parallel
    same-label arcs the rewrite creates. Epsilon cycles are rejected.
    The result is trimmed.
    """
    plus = semiring.plus_for(w.semiring)
    eps_only = Wfsa(w.semiring)
    eps_only.ensure_state(max(w.num_states - 1, 0))
    for src, arc in w.iter_arcs():
        if arc.label == EPS:
            eps_only.add_arc(src, arc.label, arc.weight, arc.dst)
    eps_order = topological_order(eps_only)
    if eps_order is None:
        raise EpsilonCycleError("epsilon cycle detected")

    # closure[q]: total epsilon cost from q to every state it can reach
    # through epsilon arcs alone, excluding q itself.
    closure: list[dict[int, float]] = [dict() for _ in range(w.num_states)]
    for q in reversed(eps_order):
        acc: dict[int, float] = {}
        for arc in eps_only.arcs_from(q):
            step = {arc.dst: arc.weight}
            for far, cost in closure[arc.dst].items():
                step[far] = semiring.times(arc.weight, cost)
            for state, cost in step.items():
                acc[state] = plus(acc.get(state, INF), cost)
        closure[q] = acc

    out = Wfsa(w.semiring)
    out.ensure_state(max(w.num_states - 1, 0))
    out.start = w.start
    for src in range(w.num_states):
        merged: dict[tuple[int, int], float] = {}
        reach = [(src, semiring.ONE)] + sorted(closure[src].items())
        for via, cost in reach:
            for arc in w.arcs_from(via):
                if arc.label == EPS:
                    continue
                key = (arc.label, arc.dst)
                merged[key] = plus(merged.get(key, INF),
                                   semiring.times(cost, arc.weight))
        for (label, dst), weight in sorted(merged.items()):
            out.add_arc(src, label, weight, dst)
        final = w.final_weight(src)
        for via, cost in sorted(closure[src].items()):
            f = w.final_weight(via)
            if f != INF:
                final = plus(final, semiring.times(cost, f))
        if final != INF:
            out.finals[src] = final
    return connect(out)


def determinize(w: Wfsa) -> Wfsa:
    """Weighted subset construction for acyclic epsilon-free acceptors.

    Subsets carry residual weights: an output arc takes the add-combined
    cost of all matching input arcs and each surviving input state keeps
    the leftover relative to that, so path weights are preserved while
    every string ends up with exactly one path. A tropical input keeps
    only the best path per string; a log-tagged input pools the mass of
    duplicate paths. Output arcs are sorted by label.
    """
    if w.has_epsilon():
        raise EpsilonArcError("determinize requires an epsilon-free lattice")
    _require_acyclic(w, "determinize")
    plus = semiring.plus_for(w.semiring)

    out = Wfsa(w.semiring)
    out.add_state()
    out.start = 0
    start_key = ((w.start, 0.0),)
    index: dict[tuple, int] = {start_key: 0}
    queue = deque([start_key])
    while queue:
        key = queue.popleft()
        sid = index[key]

        final = INF
        for state, residual in key:
            f = w.final_weight(state)
            if f != INF:
                final = plus(final, semiring.times(residual, f))
        if final != INF:
            out.finals[sid] = final

        by_label: dict[int, dict[int, float]] = {}
        for state, residual in key:
            for arc in w.arcs_from(state):
                dests = by_label.setdefault(arc.label, {})
                cost = semiring.times(residual, arc.weight)
                dests[arc.dst] = plus(dests.get(arc.dst, INF), cost)
        for label in sorted(by_label):
            dests = by_label[label]
            ordered = sorted(dests.items())
            total = INF
            for _, cost in ordered:
                total = plus(total, cost)
            new_key = tuple((dst, cost - total) for dst, cost in ordered)
            nid = index.get(new_key)
            if nid is None:
                nid = out.add_state()
                index[new_key] = nid
                queue.append(new_key)
            out.add_arc(sid, label, total, nid)
    return out


def minimize(w: Wfsa) -> Wfsa:
    """Merge equivalent states of a deterministic acyclic acceptor.

    Weights are first pushed toward the initial state (canonical residuals,
    computed with the automaton's own addition), then states are merged
    bottom-up whenever they agree on final weight and on their full
    (label, weight, successor-class) arc signature. The leftover cost at
    the initial state is folded back onto its outgoing arcs and final
    weight so the weighted language is untouched.
    """
    if not w.is_deterministic():
        raise NotDeterministicError("minimize requires a deterministic lattice")
    _require_acyclic(w, "minimize")
    w = connect(w)
    if not w.finals:
        return w
    plus = semiring.plus_for(w.semiring)
    order = topological_order(w)
    assert order is not None

    potential = [INF] * w.num_states
    for q in reversed(order):
        acc = w.final_weight(q)
        for arc in w.arcs_from(q):
            acc = plus(acc, semiring.times(arc.weight, potential[arc.dst]))
        potential[q] = acc

    pushed = Wfsa(w.semiring)
    pushed.ensure_state(w.num_states - 1)
    pushed.start = w.start
    fold = potential[w.start]
    for src, arc in w.iter_arcs():
        weight = arc.weight + potential[arc.dst] - potential[src]
        if src == w.start:
            weight += fold
        pushed.add_arc(src, arc.label, weight, arc.dst)
    for q, f in w.finals.items():
        weight = f - potential[q]
        if q == w.start:
            weight += fold
        pushed.finals[q] = weight
    pushed.sort_arcs()

    klass: dict[int, int] = {}
    by_signature: dict[tuple, int] = {}
    for q in reversed(order):
        signature = (
            pushed.final_weight(q),
            tuple((a.label, a.weight, klass[a.dst]) for a in pushed.arcs_from(q)),
        )
        found = by_signature.get(signature)
        if found is None:
            found = len(by_signature)
            by_signature[signature] = found
        klass[q] = found

    out = Wfsa(w.semiring)
    out.add_state()
    out.start = 0
    renum = {klass[pushed.start]: 0}
    queue = deque([pushed.start])
    seen_class = {klass[pushed.start]}
    while queue:
        rep = queue.popleft()
        sid = renum[klass[rep]]
        f = pushed.final_weight(rep)
        if f != INF:
            out.finals[sid] = f
        for arc in pushed.arcs_from(rep):
            c = klass[arc.dst]
            nid = renum.get(c)
            if nid is None:
                nid = out.add_state()
                renum[c] = nid
            if c not in seen_class:
                seen_class.add(c)
                queue.append(arc.dst)
            out.add_arc(sid, arc.label, arc.weight, nid)
    return out


def push_log(w: Wfsa) -> tuple[Wfsa, float]:
    """Normalize an acyclic acceptor in the log semiring.

    Computes per-state potentials (the log-total mass of all suffixes,
    final weights included), moves them onto earlier arcs, and strips the
    grand total off the initial state. Returns the rewritten automaton,
    tagged log, plus that total; afterwards the costs out of each state
    are a proper conditional distribution and path costs sum to one.

    Every state must reach a final state, otherwise its potential is
    infinite and the rewrite is undefined.
    """
    order = _require_acyclic(w, "push_log")
    potential = [INF] * w.num_states
    for q in reversed(order):
        acc = w.final_weight(q)
        for arc in w.arcs_from(q):
            acc = semiring.log_add(acc, semiring.times(arc.weight, potential[arc.dst]))
        potential[q] = acc
    for q in range(w.num_states):
        if potential[q] == INF:
            raise NotCoaccessibleError(f"state {q} cannot reach a final state")

    out = Wfsa(semiring.LOG)
    out.ensure_state(max(w.num_states - 1, 0))
    out.start = w.start
    for src, arc in w.iter_arcs():
        out.add_arc(src, arc.label,
                    arc.weight + potential[arc.dst] - potential[src], arc.dst)
    for q, f in w.finals.items():
        out.finals[q] = f - potential[q]
    return out, potential[w.start] if w.num_states else 0.0


def check_stochastic(w: Wfsa, tol: float = 1e-6) -> bool:
    """True when every accessible state's outgoing mass is 1 within tol.

    Mass is the log_add of all outgoing arc costs together with the
    state's final weight; stochastic means that total is 0 (= log 1).
    """
    for q in sorted(_accessible(w)):
        total = w.final_weight(q)
        for arc in w.arcs_from(q):
            total = semiring.log_add(total, arc.weight)
        if not abs(total) <= tol:
            return False
    return True


def count_paths(w: Wfsa) -> int:
    """Number of accepting paths (cycle-free input only)."""
    order = _require_acyclic(w, "count_paths")
    counts = [0] * w.num_states
    for q in reversed(order):
        total = 1 if q in w.finals else 0
        for arc in w.arcs_from(q):
            if arc.weight != INF:
                total += counts[arc.dst]
        counts[q] = total
    return counts[w.start] if w.num_states else 0


def enumerate_paths(w: Wfsa, cap: int = 10 ** 6) -> list[tuple[tuple[int, ...], float]]:
    """Every accepting path as (label sequence, total cost), DFS order.

    The cost of a path is the plain sum of its arc weights plus the final
    weight; add-aggregation per string is the caller's business (see
    aggregate_strings). Arcs with infinite weight carry no paths. Raises
    PathCountError when the lattice holds more than cap paths.
    """
    total = count_paths(w)
    if total > cap:
        raise PathCountError(f"lattice has {total} paths, cap is {cap}")
    if not w.num_states:
        return []
    paths: list[tuple[tuple[int, ...], float]] = []
    tokens: list[int] = []
    f = w.final_weight(w.start)
    if f != INF:
        paths.append(((), f))
    frames: list[list] = [[w.start, 0, 0.0]]
    while frames:
        frame = frames[-1]
        state, i, acc = frame
        arcs = w.arcs_from(state)
        if i < len(arcs):
            frame[1] += 1
            arc = arcs[i]
            if arc.weight == INF:
                continue
            tokens.append(arc.label)
            cost = acc + arc.weight
            f = w.final_weight(arc.dst)
            if f != INF:
                paths.append((tuple(tokens), cost + f))
            frames.append([arc.dst, 0, cost])
        else:
            frames.pop()
            if tokens:
                tokens.pop()
    return paths


def aggregate_strings(paths, semiring_tag: str) -> dict[tuple[int, ...], float]:
    """Fold a path list into per-string costs with the given addition.

    Epsilon labels are projected out first: the string a path accepts is
    its sequence of real tokens, so paths differing only in epsilons are
    the same string and their costs combine.
    """
    plus = semiring.plus_for(semiring_tag)
    agg: dict[tuple[int, ...], float] = {}
    for tokens, cost in paths:
        string = tuple(t for t in tokens if t != EPS)
        agg[string] = plus(agg.get(string, INF), cost)
    return agg


def n_shortest_strings(w: Wfsa, n: int) -> list[tuple[tuple[int, ...], float]]:
    """The n cheapest accepted strings of a deterministic acyclic acceptor.

    Determinism makes strings and paths interchangeable, so this is a
    best-first walk guided by exact suffix potentials; costs are treated
    additively whatever the semiring tag. Ties break toward the
    lexicographically smaller token sequence. Returns fewer than n pairs
    when the language is smaller.
    """
    import heapq

    if not w.is_deterministic():
        raise NotDeterministicError("n_shortest_strings requires a deterministic lattice")
    order = _require_acyclic(w, "n_shortest_strings")
    if not w.num_states or n <= 0:
        return []
    potential = [INF] * w.num_states
    for q in reversed(order):
        acc = w.final_weight(q)
        for arc in w.arcs_from(q):
            acc = semiring.trop_add(acc, arc.weight + potential[arc.dst])
        potential[q] = acc
    if potential[w.start] == INF:
        return []

    results: list[tuple[tuple[int, ...], float]] = []
    # heap entries: (bound, tokens, done, state, accumulated cost)
    heap: list[tuple] = [(potential[w.start], (), 0, w.start, 0.0)]
    while heap and len(results) < n:
        bound, tokens, done, state, acc = heapq.heappop(heap)
        if done:
            results.append((tokens, acc))
            continue
        f = w.final_weight(state)
        if f != INF:
            heapq.heappush(heap, (acc + f, tokens, 1, -1, acc + f))
        for arc in w.arcs_from(state):
            if potential[arc.dst] == INF or arc.weight == INF:
                continue
            cost = acc + arc.weight
            heapq.heappush(heap, (cost + potential[arc.dst],
                                  tokens + (arc.label,), 0, arc.dst, cost))
    return results


def equivalent_acyclic(a: Wfsa, b: Wfsa, tol: float = 1e-9,
                       cap: int = 10 ** 6) -> bool:
    """Compare two acyclic acceptors string by string.

    Both languages are enumerated exhaustively, aggregated with the shared
    semiring's addition, and compared over the union of their strings at
    absolute tolerance tol.
    """
    if a.semiring != b.semiring:
        raise SemiringError("cannot compare automata over different semirings")
    agg_a = aggregate_strings(enumerate_paths(a, cap), a.semiring)
    agg_b = aggregate_strings(enumerate_paths(b, cap), b.semiring)
    for key in agg_a.keys() | agg_b.keys():
        ca = agg_a.get(key, INF)
        cb = agg_b.get(key, INF)
        if ca == INF or cb == INF:
            if ca != cb:
                return False
            continue
        if not abs(ca - cb) <= tol:
            return False
    return True


@dataclass(slots=True)
class StageTimings:
    """Wall-clock seconds for the three preprocessing stages."""

    determinization: float
    minimization: float
    pushing: float

    def rows(self):
        return [
            ("determinization", self.determinization),
            ("minimization", self.minimization),
            ("pushing", self.pushing),
        ]

    def __add__(self, other: "StageTimings") -> "StageTimings":
        return StageTimings(
            self.determinization + other.determinization,
            self.minimization + other.minimization,
            self.pushing + other.pushing,
        )


def pipeline_timed(w: Wfsa) -> tuple[Wfsa, float, StageTimings]:
    """rm_epsilon + determinize + minimize + push_log with per-stage timing.

    Epsilon removal is billed to the determinization stage. Returns the
    pushed automaton, the stripped total weight, and the timings.
    """
    t0 = time.perf_counter()
    step = determinize(rm_epsilon(w))
    t1 = time.perf_counter()
    step = minimize(step)
    t2 = time.perf_counter()
    pushed, total = push_log(step)
    t3 = time.perf_counter()
    return pushed, total, StageTimings(t1 - t0, t2 - t1, t3 - t2)
