"""Weighted acceptor container and its text serialization.

Lattice text format, one record per line, UTF-8, '#' starts a comment:

    src dst token [weight]     arc; weight defaults to 0.0
    state [weight]             final state; weight defaults to 0.0

The source state of the first record is the initial state. States are
non-negative integers and are stored densely (missing ids become isolated
states). Token strings carry no whitespace; they are resolved through a
symbol table whose entry 0 is always the epsilon symbol ``<eps>``.

Symbol table format: one ``token id`` pair per line, same comment rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import semiring
from .errors import LatticeFormatError, UnknownSymbolError

EPS = 0
EPS_SYM = "<eps>"


class SymbolTable:
    """Bijection between token strings and dense integer ids.

    A closed table refuses new symbols, which turns typos in lattice files
    into parse errors instead of silently growing the vocabulary.
    """

    def __init__(self, closed: bool = False):
        self._by_sym: dict[str, int] = {EPS_SYM: EPS}
        self._by_id: dict[int, str] = {EPS: EPS_SYM}
        self.closed = closed

    def __len__(self) -> int:
        return len(self._by_sym)

    def __contains__(self, sym: str) -> bool:
        return sym in self._by_sym

    def add(self, sym: str) -> int:
        if sym in self._by_sym:
            return self._by_sym[sym]
        if self.closed:
            raise UnknownSymbolError(f"unknown symbol {sym!r} in closed table")
        new_id = max(self._by_id) + 1
        self._by_sym[sym] = new_id
        self._by_id[new_id] = sym
        return new_id

    def id_of(self, sym: str) -> int:
        try:
            return self._by_sym[sym]
        except KeyError:
            raise UnknownSymbolError(f"unknown symbol {sym!r}") from None

    def sym_of(self, ident: int) -> str:
        try:
            return self._by_id[ident]
        except KeyError:
            raise UnknownSymbolError(f"unknown symbol id {ident}") from None

    def ids(self):
        """All non-epsilon ids, ascending."""
        return sorted(i for i in self._by_id if i != EPS)

    def close(self) -> None:
        self.closed = True

    @classmethod
    def from_tokens(cls, tokens) -> "SymbolTable":
        table = cls()
        for tok in tokens:
            table.add(tok)
        return table


def parse_symbols(text: str) -> SymbolTable:
    """Parse a symbol table file. The result is closed."""
    by_sym: dict[str, int] = {}
    by_id: dict[int, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise LatticeFormatError("expected 'token id'", line=lineno)
        sym, id_text = fields
        try:
            ident = int(id_text)
        except ValueError:
            raise LatticeFormatError(f"bad symbol id {id_text!r}", line=lineno) from None
        if ident < 0:
            raise LatticeFormatError(f"negative symbol id {ident}", line=lineno)
        if sym in by_sym or ident in by_id:
            raise LatticeFormatError(f"duplicate symbol entry {sym!r}/{ident}", line=lineno)
        by_sym[sym] = ident
        by_id[ident] = sym
    if by_sym.get(EPS_SYM) != EPS:
        raise LatticeFormatError(f"symbol table must map {EPS_SYM!r} to {EPS}")
    table = SymbolTable()
    table._by_sym = by_sym
    table._by_id = by_id
    table.closed = True
    return table


def format_symbols(table: SymbolTable) -> str:
    lines = [f"{table.sym_of(i)} {i}" for i in sorted(table._by_id)]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, slots=True)
class Arc:
    label: int
    weight: float
    dst: int


class Wfsa:
    """Acceptor over a tropical or log cost semiring.

    Built by mutation (add_arc / set_final), treated as read-only by every
    algorithm in latbeam.ops, which all return fresh automata.
    """

    __slots__ = ("semiring", "start", "arcs", "finals")

    def __init__(self, semiring_tag: str = semiring.TROPICAL):
        if semiring_tag not in (semiring.TROPICAL, semiring.LOG):
            raise ValueError(f"unknown semiring {semiring_tag!r}")
        self.semiring = semiring_tag
        self.start = 0
        self.arcs: list[list[Arc]] = []
        self.finals: dict[int, float] = {}

    @property
    def num_states(self) -> int:
        return len(self.arcs)

    @property
    def num_arcs(self) -> int:
        return sum(len(a) for a in self.arcs)

    def ensure_state(self, state: int) -> int:
        while len(self.arcs) <= state:
            self.arcs.append([])
        return state

    def add_state(self) -> int:
        self.arcs.append([])
        return len(self.arcs) - 1

    def add_arc(self, src: int, label: int, weight: float, dst: int) -> None:
        self.ensure_state(max(src, dst))
        self.arcs[src].append(Arc(label, weight, dst))

    def set_final(self, state: int, weight: float = 0.0) -> None:
        self.ensure_state(state)
        self.finals[state] = weight

    def final_weight(self, state: int) -> float:
        return self.finals.get(state, semiring.INF)

    def arcs_from(self, state: int) -> list[Arc]:
        return self.arcs[state]

    def iter_arcs(self):
        for src, arcs in enumerate(self.arcs):
            for arc in arcs:
                yield src, arc

    def sort_arcs(self) -> None:
        for arcs in self.arcs:
            arcs.sort(key=lambda a: (a.label, a.dst, a.weight))

    def has_epsilon(self) -> bool:
        return any(arc.label == EPS for _, arc in self.iter_arcs())

    def is_deterministic(self) -> bool:
        """No epsilon arcs and at most one arc per label out of each state."""
        for arcs in self.arcs:
            seen = set()
            for arc in arcs:
                if arc.label == EPS or arc.label in seen:
                    return False
                seen.add(arc.label)
        return True

    def copy(self) -> "Wfsa":
        out = Wfsa(self.semiring)
        out.start = self.start
        out.arcs = [list(arcs) for arcs in self.arcs]
        out.finals = dict(self.finals)
        return out

    def retagged(self, semiring_tag: str) -> "Wfsa":
        out = self.copy()
        if semiring_tag not in (semiring.TROPICAL, semiring.LOG):
            raise ValueError(f"unknown semiring {semiring_tag!r}")
        out.semiring = semiring_tag
        return out


def _parse_weight(text: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise LatticeFormatError(f"bad weight {text!r}", line=lineno) from None
    if math.isnan(value) or value == -semiring.INF:
        raise LatticeFormatError(f"weight {text!r} out of range", line=lineno)
    return value


def _parse_state(text: str, lineno: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise LatticeFormatError(f"bad state id {text!r}", line=lineno) from None
    if value < 0:
        raise LatticeFormatError(f"negative state id {value}", line=lineno)
    return value


def parse_wfsa(text: str, symbols: SymbolTable,
               semiring_tag: str = semiring.TROPICAL,
               allow_empty: bool = False) -> Wfsa:
    """Parse lattice text. See the module docstring for the format.

    Raises LatticeFormatError with a line number on malformed records, and
    UnknownSymbolError when the symbol table is closed and a token is new.
    A lattice with no final state is rejected unless allow_empty is set.
    Repeated final lines for one state keep the last weight.
    """
    w = Wfsa(semiring_tag)
    saw_record = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) in (1, 2):
            state = _parse_state(fields[0], lineno)
            weight = _parse_weight(fields[1], lineno) if len(fields) == 2 else 0.0
            w.ensure_state(state)
            w.finals[state] = weight
        elif len(fields) in (3, 4):
            src = _parse_state(fields[0], lineno)
            dst = _parse_state(fields[1], lineno)
            try:
                label = symbols.id_of(fields[2]) if symbols.closed else symbols.add(fields[2])
            except UnknownSymbolError:
                raise UnknownSymbolError(
                    f"unknown symbol {fields[2]!r}", line=lineno) from None
            weight = _parse_weight(fields[3], lineno) if len(fields) == 4 else 0.0
            w.add_arc(src, label, weight, dst)
        else:
            raise LatticeFormatError("expected 1, 2, 3 or 4 fields", line=lineno)
        if not saw_record:
            w.start = _parse_state(fields[0], lineno)
            saw_record = True
    if not saw_record:
        raise LatticeFormatError("no records in lattice text")
    if not w.finals and not allow_empty:
        raise LatticeFormatError("no final state")
    return w


def _format_weight(value: float) -> str:
    # 12 significant digits: enough to survive a round trip at 1e-12 while
    # staying a fixed point of parse-then-serialize.
    return f"{value:.12g}"


def serialize_wfsa(w: Wfsa, symbols: SymbolTable) -> str:
    """Render a lattice in the text format, initial state first.

    Arc blocks come out grouped by source state with the initial state's
    block first; final lines follow in state order. Serializing the same
    automaton twice yields identical bytes.
    """
    lines: list[str] = []

    def arc_block(state: int):
        for arc in w.arcs_from(state):
            sym = symbols.sym_of(arc.label)
            lines.append(f"{state} {arc.dst} {sym} {_format_weight(arc.weight)}")

    if w.num_states:
        if not w.arcs_from(w.start) and w.start in w.finals:
            # keep the initial state on the first line even without arcs
            lines.append(f"{w.start} {_format_weight(w.finals[w.start])}")
            for state in range(w.num_states):
                arc_block(state)
            for state in sorted(w.finals):
                if state != w.start:
                    lines.append(f"{state} {_format_weight(w.finals[state])}")
            return "\n".join(lines) + "\n" if lines else ""
        arc_block(w.start)
        for state in range(w.num_states):
            if state != w.start:
                arc_block(state)
    for state in sorted(w.finals):
        lines.append(f"{state} {_format_weight(w.finals[state])}")
    return "\n".join(lines) + "\n" if lines else ""


def _accessible(w: Wfsa) -> set[int]:
    if not w.num_states:
        return set()
    seen = {w.start}
    stack = [w.start]
    while stack:
        state = stack.pop()
        for arc in w.arcs_from(state):
            if arc.dst not in seen:
                seen.add(arc.dst)
                stack.append(arc.dst)
    return seen


def _coaccessible(w: Wfsa) -> set[int]:
    rev: list[list[int]] = [[] for _ in range(w.num_states)]
    for src, arc in w.iter_arcs():
        rev[arc.dst].append(src)
    seen = set(w.finals)
    stack = list(w.finals)
    while stack:
        state = stack.pop()
        for src in rev[state]:
            if src not in seen:
                seen.add(src)
                stack.append(src)
    return seen


def topological_order(w: Wfsa) -> list[int] | None:
    """States in topological order, or None when the graph has a cycle."""
    n = w.num_states
    indegree = [0] * n
    for _, arc in w.iter_arcs():
        indegree[arc.dst] += 1
    ready = [q for q in range(n) if indegree[q] == 0]
    order: list[int] = []
    while ready:
        state = ready.pop()
        order.append(state)
        for arc in w.arcs_from(state):
            indegree[arc.dst] -= 1
            if indegree[arc.dst] == 0:
                ready.append(arc.dst)
    if len(order) != n:
        return None
    return order


@dataclass(slots=True)
class ValidationReport:
    n_states: int
    n_arcs: int
    n_finals: int
    n_accessible: int
    n_coaccessible: int
    is_acyclic: bool
    has_epsilon: bool
    is_deterministic: bool
    is_empty: bool
    arcs_per_state: float


def validate(w: Wfsa) -> ValidationReport:
    """Structural summary: sizes, acyclicity, accessibility, determinism.

    is_empty means no final state is reachable from the initial state,
    i.e. the automaton accepts nothing.
    """
    accessible = _accessible(w)
    coaccessible = _coaccessible(w)
    n_states = w.num_states
    n_arcs = w.num_arcs
    return ValidationReport(
        n_states=n_states,
        n_arcs=n_arcs,
        n_finals=len(w.finals),
        n_accessible=len(accessible),
        n_coaccessible=len(coaccessible),
        is_acyclic=topological_order(w) is not None,
        has_epsilon=w.has_epsilon(),
        is_deterministic=w.is_deterministic(),
        is_empty=not any(q in accessible for q in w.finals),
        arcs_per_state=(n_arcs / n_states) if n_states else 0.0,
    )
