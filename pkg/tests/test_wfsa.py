"""Symbol tables, the lattice text format, and structural validation."""

import math
import random

import pytest

from latbeam import semiring
from latbeam.errors import LatticeFormatError, UnknownSymbolError
from latbeam.synth import random_acyclic_wfsa
from latbeam.wfsa import (
    EPS,
    EPS_SYM,
    SymbolTable,
    Wfsa,
    format_symbols,
    parse_symbols,
    parse_wfsa,
    serialize_wfsa,
    topological_order,
    validate,
)

FOUR_STATE = "0 1 a 0.0\n1 2 b 0.7\n1 3 c 1.6\n2\n3\n"


@pytest.fixture
def abc():
    table = SymbolTable()
    for sym in ("a", "b", "c"):
        table.add(sym)
    return table


class TestSymbolTable:
    def test_eps_reserved(self):
        table = SymbolTable()
        assert table.id_of(EPS_SYM) == EPS
        assert table.sym_of(EPS) == EPS_SYM

    def test_add_and_lookup(self, abc):
        assert abc.id_of("a") == 1
        assert abc.id_of("c") == 3
        assert abc.sym_of(2) == "b"
        assert "b" in abc
        assert "zzz" not in abc

    def test_add_is_idempotent(self, abc):
        assert abc.add("a") == 1
        assert len(abc) == 4

    def test_closed_table_rejects_new_symbols(self, abc):
        abc.close()
        with pytest.raises(UnknownSymbolError, match="zzz"):
            abc.id_of("zzz")

    def test_parse_format_round_trip(self, abc):
        text = format_symbols(abc)
        back = parse_symbols(text)
        assert back.closed
        for sym in ("a", "b", "c", EPS_SYM):
            assert back.id_of(sym) == abc.id_of(sym)

    def test_parse_requires_eps_zero(self):
        with pytest.raises(LatticeFormatError):
            parse_symbols("a 1\nb 2\n")

    def test_parse_rejects_duplicate_symbol(self):
        with pytest.raises(LatticeFormatError):
            parse_symbols("<eps> 0\na 1\na 2\n")

    def test_parse_rejects_duplicate_id(self):
        with pytest.raises(LatticeFormatError):
            parse_symbols("<eps> 0\na 1\nb 1\n")


class TestParseWfsa:
    def test_four_state_example(self, abc):
        w = parse_wfsa(FOUR_STATE, abc)
        assert w.num_states == 4
        assert w.num_arcs == 3
        assert w.start == 0
        assert w.finals == {2: 0.0, 3: 0.0}
        assert w.semiring == semiring.TROPICAL

    def test_first_record_sets_start(self, abc):
        w = parse_wfsa("3 1 a 0.5\n1 2 b 0.5\n2 0.0\n", abc)
        assert w.start == 3

    def test_final_line_without_weight_means_one(self, abc):
        w = parse_wfsa("0 1 a 1.0\n1\n", abc)
        assert w.final_weight(1) == 0.0

    def test_arc_without_weight_means_one(self, abc):
        w = parse_wfsa("0 1 a\n1 0.0\n", abc)
        assert w.arcs_from(0)[0].weight == 0.0

    def test_comments_and_blank_lines_skipped(self, abc):
        text = "# header\n\n0 1 a 0.5\n# middle\n1 0.25\n"
        w = parse_wfsa(text, abc)
        assert w.num_arcs == 1
        assert w.final_weight(1) == 0.25

    def test_error_carries_line_number(self, abc):
        with pytest.raises(LatticeFormatError, match="line 2"):
            parse_wfsa("0 1 a 0.5\n1 2 b 0.5 extra junk\n", abc)

    def test_unknown_symbol_rejected_when_closed(self, abc):
        abc.close()
        with pytest.raises(UnknownSymbolError, match="zzz"):
            parse_wfsa("0 1 zzz 0.5\n1\n", abc)

    def test_bad_weight_rejected(self, abc):
        for bad in ("nan", "-inf", "abc"):
            with pytest.raises(LatticeFormatError):
                parse_wfsa(f"0 1 a {bad}\n1\n", abc)

    def test_no_final_state_rejected(self, abc):
        with pytest.raises(LatticeFormatError, match="final"):
            parse_wfsa("0 1 a 0.5\n", abc)

    def test_empty_text_rejected(self, abc):
        with pytest.raises(LatticeFormatError):
            parse_wfsa("", abc)

    def test_negative_weights_allowed(self, abc):
        w = parse_wfsa("0 1 a -2.5\n1 -0.1\n", abc)
        assert w.arcs_from(0)[0].weight == -2.5
        assert w.final_weight(1) == -0.1


class TestSerializeWfsa:
    def test_round_trip_four_state(self, abc):
        w = parse_wfsa(FOUR_STATE, abc)
        back = parse_wfsa(serialize_wfsa(w, abc), abc)
        assert back.start == w.start
        assert back.finals == w.finals
        def arcset(x):
            return sorted((src, a.label, a.weight, a.dst)
                          for src, a in x.iter_arcs())
        assert arcset(back) == arcset(w)

    def test_serialization_is_fixed_point(self, abc):
        rng = random.Random(5)
        for _ in range(25):
            w = random_acyclic_wfsa(rng, n_labels=3, label_base=1)
            text = serialize_wfsa(w, abc)
            again = serialize_wfsa(parse_wfsa(text, abc), abc)
            assert text == again

    def test_start_final_only_lattice(self, abc):
        w = Wfsa()
        w.ensure_state(0)
        w.set_final(0, 0.5)
        back = parse_wfsa(serialize_wfsa(w, abc), abc)
        assert back.start == 0
        assert back.final_weight(0) == 0.5

    def test_weights_keep_12_significant_digits(self, abc):
        w = Wfsa()
        w.add_arc(0, 1, 0.123456789012345, 1)
        w.set_final(1, math.pi)
        back = parse_wfsa(serialize_wfsa(w, abc), abc)
        assert back.arcs_from(0)[0].weight == pytest.approx(0.123456789012345,
                                                            rel=1e-11)
        assert back.final_weight(1) == pytest.approx(math.pi, rel=1e-11)


class TestStructure:
    def test_topological_order_on_dag(self, abc):
        w = parse_wfsa(FOUR_STATE, abc)
        order = topological_order(w)
        pos = {q: i for i, q in enumerate(order)}
        for src, arc in w.iter_arcs():
            assert pos[src] < pos[arc.dst]

    def test_topological_order_none_on_cycle(self):
        w = Wfsa()
        w.add_arc(0, 1, 0.0, 1)
        w.add_arc(1, 1, 0.0, 0)
        w.set_final(1, 0.0)
        assert topological_order(w) is None

    def test_is_deterministic(self, abc):
        w = parse_wfsa(FOUR_STATE, abc)
        assert w.is_deterministic()
        w.add_arc(1, abc.id_of("b"), 0.1, 3)
        assert not w.is_deterministic()

    def test_has_epsilon(self, abc):
        w = parse_wfsa(FOUR_STATE, abc)
        assert not w.has_epsilon()
        w.add_arc(0, EPS, 0.0, 1)
        assert w.has_epsilon()

    def test_validate_four_state(self, abc):
        report = validate(parse_wfsa(FOUR_STATE, abc))
        assert report.is_acyclic
        assert report.n_accessible == 4
        assert report.n_coaccessible == 4
        assert report.is_deterministic
        assert not report.has_epsilon
        assert not report.is_empty
        assert report.arcs_per_state == pytest.approx(0.75)

    def test_validate_flags_dead_state(self, abc):
        w = parse_wfsa(FOUR_STATE, abc)
        w.add_arc(0, abc.id_of("c"), 1.0, w.add_state())
        report = validate(w)
        assert report.n_coaccessible == 4
        assert report.n_states == 5
