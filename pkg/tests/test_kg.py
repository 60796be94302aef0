import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multike.kg import AlignmentDataset, KnowledgeGraph, ParseError, extract_name, \
    load_alignment_split, load_dataset, normalize_literal, parse_attribute_triples, \
    parse_names, parse_relation_triples, save_dataset, serialize_attribute_triples, \
    serialize_relation_triples, split_pairs
from multike.synthetic import generate_synthetic_pair


class TestParsing:
    def test_relation_line(self):
        assert parse_relation_triples("e1\tr1\te2\n") == [("e1", "r1", "e2")]

    def test_duplicates_collapse(self):
        assert parse_relation_triples("e1\tr1\te2\ne1\tr1\te2\n") == [("e1", "r1", "e2")]

    def test_arity_error_reports_line(self):
        with pytest.raises(ParseError) as info:
            parse_relation_triples("e1\tr1\n")
        assert info.value.lineno == 1

    def test_attribute_line(self):
        facts = parse_attribute_triples("e1\tpopulation\t66 million\n")
        assert facts == [("e1", "population", "66 million")]

    def test_typed_literal_is_stripped(self):
        facts = parse_attribute_triples(
            'e1\tbirthDate\t"1952-08-04"^^<http://www.w3.org/2001/XMLSchema#date>\n')
        assert facts[0][2] == "1952-08-04"

    def test_multi_valued_attribute(self):
        facts = parse_attribute_triples("e1\ta\tx\ne1\ta\ty\n")
        assert len(facts) == 2

    def test_language_tag(self):
        assert normalize_literal('"Paris"@fr') == "Paris"

    def test_names_file(self):
        kg = KnowledgeGraph()
        parse_names("e1\tUnited Kingdom\n", kg)
        assert kg.name_of("e1") == "United Kingdom"

    def test_kg_registers_items(self):
        kg = KnowledgeGraph()
        parse_relation_triples("a\tr\tb\n", kg)
        parse_attribute_triples("a\tx\t1\n", kg)
        assert kg.entities == {"a", "b"} and kg.relations == {"r"} and kg.literals == {"1"}
        kg.validate()

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(*[st.text("abcxyz:/#_", min_size=1, max_size=6)] * 3),
                    max_size=12))
    def test_relation_round_trip(self, facts):
        parsed = parse_relation_triples(serialize_relation_triples(facts))
        assert parsed == list(dict.fromkeys(facts))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.text("abc", min_size=1, max_size=4),
                              st.text("xyz", min_size=1, max_size=4),
                              st.text("0123 abc", min_size=1, max_size=8).filter(str.strip)
                              .map(str.strip)), max_size=10))
    def test_attribute_round_trip(self, facts):
        parsed = parse_attribute_triples(serialize_attribute_triples(facts))
        assert parsed == list(dict.fromkeys(facts))


class TestNames:
    def test_after_last_slash(self):
        assert extract_name("http://dbpedia.org/resource/United_Kingdom") == "United Kingdom"

    def test_after_hash(self):
        assert extract_name("http://example.org/onto#birthPlace") == "birthPlace"

    def test_plain_string(self):
        assert extract_name("Paris") == "Paris"

    def test_label_wins(self):
        assert extract_name("http://x/Q1", {"http://x/Q1": "Kyoto"}) == "Kyoto"


PAIRS = [(f"a{i}", f"b{i}") for i in range(10)]


class TestSplit:
    def test_thirty_percent(self):
        seed, test = split_pairs(PAIRS, 0.3, 0)
        assert len(seed) == 3 and len(test) == 7
        assert sorted(seed + test) == sorted(PAIRS)

    def test_zero_ratio(self):
        seed, test = split_pairs(PAIRS, 0.0, 0)
        assert seed == [] and sorted(test) == sorted(PAIRS)

    def test_deterministic(self):
        assert split_pairs(PAIRS, 0.3, 5) == split_pairs(PAIRS, 0.3, 5)

    def test_unknown_entity(self):
        kg = KnowledgeGraph()
        parse_relation_triples("a0\tr\ta1\n", kg)
        with pytest.raises(ValueError, match="unknown source entity"):
            load_alignment_split("zz\tb0\n", 0.3, 0, source=kg)

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            split_pairs(PAIRS, 1.5, 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 40), st.floats(0, 1), st.integers(0, 100))
    def test_partition(self, n, ratio, seed):
        pairs = [(f"a{i}", f"b{i}") for i in range(n)]
        s, t = split_pairs(pairs, ratio, seed)
        assert len(s) == int(np.floor(ratio * n + 1e-9))
        assert sorted(s + t) == sorted(pairs)


class TestDataset:
    def test_overlap_rejected(self):
        kg1, kg2 = KnowledgeGraph(), KnowledgeGraph()
        parse_relation_triples("a\tr\tb\n", kg1)
        parse_relation_triples("x\tr\ty\n", kg2)
        with pytest.raises(ValueError, match="overlap"):
            AlignmentDataset(kg1, kg2, [("a", "x")], [("a", "x")])

    def test_shared_index_space(self):
        ds = generate_synthetic_pair(5, 2, 1, rng_seed=0)
        v = ds.vocab
        assert v.n_entities == 10 and v.n_source_entities == 5
        assert v.entities[:5] == [(0, e) for e in sorted(ds.source.entities)]

    def test_directory_round_trip(self, tmp_path):
        ds = generate_synthetic_pair(12, 3, 2, name_noise=0.2, structure_dropout=0.3, rng_seed=4)
        save_dataset(ds, tmp_path)
        back = load_dataset(tmp_path, seed_ratio=0.0)
        assert set(back.source.relation_facts) == set(ds.source.relation_facts)
        assert set(back.target.attribute_facts) == set(ds.target.attribute_facts)
        assert back.source.name_view == ds.source.name_view
        assert sorted(back.test_alignment) == sorted(ds.test_alignment)
