"""Knowledge graph data model, TSV ingestion and vocabulary construction."""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple
from urllib.parse import unquote

import numpy as np

RelationFact = Tuple[str, str, str]
AttributeFact = Tuple[str, str, str]
Pair = Tuple[str, str]

_TYPED_LITERAL = re.compile(r'^"(.*)"(?:\^\^\S+|@[A-Za-z][A-Za-z0-9-]*)?$', re.DOTALL)


class ParseError(ValueError):
    """Malformed input line; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: Optional[int] = None, source: Optional[str] = None):
        where = ""
        if source:
            where += f"{source}:"
        if lineno is not None:
            where += f"line {lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.lineno = lineno
        self.source = source


@dataclass
class KnowledgeGraph:
    entities: Set[str] = field(default_factory=set)
    relations: Set[str] = field(default_factory=set)
    attributes: Set[str] = field(default_factory=set)
    literals: Set[str] = field(default_factory=set)
    name_view: Dict[str, str] = field(default_factory=dict)
    relation_facts: List[RelationFact] = field(default_factory=list)
    attribute_facts: List[AttributeFact] = field(default_factory=list)

    def add_relation_facts(self, facts: Iterable[RelationFact]) -> None:
        seen = set(self.relation_facts)
        for h, r, t in facts:
            self.entities.add(h)
            self.entities.add(t)
            self.relations.add(r)
            if (h, r, t) not in seen:
                seen.add((h, r, t))
                self.relation_facts.append((h, r, t))

    def add_attribute_facts(self, facts: Iterable[AttributeFact]) -> None:
        seen = set(self.attribute_facts)
        for h, a, v in facts:
            self.entities.add(h)
            self.attributes.add(a)
            self.literals.add(v)
            if (h, a, v) not in seen:
                seen.add((h, a, v))
                self.attribute_facts.append((h, a, v))

    def add_names(self, names: Iterable[Tuple[str, str]]) -> None:
        for e, label in names:
            self.entities.add(e)
            self.name_view[e] = label
            self.literals.add(label)

    def name_of(self, entity: str) -> str:
        """Explicit label if present, otherwise the URI local name."""
        return extract_name(entity, self.name_view)

    def validate(self) -> None:
        for h, r, t in self.relation_facts:
            if h not in self.entities or t not in self.entities or r not in self.relations:
                raise ValueError(f"relation fact references unknown item: {(h, r, t)}")
        for h, a, v in self.attribute_facts:
            if h not in self.entities or a not in self.attributes or v not in self.literals:
                raise ValueError(f"attribute fact references unknown item: {(h, a, v)}")
        if not set(self.name_view) <= self.entities:
            raise ValueError("name view mentions entities outside the entity set")
        if len(set(self.relation_facts)) != len(self.relation_facts):
            raise ValueError("duplicate relation facts")
        if len(set(self.attribute_facts)) != len(self.attribute_facts):
            raise ValueError("duplicate attribute facts")


def _split_rows(text: str, source: Optional[str]):
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", lineno, source)
        if not all(p.strip() for p in parts):
            raise ParseError("empty field", lineno, source)
        yield lineno, parts


def _dedup(items):
    return list(dict.fromkeys(items))


def parse_relation_triples(text: str, kg: Optional[KnowledgeGraph] = None,
                           source: Optional[str] = None) -> List[RelationFact]:
    """Parse ``head<TAB>relation<TAB>tail`` lines into deduplicated facts.

    If ``kg`` is given, the facts and their entities/relations are registered
    into it.
    """
    facts = _dedup((h.strip(), r.strip(), t.strip()) for _, (h, r, t) in _split_rows(text, source))
    if kg is not None:
        kg.add_relation_facts(facts)
    return facts


def normalize_literal(value: str) -> str:
    """Strip datatype (``"x"^^type``) and language (``"x"@en``) decorations."""
    value = value.strip()
    m = _TYPED_LITERAL.match(value)
    if m:
        return m.group(1)
    if "^^" in value:
        return value.split("^^", 1)[0].strip('"')
    return value


def parse_attribute_triples(text: str, kg: Optional[KnowledgeGraph] = None,
                            source: Optional[str] = None) -> List[AttributeFact]:
    facts = []
    for lineno, (h, a, v) in _split_rows(text, source):
        value = normalize_literal(v)
        if not value:
            raise ParseError("empty literal value", lineno, source)
        facts.append((h.strip(), a.strip(), value))
    facts = _dedup(facts)
    if kg is not None:
        kg.add_attribute_facts(facts)
    return facts


def parse_names(text: str, kg: Optional[KnowledgeGraph] = None,
                source: Optional[str] = None) -> List[Tuple[str, str]]:
    """Parse an optional ``entity<TAB>label`` file. Later rows win."""
    rows = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"expected 2 tab-separated fields, got {len(parts)}", lineno, source)
        rows.append((parts[0].strip(), normalize_literal(parts[1])))
    if kg is not None:
        kg.add_names(rows)
    return rows


def extract_name(entity_id: str, labels: Optional[Dict[str, str]] = None) -> str:
    """Name of an entity/relation/attribute.

    An explicit label wins. Otherwise the substring after the last ``#`` or
    ``/`` is taken, percent-decoded, with underscores turned into spaces.
    Plain strings come back unchanged.
    """
    if labels and entity_id in labels:
        return labels[entity_id]
    cut = max(entity_id.rfind("#"), entity_id.rfind("/"))
    if cut < 0:
        return entity_id
    local = entity_id[cut + 1:]
    if not local:
        return entity_id
    return unquote(local).replace("_", " ")


def serialize_relation_triples(facts: Sequence[RelationFact]) -> str:
    return "".join(f"{h}\t{r}\t{t}\n" for h, r, t in facts)


def serialize_attribute_triples(facts: Sequence[AttributeFact]) -> str:
    return "".join(f"{h}\t{a}\t{v}\n" for h, a, v in facts)


def serialize_names(name_view: Dict[str, str]) -> str:
    return "".join(f"{e}\t{label}\n" for e, label in sorted(name_view.items()))


def serialize_pairs(pairs: Sequence[Pair]) -> str:
    return "".join(f"{a}\t{b}\n" for a, b in pairs)


def parse_pairs(text: str, source: Optional[str] = None) -> List[Pair]:
    pairs = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"expected 2 tab-separated fields, got {len(parts)}", lineno, source)
        pairs.append((parts[0].strip(), parts[1].strip()))
    return _dedup(pairs)


def load_alignment_split(text: str, seed_ratio: float, rng_seed: int,
                         source: Optional[KnowledgeGraph] = None,
                         target: Optional[KnowledgeGraph] = None):
    """Shuffle reference pairs deterministically and split into (seed, test).

    The first ``floor(seed_ratio * n)`` shuffled pairs become the seed set.
    A ratio of 0 gives an empty seed set (unsupervised mode).
    """
    pairs = parse_pairs(text)
    for a, b in pairs:
        if source is not None and a not in source.entities:
            raise ValueError(f"unknown source entity in alignment: {a}")
        if target is not None and b not in target.entities:
            raise ValueError(f"unknown target entity in alignment: {b}")
    return split_pairs(pairs, seed_ratio, rng_seed)


def split_pairs(pairs: Sequence[Pair], seed_ratio: float, rng_seed: int):
    if not 0.0 <= seed_ratio <= 1.0:
        raise ValueError(f"seed_ratio must lie in [0, 1], got {seed_ratio}")
    order = np.random.default_rng(rng_seed).permutation(len(pairs))
    shuffled = [tuple(pairs[i]) for i in order]
    n_seed = int(math.floor(seed_ratio * len(pairs) + 1e-9))
    return shuffled[:n_seed], shuffled[n_seed:]


class Vocabulary:
    """Dense integer indices for both KGs.

    Entities of the two KGs share one index space (source first, each side
    sorted by id); relations and attributes likewise. Items are keyed by
    ``(side, id)`` so identical ids in the two KGs stay distinct.
    """

    def __init__(self, source: KnowledgeGraph, target: KnowledgeGraph):
        self.entities: List[Tuple[int, str]] = [(0, e) for e in sorted(source.entities)] + \
                                               [(1, e) for e in sorted(target.entities)]
        self.relations: List[Tuple[int, str]] = [(0, r) for r in sorted(source.relations)] + \
                                                [(1, r) for r in sorted(target.relations)]
        self.attributes: List[Tuple[int, str]] = [(0, a) for a in sorted(source.attributes)] + \
                                                 [(1, a) for a in sorted(target.attributes)]
        self.entity_index = {key: i for i, key in enumerate(self.entities)}
        self.relation_index = {key: i for i, key in enumerate(self.relations)}
        self.attribute_index = {key: i for i, key in enumerate(self.attributes)}
        self.n_source_entities = len(source.entities)
        self.n_source_relations = len(source.relations)
        self.n_source_attributes = len(source.attributes)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    def entity(self, side: int, ent: str) -> int:
        return self.entity_index[(side, ent)]

    def relation(self, side: int, rel: str) -> int:
        return self.relation_index[(side, rel)]

    def attribute(self, side: int, attr: str) -> int:
        return self.attribute_index[(side, attr)]


@dataclass
class AlignmentDataset:
    source: KnowledgeGraph
    target: KnowledgeGraph
    seed_alignment: List[Pair] = field(default_factory=list)
    test_alignment: List[Pair] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        seed, test = set(self.seed_alignment), set(self.test_alignment)
        if seed & test:
            raise ValueError("seed and test alignment overlap")
        used_a, used_b = set(), set()
        for a, b in list(self.seed_alignment) + list(self.test_alignment):
            if a not in self.source.entities:
                raise ValueError(f"unknown source entity in alignment: {a}")
            if b not in self.target.entities:
                raise ValueError(f"unknown target entity in alignment: {b}")
            if a in used_a or b in used_b:
                raise ValueError(f"entity aligned more than once: {(a, b)}")
            used_a.add(a)
            used_b.add(b)

    @cached_property
    def vocab(self) -> Vocabulary:
        return Vocabulary(self.source, self.target)

    def resplit(self, seed_ratio: float, rng_seed: int) -> "AlignmentDataset":
        """New dataset over the same KGs with all reference pairs re-split."""
        pairs = list(self.seed_alignment) + list(self.test_alignment)
        seed, test = split_pairs(pairs, seed_ratio, rng_seed)
        return AlignmentDataset(self.source, self.target, seed, test)

    def kg(self, side: int) -> KnowledgeGraph:
        return self.source if side == 0 else self.target

    def pair_indices(self, pairs: Sequence[Pair]) -> np.ndarray:
        v = self.vocab
        return np.array([(v.entity(0, a), v.entity(1, b)) for a, b in pairs],
                        dtype=np.int64).reshape(-1, 2)

    def relation_fact_indices(self) -> np.ndarray:
        v = self.vocab
        rows = [(v.entity(side, h), v.relation(side, r), v.entity(side, t))
                for side in (0, 1) for h, r, t in self.kg(side).relation_facts]
        return np.array(rows, dtype=np.int64).reshape(-1, 3)


# -- directory I/O ----------------------------------------------------------

DATASET_FILES = {
    "rel": ("rel_triples_1", "rel_triples_2"),
    "attr": ("attr_triples_1", "attr_triples_2"),
    "names": ("names_1", "names_2"),
    "links": "ent_links",
}


def _read(path) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def load_kg(directory, side: int) -> KnowledgeGraph:
    kg = KnowledgeGraph()
    for key, parser in (("rel", parse_relation_triples), ("attr", parse_attribute_triples),
                        ("names", parse_names)):
        path = os.path.join(directory, DATASET_FILES[key][side])
        if os.path.exists(path):
            parser(_read(path), kg, source=path)
        elif key != "names":
            raise FileNotFoundError(path)
    return kg


def load_dataset(directory, seed_ratio: float = 0.3, rng_seed: int = 0) -> AlignmentDataset:
    source = load_kg(directory, 0)
    target = load_kg(directory, 1)
    links_path = os.path.join(directory, DATASET_FILES["links"])
    seed, test = load_alignment_split(_read(links_path), seed_ratio, rng_seed, source, target)
    return AlignmentDataset(source, target, seed, test)


def save_kg(kg: KnowledgeGraph, directory, side: int) -> None:
    os.makedirs(directory, exist_ok=True)
    contents = {
        DATASET_FILES["rel"][side]: serialize_relation_triples(kg.relation_facts),
        DATASET_FILES["attr"][side]: serialize_attribute_triples(kg.attribute_facts),
    }
    if kg.name_view:
        contents[DATASET_FILES["names"][side]] = serialize_names(kg.name_view)
    for fname, text in contents.items():
        with open(os.path.join(directory, fname), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def save_dataset(dataset: AlignmentDataset, directory) -> None:
    save_kg(dataset.source, directory, 0)
    save_kg(dataset.target, directory, 1)
    pairs = list(dataset.seed_alignment) + list(dataset.test_alignment)
    with open(os.path.join(directory, DATASET_FILES["links"]), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(serialize_pairs(pairs))
