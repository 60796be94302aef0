"""Synthetic paired KGs for tests and desk-scale experiments.

A random base KG is generated and cloned under fresh ids. The clone's names
are perturbed by token substitution and each cloned fact may be dropped.
The cloning bijection is the reference alignment.
"""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .kg import AlignmentDataset, KnowledgeGraph

_ONSETS = list("bdfgklmnprstvz") + ["ch", "sh", "tr", "br", "gl"]
_VOWELS = list("aeiou") + ["ai", "ou"]

SOURCE_NS = "http://kg1.example.org/"
TARGET_NS = "http://kg2.example.org/"


def pseudo_words(n: int, rng: np.random.Generator, exclude=()) -> List[str]:
    """``n`` distinct pronounceable tokens of 2-3 syllables."""
    words, seen = [], set(exclude)
    while len(words) < n:
        syllables = rng.integers(2, 4)
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(syllables))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def generate_synthetic_pair(n_entities: int, n_relations: int, n_attributes: int,
                            name_noise: float = 0.0, structure_dropout: float = 0.0,
                            rng_seed: int = 0, *, name_tokens: int = 2,
                            vocab_size: Optional[int] = None, facts_per_entity: float = 6.0,
                            attribute_density: float = 0.5,
                            values_per_attribute: Optional[int] = None) -> AlignmentDataset:
    """Build a source KG and a perturbed renamed clone.

    All reference pairs are placed in ``test_alignment``; use
    :meth:`AlignmentDataset.resplit` to carve out a seed set.
    """
    if n_entities < 2:
        raise ValueError("n_entities must be >= 2")
    rng = np.random.default_rng(rng_seed)
    if vocab_size is None:
        vocab_size = max(8, n_entities)
    vocab = pseudo_words(vocab_size, rng)
    schema_words = pseudo_words(n_relations + n_attributes, rng, exclude=vocab)
    rel_words, attr_words = schema_words[:n_relations], schema_words[n_relations:]

    names: List[str] = []
    used = set()
    attempts = 0
    while len(names) < n_entities:
        tokens = [vocab[i] for i in rng.integers(len(vocab), size=name_tokens)]
        name = " ".join(tokens)
        attempts += 1
        if name in used and attempts < 100 * n_entities:
            continue
        used.add(name)
        names.append(name)

    src_ids = [f"{SOURCE_NS}resource/E{i:05d}" for i in range(n_entities)]
    perm = rng.permutation(n_entities)
    tgt_ids = [f"{TARGET_NS}entity/Q{int(perm[i]):05d}" for i in range(n_entities)]
    src_rels = [f"{SOURCE_NS}ontology/{w}" for w in rel_words]
    tgt_rels = [f"{TARGET_NS}property/{w}" for w in rel_words]
    src_attrs = [f"{SOURCE_NS}ontology/{w}" for w in attr_words]
    tgt_attrs = [f"{TARGET_NS}property/{w}" for w in attr_words]

    n_facts = int(round(n_entities * facts_per_entity)) if n_relations else 0
    rel_facts = []
    if n_facts:
        heads = rng.integers(n_entities, size=n_facts)
        rels = rng.integers(n_relations, size=n_facts)
        offsets = rng.integers(1, n_entities, size=n_facts)
        tails = (heads + offsets) % n_entities
        rel_facts = list(dict.fromkeys(zip(heads.tolist(), rels.tolist(), tails.tolist())))

    if values_per_attribute is None:
        values_per_attribute = max(4, n_entities // 4)
    value_pools = []
    for j in range(n_attributes):
        if j % 2 == 0:
            base = int(rng.integers(1000, 2000))
            pool = [str(base + int(k)) for k in rng.choice(900, size=values_per_attribute,
                                                           replace=False)]
        else:
            pool = [" ".join(vocab[i] for i in rng.integers(len(vocab), size=2))
                    for _ in range(values_per_attribute)]
        value_pools.append(pool)
    attr_facts = []
    for e in range(n_entities):
        for j in range(n_attributes):
            if rng.random() < attribute_density:
                attr_facts.append((e, j, value_pools[j][int(rng.integers(len(value_pools[j])))]))
    attr_facts = list(dict.fromkeys(attr_facts))

    source = KnowledgeGraph()
    source.add_names((src_ids[e], names[e]) for e in range(n_entities))
    source.add_relation_facts((src_ids[h], src_rels[r], src_ids[t]) for h, r, t in rel_facts)
    source.add_attribute_facts((src_ids[e], src_attrs[j], v) for e, j, v in attr_facts)

    target = KnowledgeGraph()
    noisy_names = []
    for name in names:
        tokens = name.split(" ")
        for k in range(len(tokens)):
            if rng.random() < name_noise:
                tokens[k] = vocab[int(rng.integers(len(vocab)))]
        noisy_names.append(" ".join(tokens))
    target.add_names((tgt_ids[e], noisy_names[e]) for e in range(n_entities))
    keep_rel = rng.random(len(rel_facts)) >= structure_dropout
    keep_attr = rng.random(len(attr_facts)) >= structure_dropout
    target.add_relation_facts((tgt_ids[h], tgt_rels[r], tgt_ids[t])
                              for (h, r, t), keep in zip(rel_facts, keep_rel) if keep)
    target.add_attribute_facts((tgt_ids[e], tgt_attrs[j], v)
                               for (e, j, v), keep in zip(attr_facts, keep_attr) if keep)

    pairs = [(src_ids[e], tgt_ids[e]) for e in range(n_entities)]
    return AlignmentDataset(source, target, [], pairs)


def synthetic_word_vectors(dataset: AlignmentDataset, dim: int, coverage: float = 0.9,
                           rng_seed: int = 0) -> str:
    """Random word-vector file text covering a fraction of alphabetic tokens.

    Purely numeric tokens are never covered, so they exercise the
    character fallback. Vectors are i.i.d. N(0, 1/dim).
    """
    from .literal import tokenize

    tokens = set()
    for kg in (dataset.source, dataset.target):
        for lit in kg.literals:
            tokens.update(tokenize(lit))
        for item in kg.relations | kg.attributes:
            tokens.update(tokenize(kg.name_of(item)))
    tokens = sorted(t for t in tokens if t.isalpha())
    rng = np.random.default_rng(rng_seed)
    keep = rng.random(len(tokens)) < coverage
    chosen = [t for t, k in zip(tokens, keep) if k]
    vecs = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(len(chosen), dim))
    lines = [f"{len(chosen)} {dim}"]
    lines += [t + " " + " ".join(f"{x:.6f}" for x in row) for t, row in zip(chosen, vecs)]
    return "\n".join(lines) + "\n"
