"""The combined multi-view training loop and checkpoint plumbing."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import attribute_view as av
from . import relation_view as rv
from .checkpoint import load_checkpoint, save_checkpoint
from .combination import ITC, SSL, STRATEGIES, WVA, CombinedEmbeddings, combine_wva, loss_itc, \
    train_shared_space, view_mean
from .kg import AlignmentDataset, extract_name
from .literal import LiteralEncoder, WordEmbeddingTable, build_literal_encoder, \
    name_view_embeddings
from .optim import AdaGrad, ParameterStore, xavier_init
from .soft_alignment import SoftAlignment, update_soft_alignment

logger = logging.getLogger(__name__)

NAME = "name_view"
NAME_MASK = "name_mask"
COMBINED = "combined"
VIEW_TENSORS = {"name": NAME, "relation": rv.ENT, "attribute": av.ENT}


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.001
    dim: int = 75
    negatives: int = 10
    filters: int = 2
    kernel_width: int = 4
    alpha1: float = 0.6
    alpha2: float = 0.4
    eta: float = 0.9
    norm: str = "L2"
    batch_size: int = 512
    seed: int = 0
    combination: str = ITC
    seed_ratio: float = 0.3
    cra: bool = True
    ssl_epochs: int = 100
    char_window: int = 2
    char_negatives: int = 5
    char_epochs: int = 10
    ae_epochs: int = 30
    ae_learning_rate: float = 0.01
    max_norm: float = 1.0
    itc_learning_rate: float = 0.0

    def validate(self) -> None:
        if abs(self.alpha1 + self.alpha2 - 1.0) > 1e-9 or self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ValueError("alpha1 and alpha2 must be positive and sum to 1")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if not 0 < self.kernel_width < self.dim:
            raise ValueError("kernel_width must satisfy 0 < c < dim")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.norm not in ("L1", "L2"):
            raise ValueError("norm must be L1 or L2")
        if self.combination not in STRATEGIES:
            raise ValueError(f"combination must be one of {STRATEGIES}")
        if not 0.0 <= self.seed_ratio <= 1.0:
            raise ValueError("seed_ratio must lie in [0, 1]")
        if self.itc_learning_rate < 0:
            raise ValueError("itc_learning_rate must be >= 0")
        if self.max_norm < 0:
            raise ValueError("max_norm must be >= 0")
        if self.batch_size < 1 or self.negatives < 0 or self.filters < 1:
            raise ValueError("batch_size and filters must be >= 1, negatives >= 0")

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def updated(self, values: Dict[str, object]) -> "TrainConfig":
        """Copy with ``values`` (strings are coerced to the field types)."""
        types = {f.name: f.type for f in dataclasses.fields(self)}
        kwargs = dataclasses.asdict(self)
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(raw, types[key], key)
        cfg = TrainConfig(**kwargs)
        cfg.validate()
        return cfg

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in dataclasses.asdict(self).items())


def _coerce(raw, type_name, key):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if type_name in ("int", int):
            return int(raw)
        if type_name in ("float", float):
            return float(raw)
        if type_name in ("bool", bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ValueError(f"invalid value for {key}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> Dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


@dataclass
class TrainResult:
    params: ParameterStore
    combined: CombinedEmbeddings
    log: List[dict]
    name_mask: np.ndarray
    soft_relations: Optional[SoftAlignment] = None
    soft_attributes: Optional[SoftAlignment] = None
    encoder: Optional[LiteralEncoder] = None

    def view(self, name: str) -> np.ndarray:
        if name == "combined":
            return self.combined.matrix
        return self.params[VIEW_TENSORS[name]]

    def tensors(self) -> Dict[str, np.ndarray]:
        return checkpoint_tensors(self.params, self.combined, self.name_mask)


def checkpoint_tensors(params: ParameterStore, combined: CombinedEmbeddings,
                       name_mask: np.ndarray) -> Dict[str, np.ndarray]:
    out = {name: params[name] for name in (NAME, rv.ENT, rv.REL, av.ENT, av.ATTR, av.CONV,
                                           av.DENSE_W, av.DENSE_B)}
    out[NAME_MASK] = name_mask.astype(np.float64)
    out[COMBINED] = combined.matrix
    for i, z in enumerate(combined.mappings):
        out[f"ssl_z{i}"] = z
    return out


class _Step:
    """Accumulates the loss of one named step of an epoch."""

    def __init__(self, log: List[dict], epoch: int, step: str):
        self.log, self.epoch, self.step = log, epoch, step
        self.total = 0.0
        self.batches = 0

    def add(self, loss: float) -> None:
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss in step {self.step!r} at epoch {self.epoch}")
        self.total += loss
        self.batches += 1

    def close(self, **extra) -> None:
        entry = {"epoch": self.epoch, "step": self.step, "loss": self.total,
                 "batches": self.batches}
        entry.update(extra)
        self.log.append(entry)


def clip_rows(matrix: np.ndarray, max_norm: float) -> np.ndarray:
    """Rescale rows whose L2 norm exceeds ``max_norm`` back onto the ball."""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix * np.minimum(1.0, max_norm / np.maximum(norms, 1e-12))


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


class MultiViewTrainer:
    """Holds the state of one training run over an :class:`AlignmentDataset`."""

    def __init__(self, dataset: AlignmentDataset, config: TrainConfig,
                 word_table: Optional[WordEmbeddingTable] = None,
                 encoder: Optional[LiteralEncoder] = None):
        config.validate()
        self.dataset = dataset
        self.config = config
        self.vocab = dataset.vocab
        self.rng = np.random.default_rng(config.seed)
        self.log: List[dict] = []
        self.encoder = encoder or self._pretrain_literals(word_table)
        self._build_indices()
        self._init_params()
        self.optimizers: Dict[str, AdaGrad] = {}
        self.soft_relations = SoftAlignment("relation", config.eta)
        self.soft_attributes = SoftAlignment("attribute", config.eta)

    # -- setup -------------------------------------------------------------

    def _pretrain_literals(self, word_table):
        ds, cfg = self.dataset, self.config
        corpus = set()
        for side, kg in ((0, ds.source), (1, ds.target)):
            corpus |= kg.literals
            corpus |= {kg.name_of(e) for e in kg.entities}
            corpus |= {extract_name(x) for x in kg.relations | kg.attributes}
        corpus = {c for c in corpus if c.strip()}
        encoder, history = build_literal_encoder(
            corpus, cfg.dim, word_table, rng_seed=cfg.seed, char_window=cfg.char_window,
            char_negatives=cfg.char_negatives, char_epochs=cfg.char_epochs,
            ae_epochs=cfg.ae_epochs, ae_learning_rate=cfg.ae_learning_rate)
        self.log.append({"epoch": 0, "step": "literal_pretraining", "loss": history[-1],
                         "batches": len(history)})
        return encoder

    def _build_indices(self):
        ds, v = self.dataset, self.vocab
        self.entity_names = [ds.kg(side).name_of(e) for side, e in v.entities]
        self.rel_facts = ds.relation_fact_indices()
        self.rel_codes = np.sort(rv.encode_facts(self.rel_facts, v.n_entities, max(v.n_relations, 1)))
        values = sorted({val for kg in (ds.source, ds.target) for _, _, val in kg.attribute_facts})
        self.value_index = {val: i for i, val in enumerate(values)}
        rows = [(v.entity(side, h), v.attribute(side, a), self.value_index[val])
                for side in (0, 1) for h, a, val in ds.kg(side).attribute_facts]
        self.attr_facts = np.array(rows, dtype=np.int64).reshape(-1, 3)
        self.value_embeddings = self.encoder.embed_many(values) if values else \
            np.zeros((0, self.config.dim))
        self.value_embeddings.setflags(write=False)
        self.relation_name_vectors = self.encoder.embed_many(
            [extract_name(r) for _, r in v.relations]).reshape(-1, self.config.dim)
        self.attribute_name_vectors = self.encoder.embed_many(
            [extract_name(a) for _, a in v.attributes]).reshape(-1, self.config.dim)
        self.seed_pairs = ds.pair_indices(ds.seed_alignment)
        self.test_pairs = ds.pair_indices(ds.test_alignment)
        self.counterpart = rv.counterpart_map(self.seed_pairs)
        self.ce_rel_facts = rv.cross_entity_facts(self.rel_facts, self.counterpart)
        self.ce_attr_facts = av.cross_entity_attr_facts(self.attr_facts, self.counterpart)

    def _init_params(self):
        cfg, v = self.config, self.vocab
        rng = self.rng
        d = cfg.dim
        store = ParameterStore()
        names, mask = name_view_embeddings(self.entity_names, self.encoder)
        self.name_mask = mask
        store.add(NAME, names, trainable=False)
        store.add(rv.ENT, xavier_init((max(v.n_entities, 1), d), rng=rng)[:v.n_entities])
        store.add(rv.REL, xavier_init((max(v.n_relations, 1), d), rng=rng)[:v.n_relations])
        store.add(av.ENT, xavier_init((max(v.n_entities, 1), d), rng=rng)[:v.n_entities])
        store.add(av.ATTR, xavier_init((max(v.n_attributes, 1), d), rng=rng)[:v.n_attributes])
        for key, value in av.init_cnn_params(d, cfg.kernel_width, cfg.filters, rng).items():
            store.add(key, value)
        if cfg.combination == ITC:
            store.add(COMBINED, view_mean(self.views(store), self.view_masks()))
        self.params = store

    def views(self, store=None) -> List[np.ndarray]:
        store = store or self.params
        return [store[NAME], store[rv.ENT], store[av.ENT]]

    def view_masks(self) -> np.ndarray:
        n = self.vocab.n_entities
        return np.column_stack([self.name_mask, np.ones(n, bool), np.ones(n, bool)])

    def _opt(self, key: str) -> AdaGrad:
        if key not in self.optimizers:
            lr = self.config.learning_rate
            if key == "itc" and self.config.itc_learning_rate > 0:
                lr = self.config.itc_learning_rate
            self.optimizers[key] = AdaGrad(lr)
        return self.optimizers[key]

    def _apply(self, key: str, grads: Dict[str, np.ndarray]) -> None:
        trainable = {k: g for k, g in grads.items() if self.params.is_trainable(k)}
        self._opt(key).step(self.params, trainable)
        if self.config.max_norm > 0:
            for name in (rv.ENT, av.ENT):
                if name in trainable:
                    self.params[name] = clip_rows(self.params[name], self.config.max_norm)

    # -- steps -------------------------------------------------------------

    def relation_view_step(self, epoch: int) -> None:
        cfg, v = self.config, self.vocab
        step = _Step(self.log, epoch, "relation_view")
        for idx in _batches(len(self.rel_facts), cfg.batch_size, self.rng):
            pos = self.rel_facts[idx]
            neg = rv.sample_negatives(pos, cfg.negatives, v.n_entities, self.rng,
                                      self.rel_codes, max(v.n_relations, 1))
            loss, grads = rv.loss_relation_view(self.params, pos, neg, cfg.norm)
            step.add(loss)
            self._apply("relation_view", grads)
        step.close()

    def attribute_view_step(self, epoch: int) -> None:
        step = _Step(self.log, epoch, "attribute_view")
        for idx in _batches(len(self.attr_facts), self.config.batch_size, self.rng):
            loss, grads = av.loss_attribute_view(self.params, self.attr_facts[idx],
                                                 self.value_embeddings)
            step.add(loss)
            self._apply("attribute_view", grads)
        step.close()

    def itc_step(self, epoch: int) -> None:
        step = _Step(self.log, epoch, "itc")
        views, masks = self.views(), self.view_masks()
        for idx in _batches(self.vocab.n_entities, self.config.batch_size, self.rng):
            loss, grads = loss_itc(self.params[COMBINED], views, masks, rows=idx)
            step.add(loss)
            self._apply("itc", {COMBINED: grads[COMBINED], rv.ENT: grads["view1"],
                                av.ENT: grads["view2"]})
        step.close()

    def cross_entity_step(self, epoch: int) -> None:
        cfg = self.config
        step = _Step(self.log, epoch, "ce_relation")
        facts = self.ce_rel_facts
        for idx in _batches(len(facts), cfg.batch_size, self.rng):
            f = facts[idx]
            loss, grads = rv.translational_loss(self.params, f[:, 0], f[:, 1], f[:, 2],
                                                norm=cfg.norm)
            step.add(loss)
            self._apply("ce_relation", grads)
        step.close()
        step = _Step(self.log, epoch, "ce_attribute")
        facts = self.ce_attr_facts
        for idx in _batches(len(facts), cfg.batch_size, self.rng):
            f = facts[idx]
            loss, grads = av.attribute_loss(self.params, f[:, 0], f[:, 1],
                                            self.value_embeddings[f[:, 2]])
            step.add(loss)
            self._apply("ce_attribute", grads)
        step.close()

    def soft_alignment_step(self, epoch: int) -> None:
        cfg, v = self.config, self.vocab
        self.soft_relations = update_soft_alignment(
            "relation", self.relation_name_vectors, self.params[rv.REL], v.n_source_relations,
            cfg.eta, cfg.alpha1, cfg.alpha2)
        self.soft_attributes = update_soft_alignment(
            "attribute", self.attribute_name_vectors, self.params[av.ATTR],
            v.n_source_attributes, cfg.eta, cfg.alpha1, cfg.alpha2)
        self.log.append({"epoch": epoch, "step": "soft_alignment", "loss": 0.0, "batches": 0,
                         "relations": len(self.soft_relations),
                         "attributes": len(self.soft_attributes)})

    def cross_alignment_step(self, epoch: int) -> None:
        cfg = self.config
        step = _Step(self.log, epoch, "cra_relation")
        facts, weights = rv.cross_relation_facts(self.rel_facts, self.soft_relations)
        for idx in _batches(len(facts), cfg.batch_size, self.rng):
            f = facts[idx]
            loss, grads = rv.translational_loss(self.params, f[:, 0], f[:, 1], f[:, 2],
                                                weights=weights[idx], norm=cfg.norm)
            step.add(loss)
            self._apply("cra_relation", grads)
        step.close()
        step = _Step(self.log, epoch, "cra_attribute")
        facts, weights = rv.cross_relation_facts(self.attr_facts, self.soft_attributes)
        for idx in _batches(len(facts), cfg.batch_size, self.rng):
            f = facts[idx]
            loss, grads = av.attribute_loss(self.params, f[:, 0], f[:, 1],
                                            self.value_embeddings[f[:, 2]], weights=weights[idx])
            step.add(loss)
            self._apply("cra_attribute", grads)
        step.close()

    def run_epoch(self, epoch: int) -> None:
        self.relation_view_step(epoch)
        self.attribute_view_step(epoch)
        if self.config.combination == ITC:
            self.itc_step(epoch)
        self.cross_entity_step(epoch)
        self.soft_alignment_step(epoch)
        if self.config.cra:
            self.cross_alignment_step(epoch)

    def combine(self) -> CombinedEmbeddings:
        cfg = self.config
        views, masks = self.views(), self.view_masks()
        if cfg.combination == ITC:
            return CombinedEmbeddings(self.params[COMBINED].copy(), ITC)
        if cfg.combination == WVA:
            matrix, weights = combine_wva(views, masks)
            self.log.append({"epoch": cfg.epochs, "step": "wva", "loss": 0.0, "batches": 0})
            return CombinedEmbeddings(matrix, WVA, weights=weights)
        combined, history = train_shared_space(views, cfg.ssl_epochs, cfg.learning_rate, masks)
        self.log.append({"epoch": cfg.epochs, "step": "ssl", "loss": history[-1],
                         "batches": len(history) - 1})
        return combined

    def train(self, callback: Optional[Callable[[int, "MultiViewTrainer"], None]] = None
              ) -> TrainResult:
        for epoch in range(1, self.config.epochs + 1):
            start = time.perf_counter()
            self.run_epoch(epoch)
            logger.debug("epoch %d took %.2fs", epoch, time.perf_counter() - start)
            if callback is not None:
                callback(epoch, self)
        combined = self.combine()
        return TrainResult(self.params, combined, self.log, self.name_mask,
                           self.soft_relations, self.soft_attributes, self.encoder)


def train_multike(dataset: AlignmentDataset, config: TrainConfig,
                  word_table: Optional[WordEmbeddingTable] = None,
                  callback=None) -> TrainResult:
    """Literal pre-training, ``config.epochs`` alternating epochs, final combination."""
    return MultiViewTrainer(dataset, config, word_table).train(callback)


def save_result(result: TrainResult, path, dim: int) -> None:
    save_checkpoint(result.tensors(), path, dim)


def load_result_tensors(path, dim: Optional[int] = None) -> Dict[str, np.ndarray]:
    _, tensors = load_checkpoint(path, expected_dim=dim)
    return tensors
