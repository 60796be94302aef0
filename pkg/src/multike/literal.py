"""Literal embeddings: token lookup, character Skip-Gram and the window autoencoder."""

from __future__ import annotations

import logging
import re
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .kg import ParseError
from .optim import AdaGrad, xavier_init

logger = logging.getLogger(__name__)

WINDOW = 5
PLACEHOLDER = None

_PUNCT = re.compile(r"[\W_]+", re.UNICODE)


def tokenize(literal: str) -> List[str]:
    """Lowercase, turn punctuation into spaces, split on whitespace."""
    return _PUNCT.sub(" ", literal.lower()).split()


def window_tokens(literal: str, size: int = WINDOW) -> List[Optional[str]]:
    """First ``size`` tokens, right-padded with placeholders."""
    toks: List[Optional[str]] = list(tokenize(literal)[:size])
    toks += [PLACEHOLDER] * (size - len(toks))
    return toks


class WordEmbeddingTable:
    """Read-only token -> vector map. Lookups of unknown tokens return ``None``."""

    def __init__(self, vectors: Dict[str, np.ndarray], dim: int):
        self.dim = int(dim)
        self._vectors = vectors

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, token: str) -> Optional[np.ndarray]:
        return self._vectors.get(token)


def load_word_embeddings(text: str, dim: Optional[int] = None) -> WordEmbeddingTable:
    """Parse a word2vec-style text file.

    Each line holds a token followed by ``dim`` floats separated by spaces.
    An optional first line ``count dim`` is accepted. If ``dim`` is not given
    it is taken from the header or from the first row.
    """
    vectors: Dict[str, np.ndarray] = {}
    lines = text.split("\n")
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        parts = line.rstrip().split(" ")
        if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            header_dim = int(parts[1])
            if dim is not None and header_dim != dim:
                raise ParseError(f"header dimension {header_dim} != {dim}", lineno)
            dim = header_dim
            continue
        token, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim:
            raise ParseError(f"expected {dim} values, got {len(values)}", lineno)
        try:
            vec = np.array([float(x) for x in values], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"non-numeric vector entry: {exc}", lineno) from None
        vectors[token] = vec
    if dim is None:
        dim = 0
    return WordEmbeddingTable(vectors, dim)


class CharEmbeddingTable:
    """Character vectors plus one vector for characters never seen in training."""

    def __init__(self, chars: Sequence[str], matrix: np.ndarray, unknown: np.ndarray):
        self.index = {c: i for i, c in enumerate(chars)}
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.unknown = np.asarray(unknown, dtype=np.float64)
        self.dim = self.matrix.shape[1] if self.matrix.ndim == 2 else len(self.unknown)

    def __contains__(self, ch: str) -> bool:
        return ch in self.index

    def vector(self, ch: str) -> np.ndarray:
        i = self.index.get(ch)
        return self.unknown if i is None else self.matrix[i]

    def token_vector(self, token: str) -> np.ndarray:
        if not token:
            return np.zeros(self.dim)
        return np.mean([self.vector(c) for c in token], axis=0)


def train_char_skipgram(literals: Iterable[str], d: int, window: int = 2, negatives: int = 5,
                        epochs: int = 10, rng_seed: int = 0, learning_rate: float = 0.025,
                        batch_size: int = 256) -> CharEmbeddingTable:
    """Skip-Gram with negative sampling over the characters of literal tokens.

    Each token is a character sequence; (center, context) pairs are taken
    within ``window`` positions. Negatives follow the unigram^0.75
    distribution. Mini-batch SGD with linearly decaying learning rate.
    """
    if d <= 0:
        raise ValueError("d must be positive")
    sequences = [tok for lit in sorted(set(literals)) for tok in tokenize(lit)]
    if not sequences:
        raise ValueError("empty corpus")
    chars = sorted({c for tok in sequences for c in tok})
    index = {c: i for i, c in enumerate(chars)}
    rng = np.random.default_rng(rng_seed)

    centers, contexts = [], []
    counts = np.zeros(len(chars))
    for tok in sequences:
        ids = [index[c] for c in tok]
        for i, c in enumerate(ids):
            counts[c] += 1
            for j in range(max(0, i - window), min(len(ids), i + window + 1)):
                if j != i:
                    centers.append(c)
                    contexts.append(ids[j])
    centers = np.array(centers, dtype=np.int64)
    contexts = np.array(contexts, dtype=np.int64)

    w_in = (rng.random((len(chars), d)) - 0.5) / d
    w_out = np.zeros((len(chars), d))
    noise = counts ** 0.75
    noise /= noise.sum()

    n_pairs = len(centers)
    total_steps = max(1, epochs * ((n_pairs + batch_size - 1) // batch_size))
    step = 0
    for _ in range(epochs):
        if n_pairs == 0:
            break
        order = rng.permutation(n_pairs)
        for start in range(0, n_pairs, batch_size):
            batch = order[start:start + batch_size]
            lr = learning_rate * max(1e-4, 1.0 - step / total_steps)
            step += 1
            c, o = centers[batch], contexts[batch]
            neg = rng.choice(len(chars), size=(len(batch), negatives), p=noise)
            targets = np.concatenate([o[:, None], neg], axis=1)
            labels = np.zeros(targets.shape)
            labels[:, 0] = 1.0
            vc = w_in[c]
            vt = w_out[targets]
            logits = np.einsum("bd,bkd->bk", vc, vt)
            with np.errstate(over="ignore"):  # exp overflow saturates to 0 correctly
                g = 1.0 / (1.0 + np.exp(-logits)) - labels
            grad_c = np.einsum("bk,bkd->bd", g, vt)
            grad_t = g[:, :, None] * vc[:, None, :]
            np.add.at(w_in, c, -lr * grad_c)
            np.add.at(w_out, targets.reshape(-1), -lr * grad_t.reshape(-1, d))
    unknown = w_in.mean(axis=0)
    return CharEmbeddingTable(chars, w_in, unknown)


class TokenLookup:
    """``LP``: word vector when available, else the mean of character vectors."""

    def __init__(self, char_table: CharEmbeddingTable,
                 word_table: Optional[WordEmbeddingTable] = None):
        if word_table is not None and len(word_table) and word_table.dim != char_table.dim:
            raise ValueError(f"word vectors have dimension {word_table.dim}, "
                             f"character vectors {char_table.dim}")
        self.chars = char_table
        self.words = word_table
        self.dim = char_table.dim

    def __call__(self, token: Optional[str]) -> np.ndarray:
        if token is PLACEHOLDER:
            return np.zeros(self.dim)
        if self.words is not None:
            vec = self.words.get(token)
            if vec is not None:
                return vec
        return self.chars.token_vector(token)

    def window(self, literal: str) -> np.ndarray:
        """Concatenated LP vectors of the padded 5-token window (length 5d)."""
        return np.concatenate([self(t) for t in window_tokens(literal)])


class Autoencoder:
    """Single hidden layer: ``tanh(x W_enc + b_enc)`` then linear decode."""

    def __init__(self, input_dim: int, hidden_dim: int, rng_seed: int = 0):
        rng = np.random.default_rng(rng_seed)
        self.params = {
            "enc_w": xavier_init((input_dim, hidden_dim), rng=rng),
            "enc_b": np.zeros(hidden_dim),
            "dec_w": xavier_init((hidden_dim, input_dim), rng=rng),
            "dec_b": np.zeros(input_dim),
        }

    def encode(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(x @ self.params["enc_w"] + self.params["enc_b"])

    def decode(self, z: np.ndarray) -> np.ndarray:
        return z @ self.params["dec_w"] + self.params["dec_b"]

    def loss(self, x: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
        """Mean over rows of ``||x - decode(encode(x))||^2`` and its gradients."""
        p = self.params
        x = np.atleast_2d(x)
        n = x.shape[0]
        z = np.tanh(x @ p["enc_w"] + p["enc_b"])
        recon = z @ p["dec_w"] + p["dec_b"]
        diff = recon - x
        loss = float(np.sum(diff * diff) / n)
        d_recon = 2.0 * diff / n
        d_z = d_recon @ p["dec_w"].T
        d_pre = d_z * (1.0 - z * z)
        grads = {
            "dec_w": z.T @ d_recon,
            "dec_b": d_recon.sum(axis=0),
            "enc_w": x.T @ d_pre,
            "enc_b": d_pre.sum(axis=0),
        }
        return loss, grads


def train_autoencoder(inputs: np.ndarray, hidden_dim: int, epochs: int = 30,
                      learning_rate: float = 0.01, rng_seed: int = 0,
                      batch_size: int = 256) -> Tuple[Autoencoder, List[float]]:
    """Fit the autoencoder to rows of ``inputs``; returns it with per-epoch losses.

    The recorded loss for an epoch is the full-corpus reconstruction error
    after that epoch's updates.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    ae = Autoencoder(inputs.shape[1], hidden_dim, rng_seed)
    opt = AdaGrad(learning_rate)
    rng = np.random.default_rng(rng_seed + 1)
    history = []
    for _ in range(epochs):
        order = rng.permutation(len(inputs))
        for start in range(0, len(inputs), batch_size):
            _, grads = ae.loss(inputs[order[start:start + batch_size]])
            opt.step(ae.params, grads)
        history.append(ae.loss(inputs)[0])
    return ae, history


class LiteralEncoder:
    """Maps literals to d-dimensional embeddings ``phi(l)``.

    Empty literals (no tokens) are still encoded from an all-zero window and
    are reported by :meth:`is_empty`.
    """

    def __init__(self, lookup: TokenLookup, autoencoder: Autoencoder):
        self.lookup = lookup
        self.autoencoder = autoencoder
        self._cache: Dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.lookup.dim

    @staticmethod
    def is_empty(literal: str) -> bool:
        return not tokenize(literal)

    def __call__(self, literal: str) -> np.ndarray:
        vec = self._cache.get(literal)
        if vec is None:
            vec = self.autoencoder.encode(self.lookup.window(literal)[None, :])[0]
            vec.setflags(write=False)
            self._cache[literal] = vec
        return vec

    def embed_many(self, literals: Sequence[str]) -> np.ndarray:
        if not literals:
            return np.zeros((0, self.dim))
        return np.stack([self(l) for l in literals])


def build_literal_encoder(literals: Iterable[str], d: int,
                          word_table: Optional[WordEmbeddingTable] = None, rng_seed: int = 0,
                          char_window: int = 2, char_negatives: int = 5, char_epochs: int = 10,
                          ae_epochs: int = 30, ae_learning_rate: float = 0.01,
                          ) -> Tuple[LiteralEncoder, List[float]]:
    """Pre-train character vectors and the autoencoder on ``literals``."""
    corpus = sorted(set(literals))
    chars = train_char_skipgram(corpus, d, window=char_window, negatives=char_negatives,
                                epochs=char_epochs, rng_seed=rng_seed)
    lookup = TokenLookup(chars, word_table)
    windows = np.stack([lookup.window(l) for l in corpus])
    ae, history = train_autoencoder(windows, d, epochs=ae_epochs,
                                    learning_rate=ae_learning_rate, rng_seed=rng_seed)
    logger.info("autoencoder reconstruction loss %.6f -> %.6f", history[0], history[-1])
    return LiteralEncoder(lookup, ae), history


def name_view_embeddings(names: Sequence[str], encoder: LiteralEncoder
                         ) -> Tuple[np.ndarray, np.ndarray]:
    """Encode entity names; returns ``(matrix, has_name mask)``.

    Entities whose name has no tokens get a zero row and ``False`` in the mask.
    """
    mask = np.array([not encoder.is_empty(n) for n in names], dtype=bool)
    mat = np.zeros((len(names), encoder.dim))
    for i, n in enumerate(names):
        if mask[i]:
            mat[i] = encoder(n)
    return mat, mask
