import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multike.kg import ParseError
from multike.literal import Autoencoder, CharEmbeddingTable, LiteralEncoder, TokenLookup, \
    build_literal_encoder, load_word_embeddings, name_view_embeddings, tokenize, \
    train_autoencoder, train_char_skipgram, window_tokens
from multike.soft_alignment import cosine


class TestWordVectors:
    def test_plain_row(self):
        table = load_word_embeddings("cat 0.1 0.2\n", dim=2)
        np.testing.assert_array_equal(table.get("cat"), [0.1, 0.2])

    def test_header_is_skipped(self):
        table = load_word_embeddings("1 2\ncat 0.1 0.2\n")
        assert len(table) == 1 and table.dim == 2

    def test_wrong_arity(self):
        with pytest.raises(ParseError):
            load_word_embeddings("cat 0.1 0.2 0.3\n", dim=2)

    def test_non_numeric(self):
        with pytest.raises(ParseError):
            load_word_embeddings("cat 0.1 x\n")


class TestTokens:
    def test_tokenize(self):
        assert tokenize("United_Kingdom, (UK)") == ["united", "kingdom", "uk"]

    def test_truncation(self):
        assert window_tokens("a b c d e f g") == ["a", "b", "c", "d", "e"]

    def test_padding(self):
        assert window_tokens("new york") == ["new", "york", None, None, None]

    @settings(max_examples=50, deadline=None)
    @given(st.text(max_size=60))
    def test_window_always_five(self, text):
        assert len(window_tokens(text)) == 5


class TestCharSkipGram:
    def test_single_literal_smoke(self):
        table = train_char_skipgram(["aa"], 4, epochs=2)
        assert np.all(np.isfinite(table.vector("a")))

    def test_cooccurring_chars_are_closer(self):
        table = train_char_skipgram(["abab" * 8, "cdcd" * 8], 8, epochs=40, rng_seed=0)
        assert cosine(table.vector("a"), table.vector("b")) > \
            cosine(table.vector("a"), table.vector("c"))

    def test_unknown_char(self):
        table = train_char_skipgram(["abc"], 4, epochs=1)
        np.testing.assert_array_equal(table.vector("z"), table.unknown)

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            train_char_skipgram(["  ", "!!"], 4)


def _lookup():
    chars = CharEmbeddingTable(["a", "b"], np.array([[1.0, 0.0], [0.0, 3.0]]), np.zeros(2))
    words = load_word_embeddings("cat 0.5 0.25\n")
    return TokenLookup(chars, words)


class TestLookup:
    def test_word_vector_wins(self):
        np.testing.assert_array_equal(_lookup()("cat"), [0.5, 0.25])

    def test_character_mean(self):
        np.testing.assert_array_equal(_lookup()("ab"), [0.5, 1.5])

    def test_placeholder_zeros(self):
        np.testing.assert_array_equal(_lookup()(None), [0.0, 0.0])

    def test_window_length(self):
        assert _lookup().window("cat ab").shape == (10,)

    def test_dimension_mismatch(self):
        chars = CharEmbeddingTable(["a"], np.ones((1, 3)), np.zeros(3))
        with pytest.raises(ValueError):
            TokenLookup(chars, load_word_embeddings("cat 0.5 0.25\n"))


class TestAutoencoder:
    def test_zero_input_encodes_bias(self):
        ae = Autoencoder(10, 4, rng_seed=0)
        ae.params["enc_b"] = np.array([0.1, -0.2, 0.3, 0.0])
        np.testing.assert_allclose(ae.encode(np.zeros((1, 10)))[0], np.tanh(ae.params["enc_b"]))

    def test_loss_decreases_on_one_literal(self):
        x = np.random.default_rng(0).normal(size=(1, 10))
        _, history = train_autoencoder(x, 4, epochs=10, learning_rate=0.05)
        assert history[-1] < history[0]
        assert all(b < a for a, b in zip(history, history[1:]))


@pytest.fixture(scope="module")
def encoder():
    words = ("united 0.9 0.1 0.0 0.2\nkingdom 0.1 0.8 0.3 0.0\nof 0.0 0.0 0.1 0.1\n"
             "great 0.3 0.3 0.6 0.1\nbritain 0.2 0.5 0.1 0.7\nbanana 0.7 -0.6 0.2 -0.9\n"
             "split -0.5 0.1 -0.8 0.3\n")
    corpus = ["United Kingdom", "United Kingdom of Great Britain", "banana split"]
    enc, _ = build_literal_encoder(corpus, 4, load_word_embeddings(words), ae_epochs=50,
                                   ae_learning_rate=0.05)
    return enc


class TestEncoder:
    def test_identical_names(self, encoder):
        mat, mask = name_view_embeddings(["United Kingdom", "United Kingdom"], encoder)
        np.testing.assert_array_equal(mat[0], mat[1])
        assert mask.all()

    def test_related_names_are_closer(self, encoder):
        uk = encoder("United Kingdom")
        assert cosine(uk, encoder("United Kingdom of Great Britain")) > \
            cosine(uk, encoder("banana split"))

    def test_empty_names_are_masked(self, encoder):
        mat, mask = name_view_embeddings(["United Kingdom", "  "], encoder)
        assert mask.tolist() == [True, False]
        np.testing.assert_array_equal(mat[1], 0.0)

    def test_cached_vectors_are_read_only(self, encoder):
        with pytest.raises(ValueError):
            encoder("banana split")[0] = 1.0

    def test_is_empty(self):
        assert LiteralEncoder.is_empty("...") and not LiteralEncoder.is_empty("x")
