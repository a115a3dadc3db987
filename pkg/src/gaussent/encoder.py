"""Sentence -> Gaussian embedding: pluggable base encoder plus two projection heads.

The base encoder turns a sentence into a vector of dimension ``d_base``,
either by looking it up in a table of precomputed vectors (exact text match)
or by averaging hashed token embeddings. Two distinct linear heads then map
that vector to the mean and to the variance; the variance passes through
softplus plus a small floor so it is always strictly positive.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .core import GaussianEmbedding

# Floor added after softplus; keeps variances clear of the degeneracy cutoff.
VARIANCE_EPSILON = 1e-6

DEFAULT_D_BASE = 64
DEFAULT_DIM = 32
DEFAULT_VOCAB_BUCKETS = 1 << 16

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters.

    Empty text yields an empty list; downstream encoding rejects that rather
    than fabricating a zero vector.
    """
    return _TOKEN_RE.findall(text.lower())


def softplus(x):
    # log(1 + e^x), stable for large |x|.
    return np.logaddexp(0.0, x)


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class PrecomputedProvider:
    """Read-only base encoder backed by precomputed sentence vectors.

    Sentences are keyed by their exact text. Unknown sentences are an error;
    there is no fallback vector.
    """

    kind = "precomputed"

    def __init__(self, vectors: dict[str, np.ndarray], d_base: int):
        self.d_base = int(d_base)
        self._vectors = {}
        for text, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64).reshape(-1)
            if arr.size != self.d_base:
                raise ValueError(
                    f"vector for {text!r} has dimension {arr.size}, expected {self.d_base}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"vector for {text!r} has non-finite components")
            arr.flags.writeable = False
            self._vectors[text] = arr

    def __len__(self):
        return len(self._vectors)

    def __contains__(self, text):
        return text in self._vectors

    def base_vector(self, sentence: str) -> np.ndarray:
        if not isinstance(sentence, str):
            raise TypeError("precomputed vectors are keyed by exact sentence text")
        try:
            return self._vectors[sentence]
        except KeyError:
            raise KeyError(f"no precomputed vector for sentence: {sentence!r}") from None

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        return {}


class BagEncoder:
    """Trainable base encoder: hash tokens into buckets and average their rows.

    The hashing trick replaces a vocabulary file; bucket assignment uses
    blake2b so it is stable across runs and platforms. Repeated tokens count
    once per occurrence in the average.
    """

    kind = "bag"

    def __init__(self, table: np.ndarray):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2:
            raise ValueError("bag table must be 2-D (buckets x d_base)")
        if not np.all(np.isfinite(table)):
            raise ValueError("bag table has non-finite entries")
        self.table = table
        self.vocab_buckets, self.d_base = table.shape

    def bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.vocab_buckets

    def bucket_indices(self, sentence) -> np.ndarray:
        tokens = tokenize(sentence) if isinstance(sentence, str) else list(sentence)
        if not tokens:
            raise ValueError("cannot encode an empty token sequence")
        return np.array([self.bucket(t) for t in tokens], dtype=np.intp)

    def base_vector(self, sentence) -> np.ndarray:
        return self.table[self.bucket_indices(sentence)].mean(axis=0)

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        return {"table": self.table}


@dataclass
class ProjectionHeads:
    """Two distinct linear layers: one for the mean, one for the variance.

    ``w_mean``/``w_var`` are (d_base, d); biases are (d,). The variance head's
    output goes through the named positivity transform (only "softplus" is
    supported) plus ``VARIANCE_EPSILON``.
    """

    w_mean: np.ndarray
    b_mean: np.ndarray
    w_var: np.ndarray
    b_var: np.ndarray
    variance_activation: str = "softplus"

    def __post_init__(self):
        self.w_mean = np.asarray(self.w_mean, dtype=np.float64)
        self.b_mean = np.asarray(self.b_mean, dtype=np.float64).reshape(-1)
        self.w_var = np.asarray(self.w_var, dtype=np.float64)
        self.b_var = np.asarray(self.b_var, dtype=np.float64).reshape(-1)
        if self.w_mean.shape != self.w_var.shape:
            raise ValueError("mean and variance heads must share (d_base, d)")
        if self.w_mean is self.w_var or self.b_mean is self.b_var:
            raise ValueError("mean and variance heads must be distinct parameter sets")
        d_base, d = self.w_mean.shape
        if self.b_mean.size != d or self.b_var.size != d:
            raise ValueError("bias dimension does not match head output dimension")
        if self.variance_activation != "softplus":
            raise ValueError(f"unknown variance activation: {self.variance_activation}")
        for arr in (self.w_mean, self.b_mean, self.w_var, self.b_var):
            if not np.all(np.isfinite(arr)):
                raise ValueError("head parameters must be finite")

    @property
    def d_base(self) -> int:
        return self.w_mean.shape[0]

    @property
    def dim(self) -> int:
        return self.w_mean.shape[1]

    def project(self, v: np.ndarray):
        """Map base vectors (d_base,) or (n, d_base) to (mean, variance)."""
        mean = v @ self.w_mean + self.b_mean
        variance = softplus(v @ self.w_var + self.b_var) + VARIANCE_EPSILON
        return mean, variance

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        return {
            "w_mean": self.w_mean,
            "b_mean": self.b_mean,
            "w_var": self.w_var,
            "b_var": self.b_var,
        }


def encode(sentence, base, heads: ProjectionHeads) -> GaussianEmbedding:
    """Encode one sentence (text, or a pre-tokenized sequence for the bag encoder)."""
    v = base.base_vector(sentence)
    if v.shape[-1] != heads.d_base:
        raise ValueError(
            f"base vector dimension {v.shape[-1]} does not match heads ({heads.d_base})"
        )
    mean, variance = heads.project(v)
    return GaussianEmbedding(mean, variance)


def init_heads(d_base: int, dim: int, rng: np.random.Generator) -> ProjectionHeads:
    """Mean-zero uniform weights with half-width sqrt(6 / (d_base + d)); zero biases."""
    half = np.sqrt(6.0 / (d_base + dim))
    return ProjectionHeads(
        w_mean=rng.uniform(-half, half, size=(d_base, dim)),
        b_mean=np.zeros(dim),
        w_var=rng.uniform(-half, half, size=(d_base, dim)),
        b_var=np.zeros(dim),
    )


def init_bag_encoder(
    vocab_buckets: int, d_base: int, dim: int, rng: np.random.Generator
) -> BagEncoder:
    # Same half-width as the heads keeps initial embeddings on a sane scale.
    half = np.sqrt(6.0 / (d_base + dim))
    return BagEncoder(rng.uniform(-half, half, size=(vocab_buckets, d_base)))


@dataclass
class SentenceModel:
    """A base encoder paired with projection heads; the unit the evals consume."""

    base: PrecomputedProvider | BagEncoder
    heads: ProjectionHeads

    def encode(self, sentence) -> GaussianEmbedding:
        return encode(sentence, self.base, self.heads)

    def trainable_params(self) -> dict[str, np.ndarray]:
        """Live references to every trainable array (base first, then heads)."""
        params = dict(self.base.trainable_arrays())
        params.update(self.heads.trainable_arrays())
        return params


def new_bag_model(
    d_base: int = DEFAULT_D_BASE,
    dim: int = DEFAULT_DIM,
    vocab_buckets: int = DEFAULT_VOCAB_BUCKETS,
    seed: int = 0,
) -> SentenceModel:
    """Freshly initialized bag-encoder model; all randomness comes from ``seed``."""
    init_ss, _ = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(init_ss)
    base = init_bag_encoder(vocab_buckets, d_base, dim, rng)
    heads = init_heads(d_base, dim, rng)
    return SentenceModel(base=base, heads=heads)


def new_precomputed_model(
    provider: PrecomputedProvider, dim: int = DEFAULT_DIM, seed: int = 0
) -> SentenceModel:
    init_ss, _ = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(init_ss)
    heads = init_heads(provider.d_base, dim, rng)
    return SentenceModel(base=provider, heads=heads)
