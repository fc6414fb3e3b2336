"""Token embeddings and graph feature matrices.

Node text is tokenized, a skip-gram model with negative sampling is trained
over the corpus, and each node becomes the concatenation of a type part and a
code part (token-vector means, type part first).  Edges become fixed
6-dimensional indicator vectors ordered (buggy, fixed, AST, CDG, DDG, CFG).
"""

import json
import re
from dataclasses import dataclass

import numpy as np

from .graphs import CodeGraph, GraphEdge, GraphNode

UNK = "<unk>"
EDGE_TYPE_SLOTS = {"AST": 2, "CDG": 3, "DDG": 4, "CFG": 5}

_TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*|[0-9]+|==|!=|<=|>=|&&|\|\||\S")


class EmbeddingError(Exception):
    pass


class DegenerateSampleError(Exception):
    """Raised for empty graphs that cannot be embedded."""


def tokenize(text: str, lower: bool = True) -> list[str]:
    """Split on whitespace, punctuation, and underscores; punctuation and
    operators become their own tokens.  Code tokens are lowercased; node-type
    tokens keep their case (call with lower=False)."""
    tokens = _TOKEN_RE.findall(text.replace("_", " "))
    return [t.lower() for t in tokens] if lower else tokens


@dataclass
class VocabEmbedding:
    token_index: dict[str, int]
    vectors: np.ndarray  # |V| x dim
    unk_index: int = 0

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.token_index.get(token, self.unk_index)]

    def save(self, path) -> None:
        records = [{"token": t, "vector": self.vectors[i].tolist()}
                   for t, i in self.token_index.items()]
        with open(path, "w") as fh:
            json.dump({"dim": int(self.dim), "unk": UNK, "records": records}, fh)

    @classmethod
    def load(cls, path) -> "VocabEmbedding":
        with open(path) as fh:
            doc = json.load(fh)
        token_index = {}
        vectors = np.zeros((len(doc["records"]), doc["dim"]))
        for i, rec in enumerate(doc["records"]):
            token_index[rec["token"]] = i
            vectors[i] = rec["vector"]
        return cls(token_index, vectors, token_index[doc["unk"]])


def train_skipgram(corpus: list[list[str]], dim: int = 64, window: int = 5,
                   negatives: int = 5, epochs: int = 5, lr: float = 0.025,
                   seed: int = 0) -> VocabEmbedding:
    """Skip-gram with negative sampling, single-threaded and seeded for
    determinism.  Every corpus token enters the vocabulary (min count 1),
    plus a reserved unknown-token entry."""
    sentences = [s for s in corpus if s]
    if not sentences:
        raise EmbeddingError("cannot train on an empty corpus")
    counts: dict[str, int] = {}
    for sent in sentences:
        for tok in sent:
            counts[tok] = counts.get(tok, 0) + 1
    token_index = {UNK: 0}
    for tok in (t for sent in sentences for t in sent):
        if tok not in token_index:
            token_index[tok] = len(token_index)
    vocab_size = len(token_index)

    rng = np.random.default_rng(seed)
    w_in = (rng.random((vocab_size, dim)) - 0.5) / dim
    w_out = np.zeros((vocab_size, dim))

    freq = np.zeros(vocab_size)
    for tok, c in counts.items():
        freq[token_index[tok]] = c
    noise = freq ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    encoded = [[token_index[t] for t in sent] for sent in sentences]
    total = max(1, epochs * sum(len(s) for s in encoded))
    processed = 0
    for _ in range(epochs):
        for sent in encoded:
            for pos, center in enumerate(sent):
                alpha = lr * max(1.0 - processed / total, 1e-4)
                processed += 1
                span = int(rng.integers(1, window + 1))
                for ctx_pos in range(max(0, pos - span), min(len(sent), pos + span + 1)):
                    if ctx_pos == pos:
                        continue
                    context = sent[ctx_pos]
                    targets = [context]
                    labels = [1.0]
                    draws = np.searchsorted(noise_cdf, rng.random(negatives))
                    for t in draws:
                        if t != context:
                            targets.append(int(t))
                            labels.append(0.0)
                    v = w_in[center]
                    grad_v = np.zeros(dim)
                    for t, label in zip(targets, labels):
                        score = 1.0 / (1.0 + np.exp(-np.dot(v, w_out[t])))
                        g = alpha * (label - score)
                        grad_v += g * w_out[t]
                        w_out[t] += g * v
                    w_in[center] += grad_v
    return VocabEmbedding(token_index, w_in, 0)


def node_token_parts(node: GraphNode, code_cap: int = 12,
                     type_cap: int = 4) -> tuple[list[str], list[str]]:
    type_tokens = tokenize(node.type, lower=False)[:type_cap]
    code_tokens = tokenize(node.code, lower=True)[:code_cap]
    return type_tokens, code_tokens


def _mean_vector(tokens: list[str], vocab: VocabEmbedding, out_dim: int) -> np.ndarray:
    if not tokens:
        return np.zeros(out_dim)
    acc = np.zeros(vocab.dim)
    for t in tokens:
        acc += vocab.vector(t)
    return (acc / len(tokens))[:out_dim]


def embed_node(node: GraphNode, vocab: VocabEmbedding, code_cap: int = 12,
               type_cap: int = 4, part_dims: tuple[int, int] | None = None,
               no_type: bool = False) -> np.ndarray:
    """Concatenate the type-part and code-part vectors, type part first.

    ``part_dims`` switches to the compact reading where the type/code parts
    are truncated to (type_dim, code_dim) components instead of capping the
    token counts.
    """
    if node.code == "":
        raise EmbeddingError(
            f"node {node.id} has empty code; simplify should have removed it")
    type_dim, code_dim = part_dims if part_dims else (vocab.dim, vocab.dim)
    type_tokens, code_tokens = node_token_parts(node, code_cap, type_cap)
    type_part = (np.zeros(type_dim) if no_type
                 else _mean_vector(type_tokens, vocab, type_dim))
    code_part = _mean_vector(code_tokens, vocab, code_dim)
    return np.concatenate([type_part, code_part])


def embed_edge(edge: GraphEdge) -> np.ndarray:
    vec = np.zeros(6)
    vec[0] = 1.0 if edge.in_buggy else 0.0
    vec[1] = 1.0 if edge.in_fixed else 0.0
    vec[EDGE_TYPE_SLOTS[edge.type]] = 1.0
    return vec


@dataclass
class EmbeddedGraph:
    node_ids: list[int]
    x: np.ndarray  # N x feature_dim node features
    edge_index: np.ndarray  # |E| x 2 row indices into x
    edge_features: np.ndarray  # |E| x 6

    @property
    def n_nodes(self) -> int:
        return self.x.shape[0]

    def adjacency(self) -> np.ndarray:
        """Symmetric 0/1 adjacency over all edge types (direction dropped)."""
        n = self.n_nodes
        adj = np.zeros((n, n))
        for s, d in self.edge_index:
            adj[s, d] = 1.0
            adj[d, s] = 1.0
        np.fill_diagonal(adj, 0.0)
        return adj


STRUCTURES = {
    "AST": {"AST"},
    "DDG+CDG": {"DDG", "CDG"},
    "CPG": {"AST", "CFG", "CDG", "DDG"},
}


def embed_graph(graph: CodeGraph, vocab: VocabEmbedding, structure: str = "CPG",
                no_type_embedding: bool = False, code_cap: int = 12,
                type_cap: int = 4,
                part_dims: tuple[int, int] | None = None) -> EmbeddedGraph:
    if not graph.nodes:
        raise DegenerateSampleError("graph has no nodes after simplification")
    allowed = STRUCTURES[structure]
    node_ids = sorted(n.id for n in graph.nodes)
    row = {nid: i for i, nid in enumerate(node_ids)}
    by_id = graph.node_by_id()
    x = np.stack([embed_node(by_id[nid], vocab, code_cap, type_cap, part_dims,
                             no_type_embedding) for nid in node_ids])
    pairs = []
    feats = []
    for e in graph.edges:
        if e.type in allowed:
            pairs.append((row[e.src], row[e.dst]))
            feats.append(embed_edge(e))
    edge_index = np.array(pairs, dtype=int).reshape(-1, 2)
    edge_features = (np.stack(feats) if feats else np.zeros((0, 6)))
    return EmbeddedGraph(node_ids, x, edge_index, edge_features)
