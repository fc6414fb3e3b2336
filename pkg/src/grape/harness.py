"""Dataset manifests, splitting, the training loop, and evaluation."""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .embedding import (DegenerateSampleError, EmbeddedGraph, VocabEmbedding,
                        embed_graph, node_token_parts, train_skipgram)
from .graphs import import_graph_json
from .metrics import MetricsReport, SEVERITY_BANDS, compute_metrics, severity_band
from .model import NEGCN, Adamax, TrainConfig, loss_and_grads

log = logging.getLogger("grape")


class DatasetError(Exception):
    pass


@dataclass
class Sample:
    id: str
    mcpg_path: str
    label_binary: str  # "fix" | "nonfix"
    cwe_label: int | None = None
    cvss_score: float | None = None

    def __post_init__(self):
        if self.label_binary not in ("fix", "nonfix"):
            raise DatasetError(f"sample {self.id}: bad label {self.label_binary!r}")
        if self.label_binary == "nonfix" and (self.cwe_label is not None
                                              or self.cvss_score is not None):
            raise DatasetError(f"sample {self.id}: nonfix samples carry no CWE/CVSS")
        if self.cwe_label is not None and not 0 <= self.cwe_label < 7:
            raise DatasetError(f"sample {self.id}: cwe label outside [0, 7)")


def load_manifest(path) -> list[Sample]:
    samples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rec = json.loads(line)
                samples.append(Sample(rec["id"], rec["mcpg"], rec["label"],
                                      rec.get("cwe"), rec.get("cvss")))
            except (KeyError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad manifest record: {exc}") from exc
    return samples


def write_manifest(samples: list[Sample], path) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps({"id": s.id, "mcpg": s.mcpg_path,
                                 "label": s.label_binary, "cwe": s.cwe_label,
                                 "cvss": s.cvss_score}) + "\n")


def task_label(sample: Sample, task: str) -> int | None:
    if task == "binary":
        return 1 if sample.label_binary == "fix" else 0
    if task == "cwe":
        return sample.cwe_label
    if task == "severity":
        if sample.cvss_score is None:
            return None
        return SEVERITY_BANDS.index(severity_band(sample.cvss_score))
    raise ValueError(f"unknown task {task!r}")


def split_dataset(samples: list, labels: list[int], seed: int) -> tuple[list, list]:
    """Seeded stratified 4:1 split; |train| = round(0.8 n).  Classes with a
    single member go entirely to train with a warning."""
    n = len(samples)
    if n < 5:
        raise DatasetError(f"need at least 5 samples to split, got {n}")
    rng = np.random.default_rng(seed)
    target_train = round(0.8 * n)
    by_label: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        by_label.setdefault(lab, []).append(i)

    train_idx: list[int] = []
    test_idx: list[int] = []
    flexible = []  # (label, members, n_train) for classes that can shift by one
    for lab in sorted(by_label):
        members = list(by_label[lab])
        rng.shuffle(members)
        if len(members) < 2:
            log.warning("class %s has < 2 members; placed entirely in train", lab)
            train_idx.extend(members)
            continue
        n_train = int(0.8 * len(members))
        n_train = min(max(n_train, 1), len(members) - 1)
        flexible.append([lab, members, n_train])
    delta = target_train - (len(train_idx) + sum(f[2] for f in flexible))
    order = sorted(flexible, key=lambda f: 0.8 * len(f[1]) - int(0.8 * len(f[1])),
                   reverse=(delta > 0))
    i = 0
    while delta != 0 and order:
        f = order[i % len(order)]
        if delta > 0 and f[2] < len(f[1]) - 1:
            f[2] += 1
            delta -= 1
        elif delta < 0 and f[2] > 1:
            f[2] -= 1
            delta += 1
        i += 1
        if i > 10 * len(order) + 10:
            break  # constraints make the exact total unreachable
    for lab, members, n_train in flexible:
        train_idx.extend(members[:n_train])
        test_idx.extend(members[n_train:])
    train_idx.sort()
    test_idx.sort()
    return ([samples[i] for i in train_idx], [samples[i] for i in test_idx])


# ---------------------------------------------------------------------------
# Training

@dataclass
class LoadedSample:
    sample: Sample
    graph: EmbeddedGraph
    label: int


@dataclass
class RunResult:
    model: NEGCN
    vocab: VocabEmbedding
    history: list[dict] = field(default_factory=list)
    metrics: MetricsReport | None = None
    train_ids: list[str] = field(default_factory=list)
    test_ids: list[str] = field(default_factory=list)


def build_corpus(graphs, config: TrainConfig) -> list[list[str]]:
    """Token corpus from the training split only: one sentence per node code
    fragment plus one per node type."""
    corpus = []
    for g in graphs:
        for node in g.nodes:
            type_tokens, code_tokens = node_token_parts(
                node, code_cap=10 ** 9, type_cap=10 ** 9)
            if code_tokens:
                corpus.append(code_tokens)
            if type_tokens:
                corpus.append(type_tokens)
    return corpus


def evaluate(model: NEGCN, loaded: list[LoadedSample]) -> MetricsReport:
    c = model.config.n_classes
    conf = np.zeros((c, c), dtype=int)
    for ls in loaded:
        logits = model.forward(ls.graph, mode="eval")
        pred = int(np.argmax(logits.data[0]))
        conf[ls.label, pred] += 1
    return compute_metrics(conf, model.config.task)


def _load_task_samples(samples: list[Sample], config: TrainConfig) -> list[tuple[Sample, int, object]]:
    usable = []
    for s in samples:
        label = task_label(s, config.task)
        if label is None:
            continue
        try:
            graph = import_graph_json(s.mcpg_path)
        except Exception as exc:
            log.warning("skipping unreadable sample %s: %s", s.id, exc)
            continue
        if not graph.nodes:
            log.warning("skipping degenerate (empty) sample %s", s.id)
            continue
        usable.append((s, label, graph))
    if not usable:
        raise DatasetError("no usable samples for task " + config.task)
    return usable


def run_training(config: TrainConfig, samples: list[Sample],
                 seed: int | None = None) -> RunResult:
    """One full training run: split, vocabulary, embedding, epochs."""
    seed = config.seed if seed is None else seed
    usable = _load_task_samples(samples, config)
    labels = [label for (_, label, _) in usable]
    train_raw, test_raw = split_dataset(usable, labels, seed)

    vocab = train_skipgram(build_corpus([g for (_, _, g) in train_raw], config),
                           dim=config.embed_dim, window=config.embed_window,
                           negatives=config.embed_negatives,
                           epochs=config.embed_epochs, lr=config.embed_lr,
                           seed=seed)

    def load(split):
        out = []
        for s, label, graph in split:
            try:
                eg = embed_graph(graph, vocab, config.graph_structure,
                                 config.no_type_embedding, config.code_token_cap,
                                 config.type_token_cap, config.part_dims)
            except DegenerateSampleError:
                log.warning("skipping degenerate sample %s", s.id)
                continue
            out.append(LoadedSample(s, eg, label))
        return out

    train_set = load(train_raw)
    test_set = load(test_raw)
    if not train_set:
        raise DatasetError("all training samples degenerate")

    model = NEGCN(config, np.random.default_rng(seed))
    optimizer = Adamax(model.params)
    shuffle_rng = np.random.default_rng(seed + 1)
    dropout_rng = np.random.default_rng(seed + 2)
    history = []
    for epoch in range(config.epochs):
        lr_t = config.lr * config.lr_gamma ** epoch
        order = np.arange(len(train_set))
        shuffle_rng.shuffle(order)
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [(train_set[i].graph, train_set[i].label)
                     for i in order[start:start + config.batch_size]]
            loss, grads = loss_and_grads(model, batch, "train", dropout_rng)
            optimizer.step(model.params, grads, lr_t)
            losses.append(loss)
        report = evaluate(model, test_set) if test_set else None
        entry = {"epoch": epoch, "lr": lr_t, "train_loss": float(np.mean(losses))}
        if report is not None:
            entry.update(report.as_dict())
        history.append(entry)
        log.info("epoch %d: loss=%.4f%s", epoch, entry["train_loss"],
                 f" test_f1={report.f1:.4f}" if report else "")
    final = evaluate(model, test_set) if test_set else None
    return RunResult(model, vocab, history, final,
                     [ls.sample.id for ls in train_set],
                     [ls.sample.id for ls in test_set])


def train(config: TrainConfig, samples: list[Sample]) -> list[RunResult]:
    """Run ``config.repeats`` independent runs (seeds seed, seed+1000, ...).

    Per-run metrics are all returned; by convention the last run is the
    headline result.
    """
    results = []
    for r in range(max(1, config.repeats)):
        results.append(run_training(config, samples, seed=config.seed + 1000 * r))
    return results


def representations(model: NEGCN, vocab: VocabEmbedding, samples: list[Sample],
                    config: TrainConfig) -> tuple[np.ndarray, list[int], list[str]]:
    """Readout-layer representation of every usable sample, with labels."""
    vecs, labels, ids = [], [], []
    for s, label, graph in _load_task_samples(samples, config):
        try:
            eg = embed_graph(graph, vocab, config.graph_structure,
                             config.no_type_embedding, config.code_token_cap,
                             config.type_token_cap, config.part_dims)
        except DegenerateSampleError:
            continue
        vecs.append(model.represent(eg))
        labels.append(label)
        ids.append(s.id)
    return np.stack(vecs), labels, ids
