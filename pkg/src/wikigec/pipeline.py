"""End-to-end pipelines behind the command-line subcommands."""
from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field
from itertools import islice
from typing import IO, Dict, Iterable, List, Optional, Sequence, Tuple

from ._rng import make_rng
from .config import PipelineConfig
from .decode import DecodeConfig, Scorer, decode_trajectory
from .dump import DumpStats, Page, sample_revision_pairs, stream_pages
from .extract import extract_examples, filter_example
from .metrics import Edit, corpus_gleu, extract_edits, score_edits
from .noising import corrupt_spelling, downsample_identities, read_rules
from .records import ExamplePair, read_jsonl, write_jsonl
from .rtt import HttpProvider, MockProvider, RttConfig, RttStats, build_rtt_corpus
from .subword import SubwordModel

logger = logging.getLogger(__name__)

_BATCH = 32


class AtomicOutput:
    """Write to ``<path>.partial`` and rename on success; a failed run leaves the marker file behind."""

    def __init__(self, path: str):
        self.path = path
        self.partial = path + ".partial"
        self.fh: Optional[IO[str]] = None

    def __enter__(self) -> IO[str]:
        self.fh = open(self.partial, "w", encoding="utf-8", newline="\n")
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.partial, self.path)
        return False


# --- revision extraction -------------------------------------------------

_worker_tokenizer: Optional[SubwordModel] = None


def _init_worker(model_path: Optional[str]) -> None:
    global _worker_tokenizer
    _worker_tokenizer = SubwordModel.load(model_path) if model_path else None


@dataclass
class PageResult:
    examples: List[ExamplePair] = field(default_factory=list)
    dropped_identity_targets: List[str] = field(default_factory=list)
    revision_pairs: int = 0
    examples_cut: int = 0
    filtered: int = 0
    identities_dropped: int = 0


def process_page(page: Page, config: PipelineConfig, tokenizer: Optional[SubwordModel] = None) -> PageResult:
    """Sample revision pairs of one page and turn them into filtered, noised example pairs.

    Per pair: extract + align + cut, drop over-long or over-edited
    examples, downsample identities, then add spelling noise to the
    source side.  Every random draw is keyed by (seed, page, revision).
    """
    seed = config.global_seed
    ex = config.extract
    noise = config.noise.build()
    result = PageResult()
    for pair in sample_revision_pairs(page, config.ingest.downsample_base, seed):
        result.revision_pairs += 1
        older, newer = pair.older, pair.newer
        key = (seed, page.page_id, older.revision_id)
        cut = extract_examples(
            older.text, newer.text, ex.p_cut, key + (0,),
            page_id=page.page_id, older_rev=older.revision_id, newer_rev=newer.revision_id,
        )
        result.examples_cut += len(cut)
        kept = [e for e in cut if filter_example(e, ex.max_wordpieces, ex.max_edit_distance, tokenizer)]
        result.filtered += len(cut) - len(kept)
        sampled = list(downsample_identities(kept, config.keep_prob, key + (1,)))
        survivors = set(map(id, sampled))
        for e in kept:
            if e.is_identity and id(e) not in survivors:
                result.identities_dropped += 1
                result.dropped_identity_targets.append(e.target)
        for i, e in enumerate(sampled):
            noisy = corrupt_spelling(e.source, noise, key + (2, i))
            result.examples.append(ExamplePair(noisy, e.target, e.page_id, e.older_rev, e.newer_rev, e.provenance))
    return result


def _process_in_worker(args):
    page, config = args
    return process_page(page, config, _worker_tokenizer)


def _batches(it: Iterable, n: int):
    it = iter(it)
    while True:
        chunk = list(islice(it, n))
        if not chunk:
            return
        yield chunk


def _corpus_counts(examples: Sequence[ExamplePair]) -> Tuple[int, int, int]:
    return len(examples), sum(len(e.target.split()) for e in examples), sum(e.is_identity for e in examples)


def run_extract_revisions(
    config: PipelineConfig,
    dump_path: str,
    output_path: str,
    identity_output: Optional[str] = None,
) -> dict:
    """dump -> sampled revision pairs -> example pairs JSONL.  ``dump_path`` may be ``-`` for stdin.  Returns the summary record."""
    stats = DumpStats()
    totals = {"revision_pairs": 0, "examples_cut": 0, "examples_filtered": 0, "identities_dropped": 0}
    sentences = words = identities = 0
    model_path = config.extract.subword_model

    def consume(results: Iterable[PageResult], out: IO[str], ident: Optional[IO[str]]):
        nonlocal sentences, words, identities
        for res in results:
            totals["revision_pairs"] += res.revision_pairs
            totals["examples_cut"] += res.examples_cut
            totals["examples_filtered"] += res.filtered
            totals["identities_dropped"] += res.identities_dropped
            write_jsonl(res.examples, out)
            n, w, i = _corpus_counts(res.examples)
            sentences, words, identities = sentences + n, words + w, identities + i
            if ident is not None:
                for t in res.dropped_identity_targets:
                    ident.write(t + "\n")

    with ExitStack() as stack:
        dump = sys.stdin.buffer if dump_path == "-" else stack.enter_context(open(dump_path, "rb"))
        out = stack.enter_context(AtomicOutput(output_path))
        ident = stack.enter_context(AtomicOutput(identity_output)) if identity_output else None
        pages = stream_pages(dump, config.ingest.max_page_bytes, stats)
        if config.workers <= 1:
            _init_worker(model_path)
            consume((process_page(p, config, _worker_tokenizer) for p in pages), out, ident)
        else:
            with ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(model_path,)) as pool:
                for batch in _batches(pages, _BATCH * config.workers):
                    consume(pool.map(_process_in_worker, [(p, config) for p in batch]), out, ident)
    return {
        "command": "extract-revisions",
        **stats.as_dict(),
        **totals,
        "examples_written": sentences,
        "sentences": sentences,
        "words": words,
        "identity_fraction": identities / sentences if sentences else 0.0,
        "config_hash": config.digest(),
    }


# --- round-trip corpus -------------------------------------------------------

def load_mock_table(path: Optional[str]) -> Dict[Tuple[str, str], Dict[str, str]]:
    """JSON object keyed ``"src-tgt"`` (e.g. ``"en-ja"``) mapping phrases to phrases."""
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return {tuple(k.split("-", 1)): v for k, v in raw.items()}


def make_provider(config: PipelineConfig):
    rtt = config.rtt
    if rtt.provider == "mock":
        return MockProvider(load_mock_table(rtt.mock_table))
    if rtt.provider == "http":
        if not rtt.endpoint:
            raise ValueError("rtt.endpoint is required for the http provider")
        return HttpProvider(rtt.endpoint)
    raise ValueError(f"unknown provider {rtt.provider!r}")


def rtt_config(config: PipelineConfig) -> RttConfig:
    rules = []
    if config.rtt.edit_rules:
        with open(config.rtt.edit_rules, encoding="utf-8") as fh:
            rules = read_rules(fh)
    return RttConfig(config.rtt.bridge_lang, config.rtt.identity_fraction, config.rtt.noise.build(), rules)


def read_sentences(path: str) -> List[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def run_build_rtt(config: PipelineConfig, sentences_path: str, output_path: str, provider=None) -> dict:
    provider = provider if provider is not None else make_provider(config)
    rcfg = rtt_config(config)
    stats = RttStats()
    sentences = read_sentences(sentences_path)
    with AtomicOutput(output_path) as out:
        pairs = build_rtt_corpus(
            sentences, rcfg, provider, config.global_seed, stats, max_workers=max(config.rtt.max_in_flight, config.workers)
        )
        write_jsonl(pairs, out)
    return {"command": "build-rtt", **stats.as_dict(), "config_hash": config.digest()}


# --- threshold tuning -------------------------------------------------------

@dataclass
class DevExample:
    source: str
    references: List[str]
    gold_edits: Optional[List[List[Edit]]] = None

    def gold(self) -> List[List[Edit]]:
        if self.gold_edits is not None:
            return self.gold_edits
        src = self.source.split()
        return [extract_edits(src, r.split()) for r in self.references]

    @property
    def modified(self) -> bool:
        return any(self.gold())


@dataclass
class TuneResult:
    threshold: float
    iterations: int
    score: float
    table: List[dict]


def corpus_score(dev: Sequence[DevExample], outputs: Sequence[str], metric: str) -> float:
    if metric in ("f0.5", "m2"):
        system = [extract_edits(d.source.split(), o.split()) for d, o in zip(dev, outputs)]
        return score_edits(system, [d.gold() for d in dev], 0.5).f_beta
    if metric == "gleu":
        return corpus_gleu(
            [d.source.split() for d in dev],
            [o.split() for o in outputs],
            [[r.split() for r in d.references] for d in dev],
        )
    raise ValueError(f"unknown metric {metric!r}")


def tune_threshold(
    dev: Sequence[DevExample],
    scorer: Scorer,
    beam: int,
    thresholds: Sequence[float],
    iterations: Sequence[int],
    metric: str = "f0.5",
) -> TuneResult:
    """Grid search over (threshold, iteration count).

    Each threshold decodes the dev set once up to the largest iteration
    count; smaller counts read off the same trajectories.  Ties go to the
    smallest threshold, then the fewest iterations.
    """
    if not thresholds or not iterations:
        raise ValueError("threshold and iteration grids must be non-empty")
    max_iter = max(iterations)
    table = []
    best = None
    for t in sorted(set(thresholds)):
        cfg = DecodeConfig(beam=beam, threshold=t, max_iter=max_iter)
        trajectories = [decode_trajectory(d.source, scorer, cfg) for d in dev]
        for m in sorted(set(iterations)):
            outputs = [traj[min(m, len(traj) - 1)] for traj in trajectories]
            score = corpus_score(dev, outputs, metric)
            table.append({"threshold": t, "iterations": m, "score": score})
            if best is None or score > best[0]:
                best = (score, t, m)
    return TuneResult(best[1], best[2], best[0], table)


def sample_dev_set(candidates: Sequence[DevExample], size: int, modified_fraction: float, seed: int = 0) -> List[DevExample]:
    """Draw ``size`` examples whose modified/unmodified mix matches ``modified_fraction``, keeping input order."""
    modified = [i for i, d in enumerate(candidates) if d.modified]
    untouched = [i for i, d in enumerate(candidates) if not d.modified]
    n_mod = min(len(modified), round(size * modified_fraction))
    n_unmod = min(len(untouched), size - n_mod)
    rng = make_rng(seed, "dev-sample")
    picked = []
    if n_mod:
        picked += rng.choice(modified, n_mod, replace=False).tolist()
    if n_unmod:
        picked += rng.choice(untouched, n_unmod, replace=False).tolist()
    return [candidates[i] for i in sorted(picked)]


# --- corpus statistics -------------------------------------------------------

def corpus_stats(path: str) -> dict:
    sentences = words = identities = malformed = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                source, target = rec["source"], rec["target"]
                if not isinstance(source, str) or not isinstance(target, str):
                    raise TypeError
            except (ValueError, KeyError, TypeError):
                malformed += 1
                continue
            sentences += 1
            words += len(target.split())
            identities += source == target
    return {
        "command": "stats",
        "sentences": sentences,
        "words": words,
        "identity_fraction": identities / sentences if sentences else 0.0,
        "malformed_lines": malformed,
    }


def read_pairs(path: str) -> List[ExamplePair]:
    with open(path, encoding="utf-8") as fh:
        return list(read_jsonl(fh))
