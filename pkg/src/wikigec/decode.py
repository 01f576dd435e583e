"""Iterative decoding with a cost-ratio threshold, plus ensemble scoring.

A scorer is anything with ``nbest(input, beam) -> list[Hypothesis]``
ordered by ascending cost, where cost is the negative log probability of
the hypothesis given the input.  :func:`iterative_decode` only ever sees
that interface, so a neural model, the local noisy-channel scorer or a
remote service all plug in the same way.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple

EOS = "</s>"
BOS = "<s>"
GEOMETRIC = "geometric"
ARITHMETIC = "arithmetic"


class DecodeError(RuntimeError):
    def __init__(self, message: str, iteration: Optional[int] = None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class Hypothesis:
    text: str
    cost: float


class Scorer(Protocol):
    def nbest(self, input: str, beam: int) -> List[Hypothesis]: ...


@dataclass(frozen=True)
class DecodeConfig:
    beam: int = 4
    threshold: float = 1.0
    max_iter: int = 5

    def __post_init__(self):
        if self.beam < 1:
            raise ValueError("beam must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")


def _ratio(non_identity: float, identity: float) -> float:
    if identity == 0.0:
        return math.nan if non_identity == 0.0 else math.inf
    return non_identity / identity


def select(input: str, nbest: Iterable[Hypothesis], threshold: float) -> str:
    """One decoding step: keep ``input`` unless the best rewrite is confidently cheaper."""
    c_identity = math.inf
    c_rewrite = math.inf
    rewrite = None
    for hyp in nbest:
        if hyp.text == input:
            c_identity = hyp.cost
        elif hyp.cost < c_rewrite:
            c_rewrite = hyp.cost
            rewrite = hyp.text
    if rewrite is not None and _ratio(c_rewrite, c_identity) < threshold:
        return rewrite
    return input


def decode_trajectory(input: str, scorer: Scorer, config: DecodeConfig) -> List[str]:
    """Input followed by each iteration's output; stops early at a fixpoint."""
    trajectory = [input]
    current = input
    for i in range(1, config.max_iter + 1):
        try:
            nbest = scorer.nbest(current, config.beam)
        except Exception as exc:
            raise DecodeError(f"scorer failed: {exc}", iteration=i) from exc
        output = select(current, nbest, config.threshold)
        if output == current:
            break
        trajectory.append(output)
        current = output
    return trajectory


def iterative_decode(input: str, scorer: Scorer, config: DecodeConfig = DecodeConfig()) -> str:
    return decode_trajectory(input, scorer, config)[-1]


class StepDistribution(dict):
    """Next-token probabilities; values are non-negative and sum to one."""

    def __init__(self, probabilities: Mapping[str, float], tol: float = 1e-9):
        super().__init__(probabilities)
        if any(p < 0 for p in self.values()):
            raise ValueError("negative probability")
        total = math.fsum(self.values())
        if abs(total - 1.0) > tol:
            raise ValueError(f"probabilities sum to {total}, not 1")


def ensemble_distributions(dists: Sequence[Mapping[str, float]], mode: str = GEOMETRIC) -> StepDistribution:
    """Combine member distributions by elementwise geometric (renormalized) or arithmetic mean."""
    if not dists:
        raise ValueError("no distributions to combine")
    keys = list(dists[0])
    if any(set(d) != set(keys) for d in dists[1:]):
        raise ValueError("distributions are over different token sets")
    if len(dists) == 1:
        return StepDistribution(dists[0])
    k = len(dists)
    if mode == ARITHMETIC:
        return StepDistribution({t: math.fsum(d[t] for d in dists) / k for t in keys})
    if mode != GEOMETRIC:
        raise ValueError(f"unknown ensemble mode {mode!r}")
    raw = {}
    for t in keys:
        if any(d[t] == 0.0 for d in dists):
            raw[t] = 0.0
        else:
            raw[t] = math.exp(math.fsum(math.log(d[t]) for d in dists) / k)
    z = math.fsum(raw.values())
    if z == 0.0:
        raise ValueError("geometric mean is zero for every token")
    return StepDistribution({t: v / z for t, v in raw.items()})


class SequenceModel(Protocol):
    def step(self, source: str, prefix: Tuple[str, ...]) -> Mapping[str, float]: ...


def beam_search(model: SequenceModel, source: str, beam: int, max_len: Optional[int] = None) -> List[Hypothesis]:
    """Token-level beam search over ``model.step``; returns finished hypotheses by ascending cost."""
    if max_len is None:
        max_len = 2 * len(source.split()) + 5
    live: List[Tuple[float, Tuple[str, ...]]] = [(0.0, ())]
    finished: List[Tuple[float, Tuple[str, ...]]] = []
    for _ in range(max_len + 1):
        candidates = []
        for cost, prefix in live:
            for token, p in model.step(source, prefix).items():
                if p <= 0.0:
                    continue
                step_cost = cost - math.log(p)
                if token == EOS:
                    finished.append((step_cost, prefix))
                else:
                    candidates.append((step_cost, prefix + (token,)))
        candidates.sort()
        live = candidates[:beam]
        finished.sort()
        finished = finished[:beam]
        if not live or (len(finished) >= beam and live[0][0] >= finished[-1][0]):
            break
    else:
        finished.extend(live)
        finished.sort()
        finished = finished[:beam]
    return [Hypothesis(" ".join(tokens), max(cost, 0.0)) for cost, tokens in finished]


class BeamSearchScorer:
    """Scorer view of a step-wise :class:`SequenceModel`."""

    def __init__(self, model: SequenceModel, max_len: Optional[int] = None):
        self.model = model
        self.max_len = max_len

    def step(self, source: str, prefix: Tuple[str, ...]) -> Mapping[str, float]:
        return self.model.step(source, prefix)

    def nbest(self, input: str, beam: int) -> List[Hypothesis]:
        return beam_search(self.model, input, beam, self.max_len)


class EnsembleModel:
    def __init__(self, members: Sequence[SequenceModel], mode: str = GEOMETRIC):
        if not members:
            raise ValueError("ensemble needs at least one member")
        self.members = list(members)
        self.mode = mode

    def step(self, source: str, prefix: Tuple[str, ...]) -> StepDistribution:
        return ensemble_distributions([m.step(source, prefix) for m in self.members], self.mode)


def ensemble_scorer(members: Sequence[SequenceModel], mode: str = GEOMETRIC, max_len: Optional[int] = None) -> BeamSearchScorer:
    """One shared beam over the combined per-step distributions of ``members``."""
    return BeamSearchScorer(EnsembleModel(members, mode), max_len)


def count_ngrams(sentences: Iterable[str]) -> Counter:
    """Unigram and bigram counts with sentence boundary markers."""
    counts: Counter = Counter()
    for sentence in sentences:
        tokens = [BOS] + sentence.split() + [EOS]
        counts.update((t,) for t in tokens)
        counts.update(zip(tokens, tokens[1:]))
    return counts


class BigramLM:
    """Add-k smoothed bigram model: P(w | v) = (C(v w) + k) / (C(v) + k V).

    V is the number of distinct unigram types other than ``<s>``.
    """

    def __init__(self, counts: Mapping[tuple, int], k: float = 1.0):
        self.counts = Counter(counts)
        self.k = k
        self.vocab_size = max(1, len({g[0] for g in self.counts if len(g) == 1 and g[0] != BOS} | {EOS}))

    def logprob(self, sentence: str) -> float:
        tokens = [BOS] + sentence.split() + [EOS]
        total = 0.0
        for v, w in zip(tokens, tokens[1:]):
            num = self.counts[(v, w)] + self.k
            den = self.counts[(v,)] + self.k * self.vocab_size
            total += math.log(num / den)
        return total


class NoisyChannelScorer:
    """Candidate rewrites from a phrase table, costed by a bigram LM and a per-edit channel penalty.

    cost(H) = -log(P_lm(H) * edit_penalty ** edits(H)).  The unedited
    input is always among the candidates.
    """

    def __init__(self, rule_table: Mapping[str, Iterable[str]], lm: BigramLM, edit_penalty: float = 0.5, max_edits: int = 2):
        if not 0.0 < edit_penalty <= 1.0:
            raise ValueError("edit_penalty must lie in (0, 1]")
        self.rules: Dict[Tuple[str, ...], List[Tuple[str, ...]]] = {}
        for wrong, rights in rule_table.items():
            if isinstance(rights, str):
                rights = [rights]
            self.rules[tuple(wrong.split())] = [tuple(r.split()) for r in rights]
        self.lm = lm
        self.edit_cost = -math.log(edit_penalty)
        self.max_edits = max_edits

    def _sites(self, tokens: Sequence[str]):
        sites = []
        for i in range(len(tokens)):
            for wrong, rights in self.rules.items():
                if tuple(tokens[i:i + len(wrong)]) == wrong:
                    sites.extend((i, i + len(wrong), r) for r in rights)
        return sites

    def cost(self, text: str, edits: int) -> float:
        return max(0.0, -self.lm.logprob(text) + edits * self.edit_cost)

    def nbest(self, input: str, beam: int) -> List[Hypothesis]:
        tokens = input.split()
        sites = self._sites(tokens)
        best: Dict[str, float] = {input: self.cost(input, 0)}
        for r in range(1, min(self.max_edits, len(sites)) + 1):
            for combo in combinations(sites, r):
                spans = sorted(combo)
                if any(a[1] > b[0] for a, b in zip(spans, spans[1:])):
                    continue
                out: List[str] = []
                last = 0
                for start, end, right in spans:
                    out.extend(tokens[last:start])
                    out.extend(right)
                    last = end
                out.extend(tokens[last:])
                text = " ".join(out)
                c = self.cost(text, r)
                if c < best.get(text, math.inf):
                    best[text] = c
        ranked = sorted(best.items(), key=lambda kv: (kv[1], kv[0]))
        return [Hypothesis(t, c) for t, c in ranked[:beam]]


def reference_scorer(rule_table: Mapping[str, Iterable[str]], language_model_counts: Mapping[tuple, int], **kwargs) -> NoisyChannelScorer:
    return NoisyChannelScorer(rule_table, BigramLM(language_model_counts), **kwargs)


class RemoteScorer:
    """Client for ``POST {"input", "beam"} -> {"nbest": [{"text", "cost"}]}``."""

    def __init__(self, endpoint: str, timeout: float = 60.0, session=None):
        import requests

        self.endpoint = endpoint
        self.timeout = timeout
        self._session = session or requests.Session()

    def nbest(self, input: str, beam: int) -> List[Hypothesis]:
        resp = self._session.post(self.endpoint, json={"input": input, "beam": beam}, timeout=self.timeout)
        resp.raise_for_status()
        hyps = [Hypothesis(h["text"], float(h["cost"])) for h in resp.json()["nbest"]]
        hyps.sort(key=lambda h: h.cost)
        return hyps[:beam]
