"""Command-line entry point.

Every subcommand prints one JSON summary line on stdout; logs go to
stderr.  Exit status: 0 success, 1 usage error, 2 data error, 3 provider
or remote-scorer error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from .config import PipelineConfig, load_config, parse_override
from .decode import DecodeConfig, DecodeError, RemoteScorer, count_ngrams, decode_trajectory, reference_scorer
from .dump import DumpParseError
from .metrics import corpus_gleu, evaluate_m2, read_m2
from .noising import extract_edit_rules, write_rules
from .pipeline import (
    AtomicOutput,
    DevExample,
    corpus_stats,
    read_pairs,
    read_sentences,
    run_build_rtt,
    run_extract_revisions,
    sample_dev_set,
    tune_threshold,
)
from .rtt import ProviderError
from .subword import DEFAULT_VOCAB_SIZE, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PROVIDER = 0, 1, 2, 3

log = logging.getLogger("wikigec")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _resolve_config(args) -> PipelineConfig:
    overrides = {}
    for item in args.set or []:
        try:
            key, value = parse_override(item)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        overrides[key] = value
    if args.seed is not None:
        overrides["global_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    try:
        return load_config(args.config, overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from exc


def _scorer(args, config: PipelineConfig):
    if args.endpoint:
        return RemoteScorer(args.endpoint)
    if not (args.rules and args.lm):
        raise UsageError("give --endpoint, or both --rules and --lm for the local reference scorer")
    with open(args.rules, encoding="utf-8") as fh:
        table = json.load(fh)
    counts = count_ngrams(read_sentences(args.lm))
    return reference_scorer(table, counts, edit_penalty=args.edit_penalty)


def _read_dev(path: str) -> List[DevExample]:
    if path.endswith(".m2"):
        with open(path, encoding="utf-8") as fh:
            return [DevExample(" ".join(s.source), [], s.gold_lists()) for s in read_m2(fh)]
    dev = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                refs = rec.get("references") or [rec["target"]]
                dev.append(DevExample(rec["source"], list(refs)))
    return dev


# --- subcommands ----------------------------------------------------------------

def cmd_extract_revisions(args, config):
    return run_extract_revisions(config, args.dump, args.output, args.identity_output)


def cmd_build_rtt(args, config):
    return run_build_rtt(config, args.input, args.output)


def cmd_train_subword(args, config):
    model = train(read_sentences(args.input), args.vocab_size)
    model.save(args.output)
    return {"command": "train-subword", "merges": len(model.merges), "vocab_size": model.vocab_size, "config_hash": config.digest()}


def cmd_extract_rules(args, config):
    rules = extract_edit_rules([(p.source, p.target) for p in read_pairs(args.input)])
    with AtomicOutput(args.output) as out:
        write_rules(rules, out)
    return {"command": "extract-rules", "rules": len(rules), "config_hash": config.digest()}


def cmd_decode(args, config):
    scorer = _scorer(args, config)
    d = config.decode
    dcfg = DecodeConfig(beam=d.beam, threshold=d.threshold, max_iter=d.max_iter)
    n = changed = 0
    with AtomicOutput(args.output) as out:
        for source in read_sentences(args.input):
            traj = decode_trajectory(source, scorer, dcfg)
            out.write(json.dumps({"source": source, "output": traj[-1], "iterations": len(traj) - 1}, ensure_ascii=False) + "\n")
            n += 1
            changed += traj[-1] != source
    return {"command": "decode", "sentences": n, "changed": changed, "config_hash": config.digest()}


def cmd_tune_threshold(args, config):
    dev = _read_dev(args.dev)
    if args.sample_size:
        dev = sample_dev_set(dev, args.sample_size, args.modified_fraction, config.global_seed)
    if not args.thresholds or not args.iterations:
        raise UsageError("threshold and iteration grids must be non-empty")
    result = tune_threshold(dev, _scorer(args, config), config.decode.beam, args.thresholds, args.iterations, args.metric)
    return {
        "command": "tune-threshold",
        "best_threshold": result.threshold,
        "best_iterations": result.iterations,
        "score": result.score,
        "table": result.table,
        "dev_size": len(dev),
        "config_hash": config.digest(),
    }


def cmd_evaluate(args, config):
    hyps = [line.rstrip("\n").split() for line in open(args.hyp, encoding="utf-8")]
    summary = {"command": "evaluate", "config_hash": config.digest()}
    if args.m2:
        with open(args.m2, encoding="utf-8") as fh:
            gold = read_m2(fh)
        summary.update(evaluate_m2(hyps, gold, args.beta).as_dict())
    if args.refs:
        if not args.source:
            raise UsageError("GLEU needs --source alongside --refs")
        sources = [line.split() for line in open(args.source, encoding="utf-8")]
        ref_sets = [[line.split() for line in open(p, encoding="utf-8")] for p in args.refs]
        refs = [list(r) for r in zip(*ref_sets)]
        summary["gleu"] = 100.0 * corpus_gleu(sources, hyps, refs)
    if not args.m2 and not args.refs:
        raise UsageError("give --m2 and/or --refs")
    return summary


def cmd_stats(args, config):
    return corpus_stats(args.corpus)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value (dotted key); repeatable")
    common.add_argument("--seed", type=int, help="shorthand for --set global_seed=N")
    common.add_argument("--workers", type=int, help="shorthand for --set workers=N")
    common.add_argument("-v", "--verbose", action="store_true")

    scoring = argparse.ArgumentParser(add_help=False)
    scoring.add_argument("--endpoint", help="remote n-best scorer URL")
    scoring.add_argument("--rules", help="JSON {wrong phrase: [right phrases]} for the local reference scorer")
    scoring.add_argument("--lm", help="plain-text sentences for the reference scorer's bigram LM")
    scoring.add_argument("--edit-penalty", type=float, default=0.5)

    parser = _Parser(prog="wikigec", description="Build GEC training corpora from revision history and round-trip translation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract-revisions", parents=[common], help="dump -> example pairs JSONL")
    p.add_argument("--dump", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--identity-output", help="also write dropped identity targets (RTT input)")
    p.set_defaults(func=cmd_extract_revisions)

    p = sub.add_parser("build-rtt", parents=[common], help="clean sentences -> round-trip pairs JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_build_rtt)

    p = sub.add_parser("train-subword", parents=[common], help="learn BPE merges from plain text")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--vocab-size", type=int, default=DEFAULT_VOCAB_SIZE)
    p.set_defaults(func=cmd_train_subword)

    p = sub.add_parser("extract-rules", parents=[common], help="mine edit rules from example pairs JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_extract_rules)

    p = sub.add_parser("decode", parents=[common, scoring], help="iteratively decode plain-text sentences")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("tune-threshold", parents=[common, scoring], help="grid search threshold and iteration count")
    p.add_argument("--dev", required=True, help="JSONL with source and target/references, or an .m2 file")
    p.add_argument("--thresholds", type=_floats, default=[0.9, 0.95, 1.0])
    p.add_argument("--iterations", type=_ints, default=[1, 2, 3, 4, 5])
    p.add_argument("--metric", choices=["f0.5", "gleu"], default="f0.5")
    p.add_argument("--sample-size", type=int, help="draw a dev subset of this size")
    p.add_argument("--modified-fraction", type=float, default=0.5, help="share of modified sentences in the subset")
    p.set_defaults(func=cmd_tune_threshold)

    p = sub.add_parser("evaluate", parents=[common], help="score hypotheses with edit F-beta and/or GLEU")
    p.add_argument("--hyp", required=True)
    p.add_argument("--m2")
    p.add_argument("--source")
    p.add_argument("--refs", nargs="+")
    p.add_argument("--beta", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", parents=[common], help="sentence, word and identity counts of a corpus")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _resolve_config(args)
        summary = args.func(args, config)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (ProviderError, DecodeError) as exc:
        log.error("provider failure: %s", exc)
        return EXIT_PROVIDER
    except (OSError, ValueError, KeyError, DumpParseError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    sys.stdout.flush()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
