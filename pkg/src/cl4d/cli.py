"""Command-line entry point: ``cl4d <subcommand> ...``.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import time

import numpy as np

from . import __version__
from . import config as config_mod
from . import corpus, evaluation, gradcheck
from .contrastive import train, write_loss_curve
from .errors import CL4DError, ConfigError, DataError
from .miner import HardNegativeMap, ModelMiner, TfidfMiner, mine_all
from .model import Encoder, init_parameters
from .tokenizer import Vocab, build_vocab

log = logging.getLogger("cl4d")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _hash_inputs(paths) -> dict:
    out = {}
    for p in paths:
        if p is None or p == "tfidf" or p == "init":
            continue
        if os.path.isdir(p):
            for root, dirs, files in os.walk(p):
                dirs.sort()
                for name in sorted(files):
                    full = os.path.join(root, name)
                    out[os.path.relpath(full).replace(os.sep, "/")] = _sha256(full)
        elif os.path.exists(p):
            out[os.path.relpath(p).replace(os.sep, "/")] = _sha256(p)
    return out


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def write_manifest(path, command: str, cfg: dict, seeds: dict, inputs, started: float):
    """RunManifest: what ran, with what configuration and inputs."""
    manifest = {
        "command": command,
        "config": {k: _jsonable(v) for k, v in sorted(cfg.items())},
        "seeds": seeds,
        "inputs": _hash_inputs(inputs),
        "tool_version": __version__,
        "wall_time_s": round(time.time() - started, 3),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _beside(path, suffix: str) -> str:
    return os.path.splitext(path)[0] + suffix


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write_json(path, obj):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _resolve_threads(value) -> int:
    if value is None:
        env = os.environ.get("CL4D_THREADS")
        if not env:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"CL4D_THREADS must be an integer, got {env!r}") from None
    if value < 1:
        raise UsageError(f"--threads must be >= 1, got {value}")
    return value


def _overrides(args, keys) -> dict:
    """Config overrides from dedicated flags plus ``--set key=value``."""
    out = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        out[key] = config_mod.parse_value(key, value)
    return out


def _load_cfg(args, keys=()) -> dict:
    return config_mod.load_config(getattr(args, "config", None), _overrides(args, keys))


def _default_vocab(model_path):
    return os.path.join(os.path.dirname(os.path.abspath(model_path)), "vocab.json")


def _load_encoder(args, cfg, threads) -> Encoder:
    if args.model == "init":
        if not args.vocab:
            raise UsageError("--model init needs --vocab")
        vocab = Vocab.load(args.vocab)
        mcfg = config_mod.model_config(cfg, vocab.size)
        enc = Encoder(init_parameters(mcfg), vocab, mcfg, name="init", threads=threads)
    else:
        enc = Encoder.load(args.model, args.vocab or _default_vocab(args.model), threads=threads)
    changes = {k: getattr(args, k) for k in ("pooling", "pad_side", "pad_policy") if getattr(args, k, None)}
    return enc.with_settings(**changes) if changes else enc


def _search_set(args) -> evaluation.SearchEvalSet:
    if args.data:
        return evaluation.SearchEvalSet.from_pairs(corpus.read_pairs(args.data))
    if args.queries and args.pool:
        return evaluation.SearchEvalSet.load(args.queries, args.pool)
    raise UsageError("give --data, or both --queries and --pool")


def _read_records(path) -> list:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def _field(record: dict, key: str):
    if key.startswith("meta."):
        return record.get("meta", {}).get(key[5:], "")
    return record.get(key, "")


# ---------------------------------------------------------------- subcommands


def cmd_extract(args, threads, started):
    pairs, report = corpus.extract_tree(args.input, args.lang, repo=args.repo or "", threads=threads, backend=args.backend)
    _ensure_parent(args.out)
    corpus.write_pairs(args.out, pairs)
    _write_json(_beside(args.out, ".extract.json"), report.to_dict())
    cfg = {"language": args.lang, "repo": args.repo or "", "backend": args.backend}
    write_manifest(_beside(args.out, ".manifest.json"), "extract", cfg, {}, [args.input], started)
    print(json.dumps(report.to_dict(), sort_keys=True))


_FILTER_KEYS = ("min_query_tokens", "min_code_lines", "max_code_chars", "max_non_ascii_ratio")


def cmd_filter(args, threads, started):
    cfg = _load_cfg(args, _FILTER_KEYS)
    kept, report = corpus.filter_pairs(corpus.read_pairs(args.input), config_mod.filter_config(cfg))
    _ensure_parent(args.out)
    corpus.write_pairs(args.out, kept)
    report_path = args.report or _beside(args.out, ".report.json")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(report.to_json())
    write_manifest(_beside(args.out, ".manifest.json"), "filter", {k: cfg[k] for k in _FILTER_KEYS}, {},
                   [args.input, args.config], started)
    print(report.to_json(), end="")


def cmd_dedup(args, threads, started):
    pairs = corpus.read_pairs(args.input)
    kept = corpus.dedup(pairs)
    _ensure_parent(args.out)
    corpus.write_pairs(args.out, kept)
    write_manifest(_beside(args.out, ".manifest.json"), "dedup", {}, {}, [args.input], started)
    print(json.dumps({"input": len(pairs), "kept": len(kept), "removed": len(pairs) - len(kept)}))


def cmd_split(args, threads, started):
    cfg = _load_cfg(args, ("seed", "ratios"))
    seed = config_mod.derive_seed(cfg["seed"], "split")
    parts = corpus.split(corpus.read_pairs(args.input), cfg["ratios"], seed)
    os.makedirs(args.out_dir, exist_ok=True)
    sizes = {}
    for name, part in zip(("train", "valid", "test"), parts):
        corpus.write_pairs(os.path.join(args.out_dir, f"{name}.jsonl"), part)
        sizes[name] = len(part)
    write_manifest(os.path.join(args.out_dir, "split.manifest.json"), "split",
                   {"seed": cfg["seed"], "ratios": cfg["ratios"]}, {"split": seed}, [args.input], started)
    print(json.dumps(sizes, sort_keys=True))


def cmd_build_vocab(args, threads, started):
    cfg = _load_cfg(args, ("vocab_size", "seed"))
    pairs = corpus.read_pairs(args.input)
    texts = [t for p in pairs for t in (p.query, p.code)]
    vocab = build_vocab(texts, cfg["vocab_size"], seed=cfg["seed"])
    _ensure_parent(args.out)
    vocab.save(args.out)
    write_manifest(_beside(args.out, ".manifest.json"), "build-vocab", {"vocab_size": cfg["vocab_size"]},
                   {}, [args.input], started)
    print(json.dumps({"size": vocab.size, "merges": len(vocab.merges)}))


def cmd_mine(args, threads, started):
    cfg = _load_cfg(args, ("near_dup_threshold",))
    pairs = corpus.read_pairs(args.data)
    if args.model == "tfidf":
        miner = TfidfMiner()
    else:
        miner = ModelMiner(_load_encoder(args, cfg, threads))
    hn = mine_all(pairs, miner, cfg["near_dup_threshold"], threads=threads)
    _ensure_parent(args.out)
    hn.save(args.out)
    write_manifest(_beside(args.out, ".manifest.json"), "mine",
                   {"near_dup_threshold": cfg["near_dup_threshold"], "miner": miner.name}, {},
                   [args.data, args.model, args.vocab], started)
    print(json.dumps({"mined": len(hn), "skipped": len(hn.skipped), "miner": miner.name}))


_TRAIN_KEYS = ("seed", "epochs", "batch_size", "lr", "temperature")


def _train_into(out_dir, train_pairs, vocab, cfg, hard_negatives, max_steps=None):
    mcfg = config_mod.model_config(cfg, vocab.size)
    tcfg = config_mod.train_config(cfg)
    result = train(train_pairs, vocab, mcfg, tcfg, hard_negatives, out_dir=out_dir, max_steps=max_steps)
    write_loss_curve(os.path.join(out_dir, "loss.csv"), result.curve)
    with open(os.path.join(out_dir, "config.txt"), "w", encoding="utf-8") as f:
        f.write(config_mod.format_config(cfg))
    return result, mcfg, tcfg


def cmd_train(args, threads, started):
    cfg = _load_cfg(args, _TRAIN_KEYS)
    pairs = corpus.read_pairs(args.data)
    vocab_path = args.vocab or os.path.join(os.path.dirname(os.path.abspath(args.data)), "vocab.json")
    if not os.path.exists(vocab_path):
        raise UsageError(f"no vocabulary at {vocab_path}; pass --vocab")
    vocab = Vocab.load(vocab_path)
    hn = HardNegativeMap.load(args.hard_negatives).as_dict() if args.hard_negatives else None
    os.makedirs(args.out, exist_ok=True)
    if os.path.abspath(vocab_path) != os.path.abspath(os.path.join(args.out, "vocab.json")):
        shutil.copyfile(vocab_path, os.path.join(args.out, "vocab.json"))
    result, mcfg, tcfg = _train_into(args.out, pairs, vocab, cfg, hn, args.max_steps)
    write_manifest(os.path.join(args.out, "manifest.json"), "train", cfg,
                   {"init": mcfg.seed, "shuffle": tcfg.seed}, [args.data, vocab_path, args.hard_negatives], started)
    last = result.curve[-1]
    print(json.dumps({"steps": last[0], "loss": last[1], "checkpoints": [os.path.basename(c) for c in result.checkpoints]}))


def cmd_eval_search(args, threads, started):
    cfg = _load_cfg(args)
    enc = _load_encoder(args, cfg, threads)
    if args.pool_size is not None and args.pool_size < 1:
        raise UsageError("--pool-size must be >= 1")
    pool_seed = config_mod.derive_seed(cfg["seed"], "pool")
    metrics = evaluation.mrr(_search_set(args), enc, threads, args.pool_size, pool_seed)
    _emit_metrics(args, metrics, cfg, started, "eval-search", [args.model, args.data, args.queries, args.pool])


def cmd_eval_clone(args, threads, started):
    cfg = _load_cfg(args)
    enc = _load_encoder(args, cfg, threads)
    metrics = evaluation.map_clone(evaluation.CloneEvalSet.load(args.data), enc)
    _emit_metrics(args, metrics, cfg, started, "eval-clone", [args.model, args.data])


def _emit_metrics(args, metrics, cfg, started, command, inputs):
    if args.out:
        _ensure_parent(args.out)
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(metrics.to_json())
        write_manifest(_beside(args.out, ".manifest.json"), command, cfg, {}, inputs, started)
    print(metrics.to_json(), end="")
    langs = ", ".join(f"{k} {100 * v:.2f}" for k, v in metrics.per_language.items())
    print(f"{metrics.metric.upper()} {100 * metrics.value:.2f} over {metrics.n}" + (f" ({langs})" if langs else ""),
          file=sys.stderr)


def _ablate(enc, eval_set, policies, threads) -> tuple:
    out, tables = {}, []
    for policy in policies:
        rows = evaluation.ablation_grid(enc, eval_set, pad_policy=policy, threads=threads)
        out[policy] = evaluation.grid_to_dict(rows)["rows"]
        tables.append(f"[{policy}]\n" + evaluation.format_grid(rows))
    return out, "".join(tables)


def cmd_ablate(args, threads, started):
    cfg = _load_cfg(args)
    enc = _load_encoder(args, cfg, threads)
    policies = ("naive", "masked") if args.policy == "both" else (args.policy,)
    result, table = _ablate(enc, _search_set(args), policies, threads)
    if args.out:
        _write_json(args.out, result)
        write_manifest(_beside(args.out, ".manifest.json"), "ablate", cfg, {},
                       [args.model, args.data, args.queries, args.pool], started)
    print(table, end="")


def cmd_embed(args, threads, started):
    cfg = _load_cfg(args)
    enc = _load_encoder(args, cfg, threads)
    records = _read_records(args.input)
    E = enc.embed([str(_field(r, args.field)) for r in records])
    _ensure_parent(args.out)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        for k, (r, e) in enumerate(zip(records, E)):
            f.write(json.dumps({"id": r.get("id", k), "embedding": [float(x) for x in e]}) + "\n")
    write_manifest(_beside(args.out, ".manifest.json"), "embed", {**cfg, "field": args.field}, {},
                   [args.model, args.input], started)
    print(json.dumps({"embedded": len(records), "dim": int(E.shape[1])}))


def cmd_project(args, threads, started):
    cfg = _load_cfg(args)
    enc = _load_encoder(args, cfg, threads)
    records = _read_records(args.input)
    E = enc.embed([str(_field(r, args.field)) for r in records])
    points = evaluation.project_2d(E, [str(_field(r, args.label_key)) for r in records])
    _ensure_parent(args.out)
    evaluation.write_tsv(args.out, points)
    if args.svg:
        evaluation.write_svg(args.svg, points)
    write_manifest(_beside(args.out, ".manifest.json"), "project", {**cfg, "field": args.field}, {},
                   [args.model, args.input], started)
    print(json.dumps({"points": len(points)}))


def cmd_convert(args, threads, started):
    from . import convert

    counts = convert.convert(args.format, args.input, args.out_dir, language=args.lang or "")
    write_manifest(os.path.join(args.out_dir, "convert.manifest.json"), "convert",
                   {"format": args.format, "language": args.lang or ""}, {}, [args.input], started)
    print(json.dumps(counts, sort_keys=True))


def cmd_gradcheck(args, threads, started):
    report = gradcheck.run_suite(seed=args.seed)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        _write_json(args.out, report)
    print(text)
    ok = report["ops_max"] < 1e-6 and report["model_normwise"] < 1e-4
    return 0 if ok else 1


def run_pipeline(cfg: dict, out_dir, source_dir=None, pairs_path=None, threads: int = 1, max_steps=None) -> dict:
    """Source tree (or pairs JSONL) to metrics, writing every artifact under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    j = lambda *p: os.path.join(out_dir, *p)  # noqa: E731
    summary = {}

    if source_dir is not None:
        pairs, ext = corpus.extract_tree(source_dir, cfg["language"], repo=cfg["repo"], threads=threads)
        summary["extract"] = ext.to_dict()
    else:
        pairs = corpus.read_pairs(pairs_path)
    corpus.write_pairs(j("pairs.jsonl"), pairs)

    kept, report = corpus.filter_pairs(pairs, config_mod.filter_config(cfg))
    corpus.write_pairs(j("filtered.jsonl"), kept)
    with open(j("filter_report.json"), "w", encoding="utf-8") as f:
        f.write(report.to_json())
    unique = corpus.dedup(kept)
    corpus.write_pairs(j("dedup.jsonl"), unique)
    if len(unique) < 3:
        raise DataError(f"only {len(unique)} pairs survived filtering and dedup")

    seeds = {k: config_mod.derive_seed(cfg["seed"], k) for k in ("split", "init", "shuffle")}
    train_pairs, valid_pairs, test_pairs = corpus.split(unique, cfg["ratios"], seeds["split"])
    for name, part in (("train", train_pairs), ("valid", valid_pairs), ("test", test_pairs)):
        corpus.write_pairs(j(f"{name}.jsonl"), part)
    summary["sizes"] = {"pairs": len(pairs), "filtered": len(kept), "dedup": len(unique),
                        "train": len(train_pairs), "valid": len(valid_pairs), "test": len(test_pairs)}

    vocab = build_vocab([t for p in train_pairs for t in (p.query, p.code)], cfg["vocab_size"], seed=cfg["seed"])
    vocab.save(j("vocab.json"))
    mcfg = config_mod.model_config(cfg, vocab.size)

    hn = None
    if cfg["use_hard_negatives"]:
        if cfg["miner"] == "tfidf":
            miner = TfidfMiner()
        else:
            boot_cfg = dict(cfg, epochs=1, use_hard_negatives=False)
            os.makedirs(j("bootstrap"), exist_ok=True)
            boot, _, _ = _train_into(j("bootstrap"), train_pairs, vocab, boot_cfg, None, max_steps)
            miner = ModelMiner(Encoder(boot.params, vocab, mcfg, name="bootstrap", threads=threads))
        hn_map = mine_all(train_pairs, miner, cfg["near_dup_threshold"], threads=threads)
        hn_map.save(j("hn.jsonl"))
        hn = hn_map.as_dict()
        summary["mined"] = {"miner": miner.name, "mined": len(hn_map), "skipped": len(hn_map.skipped)}

    ckpt_dir = j("ckpt")
    os.makedirs(ckpt_dir, exist_ok=True)
    shutil.copyfile(j("vocab.json"), os.path.join(ckpt_dir, "vocab.json"))
    result, _, _ = _train_into(ckpt_dir, train_pairs, vocab, cfg, hn, max_steps)

    eval_set = evaluation.SearchEvalSet.from_pairs(test_pairs)
    zero = Encoder(init_parameters(mcfg), vocab, mcfg, name="init", threads=threads)
    trained = Encoder(result.params, vocab, mcfg, name="final.ckpt", threads=threads)
    metrics = {"zero_shot": evaluation.mrr(eval_set, zero, threads).to_dict(),
               "trained": evaluation.mrr(eval_set, trained, threads).to_dict(),
               "steps": result.curve[-1][0], "final_loss": result.curve[-1][1]}
    _write_json(j("metrics.json"), metrics)

    ablation, table = _ablate(trained, eval_set, ("naive", "masked"), threads)
    _write_json(j("ablation.json"), ablation)
    with open(j("ablation.txt"), "w", encoding="utf-8") as f:
        f.write(table)

    E = trained.embed([p.code for p in test_pairs])
    points = evaluation.project_2d(E, [p.meta.get("repo", p.language) for p in test_pairs])
    evaluation.write_tsv(j("projection.tsv"), points)
    evaluation.write_svg(j("projection.svg"), points)
    summary["metrics"] = {"zero_shot_mrr": metrics["zero_shot"]["value"], "trained_mrr": metrics["trained"]["value"]}
    summary["seeds"] = seeds
    return summary


def cmd_pipeline(args, threads, started):
    cfg = _load_cfg(args, _TRAIN_KEYS)
    if bool(args.input) == bool(args.pairs):
        raise UsageError("give exactly one of --in (source tree) or --pairs (JSONL)")
    summary = run_pipeline(cfg, args.out, source_dir=args.input, pairs_path=args.pairs, threads=threads,
                           max_steps=args.max_steps)
    write_manifest(os.path.join(args.out, "manifest.json"), "pipeline", cfg, summary["seeds"],
                   [args.input or args.pairs, args.config], started)
    print(json.dumps(summary, indent=2, sort_keys=True))


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _add_config(p, *, seed=False):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    if seed:
        p.add_argument("--seed", type=int, help="master seed")


def _add_model(p, required=True):
    p.add_argument("--model", required=required, help="checkpoint path, or 'init' for a fresh model from --config")
    p.add_argument("--vocab", help="vocab.json (default: beside the checkpoint)")
    p.add_argument("--pooling", choices=("mean", "last"))
    p.add_argument("--pad-side", dest="pad_side", choices=("left", "right"))
    p.add_argument("--pad-policy", dest="pad_policy", choices=("masked", "naive"))


def _add_search_data(p):
    p.add_argument("--data", help="pairs JSONL; every pair's code forms the pool")
    p.add_argument("--queries", help="queries JSONL {query, gold_id, language}")
    p.add_argument("--pool", help="pool JSONL {id, code, language}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, help="worker cap (default: $CL4D_THREADS or 1)")
    common.add_argument("--quiet", action="store_true", help="only warnings and errors on stderr")

    parser = _Parser(prog="cl4d", description="Contrastive training and evaluation of decoder-only code retrievers.")
    parser.add_argument("--version", action="version", version=f"cl4d {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=func)
        return p

    p = add("extract", cmd_extract, "Extract (docstring query, code) pairs from a source tree.")
    p.add_argument("--lang", required=True, choices=corpus.LANGUAGES)
    p.add_argument("--in", dest="input", required=True, help="source directory")
    p.add_argument("--out", required=True, help="output pairs JSONL")
    p.add_argument("--repo", help="repository name (default: directory name)")
    p.add_argument("--backend", default="auto", choices=("auto", "builtin", "tree-sitter"))

    p = add("filter", cmd_filter, "Apply quality filters and write a filter report.")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="filter report JSON (default: <out>.report.json)")
    p.add_argument("--min-query-tokens", dest="min_query_tokens", type=int)
    p.add_argument("--min-code-lines", dest="min_code_lines", type=int)
    p.add_argument("--max-code-chars", dest="max_code_chars", type=int)
    p.add_argument("--max-non-ascii-ratio", dest="max_non_ascii_ratio", type=float)
    _add_config(p)

    p = add("dedup", cmd_dedup, "Drop pairs whose normalised code was already seen.")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = add("split", cmd_split, "Seeded train/valid/test split.")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--ratios", type=lambda s: config_mod.parse_value("ratios", s))
    _add_config(p, seed=True)

    p = add("build-vocab", cmd_build_vocab, "Learn a byte-level BPE vocabulary from pairs.")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", dest="vocab_size", type=int)
    _add_config(p, seed=True)

    p = add("mine", cmd_mine, "Mine one hard negative per training pair.")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--near-dup-threshold", dest="near_dup_threshold", type=float)
    _add_model(p)
    _add_config(p)

    p = add("train", cmd_train, "Contrastive training; writes per-epoch checkpoints and a loss curve.")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--vocab", help="vocab.json (default: beside --data)")
    p.add_argument("--hard-negatives", dest="hard_negatives")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    _add_config(p, seed=True)

    p = add("eval-search", cmd_eval_search, "MRR code search (full candidate pool by default).")
    _add_model(p)
    _add_search_data(p)
    p.add_argument("--pool-size", dest="pool_size", type=int,
                   help="rank each gold against a seeded sample of N-1 distractors instead of the full pool")
    p.add_argument("--out", help="metrics JSON")
    _add_config(p)

    p = add("eval-clone", cmd_eval_clone, "MAP clone detection over labelled code.")
    _add_model(p)
    p.add_argument("--data", required=True, help="JSONL {id, code, label}")
    p.add_argument("--out", help="metrics JSON")
    _add_config(p)

    p = add("ablate", cmd_ablate, "MRR under every pad side x pooling setting.")
    _add_model(p)
    _add_search_data(p)
    p.add_argument("--policy", default="both", choices=("naive", "masked", "both"))
    p.add_argument("--out", help="ablation JSON")
    _add_config(p)

    p = add("embed", cmd_embed, "Embed one text field of each JSONL record.")
    _add_model(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--field", default="code", help="record key (or meta.<key>) to embed")
    _add_config(p)

    p = add("project", cmd_project, "2-D PCA projection of embeddings as TSV (and SVG).")
    _add_model(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="TSV x, y, label")
    p.add_argument("--svg")
    p.add_argument("--field", default="code")
    p.add_argument("--label-key", dest="label_key", default="language", help="record key (or meta.<key>) for labels")
    _add_config(p)

    p = add("convert", cmd_convert, "Convert CodeSearchNet, CoSQA or POJ-104 dumps to the evaluation JSONL schemas.")
    p.add_argument("--format", required=True, choices=("csn", "cosqa", "poj104"))
    p.add_argument("--in", dest="input", required=True, help="JSON Lines or JSON array")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--lang", help="language for CodeSearchNet rows that lack one")

    p = add("gradcheck", cmd_gradcheck, "Finite-difference check of every op and the full model; prints JSON.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = add("pipeline", cmd_pipeline, "Extract, filter, dedup, split, build vocab, mine, train, evaluate, ablate, project.")
    p.add_argument("--in", dest="input", help="source tree")
    p.add_argument("--pairs", help="pairs JSONL instead of a source tree")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    _add_config(p, seed=True)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        threads = _resolve_threads(args.threads)
        from threadpoolctl import threadpool_limits

        # one BLAS thread: results must not depend on the BLAS pool size
        with threadpool_limits(limits=1):
            code = args.func(args, threads, started)
        return int(code or 0)
    except UsageError as exc:
        print(f"cl4d {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (CL4DError, OSError, ConfigError) as exc:
        print(f"cl4d {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())
