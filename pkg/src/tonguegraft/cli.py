"""Command line interface: one subcommand per pipeline operation.

Every run logs a digest of its effective options plus the seed to stderr, so
a pipeline's provenance can be reconstructed from its logs.  Outputs go only
where ``--out`` style flags point; stdout carries small tab-separated result
lines.  Exit codes: 0 success, 1 domain error, 2 usage or configuration
error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import diagnostics, plotting
from .config import PipelineConfig, config_digest, load_config
from .data_pipeline import (
    ExampleFormat,
    ScheduleMode,
    build_schedule,
    example_as_doc,
    format_pairs,
    pack_sequences,
    plan_mixture,
    read_documents,
    read_parallel_pairs,
    read_stream,
    realize_plan,
    write_packed,
    write_plan,
    write_stream,
)
from .embedding_surgery import (
    logit_consistency_check,
    mean_init,
    read_matrix,
    write_matrix,
)
from .errors import ConfigError, TonguegraftError
from .tokenizer import (
    decode_with_metadata,
    encode,
    load_model,
    read_segmented_corpus,
    sample_records,
    save_model,
    train_bpe,
)
from .train_config import (
    REFERENCE_ARCHS,
    ArchSpec,
    TrainConfig,
    estimate_flops,
    lr_at,
    throughput_efficiency,
    validate_layout,
)
from .vocab_expansion import (
    build_addition,
    load_addition,
    merge_vocabularies,
    save_addition,
)

_EMPTY = PipelineConfig()


def _config(args) -> PipelineConfig:
    path = getattr(args, "config", None)
    return load_config(path) if path else _EMPTY


def _pick(flag, cfg_value, name: str, required: bool = True):
    """Resolve one option: the flag wins, then the config, then an error."""
    if flag is not None:
        return flag
    if cfg_value is not None:
        return cfg_value
    if required:
        raise ConfigError(f"{name}: required (pass --{name.replace('_', '-')} or set it in the config)")
    return None


def _log_run(command: str, args, seed) -> None:
    options = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "command") and v is not None
    }
    options["command"] = command
    digest = config_digest(options)
    seed_text = "none" if seed is None else str(seed)
    print(f"tonguegraft {command}: config sha256={digest} seed={seed_text}", file=sys.stderr)


def _parse_id_list(text: str) -> list[int]:
    parts = text.replace(",", " ").split()
    if not parts:
        raise ConfigError("ids: expected at least one token id")
    try:
        return [int(p) for p in parts]
    except ValueError as e:
        raise ConfigError(f"ids: {e}") from None


def _parse_token_count(text: str) -> int:
    """Token budgets accept scientific notation, e.g. 100e9."""
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"tokens: not a number: {text!r}") from None
    if value <= 0 or value != int(value):
        raise ConfigError(f"tokens: expected a positive whole number, got {text!r}")
    return int(value)


# ---------------------------------------------------------------- subcommands


def cmd_train_vocab(args) -> int:
    cfg = _config(args)
    corpus_path = _pick(args.corpus, cfg.corpus, "corpus")
    target = _pick(args.target, cfg.target_vocab_size, "target")
    sample = _pick(args.sample, cfg.sample, "sample", required=False)
    seed = _pick(args.seed, cfg.seed, "seed", required=False)
    _log_run("train-vocab", args, seed)
    corpus = read_segmented_corpus(corpus_path)
    if sample is not None:
        if seed is None:
            raise ConfigError("seed: required when sampling records")
        corpus = sample_records(corpus, sample, seed)
    model = train_bpe(corpus, target, nfkc=not args.no_nfkc)
    save_model(model, args.out)
    learned = len(model.tokens) - 256
    print(f"model\t{args.out}")
    print(f"learned_tokens\t{learned}")
    print(f"total_tokens\t{len(model.tokens)}")
    return 0


def cmd_expand(args) -> int:
    cfg = _config(args)
    donor_path = _pick(args.donor, cfg.donor_model, "donor")
    base_path = _pick(args.base, cfg.base_model, "base")
    if args.out_addition is None and args.out_model is None:
        raise ConfigError("expand needs --out-addition and/or --out-model")
    _log_run("expand", args, None)
    donor = load_model(donor_path)
    base = load_model(base_path)
    addition = build_addition(donor, base)
    if args.out_addition:
        save_addition(addition, args.out_addition)
    print(f"base_tokens\t{len(base.tokens)}")
    print(f"added_tokens\t{len(addition.entries)}")
    if args.out_model:
        expanded = merge_vocabularies(base, addition)
        save_model(expanded, args.out_model)
        print(f"expanded_tokens\t{len(expanded.tokens)}")
    return 0


def cmd_init_embeddings(args) -> int:
    cfg = _config(args)
    matrix_path = _pick(args.base_matrix, cfg.base_matrix, "base_matrix")
    addition_path = _pick(args.addition, cfg.addition, "addition")
    _log_run("init-embeddings", args, None)
    base = read_matrix(matrix_path)
    addition = load_addition(addition_path)
    grown = mean_init(base, addition)
    write_matrix(grown, args.out)
    print(f"matrix\t{args.out}")
    print(f"rows\t{grown.rows}")
    print(f"dim\t{grown.dim}")
    return 0


def cmd_check_logits(args) -> int:
    cfg = _config(args)
    base_path = _pick(args.base_matrix, cfg.base_matrix, "base_matrix")
    expanded_path = _pick(args.expanded_matrix, cfg.expanded_matrix, "expanded_matrix")
    addition_path = _pick(args.addition, cfg.addition, "addition")
    seed = args.seed if args.seed is not None else (cfg.seed or 0)
    _log_run("check-logits", args, seed)
    report = logit_consistency_check(
        read_matrix(base_path),
        read_matrix(expanded_path),
        load_addition(addition_path),
        trials=args.trials,
        seed=seed,
        tolerance=args.tolerance,
    )
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def cmd_mix(args) -> int:
    cfg = _config(args)
    if cfg.mixture is None:
        raise ConfigError("mixture: required (define a 'mixture' section in the config)")
    spec = cfg.mixture
    if args.seed is not None:
        spec = type(spec)(spec.sources, spec.total_tokens, seed=args.seed)
    _log_run("mix", args, spec.seed)
    plan = plan_mixture(spec)
    for sid in sorted(plan.budgets):
        print(f"budget\t{sid}\t{plan.budgets[sid]}")
    pathed = [s for s in spec.sources if s.path is not None]
    items = []
    if pathed:
        if len(pathed) != len(spec.sources):
            missing = [s.source_id for s in spec.sources if s.path is None]
            raise ConfigError(f"mixture.sources: missing path for {missing[0]!r}")
        model_path = _pick(args.model, cfg.expanded_model, "model")
        model = load_model(model_path)
        doc_tokens = {
            s.source_id: [len(encode(model, d)) for d in read_documents(s.path)]
            for s in spec.sources
        }
        items = realize_plan(plan, doc_tokens)
        print(f"plan_items\t{len(items)}")
    write_plan(plan, items, args.out)
    print(f"plan\t{args.out}")
    return 0


def cmd_format_parallel(args) -> int:
    cfg = _config(args)
    pairs_path = _pick(args.pairs, cfg.pairs, "pairs")
    model_path = _pick(args.model, cfg.expanded_model, "model")
    fmt = ExampleFormat(_pick(args.format, cfg.format, "format"))
    schedule = args.schedule or cfg.schedule
    seed = args.seed if args.seed is not None else cfg.seed
    _log_run("format-parallel", args, seed)
    model = load_model(model_path)
    examples = format_pairs(read_parallel_pairs(pairs_path), model, fmt)
    if schedule is not None:
        plain = read_stream(args.plain) if args.plain else []
        docs = build_schedule(
            examples, plain, ScheduleMode(schedule), fmt, seed=seed or 0
        )
    else:
        docs = [example_as_doc(e) for e in examples]
    write_stream(docs, args.out)
    print(f"stream\t{args.out}")
    print(f"examples\t{len(examples)}")
    print(f"documents\t{len(docs)}")
    return 0


def cmd_pack(args) -> int:
    cfg = _config(args)
    context = _pick(args.context, cfg.context_length, "context")
    separator = _pick(args.separator_id, cfg.separator_id, "separator_id")
    pad = args.pad_id if args.pad_id is not None else cfg.pad_id
    _log_run("pack", args, None)
    docs = read_stream(args.stream)
    sequences, stats = pack_sequences(docs, context, separator, pad_id=pad)
    write_packed(sequences, args.out)
    print(f"packed\t{args.out}")
    print(f"documents\t{stats.documents}")
    print(f"sequences\t{stats.sequences}")
    print(f"split_documents\t{stats.split_documents}")
    print(f"document_tokens\t{stats.document_tokens}")
    print(f"separator_tokens\t{stats.separator_tokens}")
    print(f"padding_tokens\t{stats.padding_tokens}")
    return 0


def cmd_lr(args) -> int:
    cfg = _config(args)
    train = cfg.train
    total = args.total_steps if args.total_steps is not None else (train.total_steps if train else None)
    if total is None:
        raise ConfigError("total_steps: required")
    kwargs = {}
    if train is not None:
        kwargs = {
            "max_lr": train.max_lr,
            "warmup_steps": train.warmup_steps,
            "final_lr_fraction": train.final_lr_fraction,
        }
    if args.max_lr is not None:
        kwargs["max_lr"] = args.max_lr
    if args.warmup_steps is not None:
        kwargs["warmup_steps"] = args.warmup_steps
    if args.final_lr_fraction is not None:
        kwargs["final_lr_fraction"] = args.final_lr_fraction
    config = TrainConfig(total_steps=total, **kwargs)
    _log_run("lr", args, None)
    if args.step:
        steps = list(args.step)
    elif args.every:
        steps = list(range(0, total + 1, args.every))
        if steps[-1] != total:
            steps.append(total)
    else:
        steps = [0, config.warmup_steps, total]
    for step in steps:
        print(f"{step}\t{lr_at(config, step):.12e}")
    return 0


def _arch_from_args(args) -> ArchSpec:
    if args.arch != "custom":
        return REFERENCE_ARCHS[args.arch]
    needed = ("d_model", "n_heads", "n_layers", "context", "vocab_size")
    for name in needed:
        if getattr(args, name) is None:
            raise ConfigError(f"{name}: required with --arch custom")
    return ArchSpec(
        d_model=args.d_model,
        n_heads=args.n_heads,
        n_layers=args.n_layers,
        context=args.context,
        vocab_size=args.vocab_size,
        gqa=args.gqa,
        n_kv_heads=args.kv_heads,
        ffn_dim=args.ffn_dim,
    )


def cmd_flops(args) -> int:
    arch = _arch_from_args(args)
    tokens = _parse_token_count(args.tokens)
    _log_run("flops", args, None)
    est = estimate_flops(arch, tokens)
    print(f"arch\t{args.arch}")
    print(f"params\t{est.params}")
    print(f"tokens\t{est.tokens}")
    print(f"flops_per_token\t{est.per_token:.6e}")
    print(f"total_flops\t{est.total:.6e}")
    print(f"first_order_total\t{est.first_order_total:.6e}")
    if args.measured_tflops is not None:
        eff = throughput_efficiency(args.measured_tflops, args.peak_tflops)
        print(f"efficiency\t{eff:.4f}")
    return 0


def cmd_layout(args) -> int:
    _log_run("layout", args, None)
    report = validate_layout(args.dp, args.tp, args.pp, args.nodes, args.gpus_per_node)
    for line in report.lines():
        print(line)
    return 0


def cmd_tokenize(args) -> int:
    cfg = _config(args)
    model_path = _pick(args.model, cfg.expanded_model or cfg.base_model, "model")
    given = [v for v in (args.text, args.file, args.ids) if v is not None]
    if len(given) != 1:
        raise ConfigError("tokenize needs exactly one of --text, --file, --ids")
    _log_run("tokenize", args, None)
    model = load_model(model_path)
    if args.ids is not None:
        decoded = decode_with_metadata(model, _parse_id_list(args.ids))
        if decoded.invalid_utf8:
            print("warning: byte tokens did not form valid UTF-8", file=sys.stderr)
        print(decoded.text)
        return 0
    if args.file is not None:
        with open(args.file, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = args.text
    print(" ".join(str(i) for i in encode(model, text)))
    return 0


def cmd_report(args) -> int:
    cfg = _config(args)
    base_path = _pick(args.base, cfg.base_model, "base")
    expanded_path = _pick(args.expanded, cfg.expanded_model, "expanded")
    corpus_path = _pick(args.corpus, cfg.corpus, "corpus")
    _log_run("report", args, None)
    report = diagnostics.efficiency_report(
        load_model(base_path),
        load_model(expanded_path),
        read_documents(corpus_path),
    )
    lines = report.lines()
    for line in lines:
        print(line)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        tsv = os.path.join(args.out_dir, "efficiency.tsv")
        with open(tsv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        plotting.plot_efficiency(report, os.path.join(args.out_dir, "efficiency.png"))
        print(f"written\t{tsv}")
    return 0


def _read_labels(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def _read_scores(path: str) -> list[float]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(float(line))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: not a score: {line!r}") from None
    return out


def cmd_diagnose_balance(args) -> int:
    cfg = _config(args)
    threshold = args.threshold if args.threshold is not None else (cfg.threshold or 0.9)
    _log_run("diagnose-balance", args, None)
    if (args.before_scores is None) != (args.after_scores is None):
        raise ConfigError("--before-scores and --after-scores go together")
    written = []
    report = diagnostics.class_balance(
        _read_labels(args.pred), _read_labels(args.gold), threshold=threshold
    )
    lines = report.lines()
    for line in lines:
        print(line)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        tsv = os.path.join(args.out_dir, "balance.tsv")
        with open(tsv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        plotting.plot_balance(report, os.path.join(args.out_dir, "balance.png"))
        written.append(tsv)
    if args.before_scores is not None:
        transition = diagnostics.score_transition(
            _read_scores(args.before_scores),
            _read_scores(args.after_scores),
            bins=args.bins,
        )
        for line in transition.lines():
            print(line)
        if args.out_dir:
            tsv = os.path.join(args.out_dir, "transition.tsv")
            with open(tsv, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("\n".join(transition.lines()) + "\n")
            plotting.plot_transition(
                transition, os.path.join(args.out_dir, "transition.png")
            )
            written.append(tsv)
    for path in written:
        print(f"written\t{path}")
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tonguegraft",
        description="Cross-lingual vocabulary expansion and continual-pretraining data tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    def add(name: str, func, help_text: str, config: bool = True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        if config:
            p.add_argument("--config", help="JSON config file; flags override its values")
        return p

    p = add("train-vocab", cmd_train_vocab, "Train a BPE vocabulary from a segmented corpus.")
    p.add_argument("--corpus", help="segmented corpus, one record per line")
    p.add_argument("--target", type=int, help="learned vocabulary size (chars plus merges)")
    p.add_argument("--sample", type=int, help="train on this many sampled records")
    p.add_argument("--seed", type=int, help="sampling seed (required with --sample)")
    p.add_argument("--no-nfkc", action="store_true", help="skip NFKC normalization")
    p.add_argument("--out", required=True, help="output model path")

    p = add("expand", cmd_expand, "Graft a donor vocabulary into a base model.")
    p.add_argument("--donor", help="model trained on the new-language corpus")
    p.add_argument("--base", help="base model to expand")
    p.add_argument("--out-addition", help="write the addition set here")
    p.add_argument("--out-model", help="write the merged model here")

    p = add("init-embeddings", cmd_init_embeddings, "Grow an embedding matrix by mean-of-constituents rows.")
    p.add_argument("--base-matrix", help="TGEM matrix sized to the base vocabulary")
    p.add_argument("--addition", help="addition set from expand")
    p.add_argument("--out", required=True, help="output TGEM path")

    p = add("check-logits", cmd_check_logits, "Verify grown output matrix logits match constituent means.")
    p.add_argument("--base-matrix", help="base TGEM matrix")
    p.add_argument("--expanded-matrix", help="grown TGEM matrix")
    p.add_argument("--addition", help="addition set")
    p.add_argument("--trials", type=int, default=1000, help="random hidden vectors to probe")
    p.add_argument("--seed", type=int, help="probe seed (default 0)")
    p.add_argument("--tolerance", type=float, default=1e-6, help="relative tolerance")

    p = add("mix", cmd_mix, "Apportion a token budget over sources and plan the interleave.")
    p.add_argument("--model", help="tokenizer used to count document tokens")
    p.add_argument("--seed", type=int, help="interleave seed (overrides config)")
    p.add_argument("--out", required=True, help="output plan path")

    p = add("format-parallel", cmd_format_parallel, "Format a parallel corpus into training documents.")
    p.add_argument("--pairs", help="tab-separated sentence pairs")
    p.add_argument("--model", help="tokenizer model")
    p.add_argument("--format", choices=[f.value for f in ExampleFormat], help="example format")
    p.add_argument("--schedule", choices=[m.value for m in ScheduleMode], help="compose with a plain stream")
    p.add_argument("--plain", help="plain document stream to schedule against")
    p.add_argument("--seed", type=int, help="schedule seed")
    p.add_argument("--out", required=True, help="output document stream")

    p = add("pack", cmd_pack, "Pack a document stream into fixed-length sequences.")
    p.add_argument("--stream", required=True, help="document stream from format-parallel")
    p.add_argument("--context", type=int, help="sequence length")
    p.add_argument("--separator-id", type=int, help="separator token id")
    p.add_argument("--pad-id", type=int, help="padding token id (default: separator)")
    p.add_argument("--out", required=True, help="output packed file")

    p = add("lr", cmd_lr, "Print the warmup plus cosine learning-rate schedule.")
    p.add_argument("--total-steps", type=int, help="schedule length")
    p.add_argument("--max-lr", type=float, help="peak learning rate")
    p.add_argument("--warmup-steps", type=int, help="linear warmup length")
    p.add_argument("--final-lr-fraction", type=float, help="final LR as a fraction of peak")
    p.add_argument("--step", type=int, action="append", help="print this step (repeatable)")
    p.add_argument("--every", type=int, help="print every N steps")

    p = add("flops", cmd_flops, "Estimate training FLOPs for an architecture and token budget.", config=False)
    p.add_argument("--arch", default="custom", choices=[*REFERENCE_ARCHS, "custom"], help="reference architecture or custom")
    p.add_argument("--tokens", required=True, help="token budget, e.g. 100e9")
    p.add_argument("--d-model", type=int)
    p.add_argument("--n-heads", type=int)
    p.add_argument("--n-layers", type=int)
    p.add_argument("--context", type=int)
    p.add_argument("--vocab-size", type=int)
    p.add_argument("--ffn-dim", type=int)
    p.add_argument("--kv-heads", type=int)
    p.add_argument("--gqa", action="store_true", help="grouped-query attention")
    p.add_argument("--measured-tflops", type=float, help="also report efficiency against peak")
    p.add_argument("--peak-tflops", type=float, default=312.0)

    p = add("layout", cmd_layout, "Check a 3-D parallelism layout against an allocation.", config=False)
    p.add_argument("--dp", type=int, required=True, help="data parallel degree")
    p.add_argument("--tp", type=int, required=True, help="tensor parallel degree")
    p.add_argument("--pp", type=int, required=True, help="pipeline parallel degree")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--gpus-per-node", type=int, required=True)

    p = add("report", cmd_report, "Compare token spend of two tokenizers over a corpus.")
    p.add_argument("--base", help="base model")
    p.add_argument("--expanded", help="expanded model")
    p.add_argument("--corpus", help="text corpus, one document per line")
    p.add_argument("--out-dir", help="write efficiency.tsv and efficiency.png here")

    p = add("diagnose-balance", cmd_diagnose_balance, "Flag majority-class collapse in predictions.")
    p.add_argument("--pred", required=True, help="predicted labels, one per line")
    p.add_argument("--gold", required=True, help="gold labels, one per line")
    p.add_argument("--threshold", type=float, help="majority fraction that flags instability (default 0.9)")
    p.add_argument("--before-scores", help="per-item scores before, for the transition histogram")
    p.add_argument("--after-scores", help="per-item scores after")
    p.add_argument("--bins", type=int, default=10, help="transition histogram bins")
    p.add_argument("--out-dir", help="write balance.tsv/.png (and transition.*) here")

    p = add("tokenize", cmd_tokenize, "Encode text to ids, or decode ids to text.")
    p.add_argument("--model", help="tokenizer model")
    p.add_argument("--text", help="encode this string")
    p.add_argument("--file", help="encode this file's contents")
    p.add_argument("--ids", help="decode these ids (space or comma separated)")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TonguegraftError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
