"""Command-line interface for styled translation, alignment, and evaluation.

Exit codes: 0 on success (anomalies and warnings are reported, not fatal),
2 on configuration or schema errors, 3 on backend failures.  Every error
path prints a single ``error[category]: message`` line to stderr.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
import time
import uuid
from datetime import datetime, timezone
from pathlib import Path

from . import align, backends, evalkit, pipelines
from .markup import styled_text_from_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3


class CliError(Exception):
    def __init__(self, code: int, category: str, message: str):
        super().__init__(message)
        self.code = code
        self.category = category


def _config_error(message: str) -> CliError:
    return CliError(EXIT_CONFIG, "config", message)


def _load_json(path: str):
    p = Path(path)
    if not p.exists():
        raise _config_error(f"file not found: {p}")
    try:
        with open(p, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise _config_error(f"invalid JSON in {p}: {exc}")


def _policy_from_args(args: argparse.Namespace) -> pipelines.ProjectionPolicy:
    return pipelines.ProjectionPolicy(
        occurrence_tiebreak=pipelines.OccurrenceTiebreak(args.tiebreak),
        unaligned_styled_word=pipelines.UnalignedPolicy(args.unaligned),
        merge_adjacent=args.merge_adjacent,
    )


def _parse_job(args: argparse.Namespace) -> dict:
    """Merge the job file with flag overrides; flags win over file values."""
    data = _load_json(args.input)
    if isinstance(data, list):
        job = {"documents": data}
    elif isinstance(data, dict) and "documents" in data:
        job = dict(data)
    else:
        raise _config_error(f"{args.input} is neither a job object nor a document list")
    try:
        job["documents"] = [styled_text_from_json(d) for d in job["documents"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise _config_error(f"bad styled document in {args.input}: {exc}")

    methods = args.method or job.get("method") or job.get("methods")
    if not methods:
        raise _config_error("no method given (flag --method or job file 'method')")
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    try:
        job["methods"] = [pipelines.MethodKind(m) for m in methods]
    except ValueError as exc:
        raise _config_error(f"unknown method: {exc}")

    for key, flag in (
        ("backends", args.backends),
        ("lexicon", args.lexicon),
        ("matrix", args.matrix),
        ("nmt_backend", args.nmt_backend),
        ("llm_backend", args.llm_backend),
    ):
        if flag is not None:
            job[key] = flag
    if args.threshold is not None:
        job["threshold"] = args.threshold
    if args.k is not None:
        job["k"] = args.k
    job.setdefault("threshold", 0.5)
    job.setdefault("k", 3)
    job["oov"] = align.OovPolicy(args.oov)
    job["policy"] = _policy_from_args(args)
    job["source_lang"] = args.source_lang or job.get("source_lang", "en")
    job["target_lang"] = args.target_lang or job.get("target_lang", "de")
    return job


def _resolve_backends(job: dict, needed: set[str]) -> dict[str, object]:
    """Pick the nmt/llm backends named by the job from its config file."""
    if not needed:
        return {}
    path = job.get("backends")
    if not path:
        raise _config_error("methods need a backend but no --backends config was given")
    try:
        pool = backends.load_backends(path)
    except FileNotFoundError:
        raise _config_error(f"backend config not found: {path}")
    except (ValueError, KeyError, json.JSONDecodeError, OSError) as exc:
        raise _config_error(f"bad backend config {path}: {exc}")

    def pick(role: str, predicate) -> object:
        name = job.get(f"{role}_backend")
        if name:
            if name not in pool:
                raise _config_error(f"backend {name!r} not found in {path}")
            return pool[name]
        candidates = [b for b in pool.values() if predicate(b)]
        if len(candidates) == 1:
            return candidates[0]
        raise _config_error(
            f"cannot pick a {role} backend from {path}; use --{role}-backend"
        )

    resolved: dict[str, object] = {}
    if "nmt" in needed:
        resolved["nmt"] = pick("nmt", backends.supports_translate)
    if "llm" in needed:
        resolved["llm"] = pick("llm", backends.supports_complete)
    return resolved


def _attention_inputs(job: dict, count: int):
    lexicon_path = job.get("lexicon")
    if not lexicon_path:
        raise _config_error("the attention method requires --lexicon")
    if not Path(lexicon_path).exists():
        raise _config_error(f"lexicon file not found: {lexicon_path}")
    matrix_path = job.get("matrix") or job.get("matrices")
    if not matrix_path:
        raise _config_error("the attention method requires --matrix")
    if not Path(matrix_path).exists():
        raise _config_error(f"attention matrix file not found: {matrix_path}")
    try:
        lexicon = align.load_lexicon_file(lexicon_path)
        matrices = align.load_matrices(matrix_path)
    except (align.LexiconFormatError, align.DimensionMismatchError, align.MatrixFormatError, ValueError) as exc:
        raise _config_error(str(exc))
    if len(matrices) != count:
        raise _config_error(
            f"{len(matrices)} attention matrices for {count} documents"
        )
    return lexicon, matrices


def _run_one(job, method, doc, index, resolved, lexicon, matrices):
    if method is pipelines.MethodKind.ATTENTION:
        return pipelines.run_attention_method(
            doc, matrices[index], lexicon,
            k=job["k"], threshold=job["threshold"],
            oov_policy=job["oov"], policy=job["policy"],
        )
    if method is pipelines.MethodKind.NMT_TAGS:
        return pipelines.run_nmt_tags_method(
            doc, resolved["nmt"], policy=job["policy"],
            source_lang=job["source_lang"], target_lang=job["target_lang"],
        )
    if method is pipelines.MethodKind.LLM_DELIMITERS:
        return pipelines.run_llm_delimiters_method(
            doc, resolved["llm"], policy=job["policy"],
        )
    return pipelines.run_hybrid_method(
        doc, resolved["nmt"], resolved["llm"], policy=job["policy"],
        source_lang=job["source_lang"], target_lang=job["target_lang"],
    )


def cmd_translate_styled(args: argparse.Namespace) -> int:
    job = _parse_job(args)
    documents = job["documents"]
    methods = job["methods"]

    needed = set()
    for method in methods:
        if method in (pipelines.MethodKind.NMT_TAGS, pipelines.MethodKind.HYBRID):
            needed.add("nmt")
        if method in (pipelines.MethodKind.LLM_DELIMITERS, pipelines.MethodKind.HYBRID):
            needed.add("llm")
    resolved = _resolve_backends(job, needed)

    lexicon = matrices = None
    if pipelines.MethodKind.ATTENTION in methods:
        lexicon, matrices = _attention_inputs(job, len(documents))

    started = datetime.now(timezone.utc)
    tasks = [
        (index, method, doc)
        for index, doc in enumerate(documents)
        for method in methods
    ]

    def execute(task):
        index, method, doc = task
        begin = time.perf_counter()
        result = _run_one(job, method, doc, index, resolved, lexicon, matrices)
        return index, method, doc, result, (time.perf_counter() - begin) * 1000.0

    outcomes = []
    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(execute, tasks))
    else:
        outcomes = [execute(task) for task in tasks]
    outcomes.sort(key=lambda item: (item[0], methods.index(item[1])))

    results = []
    timings = []
    for index, method, doc, result, elapsed_ms in outcomes:
        entry = pipelines.styled_translation_to_json(result, doc)
        entry["index"] = index
        results.append(entry)
        timings.append({"index": index, "method": method.value, "ms": round(elapsed_ms, 3)})
        print(
            f"sentence {index} [{method.value}]: {len(result.target.spans)} spans, "
            f"{len(result.map.pairs)} pairs, {len(result.anomalies)} anomalies, "
            f"{len(result.warnings)} warnings"
        )

    out_path = Path(args.output)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump({"results": results}, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")

    # Volatile values live in a sidecar so result files stay byte-identical.
    meta_path = Path(args.meta_out) if args.meta_out else out_path.with_suffix(".meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "run_id": str(uuid.uuid4()),
                "started_at": started.isoformat(),
                "finished_at": datetime.now(timezone.utc).isoformat(),
                "timings_ms": timings,
            },
            fh,
            ensure_ascii=False,
            indent=2,
        )
        fh.write("\n")
    print(f"wrote {out_path} ({len(results)} results); metadata in {meta_path}")
    return EXIT_OK


def cmd_align(args: argparse.Namespace) -> int:
    if not Path(args.lexicon).exists():
        raise _config_error(f"lexicon file not found: {args.lexicon}")
    if not Path(args.matrix).exists():
        raise _config_error(f"attention matrix file not found: {args.matrix}")
    try:
        lexicon = align.load_lexicon_file(args.lexicon)
        matrices = align.load_matrices(args.matrix)
    except (align.LexiconFormatError, align.DimensionMismatchError, align.MatrixFormatError, ValueError) as exc:
        raise _config_error(str(exc))
    if len(matrices) != 1:
        raise _config_error("align expects exactly one attention matrix record")
    matrix = matrices[0]

    if args.styled:
        try:
            styled = [int(s) for s in args.styled.split(",") if s.strip()]
        except ValueError:
            raise _config_error(f"bad --styled list: {args.styled!r}")
    elif args.input:
        doc = styled_text_from_json(_load_json(args.input))
        styled = sorted(doc.styled_indices())
    else:
        styled = list(range(len(matrix.source_tokens)))

    try:
        result = align.attention_align(
            matrix, styled, lexicon,
            k=args.k, threshold=args.threshold, oov_policy=align.OovPolicy(args.oov),
        )
    except ValueError as exc:
        raise _config_error(str(exc))
    payload = {
        "pairs": [[j, i] for j, i in result.sorted_pairs()],
        "source_len": result.source_len,
        "target_len": result.target_len,
    }
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        print(f"wrote {args.output} ({len(result.pairs)} pairs)")
    else:
        print(json.dumps(payload, ensure_ascii=False, indent=2))
    return EXIT_OK


def _load_predictions(path: str, golds) -> tuple[list, str]:
    data = _load_json(path)
    entries = data.get("results") if isinstance(data, dict) else data
    if not isinstance(entries, list):
        raise _config_error(f"{path} is not a result file")
    try:
        parsed = [pipelines.styled_translation_from_json(e) for e in entries]
    except (KeyError, TypeError, ValueError) as exc:
        raise _config_error(f"bad result entry in {path}: {exc}")
    if len(parsed) != len(golds):
        raise CliError(
            EXIT_CONFIG,
            "fixture_set_mismatch",
            f"{path} has {len(parsed)} results for {len(golds)} gold records",
        )
    for (_, source_text), gold in zip(parsed, golds):
        if source_text != gold.source.text:
            raise CliError(
                EXIT_CONFIG,
                "fixture_set_mismatch",
                f"{path} covers a different fixture set (source text differs)",
            )
    methods = {t.method.value for t, _ in parsed}
    label = methods.pop() if len(methods) == 1 else "mixed"
    return [t for t, _ in parsed], label


def _load_golds(path: str):
    if not Path(path).exists():
        raise _config_error(f"gold fixture file not found: {path}")
    try:
        return evalkit.load_gold_records(path)
    except (KeyError, TypeError, ValueError) as exc:
        raise _config_error(f"bad gold fixture file {path}: {exc}")


def cmd_evaluate(args: argparse.Namespace) -> int:
    golds = _load_golds(args.gold)
    preds, label = _load_predictions(args.results, golds)
    report = evalkit.evaluate_method(preds, golds, label)
    lines = [
        f"method: {report.method}",
        f"correct: {report.correct_count}/{report.total}",
        f"mean precision: {report.mean_precision:.4f}",
        f"mean recall: {report.mean_recall:.4f}",
        f"mean f1: {report.mean_f1:.4f}",
    ]
    excluded = [s for s in report.scores if s.excluded]
    for score in excluded:
        lines.append(f"excluded sentence {score.index}: {score.excluded_reason}")
    text = "\n".join(lines)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(text)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    gold_paths = args.gold
    if len(gold_paths) == 1:
        gold_paths = gold_paths * len(args.results)
    if len(gold_paths) != len(args.results):
        raise _config_error(
            f"{len(args.gold)} gold files for {len(args.results)} result files; "
            "give one shared gold file or one per result file"
        )
    reports = []
    for gold_path, result_path in zip(gold_paths, args.results):
        golds = _load_golds(gold_path)
        preds, label = _load_predictions(result_path, golds)
        reports.append(evalkit.evaluate_method(preds, golds, label))
    try:
        table = evalkit.render_comparison(reports)
    except evalkit.FixtureSetMismatchError as exc:
        raise CliError(EXIT_CONFIG, "fixture_set_mismatch", str(exc))
    if args.csv:
        Path(args.csv).write_text(evalkit.comparison_to_csv(reports), encoding="utf-8")
    if args.output:
        Path(args.output).write_text(table + "\n", encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(table)
    return EXIT_OK


def _parse_thresholds(spec: str) -> list[float]:
    if ":" in spec:
        try:
            start, stop, step = (float(v) for v in spec.split(":"))
        except ValueError:
            raise _config_error(f"bad threshold range {spec!r}, expected start:stop:step")
        if step <= 0:
            raise _config_error("threshold step must be positive")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(max(count, 0))]
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise _config_error(f"bad threshold list {spec!r}")


def cmd_sweep(args: argparse.Namespace) -> int:
    golds = _load_golds(args.gold)
    if not Path(args.lexicon).exists():
        raise _config_error(f"lexicon file not found: {args.lexicon}")
    if not Path(args.matrix).exists():
        raise _config_error(f"attention matrix file not found: {args.matrix}")
    try:
        lexicon = align.load_lexicon_file(args.lexicon)
        matrices = align.load_matrices(args.matrix)
    except (align.LexiconFormatError, align.DimensionMismatchError, align.MatrixFormatError, ValueError) as exc:
        raise _config_error(str(exc))
    thresholds = _parse_thresholds(args.thresholds)
    try:
        rows = evalkit.threshold_sweep(
            golds, lexicon, matrices, k=args.k, thresholds=thresholds,
            oov_policy=align.OovPolicy(args.oov),
        )
    except (evalkit.FixtureSetMismatchError, ValueError) as exc:
        raise _config_error(str(exc))
    except evalkit.TokenizationMismatchError as exc:
        raise CliError(EXIT_CONFIG, "fixture_set_mismatch", str(exc))
    text = evalkit.render_sweep(rows)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylealign",
        description="Carry typographic style spans through machine translation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ts = sub.add_parser("translate-styled", help="run one or more styling methods")
    ts.add_argument("--in", dest="input", required=True, help="job file or styled-document list (JSON)")
    ts.add_argument("--out", dest="output", required=True, help="result file path (JSON)")
    ts.add_argument("--meta-out", help="metadata sidecar path (default: <out>.meta.json)")
    ts.add_argument("--method", help="comma-separated methods: attention,nmt_tags,llm_delimiters,hybrid")
    ts.add_argument("--backends", help="backend config file (JSON)")
    ts.add_argument("--nmt-backend", help="backend name for translation")
    ts.add_argument("--llm-backend", help="backend name for completions")
    ts.add_argument("--lexicon", help="word-vector file for the attention method")
    ts.add_argument("--matrix", help="attention matrix interchange file")
    ts.add_argument("--threshold", type=float, help="similarity threshold (default 0.5)")
    ts.add_argument("--k", type=int, help="attention candidates per word (default 3)")
    ts.add_argument("--oov", choices=["permissive", "strict"], default="permissive")
    ts.add_argument("--tiebreak", choices=[t.value for t in pipelines.OccurrenceTiebreak],
                    default="relative_position")
    ts.add_argument("--unaligned", choices=["drop", "warn_drop"], default="warn_drop")
    ts.add_argument("--no-merge-adjacent", dest="merge_adjacent", action="store_false")
    ts.add_argument("--jobs", type=int, default=1, help="parallel sentence workers")
    ts.add_argument("--source-lang", default=None)
    ts.add_argument("--target-lang", default=None)
    ts.set_defaults(func=cmd_translate_styled)

    al = sub.add_parser("align", help="align styled words with an attention matrix")
    al.add_argument("--matrix", required=True)
    al.add_argument("--lexicon", required=True)
    al.add_argument("--in", dest="input", help="styled document JSON (styled indices from spans)")
    al.add_argument("--styled", help="comma-separated styled source indices")
    al.add_argument("--threshold", type=float, default=0.5)
    al.add_argument("--k", type=int, default=3)
    al.add_argument("--oov", choices=["permissive", "strict"], default="permissive")
    al.add_argument("--out", dest="output")
    al.set_defaults(func=cmd_align)

    ev = sub.add_parser("evaluate", help="score a result file against gold fixtures")
    ev.add_argument("--gold", required=True)
    ev.add_argument("--results", required=True)
    ev.add_argument("--out", dest="output")
    ev.set_defaults(func=cmd_evaluate)

    cp = sub.add_parser("compare", help="side-by-side method comparison table")
    cp.add_argument("--gold", action="append", required=True,
                    help="gold fixture file; repeat per result file when golds differ")
    cp.add_argument("--results", nargs="+", required=True)
    cp.add_argument("--out", dest="output")
    cp.add_argument("--csv", help="also write the table as CSV")
    cp.set_defaults(func=cmd_compare)

    sw = sub.add_parser("sweep", help="sweep the similarity threshold")
    sw.add_argument("--gold", required=True)
    sw.add_argument("--matrix", required=True)
    sw.add_argument("--lexicon", required=True)
    sw.add_argument("--thresholds", required=True, help="start:stop:step or comma list")
    sw.add_argument("--k", type=int, default=3)
    sw.add_argument("--oov", choices=["permissive", "strict"], default="permissive")
    sw.add_argument("--out", dest="output")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.code
    except backends.BackendError as exc:
        print(f"error[backend]: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (evalkit.FixtureSetMismatchError,) as exc:
        print(f"error[fixture_set_mismatch]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, KeyError) as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
