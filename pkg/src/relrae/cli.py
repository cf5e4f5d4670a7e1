"""Command-line interface.

Subcommands: ``enrich`` runs the four-stage pipeline and writes the skeleton
ontology; ``eval score|sweep|agreement`` exposes the evaluation harness;
``dump schema|relationships|verdicts`` prints intermediate JSON Lines.

Exit codes: 0 success, 1 fatal input error, 2 gateway error, 3 internal
invariant violation. Fatal errors also print one machine-readable JSON line
to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import evaluation as ev
from .errors import GatewayError, ReplayMiss, SchemaError
from .judge import LikertVerdict, judge_record_payload
from .pipeline import PipelineConfig, label_relationships, run_pipeline
from .refinement import PromptVariant
from .rubrex import relationship_records, run_rubrex
from .schema_model import parse_xsd, schema_records

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_GATEWAY_ERROR = 2
EXIT_INTERNAL_ERROR = 3


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    if p.suffix == ".json":
        return json.loads(p.read_text(encoding="utf-8"))
    with p.open("rb") as fh:
        return tomllib.load(fh)


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    """Resolve flags over config file over built-in defaults."""
    resolved = PipelineConfig().to_dict()
    if getattr(args, "config", None):
        resolved = _deep_merge(resolved, _load_config_file(args.config))

    direct = {
        "input": "input_xsd",
        "output": "output",
        "base_iri": "base_iri",
        "method": "method",
        "format": "format",
        "llm_mode": "llm_mode",
        "cache": "cache",
        "rules": "rules",
        "no_judge": "no_judge",
        "refine_subclass": "refine_subclass",
        "dump_schema": "dump_schema",
        "dump_relationships": "dump_relationships",
        "dump_verdicts": "dump_verdicts",
    }
    for flag, key in direct.items():
        value = getattr(args, flag, None)
        if value is not None:
            resolved[key] = value
    for flag, section, key in (
        ("refine_model", "refine", "model"),
        ("refine_temperature", "refine", "temperature"),
        ("refine_variant", "refine", "variant"),
        ("refine_examples", "refine", "examples"),
        ("refine_parallelism", "refine", "parallelism"),
        ("domain_description", "refine", "domain_description"),
        ("judge_model", "judge", "model"),
        ("judge_temperature", "judge", "temperature"),
        ("accept_at_or_above", "judge", "accept_at_or_above"),
        ("judge_parallelism", "judge", "parallelism"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            resolved.setdefault(section, {})[key] = value

    if not resolved.get("input_xsd"):
        raise ValueError("an input XSD is required (--input or config input_xsd)")
    try:
        return PipelineConfig.from_dict(resolved)
    except TypeError as exc:
        raise ValueError(f"bad config value: {exc}") from exc


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", "-i", help="input .xsd file")
    parser.add_argument("--output", "-o", help="output ontology file")
    parser.add_argument("--config", help="TOML (or snapshot JSON) config file")
    parser.add_argument("--method", choices=["rubrex-only", "llm-only", "refined"])
    parser.add_argument("--format", choices=["turtle", "ntriples"])
    parser.add_argument("--base-iri", dest="base_iri")
    parser.add_argument("--llm-mode", dest="llm_mode",
                        choices=["live", "record", "replay", "mock"])
    parser.add_argument("--cache", help="replay cache file (JSON Lines)")
    parser.add_argument("--rules", help="rule-table override (JSON)")
    parser.add_argument("--no-judge", dest="no_judge", action="store_true", default=None)
    parser.add_argument("--refine-subclass", dest="refine_subclass",
                        action="store_true", default=None)
    parser.add_argument("--refine-model", dest="refine_model")
    parser.add_argument("--refine-temperature", dest="refine_temperature", type=float)
    parser.add_argument("--refine-variant", dest="refine_variant",
                        choices=[v.value for v in PromptVariant])
    parser.add_argument("--refine-examples", dest="refine_examples",
                        choices=["generic", "domain", "none"])
    parser.add_argument("--refine-parallelism", dest="refine_parallelism", type=int)
    parser.add_argument("--domain-description", dest="domain_description")
    parser.add_argument("--judge-model", dest="judge_model")
    parser.add_argument("--judge-temperature", dest="judge_temperature", type=float)
    parser.add_argument("--accept-at-or-above", dest="accept_at_or_above",
                        choices=["No", "Unlikely", "Possible", "Likely", "Yes"])
    parser.add_argument("--judge-parallelism", dest="judge_parallelism", type=int)
    parser.add_argument("--dump-schema", dest="dump_schema", metavar="PATH")
    parser.add_argument("--dump-relationships", dest="dump_relationships", metavar="PATH")
    parser.add_argument("--dump-verdicts", dest="dump_verdicts", metavar="PATH")


def _embedding_provider(choice: str, dimension: int, model: str):
    if choice == "stub":
        return ev.HashStubEmbeddingProvider(dimension)
    if choice == "remote":
        import os
        base_url = os.environ.get("RELRAE_BASE_URL")
        if not base_url:
            raise ValueError("remote embeddings need RELRAE_BASE_URL")
        return ev.RemoteEmbeddingProvider(base_url, os.environ.get("RELRAE_API_KEY"), model)
    return ev.PrecomputedEmbeddingProvider(choice)


def _parse_float_list(raw: str) -> list[float]:
    return [float(part) for part in raw.split(",") if part.strip() != ""]


def _read_relationship_lines(path: str) -> list[tuple[str, str, str]]:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("label"):
                triples.append((obj.get("domain") or "", obj["range"], obj["label"]))
    return triples


def _read_verdict_lines(path: str) -> list[tuple[str, str, str, LikertVerdict]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append((obj.get("domain") or "", obj["range"], obj["judged_label"],
                            LikertVerdict.from_phrase(obj["verdict"])))
    return records


# --- subcommand handlers -----------------------------------------------------


def cmd_enrich(args: argparse.Namespace) -> int:
    config = build_pipeline_config(args)
    result = run_pipeline(config)
    print(f"wrote {result.output_path} "
          f"({len(result.ontology)} statements from "
          f"{len(result.final_relationships)} relationships)")
    return EXIT_OK


def cmd_eval_score(args: argparse.Namespace) -> int:
    generated = _read_relationship_lines(args.generated)
    refs = ev.ReferenceSet.from_csv(args.references)
    provider = _embedding_provider(args.embeddings, args.embedding_dim, args.embedding_model)
    thresholds = _parse_float_list(args.thresholds)
    report = ev.score_labels(generated, refs, provider, thresholds, aggregate=args.aggregate)

    headers = ["labels", "mean"] + [f">= {t:g} (%)" for t in thresholds]
    row = [str(len(report.per_label)), f"{report.mean_similarity:.3f}"]
    row += [f"{100 * report.rate_at[float(t)]:.1f}" for t in thresholds]
    table = ev.render_table(headers, [row])

    ev.write_csv(args.out_prefix + ".csv",
                 ["domain", "range", "generated_label", "best_reference", "similarity"],
                 ev.similarity_csv_rows(report))
    Path(args.out_prefix + ".txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_eval_sweep(args: argparse.Namespace) -> int:
    config = build_pipeline_config(args)
    refs = ev.ReferenceSet.from_csv(args.references)
    provider = _embedding_provider(args.embeddings, args.embedding_dim, args.embedding_model)
    thresholds = _parse_float_list(args.thresholds)
    temps = _parse_float_list(args.temps)
    reports = ev.temperature_sweep(config, temps, refs, provider, thresholds)

    table = ev.sweep_table(reports, config.method, thresholds)
    rows = []
    for temp in sorted(reports):
        report = reports[temp]
        row = {"temp": f"{temp:.2f}", "method": config.method,
               "mean_similarity": f"{report.mean_similarity:.6f}"}
        for t in thresholds:
            row[f"rate_at_{t:g}"] = f"{report.rate_at[float(t)]:.6f}"
        rows.append(row)
    fieldnames = ["temp", "method", "mean_similarity"] + [f"rate_at_{t:g}" for t in thresholds]
    ev.write_csv(args.out_prefix + ".csv", fieldnames, rows)
    Path(args.out_prefix + ".txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_eval_agreement(args: argparse.Namespace) -> int:
    records = _read_verdict_lines(args.verdicts)
    human = ev.human_ratings_from_csv(args.human)
    report = ev.likert_agreement(records, human)

    table = ev.render_table(
        ["n", "tight agreement (%)", "loose agreement (%)"],
        [[str(report.n), f"{100 * report.tight_agreement:.1f}",
          f"{100 * report.loose_agreement:.1f}"]],
    )
    rows = [
        {
            "domain": item.key[0],
            "range": item.key[1],
            "label": item.key[2],
            "verdict": item.verdict.phrase,
            "human_rating": str(item.human_rating).lower(),
        }
        for item in report.per_item
    ]
    ev.write_csv(args.out_prefix + ".csv",
                 ["domain", "range", "label", "verdict", "human_rating"], rows)
    Path(args.out_prefix + ".txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def _print_jsonl(records: list[dict], output: str | None) -> None:
    text = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_dump(args: argparse.Namespace) -> int:
    config = build_pipeline_config(args)
    doc = parse_xsd(config.input_xsd)
    if args.what == "schema":
        _print_jsonl(schema_records(doc), args.output)
        return EXIT_OK
    rels = run_rubrex(doc, config.rule_table())
    if args.what == "relationships":
        _print_jsonl(relationship_records(rels), args.output)
        return EXIT_OK
    config = dataclasses.replace(config, method="refined")
    _, records = label_relationships(config, rels)
    _print_jsonl([judge_record_payload(r) for r in records], args.output)
    return EXIT_OK


# --- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relrae",
        description="Translate an XML Schema Document into a skeleton RDF ontology.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    commands = parser.add_subparsers(dest="command", required=True)

    enrich = commands.add_parser("enrich", help="run the full pipeline")
    _add_pipeline_flags(enrich)
    enrich.set_defaults(handler=cmd_enrich)

    eval_parser = commands.add_parser("eval", help="evaluation harness")
    eval_sub = eval_parser.add_subparsers(dest="eval_command", required=True)

    score = eval_sub.add_parser("score", help="similarity of generated labels vs references")
    score.add_argument("--generated", required=True, help="relationships JSON Lines")
    score.add_argument("--references", required=True, help="reference CSV")
    score.add_argument("--embeddings", default="stub",
                       help="'stub', 'remote', or a precomputed JSONL path")
    score.add_argument("--embedding-dim", dest="embedding_dim", type=int, default=64)
    score.add_argument("--embedding-model", dest="embedding_model", default="phrase-embedding")
    score.add_argument("--thresholds", default="0.6,0.85")
    score.add_argument("--aggregate", choices=["max", "mean"], default="max")
    score.add_argument("--out-prefix", dest="out_prefix", default="score_report")
    score.set_defaults(handler=cmd_eval_score)

    sweep = eval_sub.add_parser("sweep", help="one scored run per temperature")
    _add_pipeline_flags(sweep)
    sweep.add_argument("--temps", default="0.0,0.25,0.5,0.75,1.0")
    sweep.add_argument("--references", required=True)
    sweep.add_argument("--embeddings", default="stub")
    sweep.add_argument("--embedding-dim", dest="embedding_dim", type=int, default=64)
    sweep.add_argument("--embedding-model", dest="embedding_model", default="phrase-embedding")
    sweep.add_argument("--thresholds", default="0.6,0.85")
    sweep.add_argument("--out-prefix", dest="out_prefix", default="sweep_report")
    sweep.set_defaults(handler=cmd_eval_sweep)

    agreement = eval_sub.add_parser("agreement", help="verdict vs human-rating agreement")
    agreement.add_argument("--verdicts", required=True, help="verdict JSON Lines")
    agreement.add_argument("--human", required=True, help="human ratings CSV")
    agreement.add_argument("--out-prefix", dest="out_prefix", default="agreement_report")
    agreement.set_defaults(handler=cmd_eval_agreement)

    dump = commands.add_parser("dump", help="print intermediate records as JSON Lines")
    dump.add_argument("what", choices=["schema", "relationships", "verdicts"])
    _add_pipeline_flags(dump)
    dump.set_defaults(handler=cmd_dump)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.handler(args)
    except ReplayMiss as exc:
        _report_fatal("ReplayMiss", str(exc), fingerprint=exc.fingerprint)
        return EXIT_GATEWAY_ERROR
    except GatewayError as exc:
        _report_fatal(type(exc).__name__, str(exc))
        return EXIT_GATEWAY_ERROR
    except (SchemaError, FileNotFoundError, ValueError, KeyError) as exc:
        _report_fatal(type(exc).__name__, str(exc))
        return EXIT_INPUT_ERROR
    except Exception as exc:  # invariant violations and bugs land here
        _report_fatal(type(exc).__name__, str(exc))
        return EXIT_INTERNAL_ERROR


def _report_fatal(error: str, detail: str, **extra) -> None:
    payload = {"error": error, "detail": detail}
    payload.update(extra)
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
