"""Command-line entry point.

    zsl-kep run     --config cfg.json [--workers N] [--backend mock|http]
                    [--output path] [--print-config]
    zsl-kep score   --pred predictions.json --gold claims.json [--stemming]
                    [--report path]
    zsl-kep inspect --config cfg.json --claim ID [--no-llm]

Summary statistics go to stderr and data goes to files; stdout is reserved
for inspect dumps. Exit codes: 0 success, 1 configuration or I/O problem,
2 when at least one claim had to fall back to the failure verdict.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from .bm25 import Bm25Params, build_index, score as bm25_score, tokenize
from .config import RunConfig
from .corpus import load_claims, load_predictions, load_store, write_predictions
from .errors import ConfigError, MalformedInput, MissingGold
from .keypoints import KeyPointSet, PromptLibrary, build_keypoint_prompt, make_keypoints
from .llm_gateway import Gateway, GatewayError, HttpBackend, MockBackend
from .pipeline import build_unified_string, run_batch, run_retrieval, store_path_for
from .scoring import MeteorParams, score_run


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _build_gateway(cfg: RunConfig) -> Gateway:
    if cfg.backend == "mock":
        backend = MockBackend.from_file(cfg.mock_script_path)
    else:
        backend = HttpBackend(cfg.base_url, cfg.model_name)
    return Gateway(backend, max_attempts=cfg.max_attempts, prompt_budget=cfg.prompt_budget)


def _load_config(args, require_backend: bool = True) -> RunConfig:
    cfg = RunConfig.from_file(args.config)
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "backend", None):
        cfg.backend = args.backend
    if getattr(args, "output", None):
        cfg.output_path = args.output
    cfg.validate(require_backend=require_backend)
    return cfg


def cmd_run(args) -> int:
    cfg = _load_config(args)
    if args.print_config:
        json.dump(cfg.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0

    claims = load_claims(cfg.claims_path)
    for record in claims:
        store_path = store_path_for(cfg.store_dir, record.claim_id)
        if not os.path.exists(store_path):
            _log(f"error: missing knowledge store {store_path}")
            return 1

    gateway = _build_gateway(cfg)
    completed = []
    try:
        reports = run_batch(claims, gateway, cfg, completed=completed)
    except KeyboardInterrupt:
        completed.sort(key=lambda r: r.claim_id)
        write_predictions(cfg.output_path, completed)
        _log(f"interrupted: flushed {len(completed)} completed reports to {cfg.output_path}")
        return 130
    write_predictions(cfg.output_path, reports)

    truncated = sum(1 for r in reports if r.diagnostics.truncated)
    fallbacks = sum(r.diagnostics.parse_fallbacks for r in reports)
    failed = sum(1 for r in reports if r.diagnostics.failed)
    _log(f"claims processed: {len(reports)}")
    _log(f"truncated runs: {truncated}")
    _log(f"parse fallbacks: {fallbacks}")
    _log(f"failed claims: {failed}")
    _log(f"wrote predictions to {cfg.output_path}")
    return 2 if failed else 0


def cmd_score(args) -> int:
    params = MeteorParams(stemming=args.stemming)
    gold = load_claims(args.gold)
    reports = load_predictions(args.pred)
    result = score_run(reports, gold, params)

    _log(f"q_only={result.aggregate['q_only']:.4f}")
    _log(f"q_plus_a={result.aggregate['q_plus_a']:.4f}")
    _log(f"averitec={result.aggregate['averitec']:.4f}")

    report_path = args.report or str(Path(args.pred).with_suffix(".scores.json"))
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2)
        fh.write("\n")
    _log(f"wrote score report to {report_path}")
    return 0


def cmd_inspect(args) -> int:
    cfg = _load_config(args, require_backend=not args.no_llm)

    claims = load_claims(cfg.claims_path)
    if not 0 <= args.claim < len(claims):
        _log(f"error: unknown claim id {args.claim} (file has {len(claims)} claims)")
        return 1
    record = claims[args.claim]

    store_path = store_path_for(cfg.store_dir, record.claim_id)
    if not os.path.exists(store_path):
        _log(f"error: missing knowledge store {store_path}")
        return 1
    store = load_store(store_path, record.claim_id)
    index = build_index(store, Bm25Params(k1=cfg.k1, b=cfg.b))
    library = PromptLibrary.load(cfg.prompt_overrides)

    print(f"claim {record.claim_id}: {record.text}")
    if args.no_llm:
        keypoints = KeyPointSet()
        system, user = build_keypoint_prompt(record.text, library)
        print("key points skipped (--no-llm); keypoint prompt shown instead")
        print("--- keypoint system prompt ---")
        print(system)
        print("--- keypoint user prompt ---")
        print(user)
    else:
        gateway = _build_gateway(cfg)
        keypoints, _ = make_keypoints(
            gateway, record.text, claim_id=record.claim_id, library=library,
            temperature=cfg.temperature, top_p=cfg.top_p,
            max_new_tokens=cfg.max_tokens_keypoints)
        print(f"key points: {keypoints.n} "
              f"(primitives {len(keypoints.primitives)}, combined {len(keypoints.combined)})")
        for i, kp in enumerate(keypoints.primitives, start=1):
            print(f"  P{i}. {kp}")
        for i, kp in enumerate(keypoints.combined, start=1):
            print(f"  C{i}. {kp}")

    groups = run_retrieval(index, store, keypoints, record.text, cfg)
    ordinal_of = {ref: o for o, ref in enumerate(index.doc_refs)}
    print(f"groups: {len(groups)}")
    for pos, group in enumerate(groups, start=1):
        cap = cfg.claim_top_k if group.kind == "claim" else cfg.keypoint_top_k
        print(f"group {pos}/{len(groups)} kind={group.kind} cap={cap} "
              f"docs={len(group.docs)} query={group.query!r}")
        query_tokens = tokenize(group.query)
        for ref, text in group.docs:
            doc_score = bm25_score(index, query_tokens, ordinal_of[ref])
            snippet = text if len(text) <= 80 else text[:77] + "..."
            print(f"  {doc_score:.6f} <{ref.serialize()}> {snippet}")

    print("unified retrieval string:")
    print(build_unified_string(groups))
    return 0


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zsl-kep",
        description="Batch fact checking: key-point retrieval, LLM verdicts, evidence scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="process every claim and write predictions")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--workers", type=int)
    run_p.add_argument("--backend", choices=("mock", "http"))
    run_p.add_argument("--output", help="override output_path from the config")
    run_p.add_argument("--print-config", action="store_true",
                       help="print the effective configuration and exit")
    run_p.set_defaults(func=cmd_run)

    score_p = sub.add_parser("score", help="score predictions against gold claims")
    score_p.add_argument("--pred", required=True)
    score_p.add_argument("--gold", required=True)
    score_p.add_argument("--stemming", action="store_true")
    score_p.add_argument("--report", help="score report path (default: <pred>.scores.json)")
    score_p.set_defaults(func=cmd_score)

    inspect_p = sub.add_parser("inspect", help="dump retrieval internals for one claim")
    inspect_p.add_argument("--config", required=True)
    inspect_p.add_argument("--claim", type=int, required=True)
    inspect_p.add_argument("--no-llm", action="store_true",
                           help="skip the key point call; claim-only retrieval")
    inspect_p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = _make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MalformedInput, MissingGold, GatewayError) as exc:
        _log(f"error: {exc}")
        return 1
    except OSError as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
