"""Command-line entry points for ingestion, retrieval, training, and evaluation."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .core import EmbeddingVector, VaPoint
from .errors import AffectError
from .grounding import DEFAULT_GAMMA, mahalanobis_weight
from .ingest import (
    dataset_stats,
    fit_attribute_gaussians,
    load_gaussians,
    load_records,
    save_gaussians,
    validate_annotations,
)
from .mapper import (
    MapperConfig,
    MapperSample,
    gradient_check,
    init_params,
    save_checkpoint,
    train,
)
from .metrics import VaPredictor, evaluate_manifest, load_manifest, report_table
from .retrieval import DEFAULT_TAU, RetrievalQuery, SweepGrid, retrieve, sweep
from .service import ServiceConfig, serve


def _print_json(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _load_db(args):
    dtype = np.float32 if getattr(args, "float32", False) else np.float64
    return load_records(args.records, format=args.format, storage_dtype=dtype)


def _add_db_args(p):
    p.add_argument("--records", required=True, help="records file (JSONL or CSV)")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--float32", action="store_true",
                   help="store embeddings in single precision")


def _result_json(db, res) -> dict:
    rec = db.record(res.record_id)
    return {
        "record_id": res.record_id,
        "similarity": res.similarity,
        "pool_size": res.pool_size,
        "fallback_used": res.fallback_used,
        "va_distance": res.va_distance,
        "valence": rec.va.valence,
        "arousal": rec.va.arousal,
        "attributes": sorted(rec.attributes),
        "image_path": rec.image_path,
    }


def _source_embedding(args):
    if args.source_embedding is not None:
        return EmbeddingVector(json.loads(args.source_embedding))
    return None


# -- subcommand handlers -----------------------------------------------------

def cmd_ingest(args) -> int:
    db = load_records(args.records, format=args.format, on_invalid="skip")
    _print_json({
        "records": len(db),
        "embedding_dim": db.embedding_dim,
        "attributes": len(db.attribute_catalog),
        "fingerprint": db.fingerprint(),
        "rejects": [{"line": r.line, "id": r.record_id, "reason": r.reason}
                    for r in db.load_rejects],
    })
    return 1 if db.load_rejects else 0


def cmd_stats(args) -> int:
    db = _load_db(args)
    rep = dataset_stats(db)
    print(f"records: {rep.total}")
    print("quadrants:")
    for label in ("V+A+", "V+A-", "V-A+", "V-A-"):
        print(f"  {label}: {rep.quadrants[label]}")
    if rep.attributes:
        print("attributes:")
        for name, count in sorted(rep.attributes.items(), key=lambda kv: (-kv[1], kv[0])):
            print(f"  {name}: {count}")
    return 0


def cmd_fit_gaussians(args) -> int:
    db = _load_db(args)
    table = fit_attribute_gaussians(db, min_count=args.min_count, eps=args.eps)
    save_gaussians(table, args.out)
    _print_json({"fitted": len(table), "skipped": table.skipped, "out": args.out})
    return 0


def _load_va_series(path):
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            points.append(VaPoint(float(obj["valence"]), float(obj["arousal"])))
    return points


def cmd_validate_annotations(args) -> int:
    model = _load_va_series(args.model)
    human = _load_va_series(args.human)
    rep = validate_annotations(model, human)
    print(f"{'Dimension':<10} {'Pearson r':>10} {'CCC':>10} {'MAE':>10}")
    for name, dim in (("Valence", rep.valence), ("Arousal", rep.arousal)):
        print(f"{name:<10} {dim.pearson_r:>10.3f} {dim.ccc:>10.3f} {dim.mae:>10.3f}")
    return 0


def cmd_retrieve(args) -> int:
    db = _load_db(args)
    query = RetrievalQuery(
        target_va=VaPoint(args.v, args.a),
        source_embedding=_source_embedding(args),
        source_id=args.source_id,
        tau=args.tau,
    )
    res = retrieve(db, query)
    _print_json(_result_json(db, res))
    return 0


def cmd_sweep(args) -> int:
    db = _load_db(args)
    if (args.source_id is None) == (args.source_embedding is None):
        print("error: provide exactly one of --source-id or --source-embedding",
              file=sys.stderr)
        return 2
    if args.source_id is not None:
        emb = db.record(args.source_id).embedding
    else:
        emb = _source_embedding(args)
    grid = SweepGrid(
        v_values=tuple(float(x) for x in args.v_values.split(",")),
        a_values=tuple(float(x) for x in args.a_values.split(",")),
        tau=args.tau,
    )
    out = sweep(db, emb, grid)
    manifest = {
        "v_values": list(out.v_values),
        "a_values_desc": list(out.a_values_desc),
        "tau": out.tau,
        "rows": [[_result_json(db, cell) for cell in row] for row in out.rows],
    }
    _print_json(manifest)
    return 0


def cmd_weights(args) -> int:
    table = load_gaussians(args.gaussians)
    point = VaPoint(args.v, args.a)
    rows = [{"attribute": g.attribute, "weight": mahalanobis_weight(point, g, args.gamma)}
            for g in table.gaussians.values()]
    _print_json(rows)
    return 0


def cmd_train_mapper(args) -> int:
    db = _load_db(args)
    gaussians = load_gaussians(args.gaussians) if args.gaussians else None
    attr_emb = None
    if args.attr_embeddings:
        from .grounding import read_attribute_embeddings
        names, attr_emb = read_attribute_embeddings(args.attr_embeddings)
        if names != db.attribute_catalog:
            print("error: attribute embedding names do not match the database catalog",
                  file=sys.stderr)
            return 1
    config = MapperConfig(
        input_dim=args.input_dim, token_count=args.token_count,
        local_dim=args.local_dim, global_dim=args.global_dim,
        hidden_dims=tuple(int(h) for h in args.hidden_dims.split(",")),
        alpha=args.alpha, beta=args.beta, learning_rate=args.lr,
        weight_decay=args.weight_decay, warmup_steps=args.warmup_steps,
        seed=args.seed, train_steps=args.steps, batch_size=args.batch_size,
    )
    params, history = train(db, gaussians, attr_emb, config)
    save_checkpoint(args.out, params, config, step=config.train_steps)
    if args.history:
        with open(args.history, "w", encoding="utf-8") as fh:
            for rec in history.steps:
                fh.write(json.dumps(vars(rec)) + "\n")
    last = history.steps[-1]
    _print_json({"checkpoint": args.out, "steps": len(history),
                 "final_l_aff": last.l_aff, "final_l_sg": last.l_sg,
                 "final_l_total": last.l_total})
    return 0


def cmd_grad_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    config = MapperConfig(input_dim=6, token_count=2, local_dim=4, global_dim=4,
                          hidden_dims=(5,), seed=args.seed)
    params = init_params(config)
    k = 3
    attr = rng.standard_normal((k, config.global_dim))
    attr /= np.linalg.norm(attr, axis=1, keepdims=True)
    batch = [MapperSample(
        affect_feature=rng.standard_normal(config.input_dim),
        va=VaPoint(*rng.uniform(-0.9, 0.9, size=2)),
        attr_embeddings=attr,
        multi_hot=rng.integers(0, 2, size=k).astype(float),
        weights=rng.uniform(0.1, 1.0, size=k),
    ) for _ in range(2)]
    err = gradient_check(params, batch, config, h=args.h)
    _print_json({"max_relative_error": err, "threshold": 1e-5, "passed": err <= 1e-5})
    return 0 if err <= 1e-5 else 1


def cmd_eval(args) -> int:
    import os

    entries = load_manifest(args.manifest)
    db = None
    if args.records:
        db = _load_db(args)
    predictor = VaPredictor(k=args.knn_k, weighting=args.weighting)
    report = evaluate_manifest(entries, db=db, predictor=predictor,
                               base_dir=os.path.dirname(os.path.abspath(args.manifest)))
    if args.json_out:
        payload = {"pairs": [vars(p) for p in report.pairs],
                   "aggregate": report.aggregate, "counts": report.counts}
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=str)
            fh.write("\n")
    print(report_table(report))
    return 0


def cmd_serve(args) -> int:
    config = ServiceConfig(
        database_path=args.records, database_format=args.format,
        host=args.host, port=args.port,
        gaussians_path=args.gaussians, default_tau=args.tau,
        request_log_path=args.request_log,
        storage_dtype="float32" if args.float32 else "float64",
    )
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affectkit",
        description="VA-driven affective retrieval and evaluation engine")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and fingerprint a records file")
    p.add_argument("--records", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="quadrant and attribute counts")
    _add_db_args(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fit-gaussians", help="fit per-attribute VA Gaussians")
    _add_db_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--min-count", type=int, default=30)
    p.add_argument("--eps", type=float, default=1e-4)
    p.set_defaults(func=cmd_fit_gaussians)

    p = sub.add_parser("validate-annotations",
                       help="agreement between two VA annotation files")
    p.add_argument("--model", required=True, help="JSONL of {valence, arousal}")
    p.add_argument("--human", required=True, help="JSONL of {valence, arousal}")
    p.set_defaults(func=cmd_validate_annotations)

    p = sub.add_parser("retrieve", help="single VA-aware retrieval")
    _add_db_args(p)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--source-id")
    p.add_argument("--source-embedding", help="JSON array of floats")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("sweep", help="grid of retrievals over VA targets")
    _add_db_args(p)
    p.add_argument("--v-values", required=True,
                   help="comma-separated ascending; use --v-values=-1,0,1 for negatives")
    p.add_argument("--a-values", required=True,
                   help="comma-separated ascending; use --a-values=-1,0,1 for negatives")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--source-id")
    p.add_argument("--source-embedding", help="JSON array of floats")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("weights", help="per-attribute weights at a VA point")
    p.add_argument("--gaussians", required=True)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("train-mapper", help="train the affect-semantic mapper")
    _add_db_args(p)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="optional JSONL of per-step records")
    p.add_argument("--gaussians")
    p.add_argument("--attr-embeddings")
    p.add_argument("--input-dim", type=int, default=768)
    p.add_argument("--token-count", type=int, default=4)
    p.add_argument("--local-dim", type=int, default=768)
    p.add_argument("--global-dim", type=int, default=1280)
    p.add_argument("--hidden-dims", default="1024,1024")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=3e-5)
    p.add_argument("--weight-decay", type=float, default=1e-2)
    p.add_argument("--warmup-steps", type=int, default=300)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_mapper)

    p = sub.add_parser("grad-check", help="finite-difference check on a tiny instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("eval", help="metrics over an evaluation manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--records", help="reference database for k-NN VA prediction")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--weighting", choices=("uniform", "inverse-distance"),
                   default="uniform")
    p.add_argument("--json-out", help="write the full report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    _add_db_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--gaussians")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--request-log")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AffectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
