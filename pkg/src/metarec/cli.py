"""``metarec`` command line: one subcommand per pipeline stage.

Every stage reads from and writes to a run directory (``--store``) and leaves a
manifest with its resolved arguments under ``<store>/manifests/``. Outputs are
pure functions of inputs and seeds, so re-running a stage rewrites identical
files.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

from metarec import __version__

log = logging.getLogger("metarec")


class MissingArtifact(Exception):
    def __init__(self, what: str, path):
        super().__init__(f"missing {what}: {path} (run the earlier stage first or pass its path)")


def _need(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(what, path)
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(args, inputs: dict, outputs: dict, extra: dict | None = None) -> Path:
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
                if k not in ("func", "config")}
    manifest = {
        "command": args.command,
        "version": __version__,
        "config_file": str(args.config) if args.config else None,
        "args": resolved,
        "seeds": {k: v for k, v in resolved.items() if k == "seed" or k.endswith("_seed")},
        "inputs": {k: {"path": str(p), "sha256": _sha256(Path(p))} for k, p in inputs.items()},
        "outputs": {k: str(p) for k, p in outputs.items()},
    }
    if extra:
        manifest.update(extra)
    out = Path(args.store) / "manifests" / f"{args.command}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _store_path(args, name: str) -> Path:
    return Path(args.store) / name


def _out(args, default_name: str) -> Path:
    return Path(args.out) if args.out else _store_path(args, default_name)


# -- stages ------------------------------------------------------------------

def cmd_synth(args) -> int:
    from metarec.synth import planted_corpus

    out = _out(args, "synthetic")
    paths = planted_corpus(args.seed).write(out)
    _write_manifest(args, {}, paths)
    print(f"wrote planted corpus to {out}")
    return 0


def cmd_ingest(args) -> int:
    from metarec.corpus import CorpusStore

    corpus = _need(args.corpus, "corpus file")
    store = CorpusStore()
    cstats = store.ingest_corpus(corpus, args.format)
    inputs = {"corpus": corpus}
    jstats = None
    if args.judgments:
        judgments = _need(args.judgments, "judgments file")
        jstats = store.ingest_judgments(judgments)
        inputs["judgments"] = judgments
    store.save(args.store)
    extra = {"corpus_stats": vars(cstats), "judgment_stats": vars(jstats) if jstats else None}
    _write_manifest(args, inputs, {"store": args.store}, extra)
    print(f"ingested {cstats.doc_count} documents ({cstats.rejected_count} rejected)")
    if jstats:
        print(f"ingested {jstats.pair_count} judgment pairs from {jstats.researcher_count} researchers "
              f"({jstats.dropped_unresolvable} unresolvable)")
    return 0


def _load_store(args):
    from metarec.corpus import CORPUS_FILE, CorpusStore

    _need(_store_path(args, CORPUS_FILE), "corpus store (run `metarec ingest`)")
    return CorpusStore.load(args.store)


def cmd_index(args) -> int:
    from metarec.corpus import CORPUS_FILE
    from metarec.text_index import AnalyzerConfig, build_index

    store = _load_store(args)
    config = AnalyzerConfig(stem=args.stem, stopwords=args.stopwords)
    out = _store_path(args, "index.json")
    build_index(store, config).save(out)
    _write_manifest(args, {"corpus": _store_path(args, CORPUS_FILE)}, {"index": out})
    print(f"indexed {len(store)} documents into {out}")
    return 0


def _load_index(args):
    from metarec.text_index import CorpusIndex

    return CorpusIndex.load(_need(_store_path(args, "index.json"), "index (run `metarec index`)"))


def cmd_dataset(args) -> int:
    from metarec.corpus import CORPUS_FILE, JUDGMENTS_FILE
    from metarec.meta_dataset import build_meta_dataset

    store = _load_store(args)
    _need(_store_path(args, JUDGMENTS_FILE), "judgments (ingest with --judgments)")
    ds = build_meta_dataset(store, k=args.k, index=_load_index(args))
    out = _out(args, "meta.csv")
    ds.save(out)
    inputs = {"corpus": _store_path(args, CORPUS_FILE), "judgments": _store_path(args, JUDGMENTS_FILE),
              "index": _store_path(args, "index.json")}
    _write_manifest(args, inputs, {"dataset": out},
                    {"instance_count": len(ds), "dropped": ds.dropped})
    print(f"wrote {len(ds)} meta-instances ({ds.dropped} dropped) to {out}")
    return 0


def _params(args) -> dict:
    if not args.params:
        return {}
    text = args.params
    if not text.lstrip().startswith("{"):
        text = _need(text, "hyperparameter file").read_text()
    return json.loads(text)


def cmd_train(args) -> int:
    from metarec.learners import canonical_kind, train
    from metarec.meta_dataset import MetaDataset

    dataset = _need(args.dataset or _store_path(args, "meta.csv"), "meta-dataset CSV (run `metarec dataset`)")
    kind = canonical_kind(args.model)
    params = _params(args)
    model = train(kind, MetaDataset.load(dataset), params.get(kind, params) or None, seed=args.seed)
    out = _out(args, f"model-{args.model}.json")
    model.save(out)
    _write_manifest(args, {"dataset": dataset}, {"model": out},
                    {"hyperparameters": model.hyperparameters})
    print(f"trained {kind} on {dataset}; wrote {out}")
    return 0


def cmd_eval(args) -> int:
    from metarec.evaluation import run_offline_eval
    from metarec.learners import canonical_kind
    from metarec.meta_dataset import MetaDataset

    dataset = _need(args.dataset or _store_path(args, "meta.csv"), "meta-dataset CSV (run `metarec dataset`)")
    kinds = [canonical_kind(m.strip()) for m in args.models.split(",") if m.strip()]
    params = _params(args)
    report = run_offline_eval(MetaDataset.load(dataset), kinds, args.folds, args.seed,
                              {k: params[k] for k in kinds if k in params})
    out = _out(args, "eval")
    paths = report.write(out)
    _write_manifest(args, {"dataset": dataset}, paths, {"absent_models": report.absent})
    sys.stdout.write(report.to_csv())
    for name, why in report.absent.items():
        print(f"warning: model {name} absent from report ({why})", file=sys.stderr)
    return 0


def _model_path(args) -> Path:
    if args.model_path:
        return _need(args.model_path, "model file")
    return _need(_store_path(args, "model-rf.json"), "model file (run `metarec train --model rf`)")


def cmd_serve(args) -> int:
    import uvicorn

    from metarec.serving import RecommendationService, ServiceConfig, create_app

    _load_store(args)
    model = _model_path(args)
    config = ServiceConfig(seed=args.seed, arm_split=args.arm_split, timezone=args.tz)
    log_path = Path(args.log) if args.log else _store_path(args, "events.ndjson")
    service = RecommendationService.from_store(args.store, model, log_path, config)
    _write_manifest(args, {"model": model}, {"log": log_path})
    uvicorn.run(create_app(service), host=args.host, port=args.port, log_level="info")
    return 0


def cmd_simulate(args) -> int:
    from metarec.click_sim import ClickModel, SimConfig, run_online_sim
    from metarec.text_index import CorpusIndex

    store = _load_store(args)
    model = _model_path(args)
    sim = SimConfig.load(_need(args.sim_config, "simulation config")) if args.sim_config else SimConfig()
    sim.seed = args.seed
    if args.n_requests is not None:
        sim.n_requests = args.n_requests
    if args.blind:
        cm = sim.click_model
        sim.click_model = ClickModel.relevance_blind(cm.base_click_prob, cm.position_decay, cm.seed)
    index_path = _store_path(args, "index.json")
    index = CorpusIndex.load(index_path) if index_path.exists() else None
    out = _out(args, "sim")
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "events.ndjson"
    if log_path.exists():
        log_path.unlink()  # every run starts a fresh log, so reruns are identical
    truth = None
    if args.ground_truth:
        truth = json.loads(_need(args.ground_truth, "ground-truth file").read_text())
    report = run_online_sim(sim, store, model, index=index, log_path=log_path, ground_truth=truth)
    paths = report.write(out)
    paths["log"] = log_path
    _write_manifest(args, {"model": model}, paths, {"sim_config": sim.to_dict()})
    arms = report.ctr.arms
    for arm in ("meta", "random"):
        c = arms[arm]
        ctr = "undefined" if c.ctr is None else f"{100 * c.ctr:.3f}%"
        print(f"{arm:>6}: {c.clicks}/{c.delivered} clicks, CTR {ctr}")
    if report.ctr.p_value is not None:
        print(f"chi-squared {report.ctr.chi2:.4f}, p = {report.ctr.p_value:.4g}")
    return 0


def cmd_report(args) -> int:
    from metarec.serving.events import ctr_report

    out = _out(args, "report")
    out.mkdir(parents=True, exist_ok=True)
    inputs, outputs = {}, {}
    if args.log:
        log_path = _need(args.log, "event log")
        rep = ctr_report(log_path, args.since)
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rep.to_csv_rows())
        (out / "ctr.csv").write_text(buf.getvalue())
        (out / "ctr.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
        inputs["log"] = log_path
        outputs.update(ctr_csv=out / "ctr.csv", ctr_json=out / "ctr.json")
    if args.eval_report:
        src = _need(args.eval_report, "offline evaluation report")
        rows = json.loads(src.read_text())["rows"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "selection", "n", "precision", "recall", "f1"])
        for r in rows:
            w.writerow([r["section"], r["selection"], r["n"], repr(r["precision"]),
                        repr(r["recall"]), repr(r["f1"])])
        (out / "f1.csv").write_text(buf.getvalue())
        inputs["eval_report"] = src
        outputs["f1_csv"] = out / "f1.csv"
    if not inputs:
        raise MissingArtifact("report input", "pass --log and/or --eval-report")
    _write_manifest(args, inputs, outputs)
    for p in outputs.values():
        print(f"wrote {p}")
    return 0


def cmd_export(args) -> int:
    from metarec.serving.events import replay
    from metarec.serving.service import export_training

    log_path = _need(args.log or _store_path(args, "events.ndjson"), "event log")
    ds = export_training(replay(log_path), args.tz)
    out = _out(args, "online.csv")
    ds.save(out)
    _write_manifest(args, {"log": log_path}, {"dataset": out}, {"instance_count": len(ds)})
    print(f"exported {len(ds)} clicked impressions to {out}")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", default="run", help="run directory (default: ./run)")
    common.add_argument("--config", help="JSON file with default values for any flag")
    common.add_argument("--out", help="output path (default depends on the subcommand)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="metarec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"metarec {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=func)
        return sp

    sp = add("synth", cmd_synth, "write the planted-regime synthetic corpus")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("ingest", cmd_ingest, "load a corpus and judgments into the store")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--judgments")
    sp.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")

    sp = add("index", cmd_index, "build the inverted index")
    sp.add_argument("--stem", action="store_true", help="strip plural s-suffixes")
    sp.add_argument("--stopwords", action="store_true", help="drop English stopwords")

    sp = add("dataset", cmd_dataset, "label every judgment pair with its best algorithm")
    sp.add_argument("--k", type=int, default=10, help="retrieval depth for labelling")

    sp = add("train", cmd_train, "train one meta-learner")
    sp.add_argument("--dataset")
    sp.add_argument("--model", default="rf", help="tree | rf | gbm | glm")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--params", help="JSON object or file with hyperparameters")

    sp = add("eval", cmd_eval, "cross-validated offline evaluation")
    sp.add_argument("--dataset")
    sp.add_argument("--models", default="rf,gbm,glm")
    sp.add_argument("--folds", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--params", help="JSON object or file keyed by model kind")

    sp = add("serve", cmd_serve, "run the A/B recommendation service")
    sp.add_argument("--model", dest="model_path")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--arm-split", type=float, default=0.5)
    sp.add_argument("--tz", default="UTC", help="timezone for the hour-of-day feature")
    sp.add_argument("--log")

    sp = add("simulate", cmd_simulate, "replay the online experiment with simulated clicks")
    sp.add_argument("--model", dest="model_path")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-requests", type=int)
    sp.add_argument("--sim-config", help="JSON simulation config (click model, run size)")
    sp.add_argument("--blind", action="store_true", help="relevance-blind click model (null check)")
    sp.add_argument("--ground-truth", help="planted-regime summary to embed in the report")

    sp = add("report", cmd_report, "render CTR and F1 CSVs from logs and reports")
    sp.add_argument("--log")
    sp.add_argument("--since")
    sp.add_argument("--eval-report")

    sp = add("export", cmd_export, "export clicked impressions as online training data")
    sp.add_argument("--log")
    sp.add_argument("--tz", default="UTC")
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = json.loads(_need(known.config, "config file").read_text())
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        dests = {a.dest for a in sp._actions}
        sp.set_defaults(**{k.replace("-", "_"): v for k, v in values.items()
                           if k.replace("-", "_") in dests})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
