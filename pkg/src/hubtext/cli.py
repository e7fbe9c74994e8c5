"""Batch command-line pipeline.

Subcommands cover the whole flow: ``hub-embed`` computes the closed-form hub
embedding, ``init`` picks the starting text, ``search`` runs beam local
search (optionally over several beam sizes), ``eval-caption`` and
``eval-retrieval`` quantify the damage, and ``export-trajectory`` re-emits a
saved search trajectory as CSV. Options can come from a TOML config file;
explicit flags always win. Every command writes its resolved configuration
next to its outputs.

Exit codes: 0 success, 1 configuration/validation problem, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import capeval, retrieval
from .candidates import corpus_fallback_init, load_hypotheses, select_best_hypothesis
from .embedding import Measure, SimilarityConfig, mean_similarity
from .encoders import ToyTextEncoder, Vocabulary, load_image_fixtures
from .errors import HubTextError
from .hub import optimal_hub_cosine, optimal_hub_inner_product, optimal_hub_sqeuclidean
from .remote import RemoteEncoder
from .search import beam_local_search, export_trajectory_csv, write_run_metadata

MEASURES = {
    "cosine": Measure.COSINE,
    "inner_product": Measure.INNER_PRODUCT,
    "sqeuclidean": Measure.NEG_SQEUCLIDEAN,
}


class ValidationFailure(Exception):
    """Bad configuration or input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(self._exit_with(message))

    @staticmethod
    def _exit_with(message) -> int:
        print(f"error: {message}", file=sys.stderr)
        return 1


# keys a config file may provide, with the flag defaults
CONFIG_DEFAULTS = {
    "vocab": None,
    "tuning": None,
    "hypotheses": None,
    "corpus": None,
    "pairs": None,
    "images": None,
    "docs": None,
    "queries": None,
    "qrels": None,
    "encoder": "toy",
    "encoder_dim": 32,
    "encoder_seed": 0,
    "bridge_cmd": None,
    "max_batch": 256,
    "measure": "cosine",
    "scale": 2.5,
    "clipped": False,
    "k": [5],
    "seed": 0,
    "workers": 0,  # 0 = available parallelism
    "top_n": 1,
    "norm_budget": 1.0,
    "counts": [0, 1, 1000],
    "resamples": 1000,
    "position_order": "random",
    "sweep_all_positions": False,
    "max_iterations": None,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="hubtext", description="hub-text toolkit for cross-modal encoders")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file; flags override its keys")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--vocab", help="vocabulary file (one token per line)")
        p.add_argument("--encoder", choices=["toy", "bridge"], default=None)
        p.add_argument("--encoder-dim", type=int, default=None, dest="encoder_dim")
        p.add_argument("--encoder-seed", type=int, default=None, dest="encoder_seed")
        p.add_argument("--bridge-cmd", default=None, dest="bridge_cmd", help="sidecar command line")
        p.add_argument("--max-batch", type=int, default=None, dest="max_batch")
        p.add_argument("--measure", choices=sorted(MEASURES), default=None)
        p.add_argument("--scale", type=float, default=None)
        p.add_argument("--clipped", action="store_true", default=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("hub-embed", help="closed-form hub embedding from tuning images")
    common(p)
    p.add_argument("--tuning", default=None)
    p.add_argument("--norm-budget", type=float, default=None, dest="norm_budget")

    p = sub.add_parser("init", help="choose the starting hub-text candidate")
    common(p)
    p.add_argument("--tuning", default=None)
    p.add_argument("--hypotheses", default=None, help="inversion hypotheses, one per line")
    p.add_argument("--corpus", default=None, help="fallback corpus, one text per line")
    p.add_argument("--top-n", type=int, default=None, dest="top_n")
    p.add_argument("--lenient", action="store_true", help="drop untokenizable hypotheses instead of failing")
    p.add_argument("--epsilon", type=float, default=None, help="sampling epsilon of the external decoder, recorded in metadata")

    p = sub.add_parser("search", help="beam local search from the initial text")
    common(p)
    p.add_argument("--tuning", default=None)
    p.add_argument("--init-text", default=None, dest="init_text")
    p.add_argument("--init-json", default=None, dest="init_json", help="init.json from the init command")
    p.add_argument("--k", default=None, help="comma-separated beam sizes, e.g. 5,10,20")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--position-order", choices=["random", "sequential"], default=None, dest="position_order")
    p.add_argument("--sweep-all-positions", action="store_true", default=None, dest="sweep_all_positions")
    p.add_argument("--max-iterations", type=int, default=None, dest="max_iterations")

    p = sub.add_parser("eval-caption", help="corpus CLIPScore, win rates, significance")
    common(p)
    p.add_argument("--pairs", default=None, help="JSON-lines eval pairs")
    p.add_argument("--images", default=None, help="image fixture file the pairs reference")
    p.add_argument("--hub-text", default=None, dest="hub_text")
    p.add_argument("--hub-json", default=None, dest="hub_json", help="search.json to take the hub text from")
    p.add_argument("--resamples", type=int, default=None)

    p = sub.add_parser("eval-retrieval", help="image-to-text retrieval contamination table")
    common(p)
    p.add_argument("--docs", default=None, help="doc_id<TAB>text per line")
    p.add_argument("--queries", default=None, help="image fixture file of query embeddings")
    p.add_argument("--qrels", default=None, help="query_id<TAB>doc_id per line")
    p.add_argument("--hub-text", default=None, dest="hub_text")
    p.add_argument("--hub-json", default=None, dest="hub_json")
    p.add_argument("--counts", default=None, help="comma-separated contamination counts")

    p = sub.add_parser("export-trajectory", help="re-emit a saved search trajectory as CSV")
    common(p)
    p.add_argument("--report", required=True, help="search.json produced by the search command")
    p.add_argument("--k", default=None, help="beam size to export (default: the best one)")

    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Layer precedence: defaults, then config file, then explicit flags."""
    resolved = dict(CONFIG_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ValidationFailure(f"config file not found: {path}")
        with open(path, "rb") as fh:
            try:
                loaded = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ValidationFailure(f"config file {path}: {exc}") from exc
        unknown = set(loaded) - set(CONFIG_DEFAULTS)
        if unknown:
            raise ValidationFailure(f"config file {path}: unknown keys {sorted(unknown)}")
        resolved.update(loaded)
    for key in CONFIG_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    for key in ("k", "counts"):
        if isinstance(resolved[key], str):
            try:
                resolved[key] = [int(x) for x in resolved[key].split(",") if x.strip()]
            except ValueError as exc:
                raise ValidationFailure(f"--{key} must be comma-separated integers: {exc}") from exc
    if not resolved["workers"]:
        resolved["workers"] = os.cpu_count() or 1
    return resolved


def require_path(cfg: dict, key: str) -> Path:
    value = cfg.get(key)
    if not value:
        raise ValidationFailure(f"missing required input: --{key.replace('_', '-')}")
    path = Path(value)
    if not path.exists():
        raise ValidationFailure(f"--{key.replace('_', '-')}: file not found: {path}")
    return path


def make_similarity(cfg: dict) -> SimilarityConfig:
    measure = MEASURES.get(cfg["measure"])
    if measure is None:
        raise ValidationFailure(f"unknown measure {cfg['measure']!r}")
    return SimilarityConfig(measure=measure, scale=cfg["scale"], clip_at_zero=bool(cfg["clipped"]))


def make_encoder(cfg: dict):
    if cfg["encoder"] == "toy":
        vocab = Vocabulary.from_file(require_path(cfg, "vocab"))
        return ToyTextEncoder(vocab, dim=int(cfg["encoder_dim"]), seed=int(cfg["encoder_seed"]))
    if cfg["encoder"] == "bridge":
        if not cfg.get("bridge_cmd"):
            raise ValidationFailure("--bridge-cmd is required with --encoder bridge")
        return RemoteEncoder.spawn(shlex.split(cfg["bridge_cmd"]), max_batch=int(cfg["max_batch"]))
    raise ValidationFailure(f"unknown encoder {cfg['encoder']!r}")


def write_outputs(out_dir: Path, cfg: dict, command: str, name: str, payload: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {"command": command, **{k: cfg[k] for k in sorted(cfg)}}
    (out_dir / "resolved_config.json").write_text(json.dumps(resolved, indent=2) + "\n", encoding="utf-8")
    target = out_dir / name
    target.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return target


def cmd_hub_embed(cfg: dict, out_dir: Path) -> int:
    tuning = load_image_fixtures(require_path(cfg, "tuning"))
    solvers = {
        "cosine": lambda: optimal_hub_cosine(tuning),
        "inner_product": lambda: optimal_hub_inner_product(tuning, norm_budget=float(cfg["norm_budget"])),
        "sqeuclidean": lambda: optimal_hub_sqeuclidean(tuning),
    }
    which = cfg["measure"]
    if which not in solvers:
        raise ValidationFailure(f"unknown measure {which!r}")
    solution = solvers[which]()
    payload = {
        "measure": which,
        "dim": tuning.dim,
        "tuning_size": len(tuning),
        "objective": solution.objective_value,
        "embedding": [float(v) for v in solution.embedding],
    }
    target = write_outputs(out_dir, cfg, "hub-embed", "hub_embedding.json", payload)
    print(f"hub-embed: {which} objective {solution.objective_value:.6f} over {len(tuning)} images -> {target}")
    return 0


def cmd_init(cfg: dict, out_dir: Path, lenient: bool, epsilon: float | None) -> int:
    tuning = load_image_fixtures(require_path(cfg, "tuning"))
    sim = make_similarity(cfg)
    encoder = make_encoder(cfg)
    if cfg.get("hypotheses"):
        hset = load_hypotheses(require_path(cfg, "hypotheses"), encoder.vocab, strict=not lenient)
    elif cfg.get("corpus"):
        corpus_lines = [
            ln.strip()
            for ln in require_path(cfg, "corpus").read_text(encoding="utf-8").splitlines()
            if ln.strip()
        ]
        hset = corpus_fallback_init(corpus_lines, encoder, tuning, sim, top_n=int(cfg["top_n"]))
    else:
        raise ValidationFailure("init needs --hypotheses or --corpus")
    best, score = select_best_hypothesis(hset, encoder, tuning, sim)
    payload = {
        "text": best.text,
        "token_ids": list(best.token_ids),
        "score": score,
        "provenance": hset.provenance.value,
        "pool_size": len(hset),
        "encoder": encoder.describe(),
    }
    if epsilon is not None:
        payload["sampling_epsilon"] = epsilon
    target = write_outputs(out_dir, cfg, "init", "init.json", payload)
    print(f"init: {best.text!r} score {score:.6f} ({hset.provenance.value}) -> {target}")
    return 0


def cmd_search(cfg: dict, out_dir: Path, init_text: str | None, init_json: str | None) -> int:
    tuning = load_image_fixtures(require_path(cfg, "tuning"))
    sim = make_similarity(cfg)
    encoder = make_encoder(cfg)
    if init_json:
        init_payload = json.loads(Path(init_json).read_text(encoding="utf-8"))
        init_text = init_payload["text"]
    if not init_text:
        raise ValidationFailure("search needs --init-text or --init-json")
    init_ids = encoder.vocab.encode(init_text)

    results = {}
    best_k = None
    for k in cfg["k"]:
        report = beam_local_search(
            init_ids,
            tuning,
            encoder,
            sim,
            k=int(k),
            seed=int(cfg["seed"]),
            n_workers=int(cfg["workers"]),
            position_order=cfg["position_order"],
            sweep_all_positions=bool(cfg["sweep_all_positions"]),
            max_iterations=cfg["max_iterations"],
        )
        results[str(k)] = {
            "text": report.best.text,
            "token_ids": list(report.best.seq),
            "score": report.best.score,
            "iterations": report.iterations,
            "substitutions": report.substitutions_applied,
            "wall_time_seconds": report.wall_time,
            "trajectory": [[t, s] for t, s in report.trajectory],
            "substitution_counts": list(report.substitution_counts),
        }
        csv_path = out_dir / f"trajectory_k{k}.csv"
        out_dir.mkdir(parents=True, exist_ok=True)
        export_trajectory_csv(report, csv_path)
        write_run_metadata(
            out_dir / f"trajectory_k{k}.meta.json",
            seed=int(cfg["seed"]),
            k=int(k),
            cfg=sim,
            encoder_desc=encoder.describe(),
            wall_time=report.wall_time,
            extra={"init_text": init_text, "tuning": str(cfg["tuning"])},
        )
        if best_k is None or results[str(k)]["score"] > results[str(best_k)]["score"]:
            best_k = str(k)
        print(
            f"search k={k}: {report.best.text!r} score {report.best.score:.6f} "
            f"({report.iterations} iterations, {report.substitutions_applied} substitutions)"
        )
    payload = {
        "init_text": init_text,
        "init_score": mean_similarity(encoder.encode_sequence(init_ids), tuning, sim),
        "k_values": [int(k) for k in cfg["k"]],
        "results": results,
        "best_k": int(best_k),
        "best": results[best_k],
        "encoder": encoder.describe(),
    }
    target = write_outputs(out_dir, cfg, "search", "search.json", payload)
    print(f"search: best k={best_k} -> {target}")
    return 0


def _hub_text_from(cfg: dict, hub_text: str | None, hub_json: str | None) -> str | None:
    if hub_text:
        return hub_text
    if hub_json:
        payload = json.loads(Path(hub_json).read_text(encoding="utf-8"))
        return payload["best"]["text"] if "best" in payload else payload["text"]
    return None


def cmd_eval_caption(cfg: dict, out_dir: Path, hub_text: str | None, hub_json: str | None) -> int:
    images = load_image_fixtures(require_path(cfg, "images"))
    encoder = make_encoder(cfg)
    vectors = dict(zip(images.ids, images.vectors))
    pairs = capeval.load_eval_pairs(require_path(cfg, "pairs"), vectors)
    hub = _hub_text_from(cfg, hub_text, hub_json)
    if hub is not None:
        pairs = capeval.with_hub_system(pairs, hub)
    systems = sorted(pairs[0].captions)
    clip_cfg = SimilarityConfig(measure=Measure.COSINE, scale=cfg["scale"], clip_at_zero=True)
    report = capeval.evaluation_report(
        pairs, systems, encoder, clip_cfg, resamples=int(cfg["resamples"]), seed=int(cfg["seed"])
    )
    if hub is not None:
        report["hub_text"] = hub
    target = write_outputs(out_dir, cfg, "eval-caption", "caption_eval.json", report)
    for system in systems:
        print(f"eval-caption: corpus[{system}] = {report['corpus_clipscore'][system]:.6f}")
    target_note = f" -> {target}"
    if hub is not None and "human" in systems:
        print(
            f"eval-caption: win rate hub>human = {report['win_rate']['hub']['human']:.3f}, "
            f"p = {report['bootstrap_p']['hub']['human']:.4f}{target_note}"
        )
    else:
        print(f"eval-caption: {len(pairs)} pairs{target_note}")
    return 0


def cmd_eval_retrieval(cfg: dict, out_dir: Path, hub_text: str | None, hub_json: str | None) -> int:
    docs_path = require_path(cfg, "docs")
    query_images = load_image_fixtures(require_path(cfg, "queries"))
    qrels = retrieval.load_qrels(require_path(cfg, "qrels"))
    queries = retrieval.QuerySet.from_tuning(query_images, qrels)
    hub = _hub_text_from(cfg, hub_text, hub_json)
    if hub is None:
        raise ValidationFailure("eval-retrieval needs --hub-text or --hub-json")
    encoder = make_encoder(cfg)
    index = retrieval.load_documents(docs_path, encoder)
    table = retrieval.run_contamination_experiment(
        index, queries, hub, [int(c) for c in cfg["counts"]], encoder
    )
    payload = {
        "hub_text": hub,
        "counts": [int(c) for c in cfg["counts"]],
        "metrics": {str(count): metrics for count, metrics in table.items()},
        "index_size": len(index),
        "queries": len(queries.ids),
    }
    target = write_outputs(out_dir, cfg, "eval-retrieval", "retrieval_eval.json", payload)
    for count, metrics in table.items():
        print(
            f"eval-retrieval #CT={count}: P@1={metrics['precision@1']:.4f} "
            f"NDCG@10={metrics['ndcg@10']:.4f} R@1000={metrics['recall@1000']:.4f}"
        )
    print(f"eval-retrieval -> {target}")
    return 0


def cmd_export_trajectory(cfg: dict, out_dir: Path, report_path: str, which_k: str | None) -> int:
    from .search import BeamEntry, SearchReport

    path = Path(report_path)
    if not path.exists():
        raise ValidationFailure(f"--report: file not found: {path}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    key = which_k if which_k is not None else str(payload["best_k"])
    if key not in payload["results"]:
        raise ValidationFailure(f"beam size {key} not present in {path}")
    entry = payload["results"][key]
    report = SearchReport(
        best=BeamEntry(tuple(entry["token_ids"]), entry["score"], entry["text"]),
        iterations=entry["iterations"],
        substitutions_applied=entry["substitutions"],
        trajectory=tuple((t, s) for t, s in entry["trajectory"]),
        substitution_counts=tuple(entry["substitution_counts"]),
        wall_time=entry["wall_time_seconds"],
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"trajectory_k{key}.csv"
    export_trajectory_csv(report, csv_path)
    write_run_metadata(
        out_dir / f"trajectory_k{key}.meta.json",
        seed=int(cfg["seed"]),
        k=int(key),
        cfg=make_similarity(cfg),
        encoder_desc=payload.get("encoder", {}),
        wall_time=report.wall_time,
        extra={"source_report": str(path)},
    )
    print(f"export-trajectory: k={key}, {len(report.trajectory)} rows -> {csv_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        out_dir = Path(args.out)
        if args.command == "hub-embed":
            return cmd_hub_embed(cfg, out_dir)
        if args.command == "init":
            return cmd_init(cfg, out_dir, lenient=bool(args.lenient), epsilon=args.epsilon)
        if args.command == "search":
            return cmd_search(cfg, out_dir, args.init_text, args.init_json)
        if args.command == "eval-caption":
            return cmd_eval_caption(cfg, out_dir, args.hub_text, args.hub_json)
        if args.command == "eval-retrieval":
            return cmd_eval_retrieval(cfg, out_dir, args.hub_text, args.hub_json)
        if args.command == "export-trajectory":
            return cmd_export_trajectory(cfg, out_dir, args.report, args.k)
        raise ValidationFailure(f"unknown command {args.command!r}")
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except HubTextError as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
