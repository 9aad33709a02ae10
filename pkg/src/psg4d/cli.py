"""Single executable for every workflow.

Subcommands: eval, infer, parse, synth, train, gradcheck, stats. Settings
resolve as defaults < config file < PSG4D_* environment < flags. Exit
codes: 0 success, 1 operational failure, 2 input or schema error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .dataio import (
    SchemaError,
    VideoAnnotation,
    dataset_stats,
    load_annotation_dir,
    save_annotation,
)
from .inference import (
    BackendTransportError,
    HttpBackend,
    MockBackend,
    PipelineBackendError,
    PipelineConfig,
    assemble_scene,
    parse_output_sequence,
    parse_stage,
    run_pipeline,
)
from .inference.examples import WORKED_EXAMPLES
from .metrics import MatchConfig, ScenePair, recall_at_k, report_lines, split_report
from .scene import SceneGraph4D
from .synth import SynthConfig, generate_synthetic
from .training import (
    PlanError,
    TrainingAborted,
    default_plan,
    plan_from_dict,
    plan_to_dict,
    run as run_plan,
    validate_plan,
)
from .transcend import build_models, composite_loss, grad_check

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _match_config(args, cfg) -> MatchConfig:
    ks = args.k if args.k is not None else cfg.get("matching", "ks")
    viou = args.viou if args.viou is not None else cfg.get("matching", "viou")
    temporal = args.temporal_iou if args.temporal_iou is not None else cfg.get("matching", "temporal_iou")
    grounded = cfg.get("matching", "grounded")
    if args.ungrounded:
        grounded = False
    return MatchConfig(
        viou_threshold=float(viou),
        temporal_iou_threshold=float(temporal),
        ks=tuple(sorted(int(k) for k in ks)),
        grounded=grounded,
    )


def _cmd_eval(args) -> int:
    cfg = load_config(args.config)
    match_cfg = _match_config(args, cfg)
    gold = load_annotation_dir(args.gold)
    pred = load_annotation_dir(args.pred)
    if not gold:
        print(f"error: no gold documents in {args.gold}", file=sys.stderr)
        return EXIT_USAGE
    pairs = []
    for video_id, gold_ann in sorted(gold.items()):
        pred_ann = pred.get(video_id)
        if pred_ann is None:
            print(f"warning: no prediction for video {video_id}, scoring empty", file=sys.stderr)
            pred_scene = SceneGraph4D()
            ranks = None
        else:
            pred_scene = pred_ann.scene
            ranks = pred_ann.confidences or None
        pairs.append(ScenePair(video_id, pred_scene, gold_ann.scene, ranks))
    for video_id in sorted(set(pred) - set(gold)):
        print(f"warning: prediction {video_id} has no gold document, ignored", file=sys.stderr)

    report = recall_at_k(pairs, match_cfg, jobs=args.jobs)
    splits = None
    if args.vocab:
        vocab_raw = json.loads(Path(args.vocab).read_text())
        vocab = {
            "objects": set(vocab_raw.get("objects", [])),
            "predicates": set(vocab_raw.get("predicates", [])),
        }
        freq = json.loads(Path(args.freq).read_text()) if args.freq else None
        splits = split_report(pairs, match_cfg, vocab, freq)
    lines = report_lines(report, splits=splits)
    text = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _builtin_script(name: str):
    for example in WORKED_EXAMPLES:
        if example.name == name:
            return list(example.script)
    return None


def _cmd_infer(args) -> int:
    cfg = load_config(args.config)
    examples = args.examples if args.examples is not None else cfg.get("backend", "examples")
    if args.backend == "mock":
        if not args.script:
            print("error: --backend mock requires --script", file=sys.stderr)
            return EXIT_USAGE
        script = _builtin_script(args.script)
        if script is None:
            script = json.loads(Path(args.script).read_text())["responses"]
        backend = MockBackend(script)
    else:
        endpoint = args.endpoint or cfg.get("backend", "endpoint")
        if not endpoint:
            print("error: --backend http requires --endpoint", file=sys.stderr)
            return EXIT_USAGE
        backend = HttpBackend(
            endpoint=endpoint,
            token=args.token or cfg.get("backend", "token") or None,
            timeout=cfg.get("backend", "timeout"),
            retries=cfg.get("backend", "retries"),
            backoff=cfg.get("backend", "backoff"),
        )
    pipe_cfg = PipelineConfig(
        examples=int(examples),
        max_tokens=cfg.get("backend", "max_tokens"),
        temperature=cfg.get("backend", "temperature"),
        single_call=args.single_call,
    )
    transcript = run_pipeline(args.scene, backend, pipe_cfg)
    scene, assembly_warnings = assemble_scene(transcript)

    out_path = Path(args.out)
    doc_path = Path(args.doc) if args.doc else out_path.with_suffix(".doc.json")
    payload = {
        "schema": 1,
        "stage1": [[d, l] for d, l in transcript.stage1],
        "stage2": [[a, b] for a, b in transcript.stage2],
        "stage3": [[s, p, o] for s, p, o in transcript.stage3],
        "final": [
            {
                "subject": q.subject_label, "predicate": q.predicate_label,
                "object": q.object_label, "t_s": q.t_s, "t_e": q.t_e,
                "confidence": q.confidence,
            }
            for q in transcript.final
        ],
        "raw_texts": {str(k): v for k, v in sorted(transcript.raw_texts.items())},
        "warnings": transcript.warnings + assembly_warnings,
    }
    out_path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    annotation = VideoAnnotation(
        video_id=args.scene or "scene",
        duration=1.0,
        frames=1,
        width=1,
        height=1,
        scene=scene,
        confidences=tuple(q.confidence for q in transcript.final[:len(scene.relations)])
        if scene.relations else (),
    )
    save_annotation(doc_path, annotation)
    print(f"transcript: {out_path}")
    print(f"document: {doc_path}")
    return EXIT_OK


def _cmd_parse(args) -> int:
    text = sys.stdin.read()
    if args.sequence:
        parsed = parse_output_sequence(text)
        payload = {
            "quintuples": [
                {
                    "subject": q.subject_label, "predicate": q.predicate_label,
                    "object": q.object_label, "t_s": q.t_s, "t_e": q.t_e,
                }
                for q in parsed.quintuples
            ],
            "trigger_positions": parsed.trigger_positions,
            "warnings": parsed.warnings,
        }
    else:
        parsed = parse_stage(args.stage, text)
        if args.stage == 4:
            items = [
                {
                    "subject": q.subject_label, "predicate": q.predicate_label,
                    "object": q.object_label, "t_s": q.t_s, "t_e": q.t_e,
                }
                for q in parsed.items
            ]
        else:
            items = [list(item) for item in parsed.items]
        payload = {"stage": args.stage, "items": items, "warnings": parsed.warnings}
    json.dump(payload, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _cmd_synth(args) -> int:
    cfg = load_config(args.config)
    section = cfg.section("synthesis")
    synth_cfg = SynthConfig(
        seed=args.seed if args.seed is not None else section["seed"],
        videos=args.videos if args.videos is not None else section["videos"],
        frames=args.frames,
        width=args.width,
        height=args.height,
        label_noise=args.label_noise if args.label_noise is not None else section["label_noise"],
        mask_jitter=args.mask_jitter if args.mask_jitter is not None else section["mask_jitter"],
        span_jitter=args.span_jitter if args.span_jitter is not None else section["span_jitter"],
        spurious_rate=args.spurious_rate if args.spurious_rate is not None else section["spurious_rate"],
        relations_min=args.relations_min,
        relations_max=args.relations_max,
    )
    out = Path(args.out)
    (out / "gold").mkdir(parents=True, exist_ok=True)
    (out / "pred").mkdir(parents=True, exist_ok=True)
    videos = generate_synthetic(synth_cfg)
    bookkeeping = []
    for video in videos:
        save_annotation(out / "gold" / f"{video.gold.video_id}.json", video.gold)
        save_annotation(out / "pred" / f"{video.pred.video_id}.json", video.pred)
        bookkeeping.append({
            "video_id": video.bookkeeping.video_id,
            "spurious": video.bookkeeping.spurious,
            "records": [
                {
                    "pred_index": r.pred_index,
                    "gold_index": r.gold_index,
                    "gold_predicate": r.gold_predicate,
                    "pred_predicate": r.pred_predicate,
                    "swapped": r.swapped,
                    "subject_iou": r.subject_iou,
                    "object_iou": r.object_iou,
                    "gold_span": list(r.gold_span),
                    "pred_span": list(r.pred_span),
                }
                for r in video.bookkeeping.records
            ],
        })
    (out / "bookkeeping.json").write_text(json.dumps(bookkeeping, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(videos)} videos under {out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("training", "seed")
    if args.plan:
        plan = plan_from_dict(json.loads(Path(args.plan).read_text()))
    else:
        plan = default_plan(skip=tuple(args.skip_step))
    if args.emit_plan:
        Path(args.emit_plan).write_text(json.dumps(plan_to_dict(plan), indent=1, sort_keys=True) + "\n")
    issues = validate_plan(plan)
    for issue in issues:
        print(f"{issue.severity}: {issue.code}: {issue.message}", file=sys.stderr)
    if any(i.severity == "error" for i in issues):
        return EXIT_USAGE
    manifest = run_plan(plan, args.out, seed=int(seed), resume=args.resume)
    for step in manifest.steps:
        print(f"step {step.step} ({step.name}): final loss {step.final_loss:.6f} -> {step.checkpoint}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    models = build_models(
        dim=args.dim, layers=args.layers, heads=args.heads,
        vocab_size=args.vocab, mask_shape=(args.mask, args.mask), seed=args.seed,
    )
    grid = (args.grid, args.grid, args.dim)
    sample = {
        "rgb": rng.normal(size=grid),
        "depth": rng.normal(size=grid),
        "rgb_seq": rng.normal(size=(args.steps, args.dim)),
        "depth_seq": rng.normal(size=(args.steps, args.dim)),
        "tokens": rng.integers(0, args.vocab, size=args.steps),
        "mask": (rng.random(size=(args.steps, args.mask, args.mask)) > 0.5).astype(float),
    }
    report = grad_check(lambda: composite_loss(models, sample)[0], models.params(), h=args.h)
    for name in sorted(report.per_param):
        print(f"{name}: {report.per_param[name]:.3e}")
    print(f"max relative error: {report.max_relative_error:.3e}")
    if report.max_relative_error >= args.tolerance:
        print(f"FAIL: exceeds tolerance {args.tolerance}", file=sys.stderr)
        return EXIT_FAILURE
    print("PASS")
    return EXIT_OK


def _cmd_stats(args) -> int:
    annotations = load_annotation_dir(args.in_dir).values()
    stats = dataset_stats(annotations)
    text = json.dumps(stats.to_dict(), indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _int_list(raw: str) -> list[int]:
    return [int(part) for part in raw.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psg4d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file")

    p = sub.add_parser("eval", help="score predicted scene graphs against gold")
    common(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--k", type=_int_list, default=None, help="comma-separated K values")
    p.add_argument("--viou", type=float, default=None)
    p.add_argument("--temporal-iou", type=float, default=None, dest="temporal_iou")
    p.add_argument("--ungrounded", action="store_true", help="skip mask grounding")
    p.add_argument("--vocab", default=None, help="training vocab JSON for seen/unseen splits")
    p.add_argument("--freq", default=None, help="training frequency JSON for head/body/tail splits")
    p.add_argument("--report", default=None, help="write the key=value report here")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("infer", help="run the four-stage chained inference")
    common(p)
    p.add_argument("--scene", default="", help="opaque scene reference for the prompt")
    p.add_argument("--backend", choices=["mock", "http"], required=True)
    p.add_argument("--script", default=None,
                   help="mock script: JSON file with a responses array, or example-1 / example-2")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--token", default=None)
    p.add_argument("--examples", type=int, default=None)
    p.add_argument("--single-call", action="store_true", dest="single_call")
    p.add_argument("--out", required=True, help="transcript JSON path")
    p.add_argument("--doc", default=None, help="annotation document path (default: OUT.doc.json)")
    p.set_defaults(handler=_cmd_infer)

    p = sub.add_parser("parse", help="parse stage output or a signal-token sequence from stdin")
    common(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--stage", type=int, choices=[1, 2, 3, 4])
    group.add_argument("--sequence", action="store_true")
    p.set_defaults(handler=_cmd_parse)

    p = sub.add_parser("synth", help="generate synthetic gold/prediction corpora")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--videos", type=int, default=None)
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--height", type=int, default=8)
    p.add_argument("--label-noise", type=float, default=None, dest="label_noise")
    p.add_argument("--mask-jitter", type=float, default=None, dest="mask_jitter")
    p.add_argument("--span-jitter", type=float, default=None, dest="span_jitter")
    p.add_argument("--spurious-rate", type=float, default=None, dest="spurious_rate")
    p.add_argument("--relations-min", type=int, default=1, dest="relations_min")
    p.add_argument("--relations-max", type=int, default=6, dest="relations_max")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("train", help="run a five-step training plan")
    common(p)
    p.add_argument("--plan", default=None, help="plan JSON (omit for the built-in default plan)")
    p.add_argument("--skip-step", type=int, action="append", default=[], dest="skip_step",
                   help="drop a step from the default plan (repeatable)")
    p.add_argument("--emit-plan", default=None, help="also write the resolved plan JSON here")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("gradcheck", help="verify analytic gradients of the composite loss")
    common(p)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--grid", type=int, default=4)
    p.add_argument("--steps", type=int, default=2)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--vocab", type=int, default=7)
    p.add_argument("--mask", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(handler=_cmd_gradcheck)

    p = sub.add_parser("stats", help="tally categories and predicates over a corpus")
    common(p)
    p.add_argument("--in", required=True, dest="in_dir")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (SchemaError, ConfigError, PlanError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BackendTransportError, PipelineBackendError, TrainingAborted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
