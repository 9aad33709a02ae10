"""Config-driven orchestration of the five-step training schedule.

Step 1 teaches the decoder on annotated 4D scenes; step 2 trains the
three transcending estimators in independent subprocesses (depth pairs,
video clips, depth sequences); step 3 refines everything jointly on 4D
data decomposed into per-role views; step 4 transfers from plentiful 2D
scene-graph data through the transcending path; step 5 repeats step 1 to
finish on 4D scenes. Ablation plans may drop steps 2 or 3.

Runs are deterministic given the seed, resumable at step granularity, and
append one manifest record per completed step.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .synth import SynthConfig, generate_synthetic
from .masks import rle_decode
from .transcend import (
    AdamW,
    TranscendModels,
    build_models,
    composite_loss,
    init_from,
    inverse_sqrt_schedule,
    load_params,
    save_params,
    train_step,
    warmup_cosine_schedule,
)
from .transcend.losses import LOSS_NAMES, SG_LOSSES

__all__ = [
    "ROLES",
    "Hyper",
    "StagePlan",
    "ModelConfig",
    "DatasetSpec",
    "TrainingPlan",
    "PlanIssue",
    "default_plan",
    "validate_plan",
    "plan_to_dict",
    "plan_from_dict",
    "RunManifest",
    "StepResult",
    "TrainingAborted",
    "PlanError",
    "run",
]

ROLES = ("rgb", "depth", "video", "depth-sequence", "sg-annotations")

# data roles each loss term needs bound before it can be computed
LOSS_REQUIREMENTS = {
    "txt": ("sg-annotations",),
    "iou": ("sg-annotations",),
    "dice": ("sg-annotations",),
    "focal": ("sg-annotations",),
    "de": ("rgb", "depth"),
    "rte": ("video",),
    "dte": ("depth-sequence",),
    "depth_rollout": ("rgb", "depth-sequence"),
    "path_consistency": ("rgb",),
}

SUBPROCESSES = {"a": ("de",), "b": ("rte",), "c": ("dte",)}
SUBPROCESS_COMPONENTS = {"a": ("depth",), "b": ("rgb_temporal",), "c": ("depth_temporal",)}


@dataclass(frozen=True)
class Hyper:
    iterations: int = 30
    batch_size: int = 2
    lr: float = 1e-3
    warmup: int = 10
    weight_decay: float = 0.05
    schedule: str = "cosine"

    def build_schedule(self):
        if self.schedule == "cosine":
            return warmup_cosine_schedule(self.lr, self.warmup, self.iterations)
        if self.schedule == "inverse-sqrt":
            return inverse_sqrt_schedule(self.lr, self.warmup)
        raise ValueError(f"unknown schedule {self.schedule!r}")


@dataclass(frozen=True)
class StagePlan:
    step: int
    name: str
    losses: tuple[str, ...]
    data: dict[str, str]  # role -> dataset name
    train: tuple[str, ...]
    hyper: Hyper = Hyper()
    sub_hyper: dict[str, Hyper] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 16
    layers: int = 2
    heads: int = 4
    ff_mult: int = 2
    steps: int = 4
    mask_shape: tuple[int, int] = (6, 6)
    vocab_size: int = 24


@dataclass(frozen=True)
class DatasetSpec:
    kind: str  # rgb_depth | video | depth_sequence | sg4d | sg4d_full | sg2d
    count: int = 16


@dataclass(frozen=True)
class TrainingPlan:
    steps: tuple[StagePlan, ...]
    model: ModelConfig = ModelConfig()
    datasets: dict[str, DatasetSpec] = field(default_factory=dict)


@dataclass(frozen=True)
class PlanIssue:
    severity: str  # "error" | "warning"
    code: str
    message: str
    step: int | None = None


class PlanError(ValueError):
    def __init__(self, issues: list[PlanIssue]):
        self.issues = issues
        super().__init__("; ".join(i.message for i in issues))


def default_plan(skip: tuple[int, ...] = (), model: ModelConfig | None = None) -> TrainingPlan:
    """The standard five-step schedule over toy synthetic datasets.

    ``skip`` drops steps (ablations drop 2 or 3). Per-step weight decay
    and learning-rate ratios follow the published recipe; warmup is scaled
    down to the toy iteration counts.
    """
    model = model or ModelConfig()
    datasets = {
        "toy-4d-scenes": DatasetSpec("sg4d", 12),
        "toy-rgbd-pairs": DatasetSpec("rgb_depth", 24),
        "toy-video-clips": DatasetSpec("video", 24),
        "toy-depth-seqs": DatasetSpec("depth_sequence", 24),
        "toy-4d-full": DatasetSpec("sg4d_full", 12),
        "toy-2d-scenes": DatasetSpec("sg2d", 24),
    }
    steps = [
        StagePlan(
            step=1, name="4d-perception-init", losses=SG_LOSSES,
            data={"sg-annotations": "toy-4d-scenes"}, train=("decoder",),
            hyper=Hyper(lr=5e-4, weight_decay=0.05),
        ),
        StagePlan(
            step=2, name="scene-transcending", losses=("de", "rte", "dte"),
            data={
                "rgb": "toy-rgbd-pairs",
                "depth": "toy-rgbd-pairs",
                "video": "toy-video-clips",
                "depth-sequence": "toy-depth-seqs",
            },
            train=("depth", "rgb_temporal", "depth_temporal"),
            hyper=Hyper(weight_decay=0.1),
            sub_hyper={
                "a": Hyper(lr=2e-3, weight_decay=0.1),
                "b": Hyper(lr=5e-3, weight_decay=0.1),
                "c": Hyper(lr=2e-4, weight_decay=0.1),
            },
        ),
        StagePlan(
            step=3, name="pseudo-4d-transfer-init", losses=LOSS_NAMES,
            data={role: "toy-4d-full" for role in ROLES},
            train=("depth", "rgb_temporal", "depth_temporal", "decoder"),
            hyper=Hyper(lr=2e-4, weight_decay=0.05),
        ),
        StagePlan(
            step=4, name="large-scale-2d-transfer", losses=SG_LOSSES,
            data={"rgb": "toy-2d-scenes", "sg-annotations": "toy-2d-scenes"},
            train=("depth", "rgb_temporal", "depth_temporal", "decoder"),
            hyper=Hyper(lr=5e-4, weight_decay=0.05),
        ),
        StagePlan(
            step=5, name="4d-fine-tuning", losses=SG_LOSSES,
            data={"sg-annotations": "toy-4d-scenes"}, train=("decoder",),
            hyper=Hyper(lr=5e-4, weight_decay=0.05),
        ),
    ]
    kept = tuple(s for s in steps if s.step not in skip)
    return TrainingPlan(steps=kept, model=model, datasets=datasets)


def validate_plan(plan: TrainingPlan) -> list[PlanIssue]:
    """Structural checks; errors block a run, warnings do not."""
    issues: list[PlanIssue] = []
    ids = [s.step for s in plan.steps]
    if any(not 1 <= i <= 5 for i in ids):
        issues.append(PlanIssue("error", "bad-step-id", f"step ids must lie in 1..5, got {ids}"))
    if ids != sorted(ids) or len(set(ids)) != len(ids):
        issues.append(PlanIssue("error", "step-order", f"step ids must be strictly increasing, got {ids}"))

    for stage in plan.steps:
        for loss in stage.losses:
            if loss not in LOSS_NAMES:
                issues.append(PlanIssue("error", "unknown-loss", f"step {stage.step}: unknown loss {loss!r}", stage.step))
                continue
            for role in LOSS_REQUIREMENTS[loss]:
                if role not in stage.data:
                    issues.append(PlanIssue(
                        "error", "unbound-role",
                        f"step {stage.step}: loss {loss!r} needs data role {role!r}", stage.step))
        for role, dataset in stage.data.items():
            if role not in ROLES:
                issues.append(PlanIssue("error", "unknown-role", f"step {stage.step}: unknown role {role!r}", stage.step))
            if dataset not in plan.datasets:
                issues.append(PlanIssue(
                    "error", "unknown-dataset",
                    f"step {stage.step}: role {role!r} bound to undeclared dataset {dataset!r}", stage.step))
        if stage.step == 2:
            missing = [loss for sub in SUBPROCESSES.values() for loss in sub if loss not in stage.losses]
            if missing:
                issues.append(PlanIssue(
                    "error", "incomplete-step-2",
                    f"step 2 must run all three subprocesses; missing {missing}", 2))
        if stage.step in (1, 5) and "sg-annotations" not in stage.data:
            issues.append(PlanIssue(
                "error", "unbound-role",
                f"step {stage.step} needs 4D scene-graph annotations bound", stage.step))
        if stage.step == 3:
            for role in ROLES:
                if role not in stage.data:
                    issues.append(PlanIssue(
                        "error", "unbound-role",
                        f"step 3 needs the decomposed 4D roles; missing {role!r}", 3))
        if stage.step == 4 and "rgb" not in stage.data:
            issues.append(PlanIssue("error", "unbound-role", "step 4 needs 2D scenes bound to the rgb role", 4))

    present = set(ids)
    for expected in (2, 3):
        if expected not in present:
            issues.append(PlanIssue(
                "warning", "skipped-step",
                f"plan skips step {expected} (ablation schedule)", expected))
    return issues


# -- plan (de)serialization ----------------------------------------------

def plan_to_dict(plan: TrainingPlan) -> dict:
    return {
        "schema": 1,
        "model": asdict(plan.model),
        "datasets": {name: asdict(spec) for name, spec in sorted(plan.datasets.items())},
        "steps": [
            {
                "id": s.step,
                "name": s.name,
                "losses": list(s.losses),
                "data": dict(sorted(s.data.items())),
                "train": list(s.train),
                "hyper": asdict(s.hyper),
                "sub_hyper": {k: asdict(v) for k, v in sorted(s.sub_hyper.items())},
            }
            for s in plan.steps
        ],
    }


def plan_from_dict(raw: dict) -> TrainingPlan:
    if raw.get("schema") != 1:
        raise PlanError([PlanIssue("error", "bad-schema", f"unsupported plan schema {raw.get('schema')!r}")])
    model_raw = dict(raw.get("model", {}))
    if "mask_shape" in model_raw:
        model_raw["mask_shape"] = tuple(model_raw["mask_shape"])
    model = ModelConfig(**model_raw)
    datasets = {name: DatasetSpec(**spec) for name, spec in raw.get("datasets", {}).items()}
    steps = []
    for entry in raw.get("steps", []):
        steps.append(StagePlan(
            step=int(entry["id"]),
            name=str(entry.get("name", f"step-{entry['id']}")),
            losses=tuple(entry.get("losses", ())),
            data=dict(entry.get("data", {})),
            train=tuple(entry.get("train", ())),
            hyper=Hyper(**entry.get("hyper", {})),
            sub_hyper={k: Hyper(**v) for k, v in entry.get("sub_hyper", {}).items()},
        ))
    return TrainingPlan(steps=tuple(steps), model=model, datasets=datasets)


# -- synthetic feature datasets ------------------------------------------

def _rng_for(seed: int, *key: str) -> np.random.Generator:
    parts = [seed] + [zlib.crc32(k.encode()) for k in key]
    return np.random.default_rng(parts)


def _grid(rng, shape) -> np.ndarray:
    return rng.normal(size=shape)


def _sequence_from(pooled: np.ndarray, steps: int, mix: np.ndarray, rng) -> np.ndarray:
    rows = []
    state = pooled
    for _ in range(steps):
        state = np.tanh(state @ mix) + 0.01 * rng.normal(size=state.shape)
        rows.append(state)
    return np.stack(rows)


def _build_dataset(name: str, spec: DatasetSpec, model: ModelConfig, seed: int) -> list[dict]:
    """Materialize one dataset as a list of role-keyed samples."""
    rng = _rng_for(seed, "dataset", name)
    grid_shape = (4, 4, model.dim)
    samples: list[dict] = []

    if spec.kind == "rgb_depth":
        hidden = _grid(rng, (model.dim, model.dim)) / np.sqrt(model.dim)
        for _ in range(spec.count):
            rgb = _grid(rng, grid_shape)
            depth = rgb @ hidden + 0.05 * _grid(rng, grid_shape)
            samples.append({"rgb": rgb, "depth": depth})
        return samples

    if spec.kind in ("video", "depth_sequence"):
        mix = _grid(rng, (model.dim, model.dim)) / np.sqrt(model.dim)
        key = "rgb" if spec.kind == "video" else "depth"
        seq_key = "rgb_seq" if spec.kind == "video" else "depth_seq"
        for _ in range(spec.count):
            grid = _grid(rng, grid_shape)
            pooled = grid.reshape(-1, model.dim).mean(axis=0)
            samples.append({key: grid, seq_key: _sequence_from(pooled, model.steps, mix, rng)})
        return samples

    if spec.kind in ("sg4d", "sg4d_full", "sg2d"):
        synth_cfg = SynthConfig(
            seed=int(rng.integers(0, 2 ** 31)),
            videos=spec.count,
            frames=model.steps,
            width=max(6, model.mask_shape[1]),
            height=max(4, model.mask_shape[0]),
            min_objects=2,
            max_objects=3,
            relations_min=1,
            relations_max=3,
        )
        scenes = generate_synthetic(synth_cfg)
        vocabulary = _token_vocab(synth_cfg)
        mix = _grid(rng, (model.dim, model.dim)) / np.sqrt(model.dim)
        for video in scenes:
            sample: dict = {}
            tokens = _scene_tokens(video.gold.scene, vocabulary, model.steps, model.vocab_size)
            mask = _scene_mask(video.gold.scene, model.steps, model.mask_shape)
            sample["tokens"] = tokens
            sample["mask"] = mask
            if spec.kind == "sg4d":
                sample["features"] = _grid(rng, (model.steps, 2 * model.dim))
            else:
                rgb = _grid(rng, grid_shape)
                sample["rgb"] = rgb
                if spec.kind == "sg4d_full":
                    sample["depth"] = rgb @ mix + 0.05 * _grid(rng, grid_shape)
                    pooled = rgb.reshape(-1, model.dim).mean(axis=0)
                    sample["rgb_seq"] = _sequence_from(pooled, model.steps, mix, rng)
                    pooled_depth = sample["depth"].reshape(-1, model.dim).mean(axis=0)
                    sample["depth_seq"] = _sequence_from(pooled_depth, model.steps, mix, rng)
            samples.append(sample)
        return samples

    raise PlanError([PlanIssue("error", "unknown-dataset-kind", f"dataset {name!r} has unknown kind {spec.kind!r}")])


def _token_vocab(cfg: SynthConfig) -> dict[str, int]:
    vocabulary = {"<pad>": 0}
    for label in list(cfg.object_vocab) + list(cfg.predicate_vocab):
        vocabulary.setdefault(label, len(vocabulary))
    return vocabulary


def _scene_tokens(scene, vocabulary: dict[str, int], length: int, vocab_size: int) -> np.ndarray:
    tokens: list[int] = []
    categories = {obj.id: obj.category for obj in scene.objects}
    for rel in scene.relations:
        for label in (categories[rel.subject_id], rel.predicate, categories[rel.object_id]):
            tokens.append(vocabulary.get(label, 0) % vocab_size)
    tokens = tokens[:length]
    tokens += [0] * (length - len(tokens))
    return np.asarray(tokens, dtype=np.int64)


def _scene_mask(scene, frames: int, mask_shape: tuple[int, int]) -> np.ndarray:
    """Union foreground of the gold tubes, cropped to the decoder's window."""
    height, width = mask_shape
    union = np.zeros((frames, height, width), dtype=np.float64)
    for tube in scene.masks.values():
        dense = rle_decode(tube)
        t = min(frames, dense.shape[0])
        union[:t] = np.maximum(union[:t], dense[:t, :height, :width])
    return union


# -- run execution ---------------------------------------------------------

@dataclass
class StepResult:
    step: int
    name: str
    losses: list[float]
    final_loss: float
    checkpoint: str
    wall_seconds: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunManifest:
    seed: int
    steps: list[StepResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"schema": 1, "seed": self.seed, "steps": [s.to_dict() for s in self.steps]}


class TrainingAborted(RuntimeError):
    """A step produced a non-finite loss; carries the partial manifest."""

    def __init__(self, message: str, manifest: RunManifest):
        super().__init__(message)
        self.manifest = manifest


def _train_loop(models: TranscendModels, samples: list[dict], losses, train_components,
                hyper: Hyper, rng: np.random.Generator) -> list[float]:
    params = models.params(train_components)
    optimizer = AdamW(params, lr=hyper.build_schedule(), weight_decay=hyper.weight_decay)
    curve: list[float] = []
    for _ in range(hyper.iterations):
        picks = rng.integers(0, len(samples), size=hyper.batch_size)

        def batch_loss():
            total = None
            for index in picks:
                value, _ = composite_loss(models, samples[int(index)], include=losses)
                total = value if total is None else total + value
            return total * (1.0 / len(picks))

        curve.append(train_step(optimizer, batch_loss))
    return curve


def run(plan: TrainingPlan, out_dir: str | Path, seed: int = 0,
        models: TranscendModels | None = None, resume: bool = False,
        subprocess_order: tuple[str, ...] = ("a", "b", "c")) -> RunManifest:
    """Execute a validated plan, checkpointing after every step.

    After each checkpoint is written, parameters are re-read from it so
    the values a later step continues from are exactly the stored ones,
    and the manifest record is appended to ``manifest.jsonl``.
    """
    issues = validate_plan(plan)
    errors = [i for i in issues if i.severity == "error"]
    if errors:
        raise PlanError(errors)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.jsonl"

    if models is None:
        models = build_models(
            dim=plan.model.dim, layers=plan.model.layers, heads=plan.model.heads,
            vocab_size=plan.model.vocab_size, mask_shape=plan.model.mask_shape,
            ff_mult=plan.model.ff_mult, seed=seed,
        )

    manifest = RunManifest(seed=seed)
    completed: dict[int, StepResult] = {}
    if resume and manifest_path.exists():
        for line in manifest_path.read_text().splitlines():
            record = json.loads(line)
            completed[record["step"]] = StepResult(**record)
    elif manifest_path.exists():
        manifest_path.unlink()

    datasets: dict[str, list[dict]] = {}

    def dataset(name: str) -> list[dict]:
        if name not in datasets:
            datasets[name] = _build_dataset(name, plan.datasets[name], plan.model, seed)
        return datasets[name]

    for stage in plan.steps:
        if stage.step in completed:
            result = completed[stage.step]
            models.load_values(load_params(result.checkpoint))
            manifest.steps.append(result)
            continue
        started = time.monotonic()
        if stage.step == 2:
            # subprocesses are independent: the depth-temporal estimator is
            # seeded from the rgb-temporal values captured at step entry,
            # and each trains disjoint parameters with its own stream
            init_from(models.depth_temporal, models.rgb_temporal)
            curves: dict[str, list[float]] = {}
            for sub in subprocess_order:
                sub_losses = SUBPROCESSES[sub]
                roles = LOSS_REQUIREMENTS[sub_losses[0]]
                samples = _merge_samples([dataset(stage.data[role]) for role in roles])
                hyper = stage.sub_hyper.get(sub, stage.hyper)
                rng = _rng_for(seed, f"step{stage.step}", sub)
                curves[sub] = _train_loop(
                    models, samples, sub_losses, SUBPROCESS_COMPONENTS[sub], hyper, rng)
            curve = [value for sub in sorted(curves) for value in curves[sub]]
        else:
            roles = sorted({role for loss in stage.losses for role in LOSS_REQUIREMENTS[loss]})
            samples = _merge_samples([dataset(stage.data[role]) for role in roles])
            rng = _rng_for(seed, f"step{stage.step}")
            curve = _train_loop(models, samples, stage.losses, stage.train, stage.hyper, rng)

        if not all(np.isfinite(curve)):
            _write_manifest(manifest_path, manifest)
            raise TrainingAborted(f"step {stage.step} produced a non-finite loss", manifest)

        checkpoint = out_dir / f"step{stage.step}.ckpt"
        save_params(checkpoint, models.params())
        models.load_values(load_params(checkpoint))
        result = StepResult(
            step=stage.step, name=stage.name, losses=[float(v) for v in curve],
            final_loss=float(curve[-1]), checkpoint=str(checkpoint),
            wall_seconds=time.monotonic() - started,
        )
        manifest.steps.append(result)
        with manifest_path.open("a") as handle:
            handle.write(json.dumps(result.to_dict(), sort_keys=True) + "\n")

    return manifest


def _merge_samples(sample_lists: list[list[dict]]) -> list[dict]:
    """Zip role views drawn from the bound datasets into joint samples."""
    distinct: list[list[dict]] = []
    for samples in sample_lists:
        if not any(existing is samples for existing in distinct):
            distinct.append(samples)
    if len(distinct) == 1:
        return distinct[0]
    size = min(len(samples) for samples in distinct)
    merged = []
    for index in range(size):
        joint: dict = {}
        for samples in distinct:
            joint.update(samples[index])
        merged.append(joint)
    return merged


def _write_manifest(path: Path, manifest: RunManifest) -> None:
    with path.open("w") as handle:
        for result in manifest.steps:
            handle.write(json.dumps(result.to_dict(), sort_keys=True) + "\n")
