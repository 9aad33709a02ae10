import json

import numpy as np
import pytest

from psg4d.training import (
    ModelConfig,
    PlanError,
    StagePlan,
    TrainingPlan,
    default_plan,
    plan_from_dict,
    plan_to_dict,
    run,
    validate_plan,
)
from psg4d.transcend import load_params


def _small_plan(skip=()):
    # trimmed iteration counts keep the suite fast
    plan = default_plan(skip=skip, model=ModelConfig(dim=8, layers=1, heads=2,
                                                     steps=2, mask_shape=(4, 4), vocab_size=12))
    steps = []
    for stage in plan.steps:
        hyper = stage.hyper.__class__(**{**stage.hyper.__dict__, "iterations": 6, "warmup": 2})
        sub = {k: v.__class__(**{**v.__dict__, "iterations": 6, "warmup": 2})
               for k, v in stage.sub_hyper.items()}
        steps.append(StagePlan(stage.step, stage.name, stage.losses, stage.data,
                               stage.train, hyper, sub))
    datasets = {name: spec.__class__(spec.kind, 6) for name, spec in plan.datasets.items()}
    return TrainingPlan(steps=tuple(steps), model=plan.model, datasets=datasets)


class TestPlanValidation:
    def test_default_plan_is_clean(self):
        assert validate_plan(default_plan()) == []

    def test_missing_depth_binding_flagged(self):
        plan = default_plan()
        step2 = plan.steps[1]
        data = {k: v for k, v in step2.data.items() if k != "depth"}
        broken = TrainingPlan(
            steps=(plan.steps[0],
                   StagePlan(2, step2.name, step2.losses, data, step2.train,
                             step2.hyper, step2.sub_hyper)) + plan.steps[2:],
            model=plan.model, datasets=plan.datasets)
        issues = validate_plan(broken)
        assert any(i.code == "unbound-role" and i.severity == "error" for i in issues)

    def test_skipping_step_two_is_warning_not_error(self):
        issues = validate_plan(default_plan(skip=(2,)))
        assert all(i.severity == "warning" for i in issues)
        assert any(i.code == "skipped-step" for i in issues)

    def test_unknown_dataset_flagged(self):
        plan = default_plan()
        step1 = plan.steps[0]
        broken = TrainingPlan(
            steps=(StagePlan(1, step1.name, step1.losses, {"sg-annotations": "nope"},
                             step1.train, step1.hyper),) + plan.steps[1:],
            model=plan.model, datasets=plan.datasets)
        assert any(i.code == "unknown-dataset" for i in validate_plan(broken))

    def test_out_of_order_steps_flagged(self):
        plan = default_plan()
        reordered = TrainingPlan(steps=plan.steps[::-1], model=plan.model,
                                 datasets=plan.datasets)
        assert any(i.code == "step-order" for i in validate_plan(reordered))

    def test_run_refuses_invalid_plan(self, tmp_path):
        plan = default_plan()
        broken = TrainingPlan(steps=plan.steps[::-1], model=plan.model, datasets=plan.datasets)
        with pytest.raises(PlanError):
            run(broken, tmp_path)


class TestPlanSerialization:
    def test_round_trip(self):
        plan = default_plan()
        assert plan_to_dict(plan_from_dict(plan_to_dict(plan))) == plan_to_dict(plan)

    def test_bad_schema_rejected(self):
        with pytest.raises(PlanError):
            plan_from_dict({"schema": 2})


class TestRun:
    def test_five_steps_execute_with_manifest(self, tmp_path):
        manifest = run(_small_plan(), tmp_path / "run", seed=3)
        assert [s.step for s in manifest.steps] == [1, 2, 3, 4, 5]
        lines = (tmp_path / "run" / "manifest.jsonl").read_text().splitlines()
        assert len(lines) == 5
        for index, line in enumerate(lines):
            record = json.loads(line)
            assert record["step"] == index + 1
            assert all(np.isfinite(record["losses"]))

    def test_rerun_is_bit_identical_modulo_wall_clock(self, tmp_path):
        first = run(_small_plan(), tmp_path / "a", seed=5)
        second = run(_small_plan(), tmp_path / "b", seed=5)
        for lhs, rhs in zip(first.steps, second.steps):
            assert lhs.losses == rhs.losses
            assert lhs.final_loss == rhs.final_loss
        for step in (1, 2, 3, 4, 5):
            a = (tmp_path / "a" / f"step{step}.ckpt").read_bytes()
            b = (tmp_path / "b" / f"step{step}.ckpt").read_bytes()
            assert a == b

    def test_subprocess_order_does_not_change_results(self, tmp_path):
        forward = run(_small_plan(), tmp_path / "fwd", seed=2)
        backward = run(_small_plan(), tmp_path / "bwd", seed=2,
                       subprocess_order=("c", "b", "a"))
        assert (tmp_path / "fwd" / "step2.ckpt").read_bytes() == \
               (tmp_path / "bwd" / "step2.ckpt").read_bytes()
        assert forward.steps[1].final_loss == backward.steps[1].final_loss

    @pytest.mark.parametrize("skip", [(2,), (3,)])
    def test_ablation_plans_run_four_steps(self, tmp_path, skip):
        manifest = run(_small_plan(skip=skip), tmp_path / "run", seed=1)
        assert len(manifest.steps) == 4
        assert skip[0] not in [s.step for s in manifest.steps]

    def test_checkpoints_load_back_to_stored_values(self, tmp_path):
        run(_small_plan(), tmp_path / "run", seed=4)
        first = load_params(tmp_path / "run" / "step3.ckpt")
        second = load_params(tmp_path / "run" / "step3.ckpt")
        for name in first:
            assert np.array_equal(first[name], second[name])

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss_aborts_with_partial_manifest(self, tmp_path):
        from psg4d.training import Hyper, TrainingAborted

        plan = _small_plan()
        hostile = StagePlan(1, plan.steps[0].name, plan.steps[0].losses,
                            plan.steps[0].data, plan.steps[0].train,
                            Hyper(iterations=8, batch_size=1, lr=1e18, warmup=0,
                                  weight_decay=-50.0))
        broken = TrainingPlan(steps=(hostile,) + plan.steps[1:],
                              model=plan.model, datasets=plan.datasets)
        with pytest.raises(TrainingAborted) as info:
            run(broken, tmp_path / "run", seed=0)
        completed = [s.step for s in info.value.manifest.steps]
        assert len(completed) < 5
        manifest_lines = (tmp_path / "run" / "manifest.jsonl").read_text().splitlines()
        assert len(manifest_lines) == len(completed)

    def test_resume_skips_completed_steps(self, tmp_path):
        plan = _small_plan()
        full = run(plan, tmp_path / "run", seed=6)
        manifest_path = tmp_path / "run" / "manifest.jsonl"
        lines = manifest_path.read_text().splitlines()
        manifest_path.write_text("\n".join(lines[:3]) + "\n")  # pretend steps 4..5 never ran
        resumed = run(plan, tmp_path / "run", seed=6, resume=True)
        assert [s.step for s in resumed.steps] == [1, 2, 3, 4, 5]
        assert resumed.steps[3].losses == full.steps[3].losses
        assert resumed.steps[0].losses == full.steps[0].losses
