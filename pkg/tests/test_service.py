from fractions import Fraction
from pathlib import Path

import pytest

from expected_rewards.core.extreal import ExtValue, parse_ext
from expected_rewards.core.fixpoint import DomainNotClosedError
from expected_rewards.core.mdp import EnumerationBoundExceeded
from expected_rewards.infrastructure.config import AppConfig, EngineConfig, LoggingConfig
from expected_rewards.infrastructure.file_system import FileSystemError
from expected_rewards.security.validation import ValidationError
from expected_rewards.service import (
    EXIT_CERTIFICATE_REJECTED,
    EXIT_OK,
    FragmentRequest,
    ModelSource,
    PgclRequest,
    ReachRequest,
    SolveRequest,
    checkpoints,
    create_analysis_service,
)

TOLERANCE = Fraction(1, 10**6)


@pytest.fixture
def service(test_config):
    service = create_analysis_service(test_config)
    yield service
    service.cleanup()


@pytest.fixture
def model_source(models_dir):
    return ModelSource(model_path=models_dir / "running_example_60.mdp")


def value_of(text: str) -> Fraction:
    return parse_ext(text).as_fraction()


def test_checkpoints():
    assert checkpoints(0) == [0]
    assert checkpoints(5) == [0, 1, 2, 4, 5]
    assert checkpoints(8) == [0, 1, 2, 4, 8]


class TestRequests:
    def test_exactly_one_model(self, models_dir):
        with pytest.raises(ValidationError):
            ModelSource()
        with pytest.raises(ValidationError):
            ModelSource(model_path=models_dir / "running_example_60.mdp", builtin="no-opt-sched")

    def test_oracle_steps_validated(self, model_source):
        with pytest.raises(ValidationError):
            SolveRequest(model_source, oracle_steps=-1)

    def test_scheduler_extraction_is_min_only(self, model_source):
        with pytest.raises(ValidationError):
            SolveRequest(model_source, mode="max", extract_scheduler=True)

    def test_threshold_must_be_finite(self, model_source):
        with pytest.raises(ValidationError):
            SolveRequest(model_source, threshold=parse_ext("inf"))

    def test_targets_required(self, model_source):
        with pytest.raises(ValidationError):
            ReachRequest(model_source, targets=())


class TestSolve:
    def test_min_on_model_file(self, service, model_source):
        report = service.solve(SolveRequest(model_source, steps=200))
        summary = report.section("summary")
        assert summary.get("iteration") == "converged-exact"
        assert 2 - TOLERANCE <= value_of(summary.get("value s0")) <= 2
        assert report.exit_code == EXIT_OK
        assert report.verdict == "converged-exact"
        assert len(report.section("iterates").tables[0].rows) == 201

    def test_default_steps_from_config(self, service, model_source):
        report = service.solve(SolveRequest(model_source))
        assert report.section("summary").get("steps") == "40"

    def test_certificate_accepted(self, service, model_source, models_dir):
        request = SolveRequest(
            model_source, steps=10, certificate_path=models_dir / "running_example_60_min.val"
        )
        report = service.solve(request)
        assert report.section("certificate").get("certified") == "yes"
        assert [name for name, _ in report.inputs] == ["model", "certificate"]

    def test_certificate_rejected(self, service, model_source, tmp_path):
        candidate = tmp_path / "bad.val"
        candidate.write_text("s59^R 0\nbot 0\n")
        report = service.solve(SolveRequest(model_source, steps=5, certificate_path=candidate))
        section = report.section("certificate")
        assert section.get("certified") == "no"
        assert section.get("counterexample") == "s59^R"
        assert report.exit_code == EXIT_CERTIFICATE_REJECTED
        assert report.verdict == "certificate-rejected"

    def test_certificate_domain_must_be_closed(self, service, model_source, tmp_path):
        candidate = tmp_path / "open.val"
        candidate.write_text("s0 2\n")
        with pytest.raises(DomainNotClosedError):
            service.solve(SolveRequest(model_source, steps=5, certificate_path=candidate))

    def test_divergence_on_builtin(self, service):
        source = ModelSource(builtin="no-opt-sched")
        request = SolveRequest(source, mode="max", steps=200, threshold=ExtValue.of(100))
        report = service.solve(request)
        divergence = report.section("divergence")
        assert divergence.get("probe s0") == "exceeds-threshold"
        assert report.verdict == "exceeds-threshold"

    def test_scheduler_extraction(self, service, model_source):
        report = service.solve(SolveRequest(model_source, steps=200, extract_scheduler=True))
        scheduler = report.section("scheduler")
        choices = dict(tuple(row) for row in scheduler.tables[0].rows)
        assert choices["s0"] == "R"
        assert scheduler.get("scheduler_value s0") == report.section("summary").get("value s0")

    def test_reward_override(self, service, models_dir, tmp_path):
        rewards = tmp_path / "zero.val"
        rewards.write_text("s0 0\n")
        source = ModelSource(model_path=models_dir / "running_example_60.mdp", reward_path=rewards)
        report = service.solve(SolveRequest(source, mode="max", steps=20))
        assert report.section("summary").get("value s0") == "0"

    @pytest.mark.parametrize("mode", ["min", "max"])
    def test_scheduler_enumeration_matches_iterate(self, service, model_source, mode):
        report = service.solve(SolveRequest(model_source, mode=mode, steps=10, oracle_steps=3))
        oracle = report.section("oracle")
        assert oracle.get("horizon") == "3"
        assert oracle.get("max_schedulers") == "100000"
        assert oracle.get("agrees s0") == "yes"
        assert int(oracle.get("schedulers s0")) > 1

    def test_scheduler_enumeration_respects_cap(self, model_source, tmp_path):
        config = AppConfig(
            engine=EngineConfig(max_schedulers=1),
            logging=LoggingConfig(log_directory=tmp_path / "logs"),
        )
        capped = create_analysis_service(config)
        try:
            with pytest.raises(EnumerationBoundExceeded):
                capped.solve(SolveRequest(model_source, steps=5, oracle_steps=2))
        finally:
            capped.cleanup()

    def test_float_rendering(self, service, model_source):
        report = service.solve(SolveRequest(model_source, steps=3, float_mode=True))
        value = report.section("summary").get("value s0")
        assert "/" not in value
        float(value)


class TestReach:
    def test_max_reach(self, service, model_source):
        report = service.reach(ReachRequest(model_source, targets=("s*^R",), steps=40))
        summary = report.section("summary")
        assert value_of(summary.get("value s0")) >= 1 - TOLERANCE
        assert summary.get("sink") == "reach-sink"

    def test_min_certificate(self, service, model_source, models_dir):
        request = ReachRequest(
            model_source,
            targets=("s*^R",),
            mode="min",
            steps=10,
            certificate_path=models_dir / "reach_min_60.val",
        )
        report = service.reach(request)
        assert report.section("summary").get("value s0") == "0"
        assert report.section("certificate").get("certified") == "yes"


class TestPgcl:
    def test_demonic_soundness(self, service, models_dir):
        request = PgclRequest(
            models_dir / "tick_or_flip.pgcl",
            post="y",
            states=("x=0,y=0",),
            wp_budget=40,
            op_steps=250,
            check_soundness=True,
        )
        report = service.pgcl(request)
        block = report.section("state {}")
        assert report.section("soundness").get("sound") == "yes"
        assert value_of(block.get("gap")) <= Fraction(1, 10**4)
        wp_rows = block.tables[0].rows
        assert wp_rows[-1][0] == "40"
        assert abs(value_of(wp_rows[-1][1]) - 2) <= Fraction(1, 10**4)
        assert report.section("program").get("pretty").startswith("while (x = 0)")

    def test_angelic_divergence(self, service, models_dir):
        request = PgclRequest(
            models_dir / "tick_or_flip.pgcl",
            post="y",
            mode="angelic",
            wp_budget=10,
            op_steps=100,
            threshold=ExtValue.of(5),
        )
        report = service.pgcl(request)
        assert report.section("divergence").get("probe {}") == "exceeds-threshold"
        assert report.verdict == "exceeds-threshold"

    def test_simulation(self, service, models_dir):
        request = PgclRequest(
            models_dir / "tick_or_flip.pgcl", post="y", wp_budget=20, op_steps=100, simulate=(500, 3)
        )
        report = service.pgcl(request)
        simulation = report.section("simulation")
        mean, stderr = float(simulation.get("mean {}")), float(simulation.get("stderr {}"))
        assert abs(mean - 2.0) < 5 * stderr + 0.1

    def test_unfinished_loop_reports_lower_bound(self, service, tmp_path):
        program = tmp_path / "long_loop.pgcl"
        program.write_text("while (x < 300) { x := x + 1 }; tick(1)")
        report = service.pgcl(PgclRequest(program, post="0", op_steps=200, check_soundness=True))
        block = report.section("state {}")
        assert block.get("op_iteration") == "lower-bound"
        assert report.section("soundness").get("sound") == "yes"
        assert report.verdict == "lower-bound"

    def test_closed_region_reports_converged_exact(self, service, tmp_path):
        program = tmp_path / "countdown.pgcl"
        program.write_text("while (x < 3) { x := x + 1; tick(1) }")
        request = PgclRequest(program, post="0", states=("x=0", "x=2"), wp_budget=8, op_steps=40)
        report = service.pgcl(request)
        assert report.section("state {}").get("op_iteration") == "converged-exact"
        assert report.verdict == "converged-exact"

    def test_program_extension_checked(self, service, models_dir):
        with pytest.raises(FileSystemError):
            service.pgcl(PgclRequest(models_dir / "running_example_60.mdp", post="0"))


class TestFragmentsAndOutput:
    def test_fragment_matches_golden(self, service, models_dir, golden_dir):
        fragment = service.dump_fragment(FragmentRequest(models_dir / "tick_or_flip.pgcl", "x=0,y=0", 6))
        assert fragment.render() == (golden_dir / "running_example_fragment.txt").read_text()

    def test_save_report(self, service, model_source, tmp_path):
        report = service.solve(SolveRequest(model_source, steps=2))
        path = service.save_report(report, tmp_path / "out.json", "json")
        assert Path(path).read_text().startswith("{")

    def test_service_uses_config(self, service):
        assert service.config.engine.max_nodes == 200_000
