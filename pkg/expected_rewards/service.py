"""Analysis service: loads inputs, drives the engine and assembles reports."""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

from expected_rewards.core.extreal import ExtValue, render_ext, render_float
from expected_rewards.core.fixpoint import (
    BellmanMode,
    KleeneResult,
    ParkResult,
    ValueFunction,
    Verdict,
    divergence_probe,
    extract_min_scheduler,
    kleene_iterate,
    park_check,
)
from expected_rewards.core.mdp import (
    Mdp,
    RewardFn,
    State,
    count_horizon_schedulers,
    expected_reward_memoryless,
    monte_carlo_estimate,
    opt_expected_reward_step_bruteforce,
    reachable_states,
)
from expected_rewards.core.models import load_builtin
from expected_rewards.core.reachability import (
    REACH_SINK,
    TargetSet,
    reach_certificate,
    reach_transform,
)
from expected_rewards.core.telemetry import TracingService, set_global_tracing_service
from expected_rewards.infrastructure.config import AppConfig
from expected_rewards.infrastructure.file_system import SecureFileHandler
from expected_rewards.infrastructure.model_io import parse_model, parse_value_function
from expected_rewards.lang.expectations import Expectation
from expected_rewards.lang.opsem import Fragment, Running, dump_fragment, operational_mdp, torew
from expected_rewards.lang.parser import parse_expectation, parse_program, parse_state
from expected_rewards.lang.syntax import PgclStmt, ProgramState, pretty
from expected_rewards.lang.wp import WpMode, soundness_check, wp_guided_scheduler
from expected_rewards.report import AnalysisReport, ReportSection
from expected_rewards.security.validation import (
    MODEL_EXTENSIONS,
    PROGRAM_EXTENSIONS,
    REPORT_EXTENSIONS,
    VALUE_EXTENSIONS,
    ValidationError,
    validate_input_length,
    validate_step_count,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_RESOURCE_CAP = 2
EXIT_CERTIFICATE_REJECTED = 3


def checkpoints(limit: int) -> List[int]:
    """0, the powers of two below ``limit``, and ``limit`` itself."""
    points = {0, limit}
    power = 1
    while power < limit:
        points.add(power)
        power *= 2
    return sorted(points)


@dataclass(frozen=True)
class ModelSource:
    """Either a model file or a built-in model, with optional reward override."""

    model_path: Optional[Path] = None
    builtin: Optional[str] = None
    columns: int = 0
    r: ExtValue = ExtValue.of(1)
    reward_path: Optional[Path] = None

    def __post_init__(self) -> None:
        if (self.model_path is None) == (self.builtin is None):
            raise ValidationError("Give exactly one of a model file or a built-in model")
        validate_step_count(self.columns, "columns")


@dataclass(frozen=True)
class SolveRequest:
    source: ModelSource
    mode: BellmanMode = BellmanMode.MIN
    states: Tuple[str, ...] = ()
    steps: Optional[int] = None
    threshold: Optional[ExtValue] = None
    certificate_path: Optional[Path] = None
    extract_scheduler: bool = False
    oracle_steps: Optional[int] = None
    float_mode: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", BellmanMode(self.mode))
        if self.steps is not None:
            validate_step_count(self.steps)
        if self.oracle_steps is not None:
            validate_step_count(self.oracle_steps, "oracle steps")
        if self.threshold is not None and self.threshold.is_infinite:
            raise ValidationError("Threshold must be finite")
        if self.extract_scheduler and self.mode is not BellmanMode.MIN:
            raise ValidationError("Scheduler extraction applies to min mode only")


@dataclass(frozen=True)
class ReachRequest:
    source: ModelSource
    targets: Tuple[str, ...]
    mode: BellmanMode = BellmanMode.MAX
    states: Tuple[str, ...] = ()
    steps: Optional[int] = None
    certificate_path: Optional[Path] = None
    float_mode: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", BellmanMode(self.mode))
        if not self.targets:
            raise ValidationError("At least one target pattern is required")
        if self.steps is not None:
            validate_step_count(self.steps)


@dataclass(frozen=True)
class PgclRequest:
    program_path: Path
    post: str
    states: Tuple[str, ...] = ("",)
    mode: WpMode = WpMode.DEMONIC
    wp_budget: int = 60
    op_steps: Optional[int] = None
    check_soundness: bool = False
    threshold: Optional[ExtValue] = None
    simulate: Optional[Tuple[int, int]] = None
    horizon: Optional[int] = None
    float_mode: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", WpMode(self.mode))
        validate_step_count(self.wp_budget, "wp budget")
        if self.op_steps is not None:
            validate_step_count(self.op_steps, "op steps")
        if self.simulate is not None:
            trials, _ = self.simulate
            validate_step_count(trials, "trials", minimum=1)
        if self.horizon is not None:
            validate_step_count(self.horizon, "horizon", minimum=1)
        if not self.states:
            object.__setattr__(self, "states", ("",))


@dataclass(frozen=True)
class FragmentRequest:
    program_path: Path
    state: str = ""
    depth: int = 6
    variables: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        validate_step_count(self.depth, "depth")


@dataclass
class _LoadedModel:
    mdp: Mdp
    reward: RewardFn
    initial: State
    texts: List[Tuple[str, str]] = field(default_factory=list)
    description: str = ""


class AnalysisService:
    """Entry point for every analysis the CLI offers."""

    def __init__(self, config: Optional[AppConfig] = None) -> None:
        self.config = config or AppConfig()
        self.tracing_service = TracingService(self.config.input.enable_tracing)
        set_global_tracing_service(self.tracing_service)
        self.model_files = SecureFileHandler(
            allowed_extensions=MODEL_EXTENSIONS + VALUE_EXTENSIONS,
            max_file_size_mb=self.config.input.max_file_size_mb,
        )
        self.program_files = SecureFileHandler(
            allowed_extensions=PROGRAM_EXTENSIONS,
            max_file_size_mb=self.config.input.max_file_size_mb,
        )
        logger.info("AnalysisService initialized")

    def _renderer(self, float_mode: bool) -> Callable[[ExtValue], str]:
        return render_float if float_mode else render_ext

    def _read(self, handler: SecureFileHandler, path: Path) -> str:
        text = handler.read_text(path)
        return validate_input_length(text, self.config.input.max_input_length, str(path))

    def _load_model(self, source: ModelSource) -> _LoadedModel:
        if source.builtin is not None:
            model = load_builtin(source.builtin, source.columns, source.r)
            loaded = _LoadedModel(
                model.mdp,
                model.reward,
                model.initial,
                description=f"builtin:{source.builtin} columns={source.columns} r={render_ext(source.r)}",
            )
        else:
            assert source.model_path is not None
            text = self._read(self.model_files, source.model_path)
            parsed = parse_model(text)
            loaded = _LoadedModel(
                parsed.mdp, parsed.reward, parsed.initial, [("model", text)], str(source.model_path)
            )

        if source.reward_path is not None:
            text = self._read(self.model_files, source.reward_path)
            loaded.reward = RewardFn(dict(parse_value_function(text).items()))
            loaded.texts.append(("reward", text))
        return loaded

    def _load_values(self, path: Path) -> Tuple[ValueFunction, str]:
        text = self._read(self.model_files, path)
        return parse_value_function(text), text

    def _iterate_table(
        self,
        section: ReportSection,
        result: KleeneResult,
        render: Callable[[ExtValue], str],
        steps: Sequence[int],
    ) -> None:
        for state in result.start:
            table = section.add_table(f"iterates {state}", ["step", "value"])
            for k in steps:
                table.add_row(k, render(result[k][state]))

    def _summary(self, section: ReportSection, result: KleeneResult, render: Callable) -> None:
        section.add_field("mode", result.mode.value)
        section.add_field("steps", len(result) - 1)
        section.add_field("iteration", result.verdict.value)
        section.add_field("converged_at", result.converged_at)
        section.add_field("explored_states", result.explored_states)
        for state in result.start:
            section.add_field(f"value {state}", render(result.last[state]))

    def _certificate_section(
        self, report: AnalysisReport, park: ParkResult, render: Callable
    ) -> None:
        section = report.add_section("certificate")
        section.add_field("mode", park.mode.value)
        section.add_field("domain_size", park.domain_size)
        section.add_field("certified", "yes" if park.certified else "no")
        if not park.certified:
            section.add_field("counterexample", park.counterexample)
            section.add_field("bellman_value", render(park.bellman_value))
            section.add_field("candidate_value", render(park.candidate_value))
            report.exit_code = EXIT_CERTIFICATE_REJECTED

    def _finish(self, report: AnalysisReport, started: float, verdict: str) -> AnalysisReport:
        if report.exit_code == EXIT_CERTIFICATE_REJECTED:
            verdict = "certificate-rejected"
        report.verdict = verdict
        report.timing["total"] = time.perf_counter() - started
        logger.info(f"{report.command} finished: {verdict}")
        return report

    def solve(self, request: SolveRequest) -> AnalysisReport:
        """Min/max total expected reward by Kleene iteration, with optional certificate and probe."""
        started = time.perf_counter()
        render = self._renderer(request.float_mode)
        steps = request.steps if request.steps is not None else self.config.engine.default_steps
        max_nodes = self.config.engine.max_nodes

        with self.tracing_service.trace_operation("mdp_solve", {"steps": steps}) as span:
            model = self._load_model(request.source)
            states: List[State] = list(request.states) or [model.initial]

            report = AnalysisReport("mdp-solve")
            report.add_argument("model", model.description)
            report.add_argument("mode", request.mode.value)
            report.add_argument("steps", steps)
            report.add_argument("states", ",".join(str(s) for s in states))
            for name, text in model.texts:
                report.add_input(name, text)

            with self.tracing_service.measure("kleene_iterate") as timing:
                result = kleene_iterate(
                    model.mdp, model.reward, request.mode, states, steps, max_nodes
                )
            report.timing["kleene_iterate"] = timing.get("elapsed_seconds", 0.0)
            span.set_attribute("explored_states", result.explored_states)

            summary = report.add_section("summary")
            self._summary(summary, result, render)
            self._iterate_table(report.add_section("iterates"), result, render, range(steps + 1))
            verdict = result.verdict.value

            if request.threshold is not None:
                probe = report.add_section("divergence")
                probe.add_field("threshold", render_ext(request.threshold))
                for state in states:
                    outcome = divergence_probe(
                        model.mdp, model.reward, request.mode, state, request.threshold, steps, max_nodes
                    )
                    probe.add_field(f"probe {state}", outcome.label)
                    probe.add_field(f"step {state}", outcome.step)
                    probe.add_field(f"value {state}", render(outcome.value))
                    if outcome.exceeds_threshold:
                        verdict = outcome.label

            if request.certificate_path is not None:
                candidate, text = self._load_values(request.certificate_path)
                report.add_input("certificate", text)
                park = park_check(model.mdp, model.reward, request.mode, candidate, list(candidate))
                self._certificate_section(report, park, render)

            if request.extract_scheduler:
                self._scheduler_section(report, model, states, steps, render)

            if request.oracle_steps is not None:
                self._oracle_section(report, model, states, request.mode, request.oracle_steps, render)

        return self._finish(report, started, verdict)

    def _scheduler_section(
        self,
        report: AnalysisReport,
        model: _LoadedModel,
        states: List[State],
        steps: int,
        render: Callable,
    ) -> None:
        max_nodes = self.config.engine.max_nodes
        domain = reachable_states(model.mdp, states, max_nodes)
        values = kleene_iterate(model.mdp, model.reward, BellmanMode.MIN, domain, steps, max_nodes)
        scheduler = extract_min_scheduler(model.mdp, model.reward, values.last, domain)

        section = report.add_section("scheduler")
        section.add_field("domain_size", len(domain))
        section.add_field("iteration", values.verdict.value)
        choices = section.add_table("choices", ["state", "action"])
        for state in domain:
            if len(model.mdp.enabled_actions(state)) > 1:
                choices.add_row(state, scheduler.choose(state))
        for state in states:
            value = expected_reward_memoryless(model.mdp, model.reward, scheduler, state, steps)
            section.add_field(f"scheduler_value {state}", render(value))

    def _oracle_section(
        self,
        report: AnalysisReport,
        model: _LoadedModel,
        states: List[State],
        mode: BellmanMode,
        n: int,
        render: Callable,
    ) -> None:
        """Compare the (n+1)-th Kleene iterate with the n-step optimum over every horizon-n scheduler."""
        max_schedulers = self.config.engine.max_schedulers
        iterates = kleene_iterate(
            model.mdp, model.reward, mode, states, n + 1, self.config.engine.max_nodes
        )

        section = report.add_section("oracle")
        section.add_field("horizon", n)
        section.add_field("max_schedulers", max_schedulers)
        for state in states:
            with self.tracing_service.measure("bruteforce") as timing:
                optimum = opt_expected_reward_step_bruteforce(
                    model.mdp, model.reward, state, n, mode, max_schedulers
                )
            report.timing[f"bruteforce {state}"] = timing.get("elapsed_seconds", 0.0)
            agrees = optimum == iterates.last[state]
            if not agrees:
                logger.warning(f"Kleene iterate and scheduler enumeration differ at {state}")
            section.add_field(f"schedulers {state}", count_horizon_schedulers(model.mdp, state, n))
            section.add_field(f"bruteforce {state}", render(optimum))
            section.add_field(f"iterate {state}", render(iterates.last[state]))
            section.add_field(f"agrees {state}", "yes" if agrees else "no")

    def reach(self, request: ReachRequest) -> AnalysisReport:
        """Min/max probability of reaching target states, as expected reward on the redirected MDP."""
        started = time.perf_counter()
        render = self._renderer(request.float_mode)
        steps = request.steps if request.steps is not None else self.config.engine.default_steps

        with self.tracing_service.trace_operation("mdp_reach", {"steps": steps}):
            model = self._load_model(request.source)
            states: List[State] = list(request.states) or [model.initial]
            targets = TargetSet.from_patterns(request.targets)

            report = AnalysisReport("mdp-reach")
            report.add_argument("model", model.description)
            report.add_argument("targets", ",".join(request.targets))
            report.add_argument("mode", request.mode.value)
            report.add_argument("steps", steps)
            report.add_argument("states", ",".join(str(s) for s in states))
            for name, text in model.texts:
                report.add_input(name, text)

            reach_mdp, reward = reach_transform(model.mdp, targets)
            with self.tracing_service.measure("reach_probability") as timing:
                result = kleene_iterate(
                    reach_mdp, reward, request.mode, states, steps, self.config.engine.max_nodes
                )
            report.timing["reach_probability"] = timing.get("elapsed_seconds", 0.0)

            summary = report.add_section("summary")
            self._summary(summary, result, render)
            summary.add_field("sink", REACH_SINK)
            self._iterate_table(report.add_section("iterates"), result, render, range(steps + 1))

            if request.certificate_path is not None:
                candidate, text = self._load_values(request.certificate_path)
                report.add_input("certificate", text)
                park = reach_certificate(model.mdp, targets, request.mode, candidate, list(candidate))
                self._certificate_section(report, park, render)

        return self._finish(report, started, result.verdict.value)

    def pgcl(self, request: PgclRequest) -> AnalysisReport:
        """wp and operational approximations of a program, with optional cross-checks."""
        started = time.perf_counter()
        render = self._renderer(request.float_mode)
        op_steps = request.op_steps if request.op_steps is not None else self.config.engine.default_steps
        max_nodes = self.config.engine.max_nodes

        with self.tracing_service.trace_operation("pgcl", {"op_steps": op_steps}) as span:
            text = self._read(self.program_files, request.program_path)
            program = parse_program(text)
            post = parse_expectation(
                validate_input_length(request.post, self.config.input.max_input_length, "post")
            )
            states = [parse_state(s) for s in request.states]

            report = AnalysisReport("pgcl")
            report.add_argument("program", request.program_path)
            report.add_argument("post", request.post)
            report.add_argument("mode", request.mode.value)
            report.add_argument("wp_budget", request.wp_budget)
            report.add_argument("op_steps", op_steps)
            report.add_input("program", text)

            section = report.add_section("program")
            section.add_field("pretty", pretty(program))

            with self.tracing_service.measure("soundness_check") as timing:
                soundness = soundness_check(
                    program,
                    post,
                    states,
                    request.mode,
                    checkpoints(request.wp_budget),
                    checkpoints(op_steps),
                    max_nodes,
                )
            report.timing["soundness_check"] = timing.get("elapsed_seconds", 0.0)
            span.set_attribute("states", len(states))

            for entry in soundness.entries:
                block = report.add_section(f"state {entry.state}")
                wp_table = block.add_table("wp", ["budget", "value"])
                for budget, value in entry.wp_values:
                    wp_table.add_row(budget, render(value))
                op_table = block.add_table("op", ["steps", "value"])
                for steps, value in entry.op_values:
                    op_table.add_row(steps, render(value))
                block.add_field("wp_exact", entry.wp_exact)
                block.add_field("op_iteration", entry.op_verdict.value)
                if request.check_soundness:
                    gap = entry.gap
                    block.add_field("agreement", entry.agreement)
                    block.add_field("gap", None if gap is None else render(gap))
                    block.add_field("violations", "; ".join(entry.violations) or "none")

            verdict = (Verdict.CONVERGED_EXACT if soundness.exact else Verdict.LOWER_BOUND).value

            if request.check_soundness:
                check = report.add_section("soundness")
                check.add_field("sound", "yes" if soundness.sound else "no")

            threshold = request.threshold
            if threshold is not None or request.mode is WpMode.ANGELIC:
                if threshold is None:
                    threshold = ExtValue.of(self.config.engine.divergence_threshold)
                verdict = self._pgcl_divergence(
                    report, program, post, states, request.mode, threshold, op_steps, render
                ) or verdict

            if request.simulate is not None:
                self._simulation_section(report, program, post, states, request, op_steps)

        return self._finish(report, started, verdict)

    def _pgcl_divergence(
        self,
        report: AnalysisReport,
        program: PgclStmt,
        post: Expectation,
        states: List[ProgramState],
        mode: WpMode,
        threshold: ExtValue,
        op_steps: int,
        render: Callable,
    ) -> Optional[str]:
        section = report.add_section("divergence")
        section.add_field("threshold", render_ext(threshold))
        mdp, reward = operational_mdp(), torew(post)
        exceeded = None
        for state in states:
            outcome = divergence_probe(
                mdp, reward, mode.bellman, Running(program, state), threshold, op_steps,
                self.config.engine.max_nodes,
            )
            section.add_field(f"probe {state}", outcome.label)
            section.add_field(f"step {state}", outcome.step)
            section.add_field(f"value {state}", render(outcome.value))
            if outcome.exceeds_threshold:
                exceeded = outcome.label
        return exceeded

    def _simulation_section(
        self,
        report: AnalysisReport,
        program: PgclStmt,
        post: Expectation,
        states: List[ProgramState],
        request: PgclRequest,
        op_steps: int,
    ) -> None:
        assert request.simulate is not None
        trials, seed = request.simulate
        horizon = request.horizon or op_steps
        scheduler = wp_guided_scheduler(post, request.mode, request.wp_budget)
        section = report.add_section("simulation")
        section.add_field("trials", trials)
        section.add_field("seed", seed)
        section.add_field("horizon", horizon)
        for state in states:
            estimate = monte_carlo_estimate(
                operational_mdp(), torew(post), scheduler, Running(program, state), horizon, trials, seed
            )
            section.add_field(f"mean {state}", f"{estimate.mean:.6g}")
            section.add_field(f"stderr {state}", f"{estimate.standard_error:.6g}")

    def dump_fragment(self, request: FragmentRequest) -> Fragment:
        """Breadth-first fragment of the operational MDP from the program's initial configuration."""
        with self.tracing_service.trace_operation("dump_fragment", {"depth": request.depth}):
            program = parse_program(self._read(self.program_files, request.program_path))
            state = parse_state(request.state)
            return dump_fragment(program, state, request.depth, request.variables)

    def save_report(self, report: AnalysisReport, path: Union[str, Path], output_format: str) -> Path:
        handler = SecureFileHandler(allowed_extensions=REPORT_EXTENSIONS)
        return handler.write_text(path, report.render(output_format))

    def save_text(self, text: str, path: Union[str, Path]) -> Path:
        return SecureFileHandler(allowed_extensions=REPORT_EXTENSIONS).write_text(path, text)

    def cleanup(self) -> None:
        self.tracing_service.cleanup()


def create_analysis_service(config: Optional[AppConfig] = None) -> AnalysisService:
    return AnalysisService(config)
