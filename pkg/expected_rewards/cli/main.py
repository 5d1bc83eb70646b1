"""Command-line interface for expected-reward analyses of MDPs and pGCL programs."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from expected_rewards.core.extreal import ExtRealError, ExtValue, parse_ext
from expected_rewards.core.fixpoint import DomainNotClosedError, ResourceCapExceeded
from expected_rewards.core.mdp import EnumerationBoundExceeded, MdpError
from expected_rewards.core.models import builtin_names
from expected_rewards.infrastructure.config import AppConfig, get_default_config
from expected_rewards.infrastructure.file_system import FileSystemError
from expected_rewards.infrastructure.log_files import LOG_FORMAT, attach_file_handler, detach_file_handler
from expected_rewards.infrastructure.model_io import ModelFormatError
from expected_rewards.lang.parser import PgclSyntaxError
from expected_rewards.lang.syntax import SyntaxTreeError
from expected_rewards.report import AnalysisReport
from expected_rewards.security.validation import ValidationError, validate_identifier
from expected_rewards.service import (
    EXIT_CERTIFICATE_REJECTED,
    EXIT_INPUT_ERROR,
    EXIT_OK,
    EXIT_RESOURCE_CAP,
    AnalysisService,
    FragmentRequest,
    ModelSource,
    PgclRequest,
    ReachRequest,
    SolveRequest,
)

logger = logging.getLogger(__name__)

INPUT_ERRORS = (
    ValidationError,
    PgclSyntaxError,
    SyntaxTreeError,
    ModelFormatError,
    FileSystemError,
    MdpError,
    ExtRealError,
)


def _ext_value(text: str) -> ExtValue:
    try:
        return parse_ext(text)
    except ExtRealError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


class CLIApp:
    """Command-line application; ``run`` returns the process exit code."""

    def __init__(self, config: Optional[AppConfig] = None) -> None:
        self.config = config
        self.service: Optional[AnalysisService] = None

    def create_parser(self) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", help="JSON configuration file")
        common.add_argument(
            "--log-level",
            choices=["DEBUG", "INFO", "WARNING", "ERROR"],
            default=None,
            help="Logging level (logs go to stderr)",
        )
        common.add_argument(
            "--log-file",
            action="store_true",
            help="Also log to a rotating file in the configured log directory",
        )
        common.add_argument("--output", "-o", help="Write the report to this file")
        common.add_argument(
            "--format", "-f", choices=["text", "json"], default="text", help="Report format"
        )
        common.add_argument("--float", action="store_true", help="Render values as floats")
        common.add_argument(
            "--timing", action="store_true", help="Print wall-clock timings to stderr"
        )

        parser = argparse.ArgumentParser(
            prog="expected-rewards",
            description="Total expected rewards of MDPs and weakest preexpectations of pGCL programs",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Examples:
  expected-rewards mdp-solve models/running_example_60.mdp --mode min --steps 200
  expected-rewards mdp-solve --builtin running-example --r 4 --mode max --threshold 1000 --steps 500
  expected-rewards mdp-reach models/running_example_60.mdp --target 's*^R' --mode max --steps 40
  expected-rewards pgcl models/tick_or_flip.pgcl --post y --state x=0,y=0 --mode demonic
  expected-rewards dump-fragment models/tick_or_flip.pgcl --state x=0,y=0 --depth 6
            """,
        )
        commands = parser.add_subparsers(dest="command", required=True)

        solve = commands.add_parser("mdp-solve", parents=[common], help="Min/max total expected reward")
        self._add_model_arguments(solve)
        solve.add_argument("--mode", choices=["min", "max"], default="min")
        solve.add_argument("--steps", type=int, help="Kleene iterations (default from config)")
        solve.add_argument("--threshold", type=_ext_value, help="Run the divergence probe")
        solve.add_argument("--certificate", help="Value-function file to check by Park induction")
        solve.add_argument(
            "--extract-scheduler", action="store_true", help="Report a min-optimal memoryless scheduler"
        )
        solve.add_argument(
            "--oracle-steps",
            type=int,
            help="Cross-check the iterate at this horizon against enumerating every scheduler",
        )

        reach = commands.add_parser("mdp-reach", parents=[common], help="Min/max reachability probability")
        self._add_model_arguments(reach)
        reach.add_argument(
            "--target", action="append", required=True, help="Target state name or pattern (repeatable)"
        )
        reach.add_argument("--mode", choices=["min", "max"], default="max")
        reach.add_argument("--steps", type=int, help="Kleene iterations (default from config)")
        reach.add_argument("--certificate", help="Value-function file to check by Park induction")

        pgcl = commands.add_parser("pgcl", parents=[common], help="wp and operational semantics of a program")
        pgcl.add_argument("program", help="Program file (.pgcl)")
        pgcl.add_argument("--post", default="0", help="Postexpectation, e.g. 'y' or '[x = 1] * y'")
        pgcl.add_argument(
            "--state", action="append", help="Initial state such as x=0,y=0 (repeatable)"
        )
        pgcl.add_argument("--mode", choices=["demonic", "angelic"], default="demonic")
        pgcl.add_argument("--wp-budget", type=int, default=60, help="Loop unrollings for wp")
        pgcl.add_argument("--op-steps", type=int, help="Bellman iterations on the operational MDP")
        pgcl.add_argument("--check-soundness", action="store_true", help="Compare both sequences")
        pgcl.add_argument("--threshold", type=_ext_value, help="Run the divergence probe")
        pgcl.add_argument(
            "--simulate",
            nargs=2,
            type=int,
            metavar=("TRIALS", "SEED"),
            help="Monte Carlo estimate under the wp-guided scheduler",
        )
        pgcl.add_argument("--horizon", type=int, help="Simulation horizon (default: op steps)")

        fragment = commands.add_parser(
            "dump-fragment", parents=[common], help="Reachable operational configurations up to a depth"
        )
        fragment.add_argument("program", help="Program file (.pgcl)")
        fragment.add_argument("--state", default="", help="Initial state such as x=0,y=0")
        fragment.add_argument("--depth", type=int, default=6)
        fragment.add_argument("--vars", help="Comma-separated variables shown in node labels")

        return parser

    def _add_model_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("model", nargs="?", help="Model file (.mdp)")
        parser.add_argument("--builtin", choices=builtin_names(), help="Use a built-in model")
        parser.add_argument("--columns", type=int, default=0, help="Truncate the built-in model")
        parser.add_argument("--r", type=_ext_value, default=parse_ext("1"), help="Reward parameter r")
        parser.add_argument("--reward", help="Value-function file overriding the model's rewards")
        parser.add_argument("--state", action="append", help="Queried state (repeatable)")

    def _configure_logging(self, level: Optional[str]) -> None:
        chosen = level or (self.config.logging.level if self.config else "WARNING")
        logging.basicConfig(level=getattr(logging, chosen), format=LOG_FORMAT, stream=sys.stderr)
        logging.getLogger().setLevel(getattr(logging, chosen))

    def _load_config(self, args: argparse.Namespace) -> AppConfig:
        if args.config:
            return AppConfig.from_file(Path(args.config))
        if self.config is not None:
            return self.config
        return get_default_config()

    def run(self, args: Optional[List[str]] = None) -> int:
        parser = self.create_parser()
        parsed = parser.parse_args(args)
        self._configure_logging(parsed.log_level)

        try:
            self.config = self._load_config(parsed)
            self.config.validate()
            if parsed.log_level is None:
                logging.getLogger().setLevel(getattr(logging, self.config.logging.level))
            if parsed.log_file or self.config.logging.file_logging:
                attach_file_handler(self.config.logging)
            self.service = AnalysisService(self.config)

            handlers: Dict[str, Callable[[argparse.Namespace], int]] = {
                "mdp-solve": self._mdp_solve,
                "mdp-reach": self._mdp_reach,
                "pgcl": self._pgcl,
                "dump-fragment": self._dump_fragment,
            }
            return handlers[parsed.command](parsed)

        except KeyboardInterrupt:
            print("\nOperation cancelled by user", file=sys.stderr)
            return 130
        except DomainNotClosedError as e:
            print(f"Certificate rejected: {e}", file=sys.stderr)
            return EXIT_CERTIFICATE_REJECTED
        except (ResourceCapExceeded, EnumerationBoundExceeded) as e:
            print(f"Resource cap exceeded: {e}", file=sys.stderr)
            return EXIT_RESOURCE_CAP
        except INPUT_ERRORS as e:
            print(f"Input error: {e}", file=sys.stderr)
            return EXIT_INPUT_ERROR
        finally:
            if self.service is not None:
                self.service.cleanup()
            detach_file_handler()

    def _source(self, args: argparse.Namespace) -> ModelSource:
        return ModelSource(
            model_path=Path(args.model) if args.model else None,
            builtin=args.builtin,
            columns=args.columns,
            r=args.r,
            reward_path=Path(args.reward) if args.reward else None,
        )

    def _mdp_solve(self, args: argparse.Namespace) -> int:
        assert self.service is not None
        request = SolveRequest(
            source=self._source(args),
            mode=args.mode,
            states=tuple(args.state or ()),
            steps=args.steps,
            threshold=args.threshold,
            certificate_path=Path(args.certificate) if args.certificate else None,
            extract_scheduler=args.extract_scheduler,
            oracle_steps=args.oracle_steps,
            float_mode=args.float,
        )
        return self._emit(self.service.solve(request), args)

    def _mdp_reach(self, args: argparse.Namespace) -> int:
        assert self.service is not None
        request = ReachRequest(
            source=self._source(args),
            targets=tuple(args.target),
            mode=args.mode,
            states=tuple(args.state or ()),
            steps=args.steps,
            certificate_path=Path(args.certificate) if args.certificate else None,
            float_mode=args.float,
        )
        return self._emit(self.service.reach(request), args)

    def _pgcl(self, args: argparse.Namespace) -> int:
        assert self.service is not None
        request = PgclRequest(
            program_path=Path(args.program),
            post=args.post,
            states=tuple(args.state or ("",)),
            mode=args.mode,
            wp_budget=args.wp_budget,
            op_steps=args.op_steps,
            check_soundness=args.check_soundness,
            threshold=args.threshold,
            simulate=tuple(args.simulate) if args.simulate else None,
            horizon=args.horizon,
            float_mode=args.float,
        )
        return self._emit(self.service.pgcl(request), args)

    def _dump_fragment(self, args: argparse.Namespace) -> int:
        assert self.service is not None
        variables = None
        if args.vars:
            variables = tuple(validate_identifier(v.strip()) for v in args.vars.split(",") if v.strip())
        fragment = self.service.dump_fragment(
            FragmentRequest(Path(args.program), args.state, args.depth, variables)
        )
        text = fragment.render()
        if args.output:
            self.service.save_text(text, args.output)
        else:
            sys.stdout.write(text)
        return EXIT_OK

    def _emit(self, report: AnalysisReport, args: argparse.Namespace) -> int:
        assert self.service is not None
        if args.output:
            path = self.service.save_report(report, args.output, args.format)
            print(f"Report saved to: {path}", file=sys.stderr)
        else:
            sys.stdout.write(report.render(args.format, include_timing=False))
        if args.timing:
            for name, seconds in sorted(report.timing.items()):
                print(f"# {name}: {seconds:.3f}s", file=sys.stderr)
        return report.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    return CLIApp().run(argv)


if __name__ == "__main__":
    sys.exit(main())
