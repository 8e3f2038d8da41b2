"""Command-line entry point: ``chaintest context`` and ``chaintest run``."""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .analysis import ROOT_SCOPES, ROOTS_ALL_PUBLIC, analyze
from .backends import API_KEY_ENV, HttpChatClient, ScriptedModel, ScriptedRunner, SubprocessRunner
from .errors import ConfigError, FactsError, LookupFailure, TokenBudgetExceeded
from .model import parse_facts
from .orchestrator import SessionConfig, SessionLog, backends_from_log, read_log, run_session

log = logging.getLogger("chaintest")

EXIT_OK = 0
EXIT_FACTS = 2
EXIT_FOCAL = 3
EXIT_BACKEND = 4


class UsageError(ConfigError):
    pass


@dataclass
class CliConfig:
    facts: Optional[str] = None
    repo_root: Optional[str] = None
    focal_class: Optional[str] = None
    focal_method: Optional[str] = None
    out: str = "chaintest-out"
    depth: int = 3
    max_iters: int = 10
    stagnation: int = 3
    fix_attempts: int = 3
    paths_cap: int = 32
    temperature: float = 0.2
    framework: str = "JUnit 4"
    budget: int = 60_000
    llm_endpoint: Optional[str] = None
    llm_model: Optional[str] = None
    runner_cmd: Optional[str] = None
    mock_script: Optional[str] = None
    roots_scope: str = ROOTS_ALL_PUBLIC

    def session_config(self) -> SessionConfig:
        return SessionConfig(
            n_gen=self.max_iters,
            n_fix=self.fix_attempts,
            m=self.stagnation,
            d_max=max(self.depth, 1),
            k_paths=self.paths_cap,
            temperature=self.temperature,
            framework=self.framework,
            budget=self.budget,
        )


_FLAGS = {
    "facts": (str, "program-facts JSON file"),
    "repo_root": (str, "directory that source_path entries are relative to"),
    "focal_class": (str, "fully-qualified focal class"),
    "focal_method": (str, "focal method name, or name(param,...) for one overload"),
    "out": (str, "output directory"),
    "depth": (int, "maximum call-path depth in edges"),
    "max_iters": (int, "maximum generation iterations"),
    "stagnation": (int, "stop after this many iterations without coverage gain"),
    "fix_attempts": (int, "repair rounds per iteration"),
    "paths_cap": (int, "maximum number of filtered call paths"),
    "temperature": (float, "sampling temperature"),
    "framework": (str, "test framework name used in prompts"),
    "budget": (int, "character budget for the generation prompt"),
    "llm_endpoint": (str, f"chat-completions URL (key read from ${API_KEY_ENV})"),
    "llm_model": (str, "model name sent to the endpoint"),
    "runner_cmd": (str, "test runner command speaking the JSON stdin/stdout protocol"),
    "mock_script": (str, "scripted backends: JSON script or a previous session .jsonl log"),
    "roots_scope": (str, "entry points: all-public or focal-class-only"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaintest", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("context", "extract call-chain and initialization context"),
        ("run", "run a generate/fix session"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with defaults for any flag")
        for key, (typ, flag_help) in _FLAGS.items():
            kwargs = {"type": typ, "default": argparse.SUPPRESS, "help": flag_help}
            if key == "roots_scope":
                kwargs["choices"] = ROOT_SCOPES
            p.add_argument("--" + key.replace("_", "-"), dest=key, **kwargs)
    return parser


def resolve_config(args: argparse.Namespace) -> CliConfig:
    """Defaults, then the config file, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text("utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        known = {f.name for f in fields(CliConfig)}
        for key, value in doc.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = value
    for f in fields(CliConfig):
        if hasattr(args, f.name):
            values[f.name] = getattr(args, f.name)
    return CliConfig(**values)


def _load_analysis(cfg: CliConfig):
    if not cfg.facts or not cfg.focal_class or not cfg.focal_method:
        raise UsageError("--facts, --focal-class and --focal-method are required")
    try:
        document = Path(cfg.facts).read_bytes()
    except OSError as exc:
        raise FactsError(f"cannot read facts file: {exc}") from exc
    facts = parse_facts(document)
    repo_root = cfg.repo_root or str(Path(cfg.facts).parent)
    return analyze(
        facts,
        cfg.focal_class,
        cfg.focal_method,
        d_max=cfg.depth,
        k_paths=cfg.paths_cap,
        roots_scope=cfg.roots_scope,
        repo_root=repo_root,
    )


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_context(cfg: CliConfig) -> int:
    analysis = _load_analysis(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "callchain.txt", analysis.bundle.call_chain_text)
    _write(out / "init.txt", analysis.bundle.init_text)
    _write(out / "paths.json", _dump(analysis.paths_document()))
    _write(out / "diagnostics.json", _dump(analysis.diagnostics()))
    return EXIT_OK


def make_backends(cfg: CliConfig, out: Path):
    """Model and runner for a session; raises ConfigError on bad configuration."""
    if cfg.mock_script:
        path = Path(cfg.mock_script)
        try:
            if path.suffix == ".jsonl":
                return backends_from_log(read_log(path))
            script = json.loads(path.read_text("utf-8"))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read mock script {path}: {exc}") from exc
        model_doc = script.get("model", {})
        runner_doc = script.get("runner", {})
        outcomes = runner_doc.get("outcomes", [])
        if not outcomes:
            raise ConfigError("mock script needs at least one runner outcome")
        model = ScriptedModel(list(model_doc.get("responses", [])), model_doc.get("synthesize", True))
        return model, ScriptedRunner(list(outcomes))
    if not cfg.llm_endpoint:
        raise ConfigError("no model configured: pass --llm-endpoint or --mock-script")
    if not cfg.runner_cmd:
        raise ConfigError("no test runner configured: pass --runner-cmd or --mock-script")
    command = shlex.split(cfg.runner_cmd)
    if not command:
        raise ConfigError("empty --runner-cmd")
    workdir = out / "runner"
    workdir.mkdir(parents=True, exist_ok=True)
    return HttpChatClient(cfg.llm_endpoint, model=cfg.llm_model), SubprocessRunner(command, cwd=workdir)


def cmd_run(cfg: CliConfig) -> int:
    analysis = _load_analysis(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        session_config = cfg.session_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    model, runner = make_backends(cfg, out)
    session_log = SessionLog(out / "session.jsonl")
    try:
        report = run_session(session_config, analysis.bundle, analysis.focal, model, runner, session_log)
    finally:
        session_log.close()
    _write(out / "report.json", report.to_json())
    log.info("session stopped: %s after %d iterations", report.stop_reason, len(report.iterations))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if args.command == "context":
            return cmd_context(cfg)
        return cmd_run(cfg)
    except UsageError as exc:
        print(f"chaintest: {exc}", file=sys.stderr)
        return EXIT_FACTS
    except FactsError as exc:
        print(f"chaintest: facts error: {exc}", file=sys.stderr)
        return EXIT_FACTS
    except LookupFailure as exc:
        print(f"chaintest: unknown focal {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FOCAL
    except (ConfigError, TokenBudgetExceeded) as exc:
        print(f"chaintest: configuration error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
