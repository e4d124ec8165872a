"""Command line entry point ``qshape``.

Exit codes: 0 success, 2 configuration error, 3 heuristic provider error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..envs import REGISTRY, EnvConfig, MdpEnv, make_env
from ..heuristics import (ConfigurationError, ProviderError, RuleSet, RuleValidationError,
                          fetch_raw, materialize, provide, validate_response)
from ..mdp import greedy_policy, value_iteration
from ..population import PopulationConfig, run_population
from .emit import emit, format_table, plot_curves, read_csv, write_csv
from .experiment import ExperimentConfig, run_comparison
from .metrics import summarize
from .training import AgentSpec, Trainer, default_backbone, make_agent, shaping_hook

EXIT_OK, EXIT_CONFIG, EXIT_PROVIDER, EXIT_RUNTIME = 0, 2, 3, 4

log = logging.getLogger("qshaping")


def _load_json(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p}: {exc}") from exc


def _json_arg(text, name):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"--{name} is not valid JSON: {exc}") from exc


def _env_config(doc: dict, args) -> EnvConfig:
    env_doc = doc.get("env", {})
    if isinstance(env_doc, str):
        env_doc = {"env_id": env_doc}
    env_doc = dict(env_doc)
    if getattr(args, "env", None):
        env_doc["env_id"] = args.env
    if getattr(args, "env_params", None):
        env_doc["params"] = {**env_doc.get("params", {}), **_json_arg(args.env_params, "env-params")}
    if getattr(args, "horizon", None):
        env_doc["horizon"] = args.horizon
    if "env_id" not in env_doc:
        raise ConfigurationError("no environment given (use --env or the config's env section)")
    if env_doc["env_id"] not in REGISTRY:
        raise ConfigurationError(f"unknown env_id {env_doc['env_id']!r}; known: {sorted(REGISTRY)}")
    try:
        return EnvConfig.from_dict(env_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid env config: {exc}") from exc


def _agent_spec(doc: dict, env_id: str, args) -> AgentSpec:
    agent_doc = dict(doc.get("agent") or {"backbone": default_backbone(env_id)})
    if getattr(args, "backbone", None):
        agent_doc["backbone"] = args.backbone
    try:
        return AgentSpec.from_dict(agent_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid agent config: {exc}") from exc


def _heuristic_config(doc: dict, args):
    cfg = doc.get("heuristic")
    if getattr(args, "heuristic", None):
        cfg = _json_arg(args.heuristic, "heuristic")
    return cfg


def _override(doc: dict, key: str, value):
    if value is not None:
        doc[key] = value


def cmd_train(args) -> int:
    doc = _load_json(args.config)
    env_cfg = _env_config(doc, args)
    spec = _agent_spec(doc, env_cfg.env_id, args)
    _override(doc, "total_steps", args.steps)
    _override(doc, "seed", args.seed)
    if "total_steps" not in doc:
        raise ConfigurationError("total_steps missing (config or --steps)")
    shaping = doc.get("shaping", {})
    if args.shape:
        shaping = {**shaping, "q_shaping": True, "policy_shaping": True}
    seed, total = int(doc.get("seed", 0)), int(doc["total_steps"])
    hooks, algo_id = {}, "vanilla"
    if shaping.get("q_shaping") or shaping.get("policy_shaping"):
        hs = provide(_heuristic_config(doc, args), env_cfg, shaping.get("heuristic_seed", 0))
        at = int(shaping.get("at_step", PopulationConfig.initial_explore_steps))
        hooks[at] = shaping_hook(hs, bool(shaping.get("q_shaping")), bool(shaping.get("policy_shaping")))
        algo_id = "shaped"
    env = make_env(env_cfg)
    trainer = Trainer(make_agent(spec, env, seed), env_cfg, seed, algo_id)
    trainer.advance(total, hooks)
    curves = {algo_id: [trainer.curve]}
    summary = summarize(env_cfg.env_id, curves, [algo_id])
    emit(curves, summary, args.out, figures=not args.no_figures)
    (Path(args.out) / "events.json").write_text(json.dumps(trainer.events, indent=2) + "\n")
    print(format_table(summary.to_dict()))
    return EXIT_OK


def cmd_population(args) -> int:
    doc = _load_json(args.config)
    env_cfg = _env_config(doc, args)
    spec = _agent_spec(doc, env_cfg.env_id, args)
    pop_doc = dict(doc.get("population", {}))
    _override(pop_doc, "total_steps", args.steps)
    _override(pop_doc, "base_seed", args.seed)
    _override(pop_doc, "num_agents", args.num_agents)
    _override(pop_doc, "keep_count", args.keep)
    try:
        pop = PopulationConfig.from_dict(pop_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid population config: {exc}") from exc
    hcfg = _heuristic_config(doc, args)
    if pop.shaping and hcfg is None:
        raise ConfigurationError("shaping is enabled but no heuristic provider is configured")

    def provider():
        return provide(hcfg, env_cfg)

    report = run_population(pop, env_cfg, spec, provider, workers=args.jobs)
    out = Path(args.out)
    curve = report.retained_curve
    curves = {"population": [curve]}
    emit(curves, summarize(env_cfg.env_id, curves, ["population"]), out,
         figures=not args.no_figures)
    agents_dir = out / "agents"
    agents_dir.mkdir(exist_ok=True)
    for i, c in enumerate(report.curves):
        write_csv(c, agents_dir / f"agent{i}.csv")
    (out / "population.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"retained agents {report.retained}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    doc = _load_json(args.config)
    env_cfg = _env_config(doc, args)
    env = make_env(env_cfg)
    if not isinstance(env, MdpEnv):
        raise ConfigurationError(f"{env_cfg.env_id} is not a tabular environment")
    q, iters = value_iteration(env.mdp, tol=args.tol)
    out = {"env": env_cfg.to_dict(), "iterations": iters, "q": q.tolist(),
           "v": q.max(axis=1).tolist(), "policy": np.argmax(greedy_policy(q), axis=1).tolist()}
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_heuristic(args) -> int:
    doc = _load_json(args.config)
    env_cfg = _env_config(doc, args)
    env = make_env(env_cfg)
    if args.action == "fetch":
        cfg = _heuristic_config(doc, args)
        if cfg is None:
            raise ConfigurationError("no heuristic provider configured (config or --heuristic)")
        raw = fetch_raw(cfg, env)
        _write_or_print(raw, args.out)
        return EXIT_OK
    if args.input is None:
        raise ConfigurationError(f"heuristic {args.action} needs --input")
    src = Path(args.input)
    if not src.is_file():
        raise ConfigurationError(f"input file not found: {src}")
    raw = src.read_text(encoding="utf-8")
    if args.action == "validate":
        _, report = validate_response(raw, env)
        _write_or_print(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
        return EXIT_OK if report.passed else EXIT_PROVIDER
    try:
        rs = RuleSet.from_json(raw)
    except (json.JSONDecodeError, RuleValidationError) as exc:
        raise ConfigurationError(f"{src}: {exc}") from exc
    hs = materialize(rs, env, args.seed or 0)
    _write_or_print(json.dumps(hs.to_dict(), indent=1) + "\n", args.out)
    return EXIT_OK


def _write_or_print(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_compare(args) -> int:
    doc = _load_json(args.config)
    if args.env or args.env_params or args.horizon:
        doc["env"] = _env_config(doc, args).to_dict()
    _override(doc, "total_steps", args.steps)
    _override(doc, "seeds", args.seeds)
    if args.heuristic:
        doc["heuristic"] = _json_arg(args.heuristic, "heuristic")
    exp = ExperimentConfig.from_dict(doc)
    result = run_comparison(exp, jobs=args.jobs)
    emit(result.curves, result.summary, args.out, figures=not args.no_figures)
    print(format_table(result.summary.to_dict()))
    return EXIT_OK


def cmd_plot(args) -> int:
    curves = {}
    for path in args.csv:
        p = Path(path)
        if not p.is_file():
            raise ConfigurationError(f"CSV not found: {p}")
        try:
            c = read_csv(p, algo_id=p.stem)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        curves.setdefault(p.stem, []).append(c)
    plot_curves(curves, args.out, args.title or "")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qshape", description="Q-shaping experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log phase boundaries")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--env", help="environment id")
        p.add_argument("--env-params", help="JSON object merged into the env params")
        p.add_argument("--horizon", type=int)
        if out_required is not None:
            p.add_argument("--out", required=out_required, help="output directory or file")

    p = sub.add_parser("train", help="train one agent")
    common(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--backbone", choices=["tabular", "td3"])
    p.add_argument("--shape", action="store_true", help="apply both shaping phases at step 5000")
    p.add_argument("--heuristic", help="heuristic provider config as JSON")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("population", help="run the population protocol")
    common(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int, help="base seed; agent i uses base_seed + i")
    p.add_argument("--num-agents", type=int)
    p.add_argument("--keep", type=int)
    p.add_argument("--backbone", choices=["tabular", "td3"])
    p.add_argument("--heuristic", help="heuristic provider config as JSON")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_population)

    p = sub.add_parser("oracle", help="dump value iteration for a tabular env")
    common(p, out_required=False)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("heuristic", help="fetch, validate or materialize heuristics")
    p.add_argument("action", choices=["fetch", "validate", "materialize"])
    common(p, out_required=False)
    p.add_argument("--heuristic", help="provider config as JSON (fetch)")
    p.add_argument("--input", help="raw answer (validate) or rule set JSON (materialize)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_heuristic)

    p = sub.add_parser("compare", help="run every arm on every seed and summarize")
    common(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--heuristic", help="heuristic provider config as JSON")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="render CSV learning curves to SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except Exception as exc:  # any other failure is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
