"""Command-line interface: train / evaluate / capacity / report / serve."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .harness import ExperimentConfig, parse_config


def _load_config(args) -> ExperimentConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = (args.seed,)
    if getattr(args, "noise", None) is not None:
        overrides["noise_level"] = args.noise
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if args.config:
        return parse_config(args.config, overrides)
    return ExperimentConfig(**overrides)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = {}
    for seed in cfg.seeds:
        record, agent = harness.train_one_seed(cfg, seed)
        records[seed] = record
        theta = agent.theta
        harness.save_params(
            out / f"{cfg.env}_{cfg.agent}_seed{seed}.params",
            agent.layout,
            theta,
            metadata={"agent": cfg.agent, "env": cfg.env, "width": cfg.width, "seed": seed},
        )
        ets = record.episodes_to_success
        print(f"seed {seed}: mean reward {np.mean(record.rewards):.3f}, "
              f"episodes_to_success {ets if ets is not None else 'absent'}"
              + (" [FAILED: divergence]" if record.failed else ""))
    harness.emit_results(records, "csv", out / f"{cfg.env}_{cfg.agent}_rewards.csv")
    harness.emit_results(records, args.format, out / f"{cfg.env}_{cfg.agent}_summary.{args.format}",
                         episodes_cap=cfg.episodes)
    print(f"results written to {out}")
    return 0


def cmd_evaluate(args) -> int:
    header, theta = harness.load_params(args.params)
    cfg_kwargs = {"env": header.get("env", "quantum"), "agent": header.get("agent", "qppg")}
    if "width" in header:
        cfg_kwargs["width"] = header["width"]
    cfg = dataclasses.replace(_load_config(args), **cfg_kwargs)
    env = harness.make_env(cfg, rng_seed=0)
    agent = harness.make_agent(cfg, env, np.random.default_rng(0))
    if theta.shape[0] != agent.theta.shape[0]:
        raise SystemExit(f"parameter file dimension {theta.shape[0]} does not match agent ({agent.theta.shape[0]})")
    agent.theta = theta
    if cfg.agent == "qdqn":
        agent.target_theta = theta.copy()
    noise = args.noise if args.noise is not None else cfg.noise_level
    fraction, mean_return = harness.evaluate_policy(cfg, agent, noise, episodes=args.episodes)
    print(json.dumps({"noise_level": noise, "episodes": args.episodes,
                      "success_fraction": fraction, "mean_return": mean_return}, indent=2))
    return 0


def cmd_capacity(args) -> int:
    cfg = _load_config(args)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    mean, stderr = harness.ergodic_capacity(
        n_antennas=cfg.n_antennas,
        p_max=cfg.p_max,
        sigma2_range=(cfg.sigma2_low, cfg.sigma2_high),
        samples=args.samples,
        rng=rng,
    )
    ceiling = harness.throughput_ceiling(
        n_antennas=cfg.n_antennas,
        p_max=cfg.p_max,
        sigma2_range=(cfg.sigma2_low, cfg.sigma2_high),
        pilot_snr_db=cfg.pilot_snr_db,
        rng=np.random.default_rng(args.seed if args.seed is not None else 0),
    )
    print(json.dumps({
        "ergodic_capacity_bits": mean,
        "stderr": stderr,
        "samples": args.samples,
        "throughput_ceiling_bits": ceiling,
    }, indent=2))
    return 0


def cmd_report(args) -> int:
    summary = {}
    for path in args.runs:
        p = Path(path)
        for f in sorted(p.glob("*_summary.json")):
            summary[f.stem.replace("_summary", "")] = json.loads(f.read_text())
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"report written to {args.out}")
    else:
        print(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qppg", description="Quantum-preconditioned policy gradient experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, noise=True):
        p.add_argument("--config", type=str, default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="single-seed override")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="json")
        if noise:
            p.add_argument("--noise", type=float, default=None, help="noise level override")

    p_train = sub.add_parser("train", help="run one training config over its seeds")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="robustness evaluation of saved parameters")
    common(p_eval)
    p_eval.add_argument("--params", type=str, required=True)
    p_eval.add_argument("--episodes", type=int, default=100)
    p_eval.set_defaults(func=cmd_evaluate)

    p_cap = sub.add_parser("capacity", help="Monte Carlo ergodic-capacity estimate")
    common(p_cap, noise=False)
    p_cap.add_argument("--samples", type=int, default=1_000_000)
    p_cap.set_defaults(func=cmd_capacity)

    p_rep = sub.add_parser("report", help="aggregate summaries from run directories")
    p_rep.add_argument("runs", nargs="+", help="run directories")
    p_rep.add_argument("--out", type=str, default=None)
    p_rep.add_argument("--format", choices=("csv", "json"), default="json")
    p_rep.set_defaults(func=cmd_report)

    p_srv = sub.add_parser("serve", help="start the HTTP service")
    p_srv.add_argument("--host", type=str, default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
