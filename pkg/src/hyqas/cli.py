"""Command-line surface: training runs, frozen-policy evaluation, ablations,
the initialization-sensitivity study, KS comparison, and report rendering.

All commands are reproducible: rerunning with the same seed and config gives
byte-identical logs, CSVs, checkpoints and plots (wall-clock progress goes to
stderr only, never into output files). ``HYQAS_THREADS`` caps the worker pool
for independent runs without affecting results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .circuit import parse_circuit, serialize_circuit
from .environment import CurriculumConfig, EnvConfig
from .experiments import (
    ABLATION_VARIANTS,
    INIT_STRATEGIES,
    ks_two_sample,
    parallel_map,
    read_csv,
    read_csv_column,
    run_ablation_variant,
    run_bsuite,
    run_init_sensitivity,
    svg_box_plot,
    svg_histogram_pair,
    write_csv,
)
from .environment import sample_episode_length
from .hamiltonian import load_hamiltonian_file, parse_hamiltonian, serialize_hamiltonian
from .optimizer import OptimizerConfig
from .policy import HybridPolicy, PolicyConfig, load_checkpoint, save_checkpoint
from .training import TrainConfig, evaluate_policy, rollout_circuit, train

EVAL_COLUMNS = ("seed", "rollout", "error", "params", "depth", "gates",
                "optimizer_evals", "energy")


def _dataclass_from(cls, doc: dict, section: str):
    valid = set(cls.__dataclass_fields__)
    unknown = set(doc) - valid
    if unknown:
        raise SystemExit(f"config section '{section}' has unknown keys: "
                         f"{sorted(unknown)}; valid: {sorted(valid)}")
    return cls(**doc)


def load_config(path):
    """JSON config with optional sections train/env/policy/curriculum/optimizer."""
    doc = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    known = {"train", "env", "policy", "curriculum", "optimizer"}
    unknown = set(doc) - known
    if unknown:
        raise SystemExit(f"unknown config sections {sorted(unknown)};"
                         f" expected subset of {sorted(known)}")
    return doc


def build_configs(doc, hamiltonian, seed=None, episodes=None):
    opt_doc = doc.get("optimizer", {})
    optimizer = _dataclass_from(OptimizerConfig, opt_doc, "optimizer")
    env_doc = dict(doc.get("env", {}))
    env_doc["optimizer"] = optimizer
    env_cfg = _dataclass_from(EnvConfig, env_doc, "env")
    train_doc = dict(doc.get("train", {}))
    if seed is not None:
        train_doc["seed"] = seed
    if episodes is not None:
        train_doc["episodes_total"] = episodes
    train_cfg = _dataclass_from(TrainConfig, train_doc, "train")
    policy_doc = dict(doc.get("policy", {}))
    policy_doc.setdefault("n_qubits", hamiltonian.n_qubits)
    policy_doc.setdefault("n_step", env_cfg.n_step)
    if "hidden" in policy_doc:
        policy_doc["hidden"] = tuple(policy_doc["hidden"])
    policy_cfg = _dataclass_from(PolicyConfig, policy_doc, "policy")
    curriculum_cfg = _dataclass_from(CurriculumConfig,
                                     doc.get("curriculum", {}), "curriculum")
    return train_cfg, env_cfg, policy_cfg, curriculum_cfg


def _write_train_outputs(out_dir, result, train_cfg, env_cfg, hamiltonian):
    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, "train_log.jsonl")
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        for row in result.log_rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    extra = {
        "hamiltonian": json.loads(serialize_hamiltonian(hamiltonian)),
        "env": {
            "n_step": env_cfg.n_step,
            "halt_p": env_cfg.halt_p,
            "optimize_every_step": env_cfg.optimize_every_step,
            "use_external_optimizer": env_cfg.use_external_optimizer,
        },
        "seed": train_cfg.seed,
        "episodes": train_cfg.episodes_total,
        "best_error": result.best_error,
        "best_episode": result.best_episode,
    }
    save_checkpoint(os.path.join(out_dir, "final.ckpt"), result.final_params,
                    result.policy_cfg, extra=extra)
    save_checkpoint(os.path.join(out_dir, "best.ckpt"), result.best_params,
                    result.policy_cfg, extra=extra)
    summary = {
        "seed": train_cfg.seed,
        "episodes": train_cfg.episodes_total,
        "best_error": result.best_error,
        "best_episode": result.best_episode,
        "final_tau": result.curriculum.tau,
        "final_xi": result.curriculum.xi,
        "aborted": result.aborted,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    return summary


def cmd_train(args) -> int:
    hamiltonian = load_hamiltonian_file(args.hamiltonian)
    doc = load_config(args.config)
    train_cfg, env_cfg, policy_cfg, curriculum_cfg = build_configs(
        doc, hamiltonian, seed=args.seed, episodes=args.episodes)

    started = time.time()
    last_print = [started]

    def progress(row):
        if not args.quiet and time.time() - last_print[0] > 5.0:
            last_print[0] = time.time()
            print(f"episode {row['episode']}: error={row['error']:.3e} "
                  f"xi={row['xi']:.6f}", file=sys.stderr)

    result = train(train_cfg, hamiltonian, env_cfg, policy_cfg, curriculum_cfg,
                   checkpoint_dir=None, progress=progress)
    summary = _write_train_outputs(args.out, result, train_cfg, env_cfg,
                                   hamiltonian)
    if not args.quiet:
        print(f"trained {train_cfg.episodes_total} episodes in "
              f"{time.time() - started:.1f}s", file=sys.stderr)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _hamiltonian_from_checkpoint(extra):
    return parse_hamiltonian(json.dumps(extra["hamiltonian"]))


def cmd_eval(args) -> int:
    params, policy_cfg, extra = load_checkpoint(args.checkpoint)
    hamiltonian = _hamiltonian_from_checkpoint(extra)
    env_doc = extra["env"]
    env_cfg = EnvConfig(n_step=env_doc["n_step"], halt_p=env_doc["halt_p"])
    records = evaluate_policy(
        params, policy_cfg, hamiltonian, mode=args.init_mode,
        n_rollouts=args.rollouts,
        opt_cfg=OptimizerConfig(max_evals=args.opt_evals),
        env_cfg=env_cfg, seed=args.seed, greedy=args.greedy,
        map_fn=parallel_map)
    os.makedirs(args.out, exist_ok=True)
    rows = [{"seed": args.seed, "rollout": r.rollout, "error": r.error,
             "params": r.params, "depth": r.depth, "gates": r.gates,
             "optimizer_evals": r.optimizer_evals, "energy": r.energy}
            for r in records]
    path = os.path.join(args.out, f"eval_{args.init_mode}.csv")
    write_csv(path, rows, EVAL_COLUMNS)

    # rebuild the best rollout's circuit deterministically and save it as the
    # natural input for `init-study`
    best = min(records, key=lambda r: r.error)
    rng = np.random.default_rng([args.seed, 2, best.rollout])
    cap = sample_episode_length(env_cfg.n_step, env_cfg.halt_p, rng)
    circuit = rollout_circuit(HybridPolicy(policy_cfg), params, env_cfg.n_step,
                              cap, rng, greedy=args.greedy)
    circuit_path = os.path.join(args.out, "best_circuit.json")
    with open(circuit_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_circuit(circuit))

    errors = np.array([r.error for r in records])
    print(json.dumps({
        "mode": args.init_mode, "rollouts": len(records),
        "mean_error": float(errors.mean()), "min_error": float(errors.min()),
        "mean_optimizer_evals": float(np.mean([r.optimizer_evals
                                               for r in records])),
        "csv": path, "best_circuit": circuit_path,
    }, sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    hamiltonian = load_hamiltonian_file(args.hamiltonian)
    doc = load_config(args.config)
    train_cfg, env_cfg, policy_cfg, curriculum_cfg = build_configs(
        doc, hamiltonian, seed=args.seed, episodes=args.episodes)
    os.makedirs(args.out, exist_ok=True)
    eval_opt = OptimizerConfig(max_evals=args.opt_evals)
    if args.variant == "bsuite":
        rows = run_bsuite(hamiltonian, train_cfg, env_cfg, policy_cfg,
                          curriculum_cfg, eval_rollouts=args.rollouts,
                          eval_opt=eval_opt)
        path = os.path.join(args.out, "bsuite.csv")
        write_csv(path, rows, ("experiment", "init", "hybrid", "error",
                               "er_vs_b3_pct"))
    else:
        row = run_ablation_variant(args.variant, hamiltonian, train_cfg,
                                   env_cfg, policy_cfg, curriculum_cfg,
                                   eval_rollouts=args.rollouts,
                                   eval_opt=eval_opt)
        rows = [row]
        path = os.path.join(args.out, f"ablation_{args.variant}.csv")
        write_csv(path, rows, ("variant", "error", "params", "depth", "gates",
                               "energy", "train_best_error"))
    print(json.dumps({"rows": rows, "csv": path}, sort_keys=True))
    return 0


def cmd_init_study(args) -> int:
    with open(args.circuit, encoding="utf-8") as fh:
        circuit = parse_circuit(fh.read())
    hamiltonian = load_hamiltonian_file(args.hamiltonian)
    result = run_init_sensitivity(
        circuit, hamiltonian, runs=args.runs, sigma=args.sigma,
        seed=args.seed, opt_cfg=OptimizerConfig(max_evals=args.opt_evals))
    os.makedirs(args.out, exist_ok=True)
    records_path = os.path.join(args.out, "init_study.csv")
    write_csv(records_path,
              [{"strategy": s, "run": r, "final_energy": e}
               for s, r, e in result.records],
              ("strategy", "run", "final_energy"))
    summary_rows = [{"strategy": s, "mean": st.mean, "std": st.std,
                     "min": st.min, "max": st.max, "n": st.n}
                    for s, st in result.stats.items()]
    summary_path = os.path.join(args.out, "init_summary.csv")
    write_csv(summary_path, summary_rows,
              ("strategy", "mean", "std", "min", "max", "n"))
    print(json.dumps({
        "degenerate": result.degenerate,
        "stats": {s: vars(st) for s, st in result.stats.items()},
        "records_csv": records_path, "summary_csv": summary_path,
    }, sort_keys=True))
    return 0


def cmd_ks_compare(args) -> int:
    a = read_csv_column(args.a, args.column)
    b = read_csv_column(args.b, args.column)
    d, p = ks_two_sample(a, b)
    out = {"D": d, "p_value": p, "n_a": int(a.size), "n_b": int(b.size),
           "column": args.column}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "ks.csv")
        write_csv(path, [out], ("D", "p_value", "n_a", "n_b", "column"))
        out["csv"] = path
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    produced = []
    in_dir = args.in_dir
    warm_path = os.path.join(in_dir, "eval_warm.csv")
    zero_path = os.path.join(in_dir, "eval_zero.csv")
    study_path = os.path.join(in_dir, "init_study.csv")
    log_path = os.path.join(in_dir, "train_log.jsonl")

    if args.format == "csv":
        if os.path.exists(warm_path) or os.path.exists(zero_path):
            rows = []
            for mode, path in (("warm", warm_path), ("zero", zero_path)):
                if not os.path.exists(path):
                    continue
                errors = read_csv_column(path, "error")
                evals = read_csv_column(path, "optimizer_evals")
                rows.append({"mode": mode, "n": errors.size,
                             "mean_error": float(errors.mean()),
                             "std_error": float(errors.std()),
                             "min_error": float(errors.min()),
                             "max_error": float(errors.max()),
                             "mean_optimizer_evals": float(evals.mean())})
            path = os.path.join(in_dir, "report_eval_summary.csv")
            write_csv(path, rows, ("mode", "n", "mean_error", "std_error",
                                   "min_error", "max_error",
                                   "mean_optimizer_evals"))
            produced.append(path)
        if os.path.exists(study_path):
            columns, raw = read_csv(study_path)
            by_strategy = {}
            s_idx = columns.index("strategy")
            e_idx = columns.index("final_energy")
            for row in raw:
                by_strategy.setdefault(row[s_idx], []).append(float(row[e_idx]))
            rows = []
            for strategy in INIT_STRATEGIES:
                if strategy not in by_strategy:
                    continue
                values = np.array(by_strategy[strategy])
                rows.append({"strategy": strategy, "mean": float(values.mean()),
                             "std": float(values.std()),
                             "min": float(values.min()),
                             "max": float(values.max()), "n": values.size})
            path = os.path.join(in_dir, "report_init_summary.csv")
            write_csv(path, rows, ("strategy", "mean", "std", "min", "max", "n"))
            produced.append(path)
        if os.path.exists(log_path):
            with open(log_path, encoding="utf-8") as fh:
                log_rows = [json.loads(line) for line in fh if line.strip()]
            best = min(log_rows, key=lambda r: r["error"])
            rows = [{"episodes": len(log_rows), "best_error": best["error"],
                     "best_episode": best["episode"],
                     "best_params": best["params"], "best_depth": best["depth"],
                     "best_gates": best["gates"],
                     "final_xi": log_rows[-1]["xi"],
                     "final_tau": log_rows[-1]["tau"]}]
            path = os.path.join(in_dir, "report_train_summary.csv")
            write_csv(path, rows, ("episodes", "best_error", "best_episode",
                                   "best_params", "best_depth", "best_gates",
                                   "final_xi", "final_tau"))
            produced.append(path)
    else:  # svg
        if os.path.exists(warm_path) and os.path.exists(zero_path):
            warm = read_csv_column(warm_path, "energy")
            zero = read_csv_column(zero_path, "energy")
            ks = ks_two_sample(warm, zero)
            path = os.path.join(in_dir, "report_energy_hist.svg")
            svg_histogram_pair(warm, zero, "warm-up init", "zero init", path,
                               ks=ks, title="final energies by initialization")
            produced.append(path)
        if os.path.exists(study_path):
            columns, raw = read_csv(study_path)
            s_idx = columns.index("strategy")
            e_idx = columns.index("final_energy")
            groups = {}
            for strategy in INIT_STRATEGIES:
                values = [float(r[e_idx]) for r in raw if r[s_idx] == strategy]
                if values:
                    groups[strategy] = values
            path = os.path.join(in_dir, "report_init_box.svg")
            svg_box_plot(groups, path, title="optimized energy by init strategy")
            produced.append(path)

    print(json.dumps({"produced": produced}, sort_keys=True))
    return 0 if produced else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyqas",
        description="hybrid-action RL for quantum architecture search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy on a Hamiltonian")
    p.add_argument("--hamiltonian", required=True,
                   help="path to a Hamiltonian JSON file, or a bundled name")
    p.add_argument("--config", default=None, help="JSON config overrides")
    p.add_argument("--seed", type=int, default=2025)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--init-mode", choices=("warm", "zero"), default="warm")
    p.add_argument("--rollouts", type=int, default=100)
    p.add_argument("--seed", type=int, default=2025)
    p.add_argument("--opt-evals", type=int, default=1000)
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate a reduced variant")
    p.add_argument("--variant", required=True,
                   choices=ABLATION_VARIANTS + ("bsuite",))
    p.add_argument("--hamiltonian", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=2025)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--rollouts", type=int, default=50)
    p.add_argument("--opt-evals", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("init-study",
                       help="initialization sensitivity of a frozen circuit")
    p.add_argument("--circuit", required=True, help="serialized circuit JSON")
    p.add_argument("--hamiltonian", required=True)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--sigma", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=2025)
    p.add_argument("--opt-evals", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_init_study)

    p = sub.add_parser("ks-compare", help="two-sample KS test on CSV columns")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--column", default="energy")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_ks_compare)

    p = sub.add_parser("report", help="render tables and plots from a run dir")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--format", choices=("csv", "svg"), required=True)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
