"""Command-line entry points: train / eval / rollout / inspect / selftest.

All randomness flows from --seed through named substreams. Exit codes:
0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, config_hash, parse_config, serialize_config
from .game import ContractViolation

log = logging.getLogger("nte")

VARIANT_TOKEN = re.compile(r"^(learner|expert)_k(\d+)(?:@(\d+))?$|^(random)$")


def _load_config(args) -> RunConfig:
    doc = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
    if getattr(args, "profile", None):
        doc["profile"] = args.profile
    return parse_config(doc)


def _parse_variant_token(token: str, ckpt_root):
    from .arena import variant_from_json
    m = VARIANT_TOKEN.match(token)
    if not m:
        raise ConfigError(
            f"bad variant {token!r}: expected random, learner_k<N> or expert_k<N>"
            " with an optional @<budget> suffix")
    if m.group(4):
        return variant_from_json({"kind": "random", "k": 0, "name": "random"}, None)
    doc = {"kind": m.group(1), "k": int(m.group(2)), "name": token.split("@")[0]}
    if m.group(3):
        doc["budget"] = int(m.group(3))
    return variant_from_json(doc, None, ckpt_root)


def cmd_train(args) -> int:
    from .selfimprove import meta_learn
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps({**serialize_config(cfg), "config_hash": config_hash(cfg)},
                   indent=2, sort_keys=True) + "\n")
    lineage = meta_learn(cfg, out, args.seed, args.workers)
    n = len(lineage["iterations"])
    print(f"trained {n} iteration(s); lineage at {out / 'lineage.json'}")
    return 0


def cmd_eval(args) -> int:
    from .arena import (export_plot_data, run_tournament, variant_from_json,
                        write_plot_csv, write_results_csv, write_results_jsonl)
    cfg = _load_config(args)
    cfg_hash = config_hash(cfg)
    doc = json.loads(Path(args.variants).read_text())
    ckpt_root = args.ckpt_root or doc.get("checkpoint_root")
    attackers = [variant_from_json(v, cfg.search, ckpt_root)
                 for v in doc.get("attackers", [])]
    defenders = [variant_from_json(v, cfg.search, ckpt_root)
                 for v in doc.get("defenders", [])]
    if not attackers or not defenders:
        raise ConfigError("variants file needs nonempty 'attackers' and 'defenders'")
    results = run_tournament(attackers, defenders, args.games, cfg.game,
                             cfg.search, args.seed, args.workers)
    out_csv = Path(args.out)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    write_results_csv(results, out_csv, cfg_hash)
    rows = export_plot_data(results, attackers, defenders)
    plot_csv = out_csv.with_name(out_csv.stem + "_plot.csv")
    write_plot_csv(rows, plot_csv, cfg_hash)
    write_results_jsonl(results, out_csv.with_suffix(".jsonl"), cfg_hash)
    outputs = [str(out_csv), str(plot_csv), str(out_csv.with_suffix('.jsonl'))]
    if not args.no_figures:
        from .plots import render_report
        figures = render_report(rows, out_csv.parent / "figures")
        outputs += [str(p) for p in figures]
    print(f"{len(results)} games -> " + ", ".join(outputs))
    return 0


def cmd_rollout(args) -> int:
    from .arena import play_match
    from .game import StepEvents
    from .io import TrajectoryWriter
    cfg = _load_config(args)
    cfg_hash = config_hash(cfg)
    attacker = _parse_variant_token(args.attacker, args.ckpt_root)
    defender = _parse_variant_token(args.defender, args.ckpt_root)
    from .selfimprove import shared_initial_state
    initial = shared_initial_state(cfg.game, ("rollout_init", args.seed), args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with TrajectoryWriter(out, {
            "config_hash": cfg_hash, "seed": args.seed,
            "attacker": attacker.name, "defender": defender.name,
            "spec": serialize_config(cfg)["game"]}) as tw:
        tw.write_step(0, initial, [[0.0] * cfg.game.action_dim] * cfg.game.n_robots,
                      StepEvents())
        t = [0]

        def on_step(state, action, events):
            t[0] += 1
            tw.write_step(t[0], state, action, events)

        result = play_match(attacker, defender, cfg.game, initial, cfg.search,
                            args.seed, args.seed, on_step)
    print(f"{result.attacker} vs {result.defender}: reached {result.n_rg} "
          f"in {result.steps} steps -> {out}")
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.path)
    manifest = json.loads(path.read_text())
    kind = manifest.get("kind", "?")
    print(f"kind: {kind}")
    if kind == "checkpoint":
        from .io import load_checkpoint
        params, m = load_checkpoint(path)
        print(f"role: {m['role']}  team: {m['team']}  iteration: {m['iteration']}")
        print(f"arch: {m['arch']}")
        print(f"param_count: {m['param_count']} (matches architecture)")
        print(f"config_hash: {m['config_hash']}")
    elif kind in ("policy_dataset", "value_dataset"):
        from .io import load_dataset
        samples, m = load_dataset(path)
        print(f"samples: {len(samples)}  team: {m['team']}  iteration: {m['iteration']}")
        print(f"record_layout: {m['record_layout']}")
        print(f"config_hash: {m['config_hash']}")
    elif kind == "lineage":
        for entry in manifest["iterations"]:
            print(f"iteration {entry['k']}: " +
                  ", ".join(sorted(entry["checkpoints"])))
        print(f"config_hash: {manifest['config_hash']}")
    else:
        for key, val in sorted(manifest.items()):
            print(f"{key}: {val}")
    return 0


def cmd_selftest(args) -> int:
    from .selfcheck import run_all
    failures = 0
    for name, ok, detail in run_all():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nte",
        description="Learned-policy-guided tree search for multi-robot reach-avoid games")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run config (overlays the profile preset)")
        p.add_argument("--profile", choices=("paper_defaults", "desk_scale"),
                       help="preset to start from (default desk_scale)")
        p.add_argument("--seed", type=int, default=0, help="root seed for all substreams")
        p.add_argument("--workers", type=int, default=None,
                       help="process count (default NTE_THREADS or all cores)")

    p = sub.add_parser("train", help="run the self-improvement loop")
    common(p)
    p.add_argument("--out", required=True, help="artifact directory")

    p = sub.add_parser("eval", help="tournament between policy variants")
    common(p)
    p.add_argument("--variants", required=True, help="JSON variants file")
    p.add_argument("--games", type=int, default=50, help="paired seeds per pairing")
    p.add_argument("--out", default="results.csv", help="per-match CSV path")
    p.add_argument("--ckpt-root", help="directory holding lineage.json")
    p.add_argument("--no-figures", action="store_true", help="skip PNG report figures")

    p = sub.add_parser("rollout", help="roll one game and log the trajectory")
    common(p)
    p.add_argument("--attacker", default="random",
                   help="random | learner_k<N>[@budget] | expert_k<N>[@budget]")
    p.add_argument("--defender", default="random")
    p.add_argument("--ckpt-root", help="directory holding lineage.json")
    p.add_argument("--out", default="trajectory.jsonl")

    p = sub.add_parser("inspect", help="print a manifest (checkpoint/dataset/lineage)")
    p.add_argument("path")

    p = sub.add_parser("selftest", help="run the invariant fuzz suites")

    return parser


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "rollout": cmd_rollout,
            "inspect": cmd_inspect, "selftest": cmd_selftest}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ContractViolation, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
