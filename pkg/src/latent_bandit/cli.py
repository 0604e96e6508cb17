"""Command-line entry points: run, theory, replay, report.

Exit codes: 0 on success, 1 for configuration problems, 2 for runtime
failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .env import RewardMatrix, make_transition_matrix
from .harness import (
    ConfigError,
    config_from_dict,
    emit_results,
    replay_episode,
    resolve_workers,
    run_sweep,
)
from .rng import substream_seed
from .theory import (
    ProbingBoundInputs,
    regret_rate_bound,
    simulate_idealized_probing,
)


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None


def _cmd_run(args) -> int:
    config = config_from_dict(_load_json(args.config), preset=args.preset)
    workers = resolve_workers(args.workers)
    result = run_sweep(config, workers=workers, keep_traces=args.traces)
    paths = emit_results(result, args.out, traces=args.traces)
    for path in paths:
        print(path)
    if result.errors:
        print(f"{len(result.errors)} episode(s) failed; affected cells marked incomplete",
              file=sys.stderr)
        for line in result.errors[:20]:
            print(f"  {line}", file=sys.stderr)
        return 2
    return 0


_THEORY_DEFAULTS = {
    "taus": list(range(2, 51)),
    "qs": [0.01, 0.05],
    "eps_fps": [0.0, 0.1],
    "num_seeds": 64,
    "horizon": 20000,
    "delta_probe": 0.5,
    "root_seed": 20260810,
    "means": [[1.0, 0.0], [0.0, 1.0]],
}


def _cmd_theory(args) -> int:
    raw = _load_json(args.config) if args.config else {}
    unknown = set(raw) - set(_THEORY_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown theory config field(s) {sorted(unknown)}")
    cfg = dict(_THEORY_DEFAULTS)
    cfg.update(raw)
    rewards = RewardMatrix(np.asarray(cfg["means"], dtype=float))
    delta_max = rewards.max_gap
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "theory.csv"
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "q", "eps_fp", "bound", "measured",
                         "probe_cost", "staleness", "misclass", "stderr"])
        for q in cfg["qs"]:
            transitions = make_transition_matrix(2, 1.0 - q)
            for eps in cfg["eps_fps"]:
                for tau in cfg["taus"]:
                    rates = []
                    probe = stale = mis = 0.0
                    for seed_index in range(cfg["num_seeds"]):
                        sim = simulate_idealized_probing(
                            rewards, transitions, 0.0, tau, cfg["horizon"],
                            seed=substream_seed(cfg["root_seed"], "theory", seed_index),
                            delta_probe=cfg["delta_probe"], eps_fp=eps,
                        )
                        rates.append(sim.regret_rate)
                        probe += sim.probe_cost_rate
                        stale += sim.staleness_rate
                        mis += sim.misclass_rate
                    n = cfg["num_seeds"]
                    rates = np.array(rates)
                    bound = regret_rate_bound(ProbingBoundInputs(
                        cfg["delta_probe"], delta_max, q, tau, eps, cfg["horizon"],
                    ))
                    stderr = float(rates.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
                    writer.writerow([
                        tau, q, eps, repr(bound), repr(float(rates.mean())),
                        repr(probe / n), repr(stale / n), repr(mis / n), repr(stderr),
                    ])
    print(out_path)
    return 0


def _cmd_replay(args) -> int:
    manifest = _load_json(args.manifest)
    record = replay_episode(manifest, args.episode)
    payload = json.dumps(record.to_dict(), sort_keys=True)
    if args.out:
        Path(args.out).write_text(payload + "\n")
        print(args.out)
    else:
        print(payload)
    return 0


def _cmd_report(args) -> int:
    path = Path(args.indir) / "summary.csv"
    if not path.exists():
        raise ConfigError(f"no summary.csv under {args.indir}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    formatted = [header] + [
        [cell if i < 2 else (f"{float(cell):.2f}" if cell else "-")
         for i, cell in enumerate(row)]
        for row in body
    ]
    widths = [max(len(row[i]) for row in formatted) for i in range(len(header))]
    for row in formatted:
        print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latent-bandit",
                                     description="Latent-state bandit benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a sweep and write result files")
    p_run.add_argument("--config", required=True, help="sweep config JSON")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--workers", type=int, default=None,
                       help="parallel workers (env LATENT_BANDIT_WORKERS overrides)")
    p_run.add_argument("--preset", choices=["desk", "paper"], default=None)
    p_run.add_argument("--traces", action="store_true", help="also write trace.jsonl")
    p_run.set_defaults(func=_cmd_run)

    p_th = sub.add_parser("theory", help="probing-interval bound validation CSV")
    p_th.add_argument("--config", default=None, help="theory config JSON (optional)")
    p_th.add_argument("--out", required=True, help="output directory")
    p_th.set_defaults(func=_cmd_theory)

    p_rp = sub.add_parser("replay", help="re-run one episode from a manifest")
    p_rp.add_argument("--manifest", required=True)
    p_rp.add_argument("--episode", required=True,
                      help="id of the form cell:instance:run:algorithm")
    p_rp.add_argument("--out", default=None, help="write the record JSON here")
    p_rp.set_defaults(func=_cmd_replay)

    p_rep = sub.add_parser("report", help="print the summary table")
    p_rep.add_argument("--in", dest="indir", required=True, help="results directory")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
