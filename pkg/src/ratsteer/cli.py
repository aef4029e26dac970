"""Command-line front end.

Subcommands:

* ``train``   -- train one method (or log the rule-based baseline) and
  write per-episode CSV stats plus a checkpoint.
* ``eval``    -- score a checkpoint on the held-out protocol (zero-shot
  and episodes-to-parity).
* ``compare`` -- the full four-method comparison over a list of seeds.
* ``oracle``  -- recompute the core formulas with the independent
  reference calculators and report agreement.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import oracle
from .config import ExperimentConfig, desk_profile, load_experiment_config
from .env import build_env
from .federation import fedavg, net_spec_for, reptile_update, train_env_seed
from .harness import (
    _EpisodeCsv,
    build_protocol,
    episodes_to_hep,
    evaluate_zero_shot,
    format_summary,
    run_comparison,
    train_method,
)
from .heuristic import run_heuristic_episode
from .mdp import task_spec
from .network import forward, gradients, init_params, load_checkpoint, NetSpec
from .radio import data_rate, path_loss, sinr


def _load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return desk_profile()
    return load_experiment_config(path)


def _cmd_train(args) -> int:
    exp = _load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.method == "heuristic":
        writer = _EpisodeCsv(out / f"episodes_heuristic_seed{args.seed}.csv")
        env = build_env(exp.env, train_env_seed(args.seed, 0))
        total = exp.fml.rounds * exp.fml.episodes_per_round
        for ep in range(total):
            if ep % exp.fml.episodes_per_round == 0:
                env.reset_demands()
            st = run_heuristic_episode(env, task_spec(exp.fml.eval_task))
            writer(ep // exp.fml.episodes_per_round,
                   0, ep % exp.fml.episodes_per_round, st)
        writer.close()
        print(f"logged {total} heuristic episodes to {out}")
        return 0
    train_method(args.method, exp, args.seed, out)
    print(f"trained {args.method}; outputs in {out}")
    return 0


def _cmd_eval(args) -> int:
    exp = _load_config(args.protocol)
    spec, params, _seed = load_checkpoint(args.checkpoint)
    want = net_spec_for(exp.env, exp.dqn)
    if spec != want:
        raise SystemExit(
            f"checkpoint network {spec} does not match the protocol's {want}"
        )
    protocol = build_protocol(exp, args.seed)
    zs = evaluate_zero_shot(params, protocol, exp)
    hep = episodes_to_hep(params, protocol, exp)
    payload = {
        "checkpoint": str(args.checkpoint),
        "protocol_seed": args.seed,
        "hep_reference_packets": protocol.hep_reference,
        "zero_shot_mean_pct": zs.mean,
        "zero_shot_std_pct": zs.std,
        "zero_shot_packets": zs.raw_packets,
        "zero_shot_bytes": zs.raw_bytes,
        "hep_episode": hep.hep_episode,
        "final_packets": hep.final_packets,
        "final_bytes": hep.final_bytes,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_compare(args) -> int:
    exp = _load_config(args.config)
    seeds = [int(s) for s in args.seeds.replace(",", " ").split()]
    report = run_comparison(exp, seeds, Path(args.out))
    print(format_summary(report), end="")
    print(f"reports written to {args.out}")
    return 0


def _check(name: str, got: float, want: float, tol: float, failures: list) -> None:
    rel = abs(got - want) / max(abs(want), 1e-300)
    ok = rel <= tol
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}: got {got!r}, reference {want!r} (rel err {rel:.3e})")
    if not ok:
        failures.append(name)


def _check_max(name: str, value: float, tol: float, failures: list) -> None:
    ok = value <= tol
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}: {value:.3e} (tolerance {tol:g})")
    if not ok:
        failures.append(name)


def _cmd_oracle(_args) -> int:
    """Recompute formula examples against the independent calculators."""
    failures: list[str] = []
    exp = desk_profile()
    lte, nr = exp.env.rats
    rng = np.random.default_rng(12345)

    for label, rat in (("lte", lte), ("nr", nr)):
        for d in (1.0, 50.0, 150.0, 500.0):
            got = data_rate(rat, d)
            want = oracle.ref_data_rate(
                rat.bandwidth_hz, rat.antenna_gain, rat.tx_power_w, rat.fading_h,
                rat.pathloss_c, rat.pathloss_alpha, rat.noise_w,
                rat.interference_w, d, rat.max_range_m,
            )
            _check(f"data_rate[{label}, d={d:g}]", got, want, 1e-12, failures)
    worst = 0.0
    for _ in range(100):
        rat = (lte, nr)[int(rng.integers(2))]
        d = float(rng.uniform(0.1, 1200.0))
        pl = path_loss(rat, d)
        s = sinr(rat, d)
        pl_ref = oracle.ref_path_loss(rat.pathloss_c, rat.pathloss_alpha, d)
        s_ref = oracle.ref_sinr(rat.antenna_gain, rat.tx_power_w, rat.fading_h,
                                rat.pathloss_c, rat.pathloss_alpha, rat.noise_w,
                                rat.interference_w, d)
        worst = max(worst, abs(pl - pl_ref) / pl_ref, abs(s - s_ref) / s_ref)
    _check_max("path_loss/sinr rel err over 100 random samples", worst, 1e-12,
               failures)

    theta = rng.normal(size=64)
    adapted = [rng.normal(size=64) for _ in range(4)]
    got = reptile_update(theta, adapted, 0.37)
    want = np.array(oracle.ref_reptile(theta.tolist(), [a.tolist() for a in adapted], 0.37))
    _check_max("reptile_update abs err vs reference",
               float(np.abs(got - want).max()), 1e-12, failures)

    models = [rng.normal(size=64) for _ in range(5)]
    got = fedavg(models)
    want = np.array(oracle.ref_fedavg([m.tolist() for m in models]))
    _check_max("fedavg abs err vs compensated-sum reference",
               float(np.abs(got - want).max()), 1e-12, failures)

    spec = NetSpec(input_dim=5, hidden=(7,), output_dim=3)
    params = init_params(spec, 99)
    x = rng.normal(size=5)
    got_q = forward(spec, params, x)
    from .network import unflatten
    layers = unflatten(spec, params)
    want_q = oracle.ref_forward(
        [w.tolist() for w, _ in layers], [b.tolist() for _, b in layers], x.tolist()
    )
    _check_max("network forward abs err vs pure-python reference",
               float(np.abs(got_q - np.array(want_q)).max()), 1e-10, failures)

    states = rng.normal(size=(4, 5))
    actions = rng.integers(3, size=4)
    targets = rng.normal(size=4)

    def loss_fn(p):
        q = forward(spec, np.asarray(p), states)
        err = q[np.arange(4), actions] - targets
        return float(np.mean(err ** 2))

    grad, _ = gradients(spec, params, states, actions, targets)
    fd = np.array(oracle.central_difference_gradient(loss_fn, params.tolist()))
    denom = np.maximum(np.abs(fd), 1e-8)
    rel = float((np.abs(grad - fd) / denom).max())
    ok = rel < 1e-4
    print(f"[{'PASS' if ok else 'FAIL'}] analytic gradient vs central differences "
          f"(max rel err {rel:.3e})")
    if not ok:
        failures.append("gradient check")

    if failures:
        print(f"{len(failures)} oracle check(s) failed: {', '.join(failures)}")
        return 1
    print("all oracle checks passed")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ratsteer",
                                 description="multi-RAT traffic-steering simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one method")
    p.add_argument("--method", required=True,
                   choices=["heuristic", "single", "reptile", "fml"])
    p.add_argument("--config", default=None, help="INI config (default: desk profile)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on held-out environments")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--protocol", default=None,
                   help="INI config supplying [env]/[eval] (default: desk profile)")
    p.add_argument("--seed", type=int, default=0, help="protocol seed base")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("compare", help="four-method comparison")
    p.add_argument("--config", default=None)
    p.add_argument("--seeds", required=True, help="comma-separated seed list")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("oracle", help="cross-check formulas with reference calculators")
    p.set_defaults(fn=_cmd_oracle)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
