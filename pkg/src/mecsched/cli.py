"""Batch entry point: config loading, subcommand dispatch, result emission.

Subcommands:
  value      dump the analytical value model (transition matrix, cost vector,
             empty-state value, expected task cost) as JSON
  simulate   Monte Carlo of one policy at one arrival probability
  sweep      benchmark sweep over arrival probabilities (CSV or JSON)
  validate   run the policy-improvement bound and oracle smoke checks

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .channel import QuantizedChannel, expected_uplink_rate
from .model import EdgeDevice, ReducedState, SystemParams
from .policies import PolicyKind, make_policy
from .sim import (auto_horizon, estimate_value, finite_horizon_oracle,
                  mean_ci95, run_episodes, summarize_policy, sweep_arrival_rate,
                  sweep_csv)
from .valuefn import ValueModel, w_pi

_PARAM_FIELDS = {f.name for f in fields(SystemParams)}


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration: all SystemParams fields plus run controls."""
    params: SystemParams
    seed: int = 12345
    n_episodes: int = 1000
    horizon: int | str = "auto"
    p_grid: tuple[float, ...] = (0.05, 0.1, 0.2, 0.4, 0.7, 1.0)
    policies: tuple[str, ...] = ("baseline", "improved", "alc", "aec")

    def resolved_horizon(self) -> int:
        if self.horizon == "auto":
            return auto_horizon(self.params)
        return int(self.horizon)

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self.params)
        out.update(seed=self.seed, n_episodes=self.n_episodes,
                   horizon=self.horizon, p_grid=list(self.p_grid),
                   policies=list(self.policies))
        return out


class ConfigError(Exception):
    pass


_RUN_FIELDS = {"seed", "n_episodes", "horizon", "p_grid", "policies"}


def load_config(path: str | None) -> RunConfig:
    raw: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(raw) - _PARAM_FIELDS - _RUN_FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    param_kwargs = {k: v for k, v in raw.items() if k in _PARAM_FIELDS}
    try:
        params = SystemParams(**param_kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    run_kwargs = {k: v for k, v in raw.items() if k in _RUN_FIELDS}
    if "p_grid" in run_kwargs:
        run_kwargs["p_grid"] = tuple(float(x) for x in run_kwargs["p_grid"])
    if "policies" in run_kwargs:
        run_kwargs["policies"] = tuple(str(x) for x in run_kwargs["policies"])
    cfg = RunConfig(params=params, **run_kwargs)
    if cfg.horizon != "auto":
        try:
            h = int(cfg.horizon)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"horizon must be an integer or 'auto'") from exc
        if h < 1:
            raise ConfigError("horizon must be >= 1")
        cfg = replace(cfg, horizon=h)
    for name in cfg.policies:
        try:
            PolicyKind(name)
        except ValueError as exc:
            raise ConfigError(f"unknown policy {name!r}") from exc
    for p in cfg.p_grid:
        if not 0.0 < p <= 1.0:
            raise ConfigError(f"p_grid value {p} outside (0, 1]")
    return cfg


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    params = cfg.params
    if getattr(args, "pn", None) is not None:
        if not 0.0 < args.pn <= 1.0:
            raise ConfigError(f"--pn {args.pn} outside (0, 1]")
        params = replace(params, arrival_prob=args.pn)
    updates: dict = {"params": params}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "episodes", None) is not None:
        if args.episodes < 2:
            raise ConfigError("--episodes must be >= 2")
        updates["n_episodes"] = args.episodes
    if getattr(args, "horizon", None) is not None:
        if args.horizon != "auto":
            try:
                h = int(args.horizon)
            except ValueError as exc:
                raise ConfigError("--horizon must be an integer or 'auto'") from exc
            if h < 1:
                raise ConfigError("--horizon must be >= 1")
            updates["horizon"] = h
        else:
            updates["horizon"] = "auto"
    if getattr(args, "policy", None) is not None:
        updates["policies"] = (args.policy,)
    return replace(cfg, **updates)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _json_dump(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_value(cfg: RunConfig, args: argparse.Namespace) -> int:
    vm = ValueModel.build(cfg.params)
    payload = {
        "config": cfg.as_dict(),
        "transition_matrix": vm.transition_matrix.tolist(),
        "cost_vector": vm.cost_vec.tolist(),
        "w_pi_empty": vm.w_pi_empty,
        "expected_task_cost": vm.expected_task_cost,
        "expected_inv_pathloss": vm.expected_inv_pathloss,
        "expected_uplink_rate": vm.expected_rate,
        "segments_per_frame": vm.segments_per_frame,
    }
    _emit(_json_dump(payload), args.out)
    return 0


def cmd_simulate(cfg: RunConfig, args: argparse.Namespace) -> int:
    kind = PolicyKind(cfg.policies[0])
    vm = ValueModel.build(cfg.params)
    policy = make_policy(kind, cfg.params, vm)
    horizon = cfg.resolved_horizon()
    results = run_episodes(policy, ReducedState(()), horizon, cfg.n_episodes,
                           cfg.seed, cfg.params)
    gp_mean, gp_ci = mean_ci95([r.discounted_g_prime for r in results])
    g_mean, _ = mean_ci95([r.discounted_g for r in results])
    stats = summarize_policy(results)
    payload = {
        "config": cfg.as_dict(),
        "policy": kind.value,
        "horizon": horizon,
        "episodes": cfg.n_episodes,
        "discounted_g_prime_mean": gp_mean,
        "discounted_g_prime_ci95": gp_ci,
        "discounted_g_mean": g_mean,
        "w_pi_empty": vm.w_pi_empty,
        "cost_per_completed_mean": stats.cost_mean,
        "cost_per_completed_ci95": stats.cost_ci95,
        "edge_ratio": stats.edge_ratio,
        "edge_ratio_ci95": stats.edge_ratio_ci95,
    }
    if args.dump_episodes:
        payload["episodes_detail"] = [dataclasses.asdict(r) for r in results]
    _emit(_json_dump(payload), args.out)
    return 0


def cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    horizon = cfg.resolved_horizon()
    rows = sweep_arrival_rate(cfg.p_grid, cfg.policies, cfg.n_episodes,
                              horizon, cfg.seed, cfg.params,
                              keep_episodes=args.dump_episodes)
    if args.format == "csv":
        header = "".join(f"# {k}={json.dumps(v)}\n"
                         for k, v in sorted(cfg.as_dict().items()))
        _emit(header + sweep_csv(rows), args.out)
        return 0
    payload = {"config": cfg.as_dict(), "horizon": horizon, "rows": []}
    for row in rows:
        entry = {"arrival_prob": row.arrival_prob, "policies": {}}
        for name, st in row.policies:
            entry["policies"][name] = dataclasses.asdict(st)
        if args.dump_episodes and row.episode_results is not None:
            entry["episodes_detail"] = {
                name: [dataclasses.asdict(r) for r in results]
                for name, results in row.episode_results.items()}
        payload["rows"].append(entry)
    _emit(_json_dump(payload), args.out)
    return 0


def cmd_validate(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Smoke checks of the analytical machinery on the configured model:
    the improved policy must not beat the bounds it is guaranteed to respect,
    and the simulator must agree with the exhaustive oracle."""
    failures = 0
    params = cfg.params
    rng = np.random.default_rng(cfg.seed)
    vm = ValueModel.build(params)
    n_ep = min(cfg.n_episodes, 400)
    horizon = min(cfg.resolved_horizon(), auto_horizon(params, 1e-4))
    baseline = make_policy(PolicyKind.BASELINE, params)
    improved = make_policy(PolicyKind.IMPROVED, params, vm)

    for i in range(args.states):
        n_dev = int(rng.integers(0, 5))
        devices = []
        for j in range(n_dev):
            radius = math.sqrt(params.min_distance_m ** 2 + rng.random()
                               * (params.cell_radius_m ** 2 - params.min_distance_m ** 2))
            rho = params.pathloss_ref_gain * radius ** (-params.pathloss_exponent)
            q = int(rng.integers(1, params.d_max + 1))
            devices.append(EdgeDevice(j + 1, rho, q))
        start = ReducedState(tuple(devices))
        analytic = w_pi(start, vm)
        seeds = np.random.SeedSequence(cfg.seed + 1000 + i).spawn(n_ep)
        imp_mean, imp_ci = estimate_value(improved, start, n_ep, horizon,
                                          None, params, episode_seeds=seeds)
        bas_mean, bas_ci = estimate_value(baseline, start, n_ep, horizon,
                                          None, params, episode_seeds=seeds)
        ok_analytic = imp_mean <= analytic + imp_ci
        ok_mc = imp_mean <= bas_mean + math.hypot(imp_ci, bas_ci)
        failures += (not ok_analytic) + (not ok_mc)
        print(f"bound state {i}: improved={imp_mean:.4f}±{imp_ci:.4f} "
              f"baseline={bas_mean:.4f}±{bas_ci:.4f} analytic={analytic:.4f} "
              f"[{'PASS' if ok_analytic and ok_mc else 'FAIL'}]")

    tiny = SystemParams(arrival_prob=0.4, discount=0.6, d_min=1, d_max=3,
                        rx_power_w=params.noise_power_w,
                        f_min_hz=2.5e8, f_max_hz=2.5e8, L_min=500.0, L_max=500.0)
    quant = QuantizedChannel(tiny, (0.3, 0.8, 1.5, 3.0), (0.3, 0.3, 0.3, 0.1),
                             (1e-10, 1e-11), (0.5, 0.5))
    for name in ("baseline", "alc", "aec"):
        policy = make_policy(name, tiny)
        oracle = finite_horizon_oracle(policy, ReducedState(()), 3, tiny, quant)
        results = run_episodes(policy, ReducedState(()), 3, args.oracle_episodes,
                               cfg.seed + 77, tiny, channel=quant)
        mean, ci = mean_ci95([r.discounted_g_prime for r in results])
        sigma3 = 3.0 * ci / 1.96
        ok = abs(mean - oracle.discounted_g_prime) <= sigma3
        failures += not ok
        print(f"oracle {name}: sim={mean:.5f} exact={oracle.discounted_g_prime:.5f} "
              f"3sigma={sigma3:.5f} [{'PASS' if ok else 'FAIL'}]")

    print("validate:", "PASS" if failures == 0 else f"FAIL ({failures})")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mecsched",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("value", cmd_value), ("simulate", cmd_simulate),
                     ("sweep", cmd_sweep), ("validate", cmd_validate)):
        sp = sub.add_parser(name)
        sp.set_defaults(handler=fn)
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--policy", default=None,
                        choices=[k.value for k in PolicyKind])
        sp.add_argument("--pn", type=float, default=None,
                        help="override arrival probability")
        sp.add_argument("--episodes", type=int, default=None)
        sp.add_argument("--horizon", default=None, help="frames or 'auto'")
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--dump-episodes", action="store_true")
        if name == "validate":
            sp.add_argument("--states", type=int, default=4,
                            help="random initial states for the bound check")
            sp.add_argument("--oracle-episodes", type=int, default=20000)
    return parser


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return args.handler(cfg, args)


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
