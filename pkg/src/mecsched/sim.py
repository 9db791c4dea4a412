"""Seeded Monte Carlo episode engine, estimators, sweeps, and a tiny
exhaustive oracle for cross-checking the simulator.

Reproducibility contract: every episode derives its generators from one
`numpy.random.SeedSequence` by spawning, so a run is fully determined by
(config, seed), episodes are independent work items, and results do not
depend on execution order.  Arrival variates are pre-drawn per episode, so
two policies sharing a seed face identical arrival processes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .channel import (AnnulusChannel, QuantizedChannel,
                      expected_inverse_pathloss, expected_uplink_rate)
from .model import (Arrival, ReducedState, SystemParams, SystemState, advance,
                    local_power_w, reduced_stage_cost, stage_cost)
from .policies import PolicyKind, make_policy, successor_reduced
from .valuefn import ValueModel, expected_task_cost

Policy = Callable[[SystemState], "object"]


@dataclass(frozen=True, slots=True)
class EpisodeResult:
    discounted_g: float
    discounted_g_prime: float
    undiscounted_cost: float
    tasks_arrived: int
    tasks_offloaded: int
    tasks_completed: int
    frames_run: int


class _FadingBuffer:
    """Blocked fading draws; amortizes generator overhead in the frame loop."""

    __slots__ = ("channel", "rng", "buf", "pos")

    def __init__(self, channel, rng, block: int = 512):
        self.channel = channel
        self.rng = rng
        self.buf = channel.fading_block(rng, block).tolist()
        self.pos = 0

    def take(self, n: int) -> list[float]:
        if self.pos + n > len(self.buf):
            left = self.buf[self.pos:]
            fresh = self.channel.fading_block(self.rng, max(512, n)).tolist()
            self.buf = left + fresh
            self.pos = 0
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out


def auto_horizon(params: SystemParams, tail: float = 1e-6) -> int:
    """Smallest frame count T with discount^T below `tail`."""
    return max(1, math.ceil(math.log(tail) / math.log(params.discount)))


def run_episode(policy: Policy, initial: SystemState | ReducedState,
                horizon_frames: int, seed, params: SystemParams,
                channel=None) -> EpisodeResult:
    """Simulate decide -> cost -> advance for `horizon_frames` frames.

    A `ReducedState` start gets frame-1 fading and arrival drawn from the
    episode's own streams (the convention the value function is defined
    under); a full `SystemState` is used exactly as given.
    """
    if horizon_frames < 1:
        raise ValueError("horizon_frames must be >= 1")
    ch = channel if channel is not None else AnnulusChannel(params)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    arr_ss, fad_ss = ss.spawn(2)
    stream = ch.presample(np.random.default_rng(arr_ss), horizon_frames + 1)
    fading = _FadingBuffer(ch, np.random.default_rng(fad_ss))

    if isinstance(initial, ReducedState):
        ids = [d.id for d in initial.devices]
        next_id = max(ids) + 1 if ids else 1
        fmap = dict(zip(ids, fading.take(len(ids))))
        arr = stream.get(0, next_id)
        if arr is not None:
            next_id += 1
        state = SystemState(1, initial.devices, fmap, (), arr)
    else:
        state = initial
        all_ids = state.all_ids()
        next_id = max(all_ids) + 1 if all_ids else 1

    g = params.discount
    gamma_t = 1.0
    disc_g = disc_gp = undisc = 0.0
    arrived = offloaded = completed = 0
    for t in range(horizon_frames):
        arr = state.arrival
        action = policy(state)
        if arr is not None:
            arrived += 1
            if action.offload:
                offloaded += 1
        cost = stage_cost(state, action, params)
        undisc += cost
        disc_g += gamma_t * cost
        disc_gp += gamma_t * reduced_stage_cost(state, action, params)
        gamma_t *= g

        nxt = stream.get(t + 1, next_id)
        if nxt is not None:
            next_id += 1
        ids = [d.id for d in state.edge_devices]
        if arr is not None:
            ids.append(arr.id)
        fmap = dict(zip(ids, fading.take(len(ids))))
        before = (len(state.edge_devices) + len(state.local_devices)
                  + (1 if arr is not None else 0))
        state = advance(state, action, fmap, nxt, params)
        completed += before - len(state.edge_devices) - len(state.local_devices)
    return EpisodeResult(disc_g, disc_gp, undisc, arrived, offloaded,
                         completed, horizon_frames)


def run_episodes(policy: Policy, initial, horizon: int, n_episodes: int,
                 seed, params: SystemParams, channel=None,
                 episode_seeds: Sequence[np.random.SeedSequence] | None = None,
                 ) -> list[EpisodeResult]:
    """Independent episodes; pass `episode_seeds` to share arrival draws
    across policies (common random numbers)."""
    if episode_seeds is None:
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        episode_seeds = ss.spawn(n_episodes)
    return [run_episode(policy, initial, horizon, s, params, channel)
            for s in episode_seeds]


def mean_ci95(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and normal-approximation 95% half-width."""
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, math.inf
    return mean, 1.96 * float(arr.std(ddof=1)) / math.sqrt(arr.size)


def estimate_value(policy: Policy, reduced_initial: ReducedState,
                   n_episodes: int, horizon: int, seed, params: SystemParams,
                   channel=None,
                   episode_seeds: Sequence[np.random.SeedSequence] | None = None,
                   ) -> tuple[float, float]:
    """Monte Carlo mean and 95% CI half-width of the discounted reduced cost
    from a reduced initial state."""
    if n_episodes < 2:
        raise ValueError("n_episodes must be >= 2")
    results = run_episodes(policy, reduced_initial, horizon, n_episodes, seed,
                           params, channel, episode_seeds)
    return mean_ci95([r.discounted_g_prime for r in results])


@dataclass(frozen=True)
class PolicyStats:
    """Per-policy summary at one sweep grid point.  Means are None when no
    episode produced the corresponding ratio (e.g. zero completions)."""
    cost_mean: Optional[float]
    cost_ci95: Optional[float]
    edge_ratio: Optional[float]
    edge_ratio_ci95: Optional[float]
    episodes: int


@dataclass(frozen=True)
class SweepRow:
    arrival_prob: float
    policies: tuple[tuple[str, PolicyStats], ...]
    episode_results: Optional[dict] = None

    def stats(self, name: str) -> PolicyStats:
        for key, st in self.policies:
            if key == name:
                return st
        raise KeyError(name)


def summarize_policy(results: Sequence[EpisodeResult]) -> PolicyStats:
    """Per-device cost (undiscounted stage cost per completed task) and edge
    ratio (offloaded over arrived), averaged over episodes with defined
    ratios, with 95% CIs."""
    costs = [r.undiscounted_cost / r.tasks_completed
             for r in results if r.tasks_completed > 0]
    ratios = [r.tasks_offloaded / r.tasks_arrived
              for r in results if r.tasks_arrived > 0]
    cost_mean = cost_ci = ratio_mean = ratio_ci = None
    if costs:
        cost_mean, cost_ci = mean_ci95(costs)
    if ratios:
        ratio_mean, ratio_ci = mean_ci95(ratios)
    return PolicyStats(cost_mean, cost_ci, ratio_mean, ratio_ci, len(results))


def sweep_arrival_rate(p_grid: Sequence[float], policies: Sequence[str | PolicyKind],
                       n_episodes: int, horizon: int, seed,
                       params: SystemParams, keep_episodes: bool = False,
                       progress: Callable[[str], None] | None = None,
                       ) -> list[SweepRow]:
    """Benchmark sweep over arrival probabilities; every policy at a grid
    point sees the same episode seeds (shared arrival randomness)."""
    kinds = [PolicyKind(p) for p in policies]
    for p in p_grid:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"arrival probability {p} outside (0, 1]")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    point_seeds = ss.spawn(len(p_grid))
    # These expectations do not depend on the arrival probability, so they
    # are shared across the whole grid.
    e_task = expected_task_cost(params)
    e_inv = expected_inverse_pathloss(params)
    e_rate = expected_uplink_rate(params.rx_power_w, params)

    rows: list[SweepRow] = []
    for pi, pn in enumerate(p_grid):
        pt_params = replace(params, arrival_prob=pn)
        vm = None
        if PolicyKind.IMPROVED in kinds:
            vm = ValueModel.build(pt_params, e_task, e_inv, e_rate)
        episode_seeds = point_seeds[pi].spawn(n_episodes)
        stats: list[tuple[str, PolicyStats]] = []
        detail: dict = {} if keep_episodes else None
        for kind in kinds:
            if progress is not None:
                progress(f"arrival_prob={pn} policy={kind.value}")
            pol = make_policy(kind, pt_params, vm)
            results = run_episodes(pol, ReducedState(()), horizon, n_episodes,
                                   None, pt_params, episode_seeds=episode_seeds)
            stats.append((kind.value, summarize_policy(results)))
            if keep_episodes:
                detail[kind.value] = results
        rows.append(SweepRow(pn, tuple(stats), detail))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    """One line per grid point; float fields use repr so reruns are
    byte-identical."""
    if not rows:
        return "arrival_prob\n"
    names = [name for name, _ in rows[0].policies]
    cols = ["arrival_prob"]
    for name in names:
        cols += [f"{name}_cost_mean", f"{name}_cost_ci95",
                 f"{name}_edge_ratio", f"{name}_edge_ratio_ci95"]
    lines = [",".join(cols)]
    for row in rows:
        vals = [repr(row.arrival_prob)]
        for name in names:
            st = row.stats(name)
            for v in (st.cost_mean, st.cost_ci95, st.edge_ratio, st.edge_ratio_ci95):
                vals.append("" if v is None else repr(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class OracleResult:
    """Exact expectations under a quantized model over a finite horizon.
    `discounted_g_with_tail` adds the residual (post-horizon) discounted cost
    of local devices still running, which is what the front-loaded reduced
    cost charges inside the horizon."""
    discounted_g_prime: float
    discounted_g: float
    discounted_g_with_tail: float
    nodes: int


def _fading_combos(atoms: list[tuple[float, float]], n: int):
    if n == 0:
        yield (), 1.0
        return
    for combo in itertools.product(atoms, repeat=n):
        prob = 1.0
        for _, p in combo:
            prob *= p
        yield tuple(v for v, _ in combo), prob


def finite_horizon_oracle(policy: Policy, initial: ReducedState, horizon: int,
                          params: SystemParams, channel: QuantizedChannel,
                          node_budget: int = 10_000_000) -> OracleResult:
    """Exhaustively enumerate every outcome of `horizon` frames from a
    reduced start (frame-1 fading and arrival averaged over, like the Monte
    Carlo convention) and return exact expectations.

    Only feasible for tiny quantized models; raises once the outcome tree
    exceeds `node_budget` nodes.
    """
    if not isinstance(channel, QuantizedChannel):
        raise TypeError("finite_horizon_oracle needs a QuantizedChannel")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    arrival_atoms = channel.arrival_atoms()
    fading_atoms = channel.fading_atoms()
    g = params.discount
    count = 0

    def residual_local(state: SystemState) -> float:
        """Discounted cost the leaf state's local devices still accrue,
        valued at the leaf frame itself."""
        tail = 0.0
        for dev in state.local_devices:
            per = 1.0 + params.power_weight * local_power_w(dev.cpu_hz, params)
            tail += per * (1.0 - g ** dev.frames_remaining) / (1.0 - g)
        return tail

    def visit(state: SystemState, t: int, next_id: int):
        nonlocal count
        count += 1
        if count > node_budget:
            raise ValueError("oracle outcome tree exceeds the node budget")
        action = policy(state)
        cg = stage_cost(state, action, params)
        cgp = reduced_stage_cost(state, action, params)
        edge_ids = [d.id for d in successor_reduced(state, action, params).devices]
        if t == horizon:
            # Post-horizon fading and arrivals cannot change the local tail,
            # so the final transition needs no enumeration.
            child = advance(state, action, {i: 1.0 for i in edge_ids}, None, params)
            return cg, cgp, g * residual_local(child)
        eg = egp = etail = 0.0
        for proto, pa in arrival_atoms:
            if proto is None:
                nxt_arr, nid = None, next_id
            else:
                nxt_arr, nid = replace(proto, id=next_id), next_id + 1
            for values, pf in _fading_combos(fading_atoms, len(edge_ids)):
                child = advance(state, action, dict(zip(edge_ids, values)),
                                nxt_arr, params)
                sg, sgp, stail = visit(child, t + 1, nid)
                w = pa * pf
                eg += w * sg
                egp += w * sgp
                etail += w * stail
        return cg + g * eg, cgp + g * egp, g * etail

    ids = [d.id for d in initial.devices]
    start_id = max(ids) + 1 if ids else 1
    tg = tgp = ttail = 0.0
    for proto, pa in arrival_atoms:
        if proto is None:
            arr, nid = None, start_id
        else:
            arr, nid = replace(proto, id=start_id), start_id + 1
        for values, pf in _fading_combos(fading_atoms, len(ids)):
            state = SystemState(1, initial.devices, dict(zip(ids, values)), (), arr)
            sg, sgp, stail = visit(state, 1, nid)
            w = pa * pf
            tg += w * sg
            tgp += w * sgp
            ttail += w * stail
    return OracleResult(tgp, tg, tg + ttail, count)
