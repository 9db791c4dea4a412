"""Scheduling policies behind one decide(state) -> Action interface.

Four policies: the FCFS link-compensation baseline, its one-step improvement
(minimize immediate reduced cost plus discounted baseline value of the
successor), and the all-local / all-edge benchmarks.

Since the current frame's fading is part of the state, the reduced successor
of any action is deterministic, so the one-step minimization is an exact
enumeration: per edge device, only the transmit levels that are cheapest for
their resulting drain time can be optimal, and each candidate is scored with
an O(1) incremental form of the value function.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Callable, Optional

from .model import (NO_ACTION, Action, Arrival, EdgeDevice, ReducedState,
                    SystemParams, SystemState, discounted_local_cost,
                    floor_guarded, segments_transmitted)
from .valuefn import ValueModel, w_pi


class PolicyKind(str, Enum):
    BASELINE = "baseline"
    IMPROVED = "improved"
    ALL_LOCAL = "alc"
    ALL_EDGE = "aec"


def baseline_decide(state: SystemState, params: SystemParams) -> Action:
    """FCFS uplink, transmit power compensating pathloss to a fixed receive
    power, offload only into an empty edge set."""
    edge = state.edge_devices
    offload = not edge
    if not edge:
        return Action(None, 0.0, offload)
    dev = edge[0]   # ids ascend, so the head is the earliest arrival
    power = min(params.rx_power_w / dev.pathloss, params.max_tx_power_w)
    return Action(dev.id, power, offload)


def all_local_decide(state: SystemState) -> Action:
    return NO_ACTION


def all_edge_decide(state: SystemState, params: SystemParams) -> Action:
    """Offload everything; serve the uplink like the baseline."""
    edge = state.edge_devices
    if not edge:
        return Action(None, 0.0, state.arrival is not None)
    dev = edge[0]
    power = min(params.rx_power_w / dev.pathloss, params.max_tx_power_w)
    return Action(dev.id, power, True)


def candidate_powers(device: EdgeDevice, fading_power: float,
                     params: SystemParams) -> list[tuple[int, float]]:
    """(segments, minimal power) pairs for every deliverable segment count.

    Any power strictly between two levels buys no extra segments, so these
    are the only powers a cost minimizer can pick.  Levels above the transmit
    cap are dropped; zero fading leaves only the silent option.
    """
    out = [(0, 0.0)]
    if fading_power <= 0.0 or device.queue_segments <= 0:
        return out
    c = params.segment_bits / (params.bandwidth_hz * params.frame_duration_s)
    snr_per_watt = device.pathloss * fading_power / params.noise_power_w
    m_cap = min(device.queue_segments,
                floor_guarded(math.log2(1.0 + params.max_tx_power_w * snr_per_watt) / c))
    for m in range(1, m_cap + 1):
        power = (2.0 ** (m * c) - 1.0) / snr_per_watt
        if power > params.max_tx_power_w:
            break
        out.append((m, power))
    return out


def successor_reduced(state: SystemState, action: Action,
                      params: SystemParams) -> ReducedState:
    """Next frame's edge set under `action`; deterministic because the
    current fading is known and only this frame's arrival can join."""
    devs: list[EdgeDevice] = []
    for dev in state.edge_devices:
        if dev.id == action.uplink_device:
            phi = segments_transmitted(action.tx_power_w, dev.pathloss,
                                       state.fading[dev.id], params)
            q = dev.queue_segments - phi
            if q > 0:
                devs.append(EdgeDevice(dev.id, dev.pathloss, q))
        else:
            devs.append(dev)
    arr = state.arrival
    if arr is not None and action.offload:
        devs.append(EdgeDevice(arr.id, arr.pathloss, arr.size_segments))
    return ReducedState(tuple(devs))


def action_cost_to_go(state: SystemState, action: Action,
                      vm: ValueModel) -> float:
    """Immediate reduced cost plus discounted policy value at the successor;
    the quantity the improved policy minimizes (up to a constant)."""
    from .model import reduced_stage_cost
    nxt = successor_reduced(state, action, vm.params)
    return (reduced_stage_cost(state, action, vm.params)
            + vm.params.discount * w_pi(nxt, vm))


def _dominant_transmissions(queue: int, vm: ValueModel) -> list[tuple[int, int]]:
    """(segments m, resulting drain frames tau) pairs where m is the smallest
    count reaching that tau; every other m >= 1 costs more power for the same
    successor value."""
    out: list[tuple[int, int]] = []
    mu = vm.segments_per_frame
    target = vm.frames_to_drain(queue) - 1
    m = 0
    while target >= 0:
        if target == 0:
            m = queue
        else:
            guess = queue - math.floor(target * mu)
            m = max(m + 1, min(guess, queue))
            while m < queue and vm.frames_to_drain(queue - m) > target:
                m += 1
            while m > 1 and vm.frames_to_drain(queue - (m - 1)) <= target:
                m -= 1
        actual = vm.frames_to_drain(queue - m)
        out.append((m, actual))
        if m >= queue:
            break
        target = actual - 1
    return out


def improved_decide(state: SystemState, params: SystemParams,
                    vm: ValueModel) -> Action:
    """One-step improvement of the baseline: jointly pick uplink device,
    transmit level and offload decision minimizing immediate reduced cost
    plus the discounted baseline value of the successor.

    Ties prefer local computing, then the lowest device id, then the lowest
    transmit level.  A chosen level of zero segments is returned as a null
    uplink action.
    """
    edge = state.edge_devices
    arr = state.arrival
    g = params.discount
    w = params.power_weight
    pr = params.rx_power_w
    inv1g = 1.0 / (1.0 - g)

    local_charge = 0.0
    if arr is not None:
        local_charge = discounted_local_cost(arr.size_segments, arr.cpu_hz,
                                             arr.cycles_per_bit, params)

    if not edge:
        if arr is None:
            return NO_ACTION
        alone = ReducedState((EdgeDevice(arr.id, arr.pathloss, arr.size_segments),))
        cost_edge = g * w_pi(alone, vm)
        cost_local = local_charge + g * vm.w_pi_empty
        return Action(None, 0.0, cost_edge < cost_local)

    # Silent option, shared by both offload branches.
    best_l = g * w_pi(ReducedState(edge), vm)
    pick_l: tuple[Optional[int], float] = (None, 0.0)
    best_e = math.inf
    pick_e: tuple[Optional[int], float] = (None, 0.0)
    if arr is not None:
        appended = ReducedState(edge + (EdgeDevice(arr.id, arr.pathloss,
                                                   arr.size_segments),))
        best_e = g * w_pi(appended, vm)

    # Static pieces of the value at the current edge set, reused across
    # candidates: drain times, discount prefixes, and suffix aggregates that
    # let a single device's changed drain time be patched in O(1).
    k = len(edge)
    drain = [vm.frames_to_drain(d.queue_segments) for d in edge]
    pre_pow = [0.0] * k
    post_pow = [0.0] * k
    own_power = [0.0] * k
    total = 0
    for i, dev in enumerate(edge):
        pre_pow[i] = vm.gamma_power(total)
        total += drain[i]
        post_pow[i] = vm.gamma_power(total)
        own_power[i] = (w * pre_pow[i] * (1.0 - vm.gamma_power(drain[i]))
                        * inv1g * pr / dev.pathloss)
    prefix_cost = [0.0] * k
    for i in range(1, k):
        prefix_cost[i] = (prefix_cost[i - 1] + own_power[i - 1]
                          + (1.0 - post_pow[i - 1]) * inv1g)
    suffix_power = [0.0] * (k + 1)
    suffix_post = [0.0] * (k + 1)
    for i in range(k - 1, -1, -1):
        suffix_power[i] = suffix_power[i + 1] + own_power[i]
        suffix_post[i] = suffix_post[i + 1] + post_pow[i]
    post_end = post_pow[k - 1]
    pn_ec = params.arrival_prob * vm.expected_task_cost
    wstar = vm.w_pi_empty

    if arr is not None:
        t_arr = vm.frames_to_drain(arr.size_segments)
        arr_power = w * (1.0 - vm.gamma_power(t_arr)) * inv1g * pr / arr.pathloss
        arr_shrink = vm.gamma_power(t_arr)

    c_exp = params.segment_bits / (params.bandwidth_hz * params.frame_duration_s)
    for j, dev in enumerate(edge):
        h = state.fading[dev.id]
        if h <= 0.0:
            continue
        snr_per_watt = dev.pathloss * h / params.noise_power_w
        m_cap = min(dev.queue_segments,
                    floor_guarded(math.log2(1.0 + params.max_tx_power_w
                                            * snr_per_watt) / c_exp))
        if m_cap < 1:
            continue
        after = k - 1 - j
        for m, tau in _dominant_transmissions(dev.queue_segments, vm):
            if m > m_cap:
                break
            power = (2.0 ** (m * c_exp) - 1.0) / snr_per_watt
            if power > params.max_tx_power_w:
                break
            # Value of the successor edge set, patched for device j's new
            # drain time; the arrival-free pieces are shared by both branches.
            core = prefix_cost[j]
            if tau > 0:
                pj_new = pre_pow[j] * vm.gamma_power(tau)
                core += (w * pre_pow[j] * (1.0 - vm.gamma_power(tau))
                         * inv1g * pr / dev.pathloss)
                core += (1.0 - pj_new) * inv1g
            shift = 1.0 / vm.gamma_power(drain[j] - tau)
            core += (shift * suffix_power[j + 1]
                     + (after - shift * suffix_post[j + 1]) * inv1g)
            end_pow = post_end * shift
            spend = w * power
            value_l = core + pn_ec * (1.0 - end_pow) * inv1g + end_pow * wstar
            cost = spend + g * value_l
            if cost < best_l:
                best_l = cost
                pick_l = (dev.id, power)
            if arr is not None:
                end2 = end_pow * arr_shrink
                value_e = (core + end_pow * arr_power + (1.0 - end2) * inv1g
                           + pn_ec * (1.0 - end2) * inv1g + end2 * wstar)
                cost = spend + g * value_e
                if cost < best_e:
                    best_e = cost
                    pick_e = (dev.id, power)

    if arr is not None and best_e < local_charge + best_l:
        return Action(pick_e[0], pick_e[1], True)
    return Action(pick_l[0], pick_l[1], False)


def make_policy(kind: PolicyKind | str, params: SystemParams,
                value_model: ValueModel | None = None,
                ) -> Callable[[SystemState], Action]:
    """Bind a policy to its parameters; `improved` needs a ValueModel built
    from the same parameters."""
    kind = PolicyKind(kind)
    if kind is PolicyKind.BASELINE:
        return lambda state: baseline_decide(state, params)
    if kind is PolicyKind.ALL_LOCAL:
        return all_local_decide
    if kind is PolicyKind.ALL_EDGE:
        return lambda state: all_edge_decide(state, params)
    if value_model is None:
        raise ValueError("the improved policy requires a ValueModel")
    return lambda state: improved_decide(state, params, value_model)
