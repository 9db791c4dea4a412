"""Closed-form value function of the FCFS link-compensation policy.

Under that policy, started from an empty edge set, at most one device ever
occupies the uplink queue, so the queue length follows a finite Markov chain
whose discounted cost solves a single linear system.  For a non-empty edge
set the value is evaluated term by term with a deterministic drain-time
approximation based on the mean uplink rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import expected_inverse_pathloss, expected_uplink_rate
from .model import (ReducedState, SystemParams, ceil_guarded,
                    discounted_local_cost, local_power_w)

_GAMMA_TABLE_LEN = 8192


def build_transition_matrix(params: SystemParams) -> np.ndarray:
    """Queue-length chain of the single uplink device under link compensation.

    State i (0-based) means i segments queued.  From state 0 an arrival (which
    is the only way the queue can fill) brings a task of uniform size; from
    state i >= 1 the queue drops by the number of segments the fading draw
    lets through at the receive-power target, and new arrivals go local.
    """
    n = params.d_max + 1
    c = params.segment_bits / (params.bandwidth_hz * params.frame_duration_s)
    z = params.noise_power_w / params.rx_power_w
    # tail[m] = Pr(at least m segments delivered in one frame)
    with np.errstate(over="ignore"):
        tail = np.exp(-(np.exp2(np.arange(n + 1) * c) - 1.0) * z)
    m = np.zeros((n, n))
    m[0, 0] = 1.0 - params.arrival_prob
    m[0, params.d_min:params.d_max + 1] = (
        params.arrival_prob / (params.d_max - params.d_min + 1))
    for i in range(1, n):
        m[i, 0] = tail[i]
        k = np.arange(i - 1, -1, -1)      # segments sent when landing on 1..i
        m[i, 1:i + 1] = tail[k] - tail[k + 1]
    return m


def build_cost_vector(params: SystemParams, expected_task_cost_value: float,
                      expected_inv_pathloss: float) -> np.ndarray:
    """Per-state mean reduced cost for the queue-length chain.

    The empty state costs nothing; every busy state pays the device count,
    the mean compensation power, and the mean admission charge of arrivals
    that are pushed to local computing while the uplink is busy.
    """
    g = np.zeros(params.d_max + 1)
    g[1:] = (1.0
             + params.power_weight * params.rx_power_w * expected_inv_pathloss
             + params.arrival_prob * expected_task_cost_value)
    return g


def w_pi_empty(params: SystemParams,
               transition_matrix: np.ndarray | None = None,
               cost_vec: np.ndarray | None = None) -> float:
    """Discounted value of the FCFS policy from the empty edge state, via a
    direct solve of (I - gamma M) x = g."""
    m = build_transition_matrix(params) if transition_matrix is None else transition_matrix
    if cost_vec is None:
        cost_vec = build_cost_vector(params, expected_task_cost(params),
                                     expected_inverse_pathloss(params))
    a = np.eye(m.shape[0]) - params.discount * m
    try:
        x = np.linalg.solve(a, cost_vec)
    except np.linalg.LinAlgError as exc:   # pragma: no cover - gamma < 1 prevents this
        raise ValueError("value solve failed; check parameters") from exc
    return float(x[0])


def _integral_gamma_ceil(u1: float, u2: float, gamma: float) -> float:
    """Exact integral of gamma^ceil(u) du over [u1, u2], u1 <= u2, u >= 0."""
    if u2 <= u1:
        return 0.0
    k1 = math.ceil(u1)
    k2 = math.ceil(u2)
    if k1 == k2:
        return (u2 - u1) * gamma ** k1
    total = (k1 - u1) * gamma ** k1
    nfull = k2 - 1 - k1
    if nfull > 0:
        total += gamma ** (k1 + 1) * (1.0 - gamma ** nfull) / (1.0 - gamma)
    total += (u2 - (k2 - 1)) * gamma ** k2
    return total


def _mean_cost_over_cycles(d: int, f: float, params: SystemParams) -> float:
    """Mean of discounted_local_cost over L ~ U(L_min, L_max) at fixed d, f.

    The completion time is a ceiling of a linear function of L, so the L
    average reduces to exact geometric sums over the ceiling's level sets.
    """
    g = params.discount
    per_frame = 1.0 + params.power_weight * local_power_w(f, params)
    a = d * params.segment_bits / (f * params.frame_duration_s)   # T = ceil(a L)
    lo, hi = params.L_min, params.L_max
    if hi == lo:
        t = ceil_guarded(a * lo)
        return per_frame * g * (1.0 - g ** t) / (1.0 - g)
    mean_pow = _integral_gamma_ceil(a * lo, a * hi, g) / (a * (hi - lo))
    return per_frame * g * (1.0 - mean_pow) / (1.0 - g)


def expected_task_cost(params: SystemParams, f_nodes: int = 64) -> float:
    """Mean admission charge E[C] over task size, CPU frequency and cycle
    count: exact sum over sizes, exact geometric integration over cycle
    count, Gauss-Legendre (refined until stable) over CPU frequency."""
    sizes = range(params.d_min, params.d_max + 1)
    if params.f_min_hz == params.f_max_hz:
        total = sum(_mean_cost_over_cycles(d, params.f_min_hz, params) for d in sizes)
        return total / len(sizes)

    def with_nodes(n: int) -> float:
        x, w = np.polynomial.legendre.leggauss(n)
        f = 0.5 * (params.f_min_hz + params.f_max_hz) + 0.5 * (
            params.f_max_hz - params.f_min_hz) * x
        total = 0.0
        for d in sizes:
            vals = np.array([_mean_cost_over_cycles(d, fi, params) for fi in f])
            total += 0.5 * float(w @ vals)
        return total / len(sizes)

    est = with_nodes(f_nodes)
    for n in (2 * f_nodes, 4 * f_nodes, 8 * f_nodes):
        refined = with_nodes(n)
        if abs(refined - est) <= 1e-7 * max(1.0, abs(refined)):
            return refined
        est = refined
    return est


def frames_to_drain(queue_segments: int, params: SystemParams,
                    segments_per_frame: float | None = None) -> int:
    """Frames to empty an uplink queue at the mean rate of the receive-power
    target; 0 for an empty queue."""
    if queue_segments <= 0:
        return 0
    if segments_per_frame is None:
        rate = expected_uplink_rate(params.rx_power_w, params)
        segments_per_frame = rate * params.frame_duration_s / params.segment_bits
    return max(1, ceil_guarded(queue_segments / segments_per_frame))


@dataclass(frozen=True)
class ValueModel:
    """Precomputed analytical quantities, built once per parameter set and
    shared read-only by every policy decision and simulation worker."""

    params: SystemParams
    transition_matrix: np.ndarray
    cost_vec: np.ndarray
    w_pi_empty: float
    expected_task_cost: float
    expected_inv_pathloss: float
    expected_rate: float
    segments_per_frame: float
    gamma_table: np.ndarray

    @classmethod
    def build(cls, params: SystemParams,
              expected_task_cost_value: float | None = None,
              expected_inv_pathloss_value: float | None = None,
              expected_rate_value: float | None = None) -> "ValueModel":
        """Precomputed expectations may be passed in to share work across
        parameter sets that differ only in arrival probability."""
        if expected_task_cost_value is None:
            expected_task_cost_value = expected_task_cost(params)
        if expected_inv_pathloss_value is None:
            expected_inv_pathloss_value = expected_inverse_pathloss(params)
        if expected_rate_value is None:
            expected_rate_value = expected_uplink_rate(params.rx_power_w, params)
        m = build_transition_matrix(params)
        g = build_cost_vector(params, expected_task_cost_value,
                              expected_inv_pathloss_value)
        empty = w_pi_empty(params, m, g)
        table = params.discount ** np.arange(_GAMMA_TABLE_LEN)
        return cls(params, m, g, empty, expected_task_cost_value,
                   expected_inv_pathloss_value, expected_rate_value,
                   expected_rate_value * params.frame_duration_s / params.segment_bits,
                   table)

    def gamma_power(self, n: int) -> float:
        if n < _GAMMA_TABLE_LEN:
            return float(self.gamma_table[n])
        return self.params.discount ** n

    def frames_to_drain(self, queue_segments: int) -> int:
        return frames_to_drain(queue_segments, self.params, self.segments_per_frame)


def w_pi(reduced_state: ReducedState, vm: ValueModel) -> float:
    """Value of the FCFS policy at an arbitrary edge set.

    Devices are served in arrival order; each contributes its discounted
    compensation power over its drain window and a holding cost until it
    finishes.  Arrivals during the busy period are charged their mean local
    cost, and afterwards the empty-state value takes over.
    """
    p = vm.params
    g = p.discount
    inv1g = 1.0 / (1.0 - g)
    w = p.power_weight
    drained = 0
    total = 0.0
    for dev in reduced_state.devices:
        t_k = vm.frames_to_drain(dev.queue_segments)
        pre = vm.gamma_power(drained)
        drained += t_k
        post = vm.gamma_power(drained)
        total += (w * pre * (1.0 - vm.gamma_power(t_k)) * inv1g
                  * p.rx_power_w / dev.pathloss)
        total += (1.0 - post) * inv1g
    tail = vm.gamma_power(drained)
    total += p.arrival_prob * vm.expected_task_cost * (1.0 - tail) * inv1g
    total += tail * vm.w_pi_empty
    return total
