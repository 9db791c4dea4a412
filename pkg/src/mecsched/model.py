"""Core types and per-frame dynamics of the edge-offloading cell.

Everything here is a pure function over immutable values: states in, states
out, no hidden randomness.  All random draws (fading, arrivals) are made by
the caller and passed in, which keeps the dynamics replayable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

# Relative guard applied at integer boundaries of floor/ceil expressions so
# that exact-rate / exact-division inputs are not knocked to the wrong side
# by float roundoff.  Only affects inputs within ~1e-9 of a boundary.
BOUNDARY_GUARD = 1e-9


def floor_guarded(x: float) -> int:
    return math.floor(x + BOUNDARY_GUARD * max(1.0, abs(x)))


def ceil_guarded(x: float) -> int:
    return math.ceil(x - BOUNDARY_GUARD * max(1.0, abs(x)))


@dataclass(frozen=True)
class SystemParams:
    """Model constants: radio frame, task law, cost weights, cell geometry.

    Defaults give a cell where uplink service of a task takes ~12-17 frames
    and local computing ~100-150 frames, so the offload/local trade-off is
    live.  All values are plain SI units (seconds, Hz, bits, watts, meters).
    """

    frame_duration_s: float = 0.01        # T_s
    bandwidth_hz: float = 1e7             # uplink bandwidth W
    segment_bits: float = 1e4             # bits per task segment
    noise_power_w: float = 3.9810717055349695e-14   # -104 dBm
    arrival_prob: float = 0.3             # per-frame arrival probability
    discount: float = 0.995               # gamma
    power_weight: float = 1.0             # w, cost units per watt
    rx_power_w: float = 1.274e-13         # receive-power target of the FCFS policy
    kappa: float = 1e-28                  # switched capacitance of device CPUs
    d_min: int = 200                      # task size bounds, in segments
    d_max: int = 300
    f_min_hz: float = 1e9                 # device CPU frequency bounds
    f_max_hz: float = 1e9
    L_min: float = 500.0                  # CPU cycles per input bit
    L_max: float = 500.0
    pathloss_exponent: float = 3.0        # alpha
    pathloss_ref_gain: float = 8.9e-7     # beta, linear gain at 1 m
    cell_radius_m: float = 200.0
    min_distance_m: float = 1.0
    max_tx_power_w: float = 1.5           # hard cap on uplink transmit power

    def __post_init__(self) -> None:
        if not 0.0 < self.arrival_prob <= 1.0:
            raise ValueError(f"arrival_prob must be in (0, 1], got {self.arrival_prob}")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must be in (0, 1), got {self.discount}")
        if not 1 <= self.d_min <= self.d_max:
            raise ValueError(f"need 1 <= d_min <= d_max, got [{self.d_min}, {self.d_max}]")
        if self.f_min_hz > self.f_max_hz:
            raise ValueError("f_min_hz > f_max_hz")
        if self.L_min > self.L_max:
            raise ValueError("L_min > L_max")
        if self.min_distance_m >= self.cell_radius_m:
            raise ValueError("min_distance_m must be smaller than cell_radius_m")
        for name in (
            "frame_duration_s", "bandwidth_hz", "segment_bits", "noise_power_w",
            "power_weight", "rx_power_w", "kappa", "f_min_hz", "L_min",
            "pathloss_exponent", "pathloss_ref_gain", "min_distance_m",
            "max_tx_power_w",
        ):
            value = getattr(self, name)
            if name in ("power_weight", "pathloss_exponent"):
                if value < 0.0:
                    raise ValueError(f"{name} must be nonnegative, got {value}")
            elif value <= 0.0:
                raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True, slots=True)
class EdgeDevice:
    """Device whose task is served over the uplink; queue in whole segments."""
    id: int
    pathloss: float
    queue_segments: int


@dataclass(frozen=True, slots=True)
class LocalDevice:
    """Device computing its own task; queue drains a fixed amount per frame."""
    id: int
    queue_segments: float
    cpu_hz: float
    cycles_per_bit: float
    frames_remaining: int


@dataclass(frozen=True, slots=True)
class Arrival:
    """A device that appeared this frame and still awaits its offload decision."""
    id: int
    pathloss: float
    size_segments: int
    cpu_hz: float
    cycles_per_bit: float


@dataclass(frozen=True, slots=True)
class Action:
    """Per-frame scheduling decision.

    `uplink_device` selects which edge device transmits (None: nobody),
    `tx_power_w` its transmit power, and `offload` routes the frame's
    arrival (if any) to the edge queue (True) or to local computing.
    """
    uplink_device: Optional[int] = None
    tx_power_w: float = 0.0
    offload: bool = False


NO_ACTION = Action()


@dataclass(frozen=True, slots=True)
class SystemState:
    """Full per-frame state.

    Device tuples are ordered by ascending id, ids are assigned by a monotone
    counter (arrival order), and `fading` holds this frame's |h|^2 for exactly
    the edge devices.  A present arrival always carries the largest id.
    """
    frame: int
    edge_devices: tuple[EdgeDevice, ...]
    fading: Mapping[int, float]
    local_devices: tuple[LocalDevice, ...]
    arrival: Optional[Arrival] = None

    def all_ids(self) -> set[int]:
        ids = {d.id for d in self.edge_devices} | {d.id for d in self.local_devices}
        if self.arrival is not None:
            ids.add(self.arrival.id)
        return ids

    def validate(self, params: SystemParams | None = None) -> None:
        """Check structural invariants; meant for tests, not the hot loop."""
        edge_ids = [d.id for d in self.edge_devices]
        local_ids = [d.id for d in self.local_devices]
        if sorted(edge_ids) != edge_ids or sorted(local_ids) != local_ids:
            raise ValueError("device tuples must be ordered by ascending id")
        if set(self.fading.keys()) != set(edge_ids):
            raise ValueError("fading keys must match edge-device ids")
        ids = edge_ids + local_ids
        if self.arrival is not None:
            if ids and self.arrival.id <= max(ids):
                raise ValueError("arrival id must be the largest id in the state")
            ids.append(self.arrival.id)
        if len(set(ids)) != len(ids):
            raise ValueError("device ids must be distinct")
        for dev in self.edge_devices:
            if dev.pathloss <= 0.0 or dev.queue_segments <= 0:
                raise ValueError(f"bad edge device {dev}")
        for dev in self.local_devices:
            if dev.queue_segments <= 0.0 or dev.frames_remaining <= 0:
                raise ValueError(f"bad local device {dev}")
        if params is not None:
            for dev in self.local_devices:
                expect = local_completion_frames(
                    dev.queue_segments, dev.cpu_hz, dev.cycles_per_bit, params)
                if dev.frames_remaining != expect:
                    raise ValueError(f"frames_remaining inconsistent for {dev}")


@dataclass(frozen=True, slots=True)
class ReducedState:
    """Edge-device records (id, pathloss, queue) without fading; the argument
    of the analytical value function."""
    devices: tuple[EdgeDevice, ...]

    @classmethod
    def from_state(cls, state: SystemState) -> "ReducedState":
        return cls(state.edge_devices)


EMPTY_REDUCED = ReducedState(())


def segments_transmitted(power_w: float, pathloss: float, fading_power: float,
                         params: SystemParams) -> int:
    """Whole segments delivered in one frame at the given SNR."""
    snr = power_w * pathloss * fading_power / params.noise_power_w
    if snr <= 0.0:
        return 0
    v = (params.bandwidth_hz * math.log2(1.0 + snr)
         * params.frame_duration_s / params.segment_bits)
    return floor_guarded(v)


def local_completion_frames(size_segments: float, cpu_hz: float,
                            cycles_per_bit: float, params: SystemParams) -> int:
    """Frames needed to compute `size_segments` locally."""
    x = (size_segments * params.segment_bits * cycles_per_bit
         / (cpu_hz * params.frame_duration_s))
    return max(0, ceil_guarded(x))


def local_power_w(cpu_hz: float, params: SystemParams) -> float:
    """CPU power draw at frequency f: kappa * f^3."""
    return params.kappa * cpu_hz ** 3


def discounted_local_cost(size_segments: float, cpu_hz: float,
                          cycles_per_bit: float, params: SystemParams) -> float:
    """Total discounted cost of computing a task locally, charged at admission.

    The device counts 1 per frame plus weighted CPU power for each of its
    completion frames, discounted starting one frame after admission.
    """
    t_loc = local_completion_frames(size_segments, cpu_hz, cycles_per_bit, params)
    g = params.discount
    per_frame = 1.0 + params.power_weight * local_power_w(cpu_hz, params)
    return per_frame * g * (1.0 - g ** t_loc) / (1.0 - g)


def stage_cost(state: SystemState, action: Action, params: SystemParams) -> float:
    """Weighted device count plus power spent this frame.

    Counts devices present at the beginning of the frame; the frame's arrival
    joins a device set only at the next frame and is not counted yet.
    """
    power = action.tx_power_w
    for dev in state.local_devices:
        power += params.kappa * dev.cpu_hz ** 3
    return (len(state.edge_devices) + len(state.local_devices)
            + params.power_weight * power)


def reduced_stage_cost(state: SystemState, action: Action,
                       params: SystemParams) -> float:
    """Edge-device count plus transmit power, with a local task's entire
    discounted future cost charged up front at its admission frame."""
    cost = len(state.edge_devices) + params.power_weight * action.tx_power_w
    arr = state.arrival
    if arr is not None and not action.offload:
        cost += discounted_local_cost(arr.size_segments, arr.cpu_hz,
                                      arr.cycles_per_bit, params)
    return cost


def advance(state: SystemState, action: Action,
            next_fading: Mapping[int, float], next_arrival: Optional[Arrival],
            params: SystemParams) -> SystemState:
    """One frame of dynamics; deterministic given its inputs.

    `next_fading` must contain a draw for every edge device present in the
    returned state (survivors plus an offloaded arrival); extra keys are
    ignored.  Devices whose queues empty this frame are dropped.
    """
    sel = action.uplink_device
    edge: list[EdgeDevice] = []
    found = sel is None
    for dev in state.edge_devices:
        if dev.id == sel:
            found = True
            phi = segments_transmitted(action.tx_power_w, dev.pathloss,
                                       state.fading[dev.id], params)
            q = dev.queue_segments - phi
            if q > 0:
                edge.append(EdgeDevice(dev.id, dev.pathloss, q))
        else:
            edge.append(dev)
    if not found:
        raise ValueError(f"uplink device {sel} is not an active edge device")

    arr = state.arrival
    if arr is not None and action.offload:
        edge.append(EdgeDevice(arr.id, arr.pathloss, arr.size_segments))

    local: list[LocalDevice] = []
    ts = params.frame_duration_s
    bs = params.segment_bits
    for dev in state.local_devices:
        # ceil(q/delta) drops by exactly one per frame, so the frame count is
        # decremented rather than recomputed.
        frames = dev.frames_remaining - 1
        if frames <= 0:
            continue
        q = dev.queue_segments - dev.cpu_hz * ts / (dev.cycles_per_bit * bs)
        if q > 0.0:
            local.append(LocalDevice(dev.id, q, dev.cpu_hz,
                                     dev.cycles_per_bit, frames))
    if arr is not None and not action.offload:
        frames = local_completion_frames(arr.size_segments, arr.cpu_hz,
                                         arr.cycles_per_bit, params)
        local.append(LocalDevice(arr.id, float(arr.size_segments), arr.cpu_hz,
                                 arr.cycles_per_bit, frames))

    fading = {dev.id: next_fading[dev.id] for dev in edge}
    return SystemState(state.frame + 1, tuple(edge), fading, tuple(local),
                       next_arrival)
