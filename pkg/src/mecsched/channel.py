"""Randomness sources (fading, arrivals) and channel-related expectations.

Two interchangeable random models drive the simulator: `AnnulusChannel`
(Rayleigh fading, arrivals spread uniformly over an annulus) is the default;
`QuantizedChannel` replaces the continuous laws with small discrete atom sets
so that an exhaustive oracle can enumerate every outcome.

Samplers always consume a fixed number of variates per call, so two runs that
share a seed see identical arrival sequences even under different policies
(common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .model import Arrival, SystemParams


def sample_fading_power(rng: np.random.Generator) -> float:
    """One |h|^2 draw: exponential with unit mean (Rayleigh amplitude)."""
    return float(rng.standard_exponential())


def sample_radius(rng: np.random.Generator, params: SystemParams) -> float:
    """Distance of a new device from the base station, uniform over the
    annulus area between min_distance_m and cell_radius_m."""
    d0sq = params.min_distance_m ** 2
    u = rng.random()
    return math.sqrt(d0sq + u * (params.cell_radius_m ** 2 - d0sq))


def pathloss_at(radius_m: float, params: SystemParams) -> float:
    return params.pathloss_ref_gain * radius_m ** (-params.pathloss_exponent)


def sample_arrival(rng: np.random.Generator, next_id: int,
                   params: SystemParams) -> Arrival | None:
    """With probability arrival_prob, a new device with random location and
    task parameters; otherwise None.  Always draws 5 variates."""
    u = rng.random()
    radius = sample_radius(rng, params)
    size = int(rng.integers(params.d_min, params.d_max + 1))
    cpu = rng.uniform(params.f_min_hz, params.f_max_hz)
    cycles = rng.uniform(params.L_min, params.L_max)
    if u >= params.arrival_prob:
        return None
    return Arrival(next_id, pathloss_at(radius, params), size, cpu, cycles)


def expected_uplink_rate(rx_power_w: float, params: SystemParams) -> float:
    """Mean uplink rate (bits/s) over unit-mean exponential fading at a fixed
    receive power, by adaptive quadrature."""
    if rx_power_w <= 0.0:
        return 0.0
    c = rx_power_w / params.noise_power_w
    val, _ = integrate.quad(lambda x: math.exp(-x) * math.log1p(c * x),
                            0.0, math.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    return params.bandwidth_hz * val / math.log(2.0)


def expected_inverse_pathloss(params: SystemParams) -> float:
    """E[1/pathloss] = E[r^alpha]/beta under the annulus arrival law."""
    a = params.pathloss_exponent
    r0, r1 = params.min_distance_m, params.cell_radius_m
    norm = r1 ** 2 - r0 ** 2
    val, _ = integrate.quad(lambda r: 2.0 * r ** (a + 1.0) / norm,
                            r0, r1, epsabs=0.0, epsrel=1e-10, limit=200)
    return val / params.pathloss_ref_gain


class ArrivalStream:
    """Pre-drawn per-frame arrival variates for one episode.

    Index 0 feeds the episode's first frame; index t the state after t
    advances.  Materializes an `Arrival` only for frames that have one.
    """

    __slots__ = ("present", "pathloss", "size", "cpu", "cycles")

    def __init__(self, present, pathloss, size, cpu, cycles):
        self.present = present
        self.pathloss = pathloss
        self.size = size
        self.cpu = cpu
        self.cycles = cycles

    def get(self, index: int, device_id: int) -> Arrival | None:
        if not self.present[index]:
            return None
        return Arrival(device_id, self.pathloss[index], int(self.size[index]),
                       self.cpu[index], self.cycles[index])


@dataclass(frozen=True)
class AnnulusChannel:
    """Default random model: Exp(1) fading, area-uniform arrival radius,
    uniform task size / CPU frequency / cycle count."""

    params: SystemParams

    def fading_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_exponential(n)

    def presample(self, rng: np.random.Generator, n_frames: int) -> ArrivalStream:
        p = self.params
        present = rng.random(n_frames) < p.arrival_prob
        d0sq = p.min_distance_m ** 2
        radius = np.sqrt(d0sq + rng.random(n_frames) * (p.cell_radius_m ** 2 - d0sq))
        pathloss = p.pathloss_ref_gain * radius ** (-p.pathloss_exponent)
        size = rng.integers(p.d_min, p.d_max + 1, n_frames)
        cpu = rng.uniform(p.f_min_hz, p.f_max_hz, n_frames)
        cycles = rng.uniform(p.L_min, p.L_max, n_frames)
        return ArrivalStream(present, pathloss, size, cpu, cycles)


@dataclass(frozen=True)
class QuantizedChannel:
    """Discrete-atom random model for exhaustive enumeration.

    Fading and pathloss take finitely many values with given probabilities;
    task size stays uniform on {d_min..d_max}; CPU frequency and cycle count
    must be degenerate (min == max) so arrivals have finitely many types.
    """

    params: SystemParams
    fading_values: tuple[float, ...]
    fading_probs: tuple[float, ...]
    pathloss_values: tuple[float, ...]
    pathloss_probs: tuple[float, ...]

    def __post_init__(self) -> None:
        p = self.params
        if p.f_min_hz != p.f_max_hz or p.L_min != p.L_max:
            raise ValueError("quantized model needs degenerate f and L ranges")
        for vals, probs, name in ((self.fading_values, self.fading_probs, "fading"),
                                  (self.pathloss_values, self.pathloss_probs, "pathloss")):
            if len(vals) != len(probs) or not vals:
                raise ValueError(f"{name} atoms and probabilities must align")
            if abs(sum(probs) - 1.0) > 1e-12 or min(probs) < 0.0:
                raise ValueError(f"{name} probabilities must be a distribution")
            if min(vals) <= 0.0:
                raise ValueError(f"{name} atoms must be positive")

    def fading_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(len(self.fading_values), size=n, p=self.fading_probs)
        return np.asarray(self.fading_values)[idx]

    def presample(self, rng: np.random.Generator, n_frames: int) -> ArrivalStream:
        p = self.params
        present = rng.random(n_frames) < p.arrival_prob
        idx = rng.choice(len(self.pathloss_values), size=n_frames,
                         p=self.pathloss_probs)
        pathloss = np.asarray(self.pathloss_values)[idx]
        size = rng.integers(p.d_min, p.d_max + 1, n_frames)
        cpu = np.full(n_frames, p.f_min_hz)
        cycles = np.full(n_frames, p.L_min)
        return ArrivalStream(present, pathloss, size, cpu, cycles)

    def fading_atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.fading_values, self.fading_probs))

    def arrival_atoms(self) -> list[tuple[Arrival | None, float]]:
        """All (arrival-or-None, probability) outcomes of one frame, with a
        placeholder id 0; callers re-id the arrival for their frame."""
        p = self.params
        out: list[tuple[Arrival | None, float]] = [(None, 1.0 - p.arrival_prob)]
        nd = p.d_max - p.d_min + 1
        for rho, prho in zip(self.pathloss_values, self.pathloss_probs):
            for d in range(p.d_min, p.d_max + 1):
                prob = p.arrival_prob * prho / nd
                if prob > 0.0:
                    out.append((Arrival(0, rho, d, p.f_min_hz, p.L_min), prob))
        return out
