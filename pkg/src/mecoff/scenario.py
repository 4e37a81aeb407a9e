"""Cell scenario description and seeded random generation.

A scenario is one snapshot of a single-cell system: K mobile devices placed
uniformly at random inside an annulus around the base station, each with a
task size, local CPU frequency, an assigned edge CPU frequency, and a flat
Rayleigh-faded MIMO uplink channel with 3GPP-style distance pathloss.

Randomness uses the counter-based Philox4x64 generator so that scenarios are
reproducible bit-for-bit from the master seed alone.  Stream splitting:

* stream id 0        device parameters, drawn in this fixed order:
                     distances[K], task_bits[K], f_loc[K], f_c[K]
* stream id 1 + k    channel of device k: real part N(0,1) of shape (M, N),
                     then imaginary part N(0,1) of shape (M, N)

Each stream is ``numpy.random.Generator(Philox(key=[seed, stream_id]))``.
Reference draws for a few (seed, stream) pairs are frozen in the test
fixtures so regressions in the derivation scheme are caught.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MEGABYTE_BITS = 8e6  # task sizes are quoted in MB of payload, 1 MB = 8e6 bits


class InvalidConfig(ValueError):
    """Raised when a scenario configuration violates a structural invariant."""


class DistanceTooSmall(ValueError):
    """Raised when the pathloss model is evaluated below its validity floor."""


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """All tunables of a simulated cell.

    Field names double as the keys of the flat ``key=value`` config-file
    format understood by :func:`load_config`.
    """

    num_devices: int = 4
    bs_antennas: int = 16
    md_antennas: int = 2
    streams: int = 2
    bandwidth: float = 1e7  # Hz
    noise_density: float = -175.0  # dBm/Hz
    cell_radius: float = 200.0  # m
    min_distance: float = 10.0  # m
    task_bits_range: tuple[float, float] = (0.8 * MEGABYTE_BITS, 1.2 * MEGABYTE_BITS)
    tau_max: float = 3.0  # s, per-device deadline
    p_max: float = 0.1  # W, per-device transmit power budget
    p_idle: float = 0.005  # W, device idle draw while the edge computes
    f_loc_range: tuple[float, float] = (0.2e9, 0.5e9)  # cycles/s
    f_c_range: tuple[float, float] = (0.8e9, 1.0e9)  # cycles/s
    kappa: float = 1e-25  # effective switched capacitance
    alpha: float = 237.5  # cycles per bit
    lambda_e: float = 1.0  # energy weight
    lambda_t: float = 0.0  # delay weight
    gamma: float = 0.8  # offload-score rounding threshold
    epsilon: float = 1e-3  # beamforming loop stop tolerance
    numiter: int = 100  # beamforming loop iteration cap
    seed: int = 0
    intra_stream_interference: bool = False

    def __post_init__(self) -> None:
        if self.num_devices < 1:
            raise InvalidConfig("num_devices must be at least 1")
        if self.streams > self.md_antennas:
            raise InvalidConfig(
                f"streams={self.streams} exceeds md_antennas={self.md_antennas}"
            )
        if self.streams < 1 or self.md_antennas < 1 or self.bs_antennas < 1:
            raise InvalidConfig("antenna and stream counts must be positive")
        if self.bandwidth <= 0:
            raise InvalidConfig("bandwidth must be positive")
        if self.min_distance < 1.0:
            raise InvalidConfig("min_distance below the 1 m pathloss validity floor")
        if self.cell_radius < self.min_distance:
            raise InvalidConfig("cell_radius must be at least min_distance")
        for name in ("task_bits_range", "f_loc_range", "f_c_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise InvalidConfig(f"{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidConfig("gamma must lie in [0, 1]")
        if self.tau_max <= 0 or self.p_max <= 0:
            raise InvalidConfig("tau_max and p_max must be positive")
        if self.num_devices * self.streams > self.bs_antennas:
            # Kept as a warning: the spatial multiplexing assumption K*d <= M
            # is violated in the upper end of the device sweeps, where the
            # cell is deliberately overloaded.
            log.warning(
                "num_devices*streams=%d exceeds bs_antennas=%d; "
                "the cell is spatially overloaded",
                self.num_devices * self.streams,
                self.bs_antennas,
            )

    @property
    def noise_power(self) -> float:
        """Thermal noise power over the full band, in watts."""
        return 10.0 ** ((self.noise_density - 30.0) / 10.0) * self.bandwidth


@dataclasses.dataclass(frozen=True)
class MobileDevice:
    """One device's task and compute parameters."""

    index: int
    distance: float  # m from the BS
    task_bits: float  # payload size in bits
    tau_max: float  # s
    f_loc: float  # local CPU, cycles/s
    f_c: float  # assigned edge CPU share, cycles/s


@dataclasses.dataclass(frozen=True)
class Scenario:
    """A fully drawn cell: devices plus channel realizations."""

    config: ScenarioConfig
    devices: tuple[MobileDevice, ...]
    channels: np.ndarray  # complex, shape (K, M, N)
    gains: np.ndarray  # pathloss power gains, shape (K,)

    @property
    def num_devices(self) -> int:
        return len(self.devices)

    @property
    def noise_power(self) -> float:
        return self.config.noise_power


def pathloss_linear(distance_m: float) -> float:
    """Linear power gain of the 3GPP pathloss 128.1 + 37.6*log10(d_km) dB.

    Valid for distances of 1 m and above; shorter distances raise
    :class:`DistanceTooSmall`.
    """
    if distance_m < 1.0:
        raise DistanceTooSmall(f"pathloss model invalid below 1 m, got {distance_m}")
    loss_db = 128.1 + 37.6 * math.log10(distance_m / 1000.0)
    return 10.0 ** (-loss_db / 10.0)


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    key = np.array([seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Draw devices and channels for ``config`` deterministically from its seed."""
    k_devices = config.num_devices
    params = _stream(config.seed, 0)
    distances = params.uniform(config.min_distance, config.cell_radius, size=k_devices)
    task_bits = params.uniform(*config.task_bits_range, size=k_devices)
    f_loc = params.uniform(*config.f_loc_range, size=k_devices)
    f_c = params.uniform(*config.f_c_range, size=k_devices)

    gains = np.array([pathloss_linear(d) for d in distances])
    m, n = config.bs_antennas, config.md_antennas
    channels = np.empty((k_devices, m, n), dtype=complex)
    for k in range(k_devices):
        chan = _stream(config.seed, 1 + k)
        real = chan.standard_normal((m, n))
        imag = chan.standard_normal((m, n))
        channels[k] = math.sqrt(gains[k] / 2.0) * (real + 1j * imag)

    devices = tuple(
        MobileDevice(
            index=k,
            distance=float(distances[k]),
            task_bits=float(task_bits[k]),
            tau_max=config.tau_max,
            f_loc=float(f_loc[k]),
            f_c=float(f_c[k]),
        )
        for k in range(k_devices)
    )
    return Scenario(config=config, devices=devices, channels=channels, gains=gains)


_RANGE_FIELDS = {"task_bits_range", "f_loc_range", "f_c_range"}
_INT_FIELDS = {"num_devices", "bs_antennas", "md_antennas", "streams", "numiter", "seed"}
_BOOL_FIELDS = {"intra_stream_interference"}


def _parse_value(key: str, raw: str):
    if key in _RANGE_FIELDS:
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise InvalidConfig(f"{key} expects 'lo,hi', got {raw!r}")
        return (float(parts[0]), float(parts[1]))
    if key in _INT_FIELDS:
        return int(raw)
    if key in _BOOL_FIELDS:
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise InvalidConfig(f"{key} expects a boolean, got {raw!r}")
    return float(raw)


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a flat ``key=value`` config file; unknown keys are an error.

    Blank lines and lines starting with ``#`` are ignored.  Keys are exactly
    the :class:`ScenarioConfig` field names; range fields take ``lo,hi``.
    """
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    overrides: dict = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InvalidConfig(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise InvalidConfig(f"{path}:{lineno}: unknown config key {key!r}")
        if key in overrides:
            raise InvalidConfig(f"{path}:{lineno}: duplicate config key {key!r}")
        try:
            overrides[key] = _parse_value(key, raw.strip())
        except ValueError as exc:
            raise InvalidConfig(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return ScenarioConfig(**overrides)
