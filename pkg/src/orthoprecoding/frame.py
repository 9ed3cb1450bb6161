"""Time-frequency grid configuration, vectorization and pilot multiplexing.

Grids are stored as ``(N, M)`` arrays indexed ``[q, m]`` (subcarrier, OFDM
symbol). Vectorization stacks the columns, so grid point ``(q, m)`` lands at
vector index ``m * N + q``. Every module uses this single ordering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

QPSK_BITS = 2


class ConfigurationError(ValueError):
    """Raised for inconsistent frame, code or simulation parameters."""


def vec(grid: np.ndarray) -> np.ndarray:
    """Stack the columns of an ``(N, M)`` grid into a length ``M*N`` vector."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {grid.shape}")
    return grid.reshape(-1, order="F")


def unvec(v: np.ndarray, n_subcarriers: int, n_symbols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if v.size != n_subcarriers * n_symbols:
        raise ValueError(
            f"vector of length {v.size} does not fit a {n_subcarriers}x{n_symbols} grid"
        )
    return v.reshape(n_subcarriers, n_symbols, order="F")


def pilot_symbol_times(n_symbols: int, n_pilot_symbols: int) -> tuple[int, ...]:
    """Time indices ``floor(i*M/J + M/(2J))`` of dedicated pilot OFDM symbols."""
    M, J = n_symbols, n_pilot_symbols
    if J < 0:
        raise ConfigurationError("number of pilot symbols must be non-negative")
    if J > M:
        raise ConfigurationError(f"{J} pilot symbols do not fit into {M} OFDM symbols")
    # floor((2iM + M) / 2J) in exact integer arithmetic
    return tuple((2 * i * M + M) // (2 * J) for i in range(J))


@dataclass(frozen=True)
class FrameConfig:
    """OFDM numerology and link parameters of one frame.

    Defaults follow the IEEE 802.11p-like setup: 64 subcarriers, 44 OFDM
    symbols, 10 MHz bandwidth at 5.9 GHz, 16-sample cyclic prefix and four
    dedicated pilot symbols.
    """

    n_subcarriers: int = 64
    n_symbols: int = 44
    cp_length: int = 16
    bandwidth: float = 10e6
    carrier_freq: float = 5.9e9
    n_pilot_symbols: int = 4
    pilot_symbol_indices: tuple[int, ...] | None = None
    modulation: str = "qpsk"
    code_rate: float = 0.5
    n_iterations: int = 3
    tx_window: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise ConfigurationError("grid dimensions must be positive")
        if self.cp_length < 0:
            raise ConfigurationError("cyclic prefix length must be non-negative")
        if self.modulation.lower() != "qpsk":
            raise ConfigurationError(f"unsupported modulation {self.modulation!r}")
        if self.n_iterations < 1:
            raise ConfigurationError("at least one receiver iteration is required")
        if self.pilot_symbol_indices is None:
            times = pilot_symbol_times(self.n_symbols, self.n_pilot_symbols)
        else:
            times = tuple(sorted(int(m) for m in self.pilot_symbol_indices))
            if len(set(times)) != len(times):
                raise ConfigurationError("duplicate pilot symbol index")
            if any(m < 0 or m >= self.n_symbols for m in times):
                raise ConfigurationError("pilot symbol index outside the frame")
        object.__setattr__(self, "pilot_symbol_indices", times)
        object.__setattr__(self, "n_pilot_symbols", len(times))
        if self.tx_window is not None:
            w = np.asarray(self.tx_window, dtype=float)
            if w.size != self.n_subcarriers * self.n_symbols:
                raise ConfigurationError("tx_window must have one gain per grid point")
            if not np.allclose(w, 1.0):
                raise ConfigurationError("only the rectangular TX window is supported")

    @property
    def bits_per_symbol(self) -> int:
        return QPSK_BITS

    @property
    def chip_duration(self) -> float:
        return 1.0 / self.bandwidth

    @property
    def symbol_duration(self) -> float:
        return self.chip_duration * (self.n_subcarriers + self.cp_length)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.n_subcarriers, self.n_symbols)

    @property
    def grid_size(self) -> int:
        return self.n_subcarriers * self.n_symbols

    @property
    def data_symbol_indices(self) -> tuple[int, ...]:
        pilots = set(self.pilot_symbol_indices)
        return tuple(m for m in range(self.n_symbols) if m not in pilots)

    @property
    def data_shape(self) -> tuple[int, int]:
        """``(N', M')`` of the data sub-grid."""
        return (self.n_subcarriers, len(self.data_symbol_indices))

    @property
    def n_data(self) -> int:
        return self.n_subcarriers * len(self.data_symbol_indices)

    @property
    def n_pilots(self) -> int:
        return self.n_subcarriers * self.n_pilot_symbols

    @property
    def n_code_bits(self) -> int:
        return self.n_data * self.bits_per_symbol

    @classmethod
    def from_dict(cls, d: dict) -> "FrameConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown frame keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("pilot_symbol_indices", "tx_window"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "FrameConfig":
        return cls.from_dict(load_mapping(path))

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["pilot_symbol_indices"] = list(self.pilot_symbol_indices)
        if self.tx_window is not None:
            out["tx_window"] = list(self.tx_window)
        return out


def load_mapping(path: str | Path) -> dict:
    """Read a JSON or YAML mapping from ``path`` (chosen by file extension)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping at the top level")
    return data


@dataclass(frozen=True)
class PilotPattern:
    """Placement of pilots and data on the grid.

    ``pilot_index`` and ``data_index`` are vector indices (see :func:`vec`);
    together they form the permutation ``[P_p P_d]``.
    """

    n_subcarriers: int
    n_symbols: int
    pilot_index: np.ndarray
    data_index: np.ndarray
    pilot_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        both = np.concatenate([self.pilot_index, self.data_index])
        if both.size != self.grid_size or not np.array_equal(
            np.sort(both), np.arange(self.grid_size)
        ):
            raise ConfigurationError("pilot and data positions must partition the grid")
        if self.pilot_values.size != self.pilot_index.size:
            raise ConfigurationError("one pilot value per pilot position is required")
        for arr in (self.pilot_index, self.data_index, self.pilot_values):
            arr.setflags(write=False)

    @property
    def grid_size(self) -> int:
        return self.n_subcarriers * self.n_symbols

    @property
    def n_pilots(self) -> int:
        return self.pilot_index.size

    @property
    def n_data(self) -> int:
        return self.data_index.size

    @property
    def pilot_positions(self) -> list[tuple[int, int]]:
        return [divmod_qm(k, self.n_subcarriers) for k in self.pilot_index]

    @property
    def data_positions(self) -> list[tuple[int, int]]:
        return [divmod_qm(k, self.n_subcarriers) for k in self.data_index]

    def selection_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``P_p`` (MN x S_p) and ``P_d`` (MN x S_d)."""
        eye = np.eye(self.grid_size)
        return eye[:, self.pilot_index], eye[:, self.data_index]

    def multiplex(self, data: np.ndarray, pilots: np.ndarray | None = None) -> np.ndarray:
        """Return ``P_p p + P_d d`` as a grid vector."""
        data = np.asarray(data)
        if data.shape[-1] != self.n_data:
            raise ValueError(f"expected {self.n_data} data symbols, got {data.shape[-1]}")
        p = self.pilot_values if pilots is None else np.asarray(pilots)
        out = np.zeros(data.shape[:-1] + (self.grid_size,), dtype=np.result_type(data, p, complex))
        out[..., self.pilot_index] = p
        out[..., self.data_index] = data
        return out

    def data_part(self, v: np.ndarray) -> np.ndarray:
        """``P_d^T v``."""
        return np.asarray(v)[..., self.data_index]

    def pilot_part(self, v: np.ndarray) -> np.ndarray:
        """``P_p^T v``."""
        return np.asarray(v)[..., self.pilot_index]


def divmod_qm(k: int, n_subcarriers: int) -> tuple[int, int]:
    m, q = divmod(int(k), n_subcarriers)
    return (q, m)


def qpsk_pilots(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n, 2))
    return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / np.sqrt(2)


def default_pilot_pattern(config: FrameConfig, seed: int = 0) -> PilotPattern:
    """Whole-symbol pilot pattern with unit-modulus random QPSK pilot values."""
    N, M = config.grid_shape
    is_pilot = np.zeros(M, dtype=bool)
    is_pilot[list(config.pilot_symbol_indices)] = True
    idx = np.arange(N * M).reshape(N, M, order="F")
    pilot_index = vec(idx[:, is_pilot])
    data_index = vec(idx[:, ~is_pilot])
    return PilotPattern(N, M, pilot_index, data_index, qpsk_pilots(pilot_index.size, seed))
