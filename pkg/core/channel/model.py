# core/channel/model.py
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import CapacityDomainError, DegenerateGeometryError, RelayNetError

logger = logging.getLogger("ChannelModel")

_LN2 = math.log(2.0)

# Magnitudes |h_ij| of the two-relay example network; entries are squared on load.
TWO_RELAY_EXAMPLE_MAGNITUDES = (
    (0.0, 1.2, 0.8, 0.2),
    (1.2, 0.0, 2.0, 0.8),
    (0.8, 2.0, 0.0, 1.2),
    (0.2, 0.8, 1.2, 0.0),
)


def capacity(x):
    """
    Gaussian capacity function C(x) = log2(1 + x).

    Accepts a scalar or an array of SNR values.

    Args:
        x (float | np.ndarray): Nonnegative, finite SNR value(s)

    Returns:
        float | np.ndarray: Rate in bits per channel use

    Raises:
        CapacityDomainError: If any value is negative or not finite
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise CapacityDomainError(f"C(x) requires a finite argument, got {x}")
    if np.any(arr < 0):
        raise CapacityDomainError(f"C(x) requires a nonnegative argument, got {x}")
    out = np.log1p(arr) / _LN2
    if out.ndim == 0:
        return float(out)
    return out


def db_to_linear(p_db: float) -> float:
    """Convert a power in dB to linear scale."""
    return float(10.0 ** (p_db / 10.0))


def linear_to_db(p: float) -> float:
    """Convert a linear power to dB."""
    if p <= 0:
        raise RelayNetError(f"Power must be positive to convert to dB, got {p}")
    return float(10.0 * math.log10(p))


@dataclass(frozen=True)
class NodeId:
    """
    A node of the relay network.

    Index 0 is terminal a, index m+1 is terminal b, 1..m are the relays.
    """

    index: int
    m: int

    def __post_init__(self):
        if not 0 <= self.index <= self.m + 1:
            raise RelayNetError(f"Node index {self.index} out of range for m={self.m}")

    @property
    def is_terminal(self) -> bool:
        return self.index in (0, self.m + 1)

    @property
    def label(self) -> str:
        if self.index == 0:
            return "a"
        if self.index == self.m + 1:
            return "b"
        return f"r{self.index}"


@dataclass(frozen=True)
class PowerConfig:
    """Total per-phase transmit power, noise normalized to unit power."""

    P: float

    def __post_init__(self):
        if not (self.P > 0 and math.isfinite(self.P)):
            raise RelayNetError(f"Power must be positive and finite, got {self.P}")

    @classmethod
    def from_db(cls, p_db: float) -> "PowerConfig":
        return cls(db_to_linear(p_db))


@dataclass(frozen=True)
class GainMatrix:
    """
    Symmetric squared channel magnitudes |h_ij|^2 among the m+2 nodes.

    Node 0 is terminal a, node m+1 is terminal b. The matrix is stored
    read-only; constructors validate reciprocity, a zero diagonal and
    nonnegative entries.
    """

    m: int
    g: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.g, dtype=float)
        n = self.m + 2
        if self.m < 0 or arr.shape != (n, n):
            raise RelayNetError(f"Gain matrix must be {n}x{n} for m={self.m}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise RelayNetError("Gain matrix entries must be finite and nonnegative")
        if not np.allclose(arr, arr.T, rtol=0.0, atol=1e-12):
            raise RelayNetError("Gain matrix must be symmetric (reciprocal channel)")
        if np.any(np.diag(arr) != 0):
            raise RelayNetError("Gain matrix diagonal must be zero")
        arr = (arr + arr.T) / 2.0
        arr.setflags(write=False)
        object.__setattr__(self, "g", arr)

    @property
    def size(self) -> int:
        return self.m + 2

    @property
    def a(self) -> int:
        return 0

    @property
    def b(self) -> int:
        return self.m + 1

    @property
    def relays(self) -> Tuple[int, ...]:
        return tuple(range(1, self.m + 1))

    def __call__(self, i: int, j: int) -> float:
        return float(self.g[i, j])

    def node(self, index: int) -> NodeId:
        return NodeId(index, self.m)

    def swap_terminals(self) -> "GainMatrix":
        """Relabel a<->b and reverse the relay order."""
        perm = np.arange(self.size)[::-1]
        return GainMatrix(self.m, self.g[np.ix_(perm, perm)])

    def restrict(self, relays: Sequence[int]) -> "GainMatrix":
        """
        Induced network on the given relays (terminals always kept).

        The kept relays are renumbered 1..len(relays) in the given order.
        """
        nodes = [0] + list(relays) + [self.b]
        if len(set(nodes)) != len(nodes):
            raise RelayNetError(f"Duplicate relays in restriction: {list(relays)}")
        for r in relays:
            if r not in self.relays:
                raise RelayNetError(f"Relay {r} not in network with m={self.m}")
        return GainMatrix(len(relays), self.g[np.ix_(nodes, nodes)])

    def reorder(self, order: Sequence[int]) -> "GainMatrix":
        """Network whose k-th relay is relay ``order[k-1]`` of this one."""
        if sorted(order) != list(self.relays):
            raise RelayNetError(f"Order {list(order)} is not a permutation of relays 1..{self.m}")
        return self.restrict(order)

    def h_min_sq(self) -> float:
        off = self.g[~np.eye(self.size, dtype=bool)]
        return float(off.min())

    def h_max_sq(self) -> float:
        off = self.g[~np.eye(self.size, dtype=bool)]
        return float(off.max())

    def to_json(self) -> str:
        return json.dumps({"m": self.m, "g": self.g.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GainMatrix":
        data = json.loads(text)
        if "m" not in data or "g" not in data:
            raise RelayNetError("Gain matrix JSON must contain 'm' and 'g'")
        return cls(int(data["m"]), np.array(data["g"], dtype=float))

    def write_csv(self, path: str) -> None:
        """Write as CSV: a header line ``m=<value>`` followed by m+2 rows."""
        with open(path, "w", newline="") as f:
            f.write(f"m={self.m}\n")
            pd.DataFrame(self.g).to_csv(f, header=False, index=False)
        logger.debug(f"Wrote gain matrix (m={self.m}) to {path}")

    @classmethod
    def read_csv(cls, path: str) -> "GainMatrix":
        with open(path, "r") as f:
            header = f.readline().strip()
            if not header.startswith("m="):
                raise RelayNetError(f"Gain matrix CSV must start with 'm=<value>', got '{header}'")
            m = int(header[2:])
            frame = pd.read_csv(f, header=None)
        return cls(m, frame.to_numpy(dtype=float))

    def write_json(self, path: str) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def read_json(cls, path: str) -> "GainMatrix":
        with open(path, "r") as f:
            return cls.from_json(f.read())

    @classmethod
    def load(cls, path: str) -> "GainMatrix":
        """Load from ``.csv`` or ``.json`` depending on the extension."""
        if path.lower().endswith(".json"):
            return cls.read_json(path)
        return cls.read_csv(path)


@dataclass(frozen=True)
class Geometry:
    """
    Nodes placed on a line segment with pathloss |h_ij|^2 = k / d_ij^exponent.

    ``positions`` lists every node, terminal a first (at 0) and terminal b
    last (at d_ab).
    """

    positions: Tuple[float, ...]
    pathloss_exponent: float = 3.8
    k: float = 1.0
    direct_gain_override: Optional[float] = None

    def __post_init__(self):
        pos = tuple(float(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(pos) < 3:
            raise DegenerateGeometryError("A line geometry needs both terminals and at least one relay")
        if pos[0] != 0.0:
            raise DegenerateGeometryError(f"Terminal a must sit at 0, got {pos[0]}")
        if self.pathloss_exponent <= 0 or self.k <= 0:
            raise RelayNetError(
                f"Pathloss exponent and constant must be positive, got {self.pathloss_exponent}, {self.k}"
            )
        for left, right in zip(pos, pos[1:]):
            if right <= left:
                raise DegenerateGeometryError(f"Node positions must be strictly increasing, got {pos}")

    @property
    def m(self) -> int:
        return len(self.positions) - 2

    @property
    def d_ab(self) -> float:
        return self.positions[-1]

    def gains(self) -> GainMatrix:
        pos = np.asarray(self.positions)
        dist = np.abs(pos[:, None] - pos[None, :])
        g = np.zeros_like(dist)
        off = ~np.eye(len(pos), dtype=bool)
        g[off] = self.k / dist[off] ** self.pathloss_exponent
        if self.direct_gain_override is not None:
            g[0, -1] = g[-1, 0] = float(self.direct_gain_override)
        return GainMatrix(self.m, g)


def line_gains(m: int, d_ab: float = 1.0, exponent: float = 3.8, k: float = 1.0,
               h_ab_sq: Optional[float] = None) -> GainMatrix:
    """
    Gains for m relays evenly spaced on the a-b segment.

    Relay i sits at i/(m+1) * d_ab.

    Args:
        m (int): Relay count (>= 1)
        d_ab (float): Terminal separation
        exponent (float): Pathloss exponent
        k (float): Pathloss constant
        h_ab_sq (float, optional): Squared direct a-b gain replacing k/d_ab^exponent

    Returns:
        GainMatrix: The symmetric gain matrix

    Raises:
        RelayNetError: On nonpositive parameters
        DegenerateGeometryError: If two nodes coincide
    """
    if m < 1:
        raise RelayNetError(f"line_gains needs at least one relay, got m={m}")
    if d_ab <= 0:
        raise DegenerateGeometryError(f"Terminal distance must be positive, got {d_ab}")
    positions = tuple(i / (m + 1) * d_ab for i in range(m + 2))
    return Geometry(positions, exponent, k, h_ab_sq).gains()


def positions_gains(relay_positions: Sequence[float], d_ab: float = 1.0, exponent: float = 3.8,
                    k: float = 1.0, h_ab_sq: Optional[float] = None) -> GainMatrix:
    """Gains for relays at explicit positions strictly inside (0, d_ab)."""
    positions = (0.0,) + tuple(relay_positions) + (float(d_ab),)
    return Geometry(positions, exponent, k, h_ab_sq).gains()


def two_relay_example_gains() -> GainMatrix:
    """
    The two-relay example network.

    The reference matrix lists magnitudes |h_ij|; every entry is squared
    here because all rate formulas consume |h_ij|^2.
    """
    return GainMatrix(2, np.square(np.array(TWO_RELAY_EXAMPLE_MAGNITUDES)))


def equal_gain_matrix(m: int, h_sq: float = 1.0) -> GainMatrix:
    """Network where every pair of distinct nodes has squared gain ``h_sq``."""
    n = m + 2
    return GainMatrix(m, h_sq * (np.ones((n, n)) - np.eye(n)))


def equal_power_split(transmitters: Iterable[int], P: float) -> Dict[int, float]:
    """
    Split the per-phase power P equally among the transmitters.

    Args:
        transmitters: Node indices transmitting in the phase
        P (float): Total phase power

    Returns:
        dict: node index -> power

    Raises:
        RelayNetError: If the set is empty or P is not positive
    """
    nodes = sorted(set(transmitters))
    if not nodes:
        raise RelayNetError("Cannot split power over an empty transmitter set")
    if P <= 0:
        raise RelayNetError(f"Power must be positive, got {P}")
    share = P / len(nodes)
    return {n: share for n in nodes}
