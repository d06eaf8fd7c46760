"""Node placement for line, grid and random deployments, plus path loss.

All coordinates are in meters.  Gains are linear received-power ratios,
``P_r = P_t * gains[k, i]`` for receiver ``k`` and (active) transmitter ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "NodePlacement",
    "PathLossModel",
    "LinkGainMatrix",
    "place_line",
    "place_grid",
    "place_random",
    "associate_nearest",
    "path_loss_db",
    "link_gains",
    "dbm_to_mw",
    "mw_to_dbm",
    "area_side",
]


def dbm_to_mw(p_dbm):
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def mw_to_dbm(p_mw):
    return 10.0 * np.log10(np.asarray(p_mw, dtype=float))


@dataclass
class NodePlacement:
    """Positions of transmitters and receivers and the serving association.

    ``association[k]`` is the transmitter index serving receiver ``k``.
    ``bounds`` is the ``(width, height)`` of the deployment area, anchored
    at the origin.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    association: np.ndarray
    bounds: tuple[float, float]
    kind: str = "custom"

    def __post_init__(self):
        self.tx_positions = np.asarray(self.tx_positions, dtype=float).reshape(-1, 2)
        self.rx_positions = np.asarray(self.rx_positions, dtype=float).reshape(-1, 2)
        self.association = np.asarray(self.association, dtype=int)
        if self.association.shape != (self.num_rx,):
            raise ConfigError("association must map every receiver to one transmitter")
        if np.any(self.association < 0) or np.any(self.association >= self.num_tx):
            raise ConfigError("association refers to a non-existent transmitter")
        if len(set(self.association.tolist())) != self.num_rx:
            raise ConfigError("two receivers share a serving transmitter")

    @property
    def num_tx(self) -> int:
        return len(self.tx_positions)

    @property
    def num_rx(self) -> int:
        return len(self.rx_positions)

    @property
    def active_tx(self) -> frozenset[int]:
        return frozenset(int(i) for i in self.association)

    def distances(self) -> np.ndarray:
        """``(K, K)`` distances; entry ``(k, i)`` is rx ``k`` to the tx serving rx ``i``."""
        tx = self.tx_positions[self.association]
        diff = self.rx_positions[:, None, :] - tx[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance model ``PL = reference_loss_db + 10 * exponent * log10(r)``."""

    exponent: float = 3.2
    reference_loss_db: float = 30.0

    def __post_init__(self):
        if not self.exponent > 0:
            raise ConfigError(f"path-loss exponent must be > 0, got {self.exponent}")
        if self.reference_loss_db < 0:
            raise ConfigError("reference loss must be non-negative")


@dataclass
class LinkGainMatrix:
    """Large-scale gains re-indexed so that ``gains[k, k]`` is the direct link."""

    gains: np.ndarray
    distances: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        if self.gains.ndim != 2 or self.gains.shape[0] != self.gains.shape[1]:
            raise ConfigError("gain matrix must be square")

    @property
    def K(self) -> int:
        return self.gains.shape[0]

    def received_power(self, p_t: float) -> np.ndarray:
        """``P_r[k, i]`` in the unit of ``p_t`` (mW)."""
        return p_t * self.gains


def _check_k(K: int) -> None:
    if K < 2:
        raise ConfigError(f"an interference network needs K >= 2 pairs, got {K}")


def _cell_placement(centers: np.ndarray, cell_side: float, rng, bounds, kind) -> NodePlacement:
    offsets = rng.uniform(-cell_side / 2, cell_side / 2, size=centers.shape)
    rx = centers + offsets
    return NodePlacement(centers, rx, np.arange(len(centers)), bounds, kind)


def place_line(K: int, cell_side: float = 5.0, rng_seed=None) -> NodePlacement:
    """``K`` adjacent squares in a row, tx at each center, rx uniform in its square."""
    _check_k(K)
    if not cell_side > 0:
        raise ConfigError("cell_side must be > 0")
    rng = np.random.default_rng(rng_seed)
    centers = np.column_stack([(np.arange(K) + 0.5) * cell_side, np.full(K, cell_side / 2)])
    return _cell_placement(centers, cell_side, rng, (K * cell_side, cell_side), "line")


def place_grid(rows: int, cols: int, cell_side: float = 5.0, rng_seed=None) -> NodePlacement:
    """``rows x cols`` cells, numbered row-major starting at the origin corner."""
    if rows < 1 or cols < 1:
        raise ConfigError("grid needs at least one row and one column")
    _check_k(rows * cols)
    if not cell_side > 0:
        raise ConfigError("cell_side must be > 0")
    rng = np.random.default_rng(rng_seed)
    r, c = np.divmod(np.arange(rows * cols), cols)
    centers = np.column_stack([(c + 0.5) * cell_side, (r + 0.5) * cell_side])
    return _cell_placement(centers, cell_side, rng, (cols * cell_side, rows * cell_side), "grid")


def associate_nearest(tx_positions, rx_positions) -> np.ndarray:
    """Serve each receiver from its closest transmitter, one receiver per transmitter.

    Receivers choose greedily in index order; a receiver whose nearest
    transmitter is already claimed takes its nearest unclaimed one.  Distance
    ties go to the lowest transmitter index.
    """
    tx = np.asarray(tx_positions, dtype=float).reshape(-1, 2)
    rx = np.asarray(rx_positions, dtype=float).reshape(-1, 2)
    if len(tx) < len(rx):
        raise ConfigError(f"need at least as many transmitters ({len(tx)}) as receivers ({len(rx)})")
    diff = rx[:, None, :] - tx[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    assoc = np.empty(len(rx), dtype=int)
    free = np.ones(len(tx), dtype=bool)
    for k in range(len(rx)):
        t = int(np.argmin(np.where(free, dist[k], np.inf)))
        assoc[k] = t
        free[t] = False
    return assoc


def place_random(n_tx: int, K: int, side: float = 10.0, rng_seed=None) -> NodePlacement:
    """``n_tx`` transmitters and ``K`` receivers uniform in a ``side x side`` square."""
    _check_k(K)
    if n_tx < K:
        raise ConfigError(f"random topology needs n_tx >= K, got n_tx={n_tx}, K={K}")
    if not side > 0:
        raise ConfigError("side must be > 0")
    rng = np.random.default_rng(rng_seed)
    tx = rng.uniform(0.0, side, size=(n_tx, 2))
    rx = rng.uniform(0.0, side, size=(K, 2))
    return NodePlacement(tx, rx, associate_nearest(tx, rx), (side, side), "random")


def path_loss_db(r, model: PathLossModel | None = None):
    """Path loss in dB; distances under 1 m are clamped to the reference distance."""
    model = model or PathLossModel()
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("path loss needs positive distances")
    out = model.reference_loss_db + 10.0 * model.exponent * np.log10(np.maximum(r, 1.0))
    return float(out) if out.ndim == 0 else out


def link_gains(placement: NodePlacement, model: PathLossModel | None = None) -> LinkGainMatrix:
    dist = placement.distances()
    # coincident nodes sit at the clamp anyway
    pl = path_loss_db(np.maximum(dist, 1.0), model)
    return LinkGainMatrix(10.0 ** (-pl / 10.0), dist)


def area_side(K: int, cell_side: float = 5.0) -> float:
    """Side of the square whose area matches ``K`` cells of ``cell_side``."""
    return cell_side * math.sqrt(K)
