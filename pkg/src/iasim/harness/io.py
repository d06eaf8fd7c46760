"""CSV emission and parsing for sweeps, validation tables and placements."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from ..errors import ConfigError
from ..topology import NodePlacement
from .config import SimConfig, dump_config
from .sweep import SweepResult, SweepRow
from .validation import ValidationResult

__all__ = [
    "SWEEP_HEADER",
    "TOPOLOGY_HEADER",
    "VALIDATION_HEADER",
    "write_csv",
    "read_csv",
    "write_validation_csv",
    "export_topology",
    "write_plot_stub",
]

SWEEP_HEADER = ("p_t_dbm", "scheme", "mean_sum_rate_bits", "std_err", "realizations")
VALIDATION_HEADER = ("p_t_dbm", "analytic_bits", "simulated_bits", "std_err", "relative_gap", "blocks", "nonconverged")
TOPOLOGY_HEADER = ("node_type", "index", "x_m", "y_m", "associated_tx")


def _g(x: float) -> str:
    return format(float(x), ".9g")


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


def _table(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _meta_text(cfg: SimConfig | None, extra: dict) -> str:
    lines = dump_config(cfg) if cfg is not None else ""
    for key, val in sorted(extra.items()):
        if key != "master_seed" or cfg is None:
            lines += f"# {key} = {val}\n"
    return lines


def write_csv(result: SweepResult, path) -> Path:
    """Write the sweep table and a ``<path>.meta`` echo of the configuration."""
    path = Path(path)
    rows = sorted(result.rows, key=lambda r: (r.p_t_dbm, r.scheme))
    body = _table(
        SWEEP_HEADER,
        ([_g(r.p_t_dbm), r.scheme, _g(r.mean_sum_rate), _g(r.std_err), str(r.realizations)] for r in rows),
    )
    _write_text(path, body)
    _write_text(path.with_name(path.name + ".meta"), _meta_text(result.config, result.metadata))
    return path


def read_csv(path) -> SweepResult:
    """Parse a sweep CSV back into a :class:`SweepResult` (without config)."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            if header != SWEEP_HEADER:
                raise ConfigError(f"{path}: unexpected header {','.join(header)!r}")
            rows = [SweepRow(float(a), b, float(c), float(d), int(e)) for a, b, c, d, e in reader]
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read {path}: {exc.strerror}") from None
    return SweepResult(rows)


def write_validation_csv(result: ValidationResult, path) -> Path:
    path = Path(path)
    body = _table(
        VALIDATION_HEADER,
        (
            [_g(r.p_t_dbm), _g(r.analytic), _g(r.simulated), _g(r.std_err), _g(r.gap), r.blocks, r.nonconverged]
            for r in result.rows
        ),
    )
    _write_text(path, body)
    _write_text(path.with_name(path.name + ".meta"), _meta_text(result.config, {"csi": result.csi}))
    return path


def export_topology(placement: NodePlacement, path) -> Path:
    """Node positions; transmitters list their own index when they serve a receiver.

    Receivers always list their serving transmitter.  Idle transmitters leave
    ``associated_tx`` empty.
    """
    active = placement.active_tx
    rows = []
    for i, (x, y) in enumerate(placement.tx_positions):
        rows.append(["tx", i, _g(x), _g(y), i if i in active else ""])
    for k, (x, y) in enumerate(placement.rx_positions):
        rows.append(["rx", k, _g(x), _g(y), int(placement.association[k])])
    path = Path(path)
    _write_text(path, _table(TOPOLOGY_HEADER, rows))
    return path


_PLOT_STUB = '''"""Plot a sum-rate sweep CSV: python {name} results.csv [figure.png]"""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

curves = defaultdict(list)
with open(sys.argv[1], newline="") as fh:
    for row in csv.DictReader(fh):
        curves[row["scheme"]].append((float(row["p_t_dbm"]), float(row["mean_sum_rate_bits"])))

for scheme, pts in sorted(curves.items()):
    pts.sort()
    plt.plot([p for p, _ in pts], [m for _, m in pts], marker="o", label=scheme)
plt.xlabel("transmit power [dBm]")
plt.ylabel("effective sum-rate [bits/s/Hz]")
plt.grid(True)
plt.legend()
if len(sys.argv) > 2:
    plt.savefig(sys.argv[2], dpi=150)
else:
    plt.show()
'''


def write_plot_stub(path) -> Path:
    """Standalone matplotlib script for a sweep CSV; matplotlib is not needed here."""
    path = Path(path)
    _write_text(path, _PLOT_STUB.format(name=path.name))
    return path
