"""Configuration, sweeps, validation runs and file output."""

from .config import SimConfig, TopologySpec, dump_config, load_config, parse_config_text
from .io import export_topology, read_csv, write_csv, write_plot_stub, write_validation_csv
from .sweep import SweepResult, SweepRow, build_placement, run_sweep
from .validation import ValidationResult, ValidationRow, run_validation, validate_gains

__all__ = [
    "SimConfig",
    "TopologySpec",
    "dump_config",
    "load_config",
    "parse_config_text",
    "SweepResult",
    "SweepRow",
    "build_placement",
    "run_sweep",
    "ValidationResult",
    "ValidationRow",
    "run_validation",
    "validate_gains",
    "write_csv",
    "read_csv",
    "write_validation_csv",
    "export_topology",
    "write_plot_stub",
]
