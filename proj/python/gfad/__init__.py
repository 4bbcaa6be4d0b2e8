"""Statistical device activity detection for OFDM-based grant-free access."""

from gfad._core import (
    CSV_HEADER,
    Instance,
    PriorModel,
    SystemConfig,
    detect,
    dft_matrix,
    make_instance,
    run_config,
    selftest,
    threshold,
)

DETECTORS = (
    "ml-act",
    "ml-virt-pen",
    "ml-virt-rel",
    "map-act",
    "map-virt-pen",
    "map-virt-rel",
    "bl-ml-flat",
)

__all__ = [
    "CSV_HEADER",
    "DETECTORS",
    "Instance",
    "PriorModel",
    "SystemConfig",
    "detect",
    "dft_matrix",
    "make_instance",
    "run_config",
    "selftest",
    "threshold",
]
