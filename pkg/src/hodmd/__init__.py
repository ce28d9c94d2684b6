"""Higher order dynamic mode decomposition for snapshot matrices and image sequences."""

__version__ = "0.1.0"

from .hodmd import (  # noqa: E402
    DMDExpansion,
    HODMDConfig,
    ReconstructionReport,
    calibrate_d,
    reconstruct,
    rrmse,
    run_hodmd,
)
from .hosvd import HOSVDResult, hosvd, reconstruct_hosvd  # noqa: E402
from .linalg import TruncatedSVD, fold, tprod, truncated_svd, unfold  # noqa: E402
from .multidim import TensorDMDExpansion, run_multidim_hodmd  # noqa: E402

__all__ = [
    "DMDExpansion",
    "HODMDConfig",
    "HOSVDResult",
    "ReconstructionReport",
    "TensorDMDExpansion",
    "TruncatedSVD",
    "calibrate_d",
    "fold",
    "hosvd",
    "reconstruct",
    "reconstruct_hosvd",
    "rrmse",
    "run_hodmd",
    "run_multidim_hodmd",
    "tprod",
    "truncated_svd",
    "unfold",
]
