"""Numerical workbench for linear cocycles over SL(2,R) actions.

Subpackages cover exact SL(2,R) arithmetic with fundamental-domain
reduction (sl2), lattice representations (reps), trajectory generation
(engine), Lyapunov spectra and Oseledets flags (oseledets), invariance and
unique-ergodicity probes (probes), square-tiled surfaces and their homology
cocycle (origami, homology), and a deterministic experiment runner
(config, runner, cli).
"""

__version__ = "0.1.0"

from .sl2 import (
    BasePoint,
    GroupWord,
    Lattice,
    Mat2,
    SANOV,
    SL2Z,
    flow_geodesic,
    flow_horocycle,
    get_lattice,
    make_generator,
    reduce_to_fundamental_domain,
)
from .reps import (
    Representation,
    build_representation,
    direct_sum,
    rho_of_word,
    standard_representation,
    sym_power,
    trivial_representation,
)
from .engine import (
    CocycleIncrement,
    Trajectory,
    cocycle_matrix,
    random_base_point,
    sample_trajectory,
)
from .oseledets import (
    Flag,
    Spectrum,
    backward_flag,
    flag_equivariance_defect,
    forward_flag,
    lyapunov_spectrum,
    subspace_distance,
    top_space_E1,
)

__all__ = [
    "__version__",
    "BasePoint", "GroupWord", "Lattice", "Mat2", "SANOV", "SL2Z",
    "flow_geodesic", "flow_horocycle", "get_lattice", "make_generator",
    "reduce_to_fundamental_domain",
    "Representation", "build_representation", "direct_sum", "rho_of_word",
    "standard_representation", "sym_power", "trivial_representation",
    "CocycleIncrement", "Trajectory", "cocycle_matrix", "random_base_point",
    "sample_trajectory",
    "Flag", "Spectrum", "backward_flag", "flag_equivariance_defect",
    "forward_flag", "lyapunov_spectrum", "subspace_distance", "top_space_E1",
]
