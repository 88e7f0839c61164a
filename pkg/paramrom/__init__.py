r"""
=============================================
  ___                     ___  ___  __  __ 
 | _ \__ _ _ _ __ _ _ __ | _ \/ _ \|  \/  |
 |  _/ _` | '_/ _` | '  \|   / (_) | |\/| |
 |_| \__,_|_| \__,_|_|_|_|_|_\\___/|_|  |_|

=============================================

Parametric reduced-order models learned from snapshot data
by operator inference, using PyTorch.

"""

from .archive import load_model, save_model
from .metrics import ErrorReport, masked_error, pointwise_error, relative_state_error
from .operators import ReducedOperatorSet
from .opinf import (
    RegularizationConfig,
    grid_search,
    learn_operators,
    prepare_training,
    solve_regression,
)
from .parametric import ParametricRom, build_interpolant, interpolate_operators
from .pod import PodBasis, SvdConfig, compute_basis, cumulative_energy, projection_error
from .rom import RampSignal, RomSolution, initial_reduced_state, integrate, reconstruct
from .scaling import ScalingTransform, apply_scaling, fit_scaling, invert_scaling
from .snapshots import (
    GlobalDataMatrix,
    SnapshotSet,
    Variable,
    VariableGroup,
    VariableLayout,
    assemble_global,
    load_snapshot_set,
    write_snapshot_set,
)
from .synthfom import SynthConfig, generate, generate_grid
