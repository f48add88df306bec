"""
patchvm: electrostatic patch potentials between a sphere and a plate.

Simulates surface patch maps, computes the applied voltage that minimizes
the PFA electrostatic energy (or force) as a function of separation, and
fits and predicts its a + b ln d distance dependence.
"""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    ConfigurationError,
    DomainError,
    FitError,
    NumericalError,
    ParseError,
    PatchVmError,
)
from .geometry import Geometry, energy_kernel, force_kernel, gap, kernel_norms, validity  # noqa: E402
from .patches import (  # noqa: E402
    Disk,
    PatchMap,
    RadialGrid,
    RadialProfile,
    area_average,
    area_average_analytic,
    generate_homogeneous,
    generate_single_patch,
    load_patch_map,
    potential_at,
    radial_profile,
    ring_average,
    ring_rms_ensemble,
    save_patch_map,
)
from .electrostatics import (  # noqa: E402
    EPSILON_0,
    PolarGrid,
    QuadratureSpec,
    VmResult,
    compute_Q,
    evaluate,
    force,
    free_energy,
    profile_vm,
    vm_analytic,
    vm_energy,
    vm_force,
    vm_scan,
)
from .analysis import (  # noqa: E402
    LogFit,
    RegimePrediction,
    VmCurve,
    classify_regime,
    default_window,
    ensemble_vm,
    fit_external,
    fit_log,
    log_grid,
    predict_intermediate,
    sweep,
)
