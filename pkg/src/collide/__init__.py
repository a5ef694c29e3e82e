"""Competing Brownian particles and reflected Brownian motion in the orthant:
collision conditions, simulation and Monte Carlo checks."""
from collide.errors import NumericalError, ValidationError
from collide.matrix_analysis import (
    MatrixClassReport,
    classify,
    inverse_nonnegativity,
    spd_sqrt,
    spectral_radius,
)
from collide.particles import (
    ConditionReport,
    ParticleSystemSpec,
    check_asymmetric,
    check_concavity,
    check_skew_symmetry,
    check_ssineq,
    predict_behavior,
    ranking_permutation,
    skew_symmetric_minorant,
    to_srbm,
)
from collide.srbm import (
    CollisionReport,
    NamedPath,
    SimulatedPath,
    SrbmSpec,
    detect_collisions,
    simulate_named,
    simulate_ranked,
    simulate_srbm,
    skorohod_map,
    skorohod_step,
)
from collide.wedge import WedgeGeometry, skew_symmetry_transfer_check, transform_path, wedge_geometry

__version__ = "0.1.0"
