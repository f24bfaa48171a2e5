"""Dirichlet eigenvalues of perforated domains and noise stabilization of the
Chafee-Infante equation, on masked finite-difference grids."""

from .domain import Ball, Box, DomainSpec, Grid, HoleSpec, build_grid, unit_ball, unit_cube, unit_square
from .eigen import EigenResult, first_eigenpair, richardson
from .capacity import capacity, ball_capacity_asymptotic, concentric_capacity
from .asymptotics import ExpansionReport, expansion_report, remainder_study
from .noise import NoiseModel, check_hypotheses, cesaro_estimate
from .operator import DiscreteLaplacian, assemble, dirichlet_energy, l2_norm_sq
from .rng import NormalStream
from .spde import SpdeConfig, TrajectoryStats, ensemble, ito_decomposition_check, simulate_path, step
from .stability import decay_bound, epsilon0, margin, stability_report, threshold

__version__ = "0.1.0"
