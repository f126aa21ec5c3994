"""Fluctuating work from Bohmian trajectories.

The driven harmonic oscillator is the exactly solvable test bed: closed-form
trajectories and work sit beside a split-operator propagator, an RK4
trajectory integrator, mixture estimators and the two-measurement protocol.
"""
from .errors import (AllocationError, BohmworkError, ConfigError, DomainCoverageError,
                     EnsembleError, NodeCollisionError, NumericalError, OutOfDomainError,
                     TruncationError, ValidationError)
from .fields import Grid1D, HamiltonianSpec, WaveFunction, bohm_fields, local_energy
from .mixtures import (MixtureSpec, NumericSettings, PureCoherent, PureEigenstate, ThermalCoherent,
                       ThermalEigenstates, TwoLevelWell, WorkDistribution, exp_work, ks_distance,
                       mean_work, mean_work_fock, mixture_work_distribution)
from .oscillator import (OscillatorParams, exp_work_coherent_exact, exp_work_coherent_highT,
                         exp_work_eigenmixture, exp_work_eigenmixture_highT,
                         exp_work_eigenmixture_quadrature)
from .propagator import PropagationPlan, SnapshotSeries, propagate
from .tmp import TMPDistribution, tmp_distribution
from .trajectories import TrajectorySpec, integrate_trajectory, run_ensemble
from .well import TwoLevelWellState, WellFields

__version__ = "0.1.0"
