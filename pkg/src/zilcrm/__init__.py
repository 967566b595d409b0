"""Bayesian zero-inflated longitudinal circular regression with projected normal laws."""

from .circular_core import (
    ArcInterval,
    Cov2,
    DomainError,
    UndefinedDirectionError,
    pn_density,
    tpn_mass,
    wrap,
)
from .gibbs import ChainConfig, FitError, GibbsSampler, PosteriorSamples, run_chain
from .model import (
    CensoringSpec,
    Dataset,
    ModelVariant,
    PriorSpec,
    SubjectRecord,
    ValidationError,
    validate_dataset,
)
from .samplers import RngStream, TpnMode
from .simulate import ScenarioSpec, generate_dataset, preset, run_replication_study

__version__ = "0.1.0"
