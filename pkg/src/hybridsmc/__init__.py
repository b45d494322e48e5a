"""Statistical model checking for hybrid automata with nonlinear ODE modes."""

from .bltl import check, parse_bltl
from .flow import FlowConfig, flow
from .model import HybridAutomaton, ModelError, model_from_dict, parse_model, serialize_model
from .models import builtin_model, cardiac_model, circadian_model, property_suite
from .sampler import SamplerConfig, sample_trajectory
from .smc import H0, H1, SmcConfig, Verdict, run_smc, sample_size

__version__ = "0.1.0"

__all__ = [
    "FlowConfig", "H0", "H1", "HybridAutomaton", "ModelError", "SamplerConfig", "SmcConfig", "Verdict",
    "builtin_model", "cardiac_model", "check", "circadian_model", "flow", "model_from_dict", "parse_bltl",
    "parse_model", "property_suite", "run_smc", "sample_size", "sample_trajectory", "serialize_model",
]
