"""Combining two or more trials through p-value functions.

Each trial's estimate and standard error define a one-sided p-value
function of the null value.  Six combination rules (two-trials rule,
fixed-effect meta-analysis, Tippett, Fisher, Pearson, Edgington) merge
them into a combined p-value function whose inverse gives a median
estimate and confidence intervals.
"""
__version__ = "0.1.0"

from .combine import (
    PValueFunction,
    centrality,
    combine_pvalues,
    combined_p,
    p_2tr,
    p_edgington,
    p_fisher,
    p_ma,
    p_one_sided,
    p_pearson,
    p_tippett,
)
from .estimate import InversionError, analyze, invert_pfun
from .model import (
    Alternative,
    AnalysisRequest,
    AnalysisResult,
    CombinedMethod,
    MethodResult,
    TrialResult,
    ValidationError,
)
from .simulate import SimScenario, SimSummary, null_uniformity, run_simulation
from .statdist import DomainError
from .theory import approx_mu, expected_estimate, limiting_mu

__all__ = [
    "Alternative", "AnalysisRequest", "AnalysisResult", "CombinedMethod", "DomainError",
    "InversionError", "MethodResult", "PValueFunction", "SimScenario", "SimSummary",
    "TrialResult", "ValidationError", "analyze", "approx_mu", "centrality",
    "combine_pvalues", "combined_p", "expected_estimate", "invert_pfun",
    "limiting_mu", "null_uniformity", "p_2tr", "p_edgington", "p_fisher", "p_ma",
    "p_one_sided", "p_pearson", "p_tippett", "run_simulation",
]
