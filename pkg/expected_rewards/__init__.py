"""Expected rewards of countable MDPs and weakest preexpectations of pGCL programs.

Total expected rewards are computed as least fixed points of Bellman
operators; the same engine executes the operational semantics of pGCL
programs with ``tick`` rewards and cross-checks the demonic and angelic
weakest-preexpectation calculi against it.
"""

__version__ = "1.0.0"
__license__ = "MIT"

from expected_rewards.core.extreal import INFINITY, ExtValue
from expected_rewards.infrastructure.config import AppConfig
from expected_rewards.service import AnalysisService

__all__ = ["AnalysisService", "AppConfig", "ExtValue", "INFINITY"]
