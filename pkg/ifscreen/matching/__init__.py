from .base import BaseMatcher
from .default import MATCHERS, get_matcher, mahalanobis_costs, match_optimal, match_random
