from .base import BaseStatistic, HorizontalContext, VerticalContext
from .default import STATISTICS, get_statistic
