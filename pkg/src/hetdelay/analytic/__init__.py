"""Closed-form traffic, success-probability and delay distributions."""

from .curves import delay_bound_curve, success_bound_curve
from .delay import (BoundPair, OutageBounds, conditional_mean_delay, delay_bounds, delay_cdf,
                    delay_outage, modified_activity, outage_from_cdf, success_bounds)
from .kappa import KappaEvaluator, KappaInconsistencyError, KappaMode, kappa
from .success import single_tier_success_cdf, success_cdf, tier_success_cdf
from .traffic import (CellLaw, UserCountDistribution, association_probabilities, association_probability,
                      cell_area_pdf, link_distance_pdf, mean_total_arrival_rate, mean_users_per_cell,
                      user_count_distribution, user_count_log_pmf)

__all__ = [
    "BoundPair", "CellLaw", "KappaEvaluator", "KappaInconsistencyError", "KappaMode", "OutageBounds",
    "UserCountDistribution", "association_probabilities", "association_probability",
    "cell_area_pdf", "conditional_mean_delay", "delay_bound_curve", "delay_bounds", "delay_cdf",
    "delay_outage", "kappa", "link_distance_pdf", "mean_total_arrival_rate", "mean_users_per_cell",
    "modified_activity", "outage_from_cdf", "single_tier_success_cdf", "success_bound_curve",
    "success_bounds", "success_cdf", "tier_success_cdf", "user_count_distribution",
    "user_count_log_pmf",
]
