"""Bound-pair curves in the shared CSV schema."""

from __future__ import annotations

import numpy as np

from ..curves import CdfCurve, CurveKind
from ..model import NetworkParams, SchedulingPolicy
from ..specfun import QuadratureSpec
from .delay import delay_bounds, success_bounds
from .traffic import CellLaw


def delay_bound_curve(params: NetworkParams, policy: "SchedulingPolicy | str", T,
                      quad: QuadratureSpec = QuadratureSpec(),
                      cell_law: "CellLaw | str" = CellLaw.OCCUPIED) -> CdfCurve:
    """Dominant-system delay CDF as ``values``; the sorted bound pair as lower/upper."""
    policy = SchedulingPolicy.parse(policy)
    T = np.asarray(T, dtype=float)
    b = delay_bounds(params, policy, T, quad, cell_law)
    return CdfCurve(T, b.dominant, CurveKind.DELAY, b.lower, b.upper, policy.value, b.q_dominant)


def success_bound_curve(params: NetworkParams, policy: "SchedulingPolicy | str", u,
                        quad: QuadratureSpec = QuadratureSpec()) -> CdfCurve:
    policy = SchedulingPolicy.parse(policy)
    u = np.asarray(u, dtype=float)
    b = success_bounds(params, policy, u, quad)
    return CdfCurve(u, b.dominant, CurveKind.SUCCESS, b.lower, b.upper, policy.value, b.q_dominant)
