"""Estimator-style wrappers around the topology builders.

``fit(snapshot)`` builds a design and stores it in ``topology_``;
``partial_fit(next_snapshot)`` advances it by one day of turnover;
``transform`` returns the chosen links as an ``(n_edges, 2)`` id array.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .annealing import AnnealSchedule, SurrogateWeights, anneal
from .evaluation import EvalReport, shortest_path_metrics
from .incremental import DEFAULT_INCREMENTAL_ITERATIONS, DayTransition, update_lsl, update_sa
from .lsl import LslParams, build_lsl
from .stable import build_stable_link_set
from .topology import Topology, build_plus_grid, build_theoretical_floor, build_three_isl_grid
from .validation import check_budget, check_candidates, check_is_fitted, check_snapshot


class _TopologyEstimator(BaseEstimator):
    def _build(self, snapshot, candidates) -> Topology:
        raise NotImplementedError

    def fit(self, X, y=None, candidates=None):
        snap = check_snapshot(X)
        cand = build_stable_link_set(snap) if candidates is None else check_candidates(candidates, snap)
        self.topology_ = self._build(snap, cand)
        self.snapshot_ = snap
        self.candidates_ = cand
        return self

    def transform(self, X=None):
        check_is_fitted(self, "topology_")
        keys = sorted(self.topology_.edge_keys())
        return np.array(keys, dtype=np.int64).reshape(-1, 2)

    def fit_transform(self, X, y=None, **kw):
        return self.fit(X, y, **kw).transform()

    def evaluate(self, floor_delay_ms: float | None = None) -> EvalReport:
        check_is_fitted(self, "topology_")
        return shortest_path_metrics(self.topology_, floor_delay_ms=floor_delay_ms)

    def _advance(self, X, candidates, step):
        check_is_fitted(self, "topology_")
        snap = check_snapshot(X)
        cand = build_stable_link_set(snap) if candidates is None else check_candidates(candidates, snap)
        tr = DayTransition(self.snapshot_, self.topology_, snap, cand)
        self.topology_ = step(tr)
        self.snapshot_, self.candidates_ = snap, cand
        return self


class PlusGrid(_TopologyEstimator):
    def __init__(self, degree_budget: int = 4):
        self.degree_budget = degree_budget

    def _build(self, snapshot, candidates):
        return build_plus_grid(snapshot, candidates, check_budget(self.degree_budget, 4))


class ThreeIslGrid(_TopologyEstimator):
    def _build(self, snapshot, candidates):
        return build_three_isl_grid(snapshot, candidates)


class TheoreticalFloor(_TopologyEstimator):
    def __init__(self, stable_only: bool = False):
        self.stable_only = stable_only

    def _build(self, snapshot, candidates):
        return build_theoretical_floor(snapshot, candidates, stable_only=self.stable_only)


class LongShortLinks(_TopologyEstimator):
    def __init__(self, max_plane_span: int = 9, degree_budget: int = 4):
        self.max_plane_span = max_plane_span
        self.degree_budget = degree_budget

    def _params(self) -> LslParams:
        return LslParams(self.max_plane_span, check_budget(self.degree_budget))

    def _build(self, snapshot, candidates):
        return build_lsl(snapshot, candidates, self._params())

    def partial_fit(self, X, y=None, candidates=None):
        return self._advance(X, candidates, lambda tr: update_lsl(tr, self._params()))


class SimulatedAnnealing(_TopologyEstimator):
    """Weights are given in table order (alpha_L, alpha_U, alpha_M)."""

    def __init__(self, weights=(1.0, 2.0, 5.0), degree_budget: int = 4, iterations: int = 200_000,
                 incremental_iterations: int = DEFAULT_INCREMENTAL_ITERATIONS,
                 t_initial: float = 1.0, rho: float = 0.9995, t_min: float = 1e-4, random_state: int = 0):
        self.weights = weights
        self.degree_budget = degree_budget
        self.iterations = iterations
        self.incremental_iterations = incremental_iterations
        self.t_initial = t_initial
        self.rho = rho
        self.t_min = t_min
        self.random_state = random_state

    def _weights(self) -> SurrogateWeights:
        return SurrogateWeights.from_table(*self.weights)

    def _schedule(self, iterations: int) -> AnnealSchedule:
        return AnnealSchedule(self.t_initial, self.rho, self.t_min, iterations, self.random_state)

    def _build(self, snapshot, candidates):
        res = anneal(snapshot, candidates, check_budget(self.degree_budget), self._weights(),
                     self._schedule(self.iterations))
        self.score_ = res.score
        return res.topology

    def partial_fit(self, X, y=None, candidates=None):
        sched = self._schedule(self.incremental_iterations)
        return self._advance(X, candidates, lambda tr: update_sa(tr, self._weights(), sched))
