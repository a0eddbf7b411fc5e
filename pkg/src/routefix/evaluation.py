"""Route plans, the (cost, violation) objective vector and Pareto machinery.

Violation scoring follows one rule per constraint family, all in natural
units and summed with unit weights:

* Capacity / DistanceLimit: excess of the single binding route,
  ``max_r max(0, load_r - Q)`` (resp. route length vs Lmax).  The score is
  therefore exactly the smallest bound relaxation that would make the plan
  feasible for that family, which keeps the violation axis meaningful even
  when the bound is zero.
* TimeWindows: total lateness from an arrival simulation; early arrivals
  wait at no penalty; the depot-return deadline is not enforced.
* PickupDelivery / SameVehicle / Priority: structural breaches scaled by a
  fixed penalty (the instance's mean nonzero inter-node distance) so the two
  objectives stay commensurate.
* DynamicDemand: the flagged node's demand grows with the square root of the
  travelled distance from the depot, then the capacity rule applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import EvaluationError
from .instances import Family


class ObjectiveVector(NamedTuple):
    cost: float
    violation: float


@dataclass(frozen=True)
class BreakdownEntry:
    family: Family
    subject: object  # route index, node id, (pickup, delivery) pair or group index
    excess: float


@dataclass(frozen=True)
class RoutePlan:
    routes: tuple

    @classmethod
    def from_lists(cls, routes):
        return cls(routes=tuple(tuple(r) for r in routes))

    def as_lists(self):
        return [list(r) for r in self.routes]

    def validate(self, customer_ids):
        seen = []
        for route in self.routes:
            if not route:
                raise EvaluationError("empty route in plan")
            for nid in route:
                if nid == 0:
                    raise EvaluationError("depot id inside a route")
                seen.append(nid)
        expected = sorted(customer_ids)
        if sorted(seen) != expected:
            raise EvaluationError(
                f"plan must visit every customer exactly once; "
                f"got {sorted(seen)}, expected {expected}"
            )
        return self


def _routes_of(plan):
    if isinstance(plan, RoutePlan):
        return plan.routes
    return plan


def route_cost(plan, dist):
    """Total depot-to-depot travel distance over all routes."""
    routes = _routes_of(plan)
    n = len(dist)
    total = 0.0
    for route in routes:
        prev = 0
        for nid in route:
            if not 0 <= nid < n:
                raise EvaluationError(f"unknown node id {nid}")
            total += dist[prev][nid]
            prev = nid
        total += dist[prev][0]
    return total


def mean_nonzero_distance(dist):
    """Mean of the strictly positive off-diagonal distances (structural penalty unit)."""
    total = 0.0
    count = 0
    n = len(dist)
    for i in range(n):
        row = dist[i]
        for j in range(n):
            if i != j and row[j] > 0.0:
                total += row[j]
                count += 1
    return total / count if count else 1.0


class Evaluator:
    """Per-instance precomputation for fast (cost, violation) evaluation.

    Evaluation is a pure function of the plan; ``self.evaluations`` counts
    calls and doubles as the deterministic work clock used in traces.
    """

    def __init__(self, inst):
        self.inst = inst
        self.dist = inst.dist.tolist()
        ids = [n.id for n in inst.nodes]
        if ids != list(range(len(ids))):
            raise EvaluationError("evaluator requires contiguous node ids starting at 0")
        self.demand = [n.demand for n in inst.nodes]
        self.customer_ids = ids[1:]
        self.evaluations = 0

        self.q = None
        self.lmax = None
        self.tw = None
        self.pd_pairs = []
        self.pd_waived = set()
        self.groups = []
        self.allowed = []
        self.ranks = None
        self.exempt = set()
        self.dynamic = None
        for spec in inst.constraints:
            p = spec.params
            if spec.family is Family.CAPACITY:
                self.q = float(p["Q"])
            elif spec.family is Family.DISTANCE_LIMIT:
                self.lmax = float(p["Lmax"])
            elif spec.family is Family.TIME_WINDOWS:
                ready = [n.ready for n in inst.nodes]
                due = [n.due for n in inst.nodes]
                service = [n.service for n in inst.nodes]
                for nid, (r, d, s) in p.get("windows", {}).items():
                    ready[nid], due[nid], service[nid] = r, d, s
                shift = float(p.get("due_shift", 0.0))
                if shift:
                    for nid in self.customer_ids:
                        due[nid] += shift
                self.tw = (ready, due, service)
            elif spec.family is Family.PICKUP_DELIVERY:
                self.pd_pairs = [tuple(pair) for pair in p["pairs"]]
                self.pd_waived = {tuple(pair) for pair in p.get("waived", [])}
            elif spec.family is Family.SAME_VEHICLE:
                self.groups = [list(g) for g in p["groups"]]
                self.allowed = list(p.get("allowed", [1] * len(self.groups)))
            elif spec.family is Family.PRIORITY:
                ranks = [0] * len(ids)
                for nid, rank in p["ranks"].items():
                    ranks[nid] = rank
                self.ranks = ranks
                self.exempt = {tuple(pair) for pair in p.get("exempt", [])}
            elif spec.family is Family.DYNAMIC_DEMAND:
                self.dynamic = (int(p["node"]), float(p["k"]), int(p["depot"]))
        self.p_pd = mean_nonzero_distance(self.dist)

    # -- scoring ------------------------------------------------------

    def cost(self, routes):
        dist = self.dist
        total = 0.0
        for route in routes:
            prev = 0
            for nid in route:
                total += dist[prev][nid]
                prev = nid
            total += dist[prev][0]
        return total

    def _route_loads(self, routes):
        demand = self.demand
        dist = self.dist
        dyn = self.dynamic
        loads = []
        for route in routes:
            load = 0.0
            for nid in route:
                load += demand[nid]
            if dyn is not None and dyn[0] in route:
                node, k, _depot = dyn
                acc = 0.0
                prev = 0
                for nid in route:
                    acc += dist[prev][nid]
                    prev = nid
                    if nid == node:
                        break
                load += k * math.sqrt(acc)
            loads.append(load)
        return loads

    def _route_lengths(self, routes):
        dist = self.dist
        lengths = []
        for route in routes:
            length = 0.0
            prev = 0
            for nid in route:
                length += dist[prev][nid]
                prev = nid
            length += dist[prev][0]
            lengths.append(length)
        return lengths

    def _lateness(self, routes):
        """Per-node lateness from the arrival simulation (node id -> excess)."""
        ready, due, service = self.tw
        dist = self.dist
        late = []
        for route in routes:
            t = 0.0
            prev = 0
            for nid in route:
                arrival = t + dist[prev][nid]
                excess = arrival - due[nid]
                if excess > 0.0:
                    late.append((nid, excess))
                begin = arrival if arrival > ready[nid] else ready[nid]
                t = begin + service[nid]
                prev = nid
        return late

    def evaluate(self, routes):
        """Fast path: the ObjectiveVector only."""
        self.evaluations += 1
        violation = 0.0
        if self.q is not None:
            worst = 0.0
            for load in self._route_loads(routes):
                excess = load - self.q
                if excess > worst:
                    worst = excess
            violation += worst
        if self.lmax is not None:
            worst = 0.0
            for length in self._route_lengths(routes):
                excess = length - self.lmax
                if excess > worst:
                    worst = excess
            violation += worst
        if self.tw is not None:
            for _nid, excess in self._lateness(routes):
                violation += excess
        if self.pd_pairs:
            violation += self.p_pd * len(self._pd_breaches(routes))
        if self.groups:
            for _gidx, extra in self._group_breaches(routes):
                violation += self.p_pd * extra
        if self.ranks is not None:
            for _pair in self._rank_inversions(routes):
                violation += self.p_pd
        return ObjectiveVector(self.cost(routes), violation)

    def breakdown(self, routes):
        """Itemized positive excesses; their sum equals the violation score."""
        entries = []
        if self.q is not None:
            loads = self._route_loads(routes)
            if loads:
                worst = max(range(len(loads)), key=lambda i: loads[i])
                excess = loads[worst] - self.q
                if excess > 0.0:
                    entries.append(BreakdownEntry(Family.CAPACITY, worst, excess))
        if self.lmax is not None:
            lengths = self._route_lengths(routes)
            if lengths:
                worst = max(range(len(lengths)), key=lambda i: lengths[i])
                excess = lengths[worst] - self.lmax
                if excess > 0.0:
                    entries.append(BreakdownEntry(Family.DISTANCE_LIMIT, worst, excess))
        if self.tw is not None:
            for nid, excess in self._lateness(routes):
                entries.append(BreakdownEntry(Family.TIME_WINDOWS, nid, excess))
        for pair in self._pd_breaches(routes):
            entries.append(BreakdownEntry(Family.PICKUP_DELIVERY, pair, self.p_pd))
        for gidx, extra in self._group_breaches(routes):
            entries.append(BreakdownEntry(Family.SAME_VEHICLE, gidx, self.p_pd * extra))
        for pair in self._rank_inversions(routes):
            entries.append(BreakdownEntry(Family.PRIORITY, pair, self.p_pd))
        return entries

    def _pd_breaches(self, routes):
        position = {}
        for ridx, route in enumerate(routes):
            for pos, nid in enumerate(route):
                position[nid] = (ridx, pos)
        breaches = []
        for pair in self.pd_pairs:
            if pair in self.pd_waived:
                continue
            pickup, delivery = pair
            rp, pp = position[pickup]
            rd, pd_ = position[delivery]
            if rp != rd or pd_ < pp:
                breaches.append(pair)
        return breaches

    def _group_breaches(self, routes):
        route_of = {}
        for ridx, route in enumerate(routes):
            for nid in route:
                route_of[nid] = ridx
        breaches = []
        for gidx, group in enumerate(self.groups):
            distinct = len({route_of[nid] for nid in group})
            extra = distinct - self.allowed[gidx]
            if extra > 0:
                breaches.append((gidx, extra))
        return breaches

    def _rank_inversions(self, routes):
        ranks = self.ranks
        exempt = self.exempt
        inversions = []
        for route in routes:
            for a in range(len(route)):
                ra = ranks[route[a]]
                for b in range(a + 1, len(route)):
                    if ra > ranks[route[b]] and (route[a], route[b]) not in exempt:
                        inversions.append((route[a], route[b]))
        return inversions

    # -- boolean checker (kept independent of the scorers) -------------

    def check(self, routes):
        """True iff every constraint passes its boolean check."""
        if self.q is not None:
            if any(load > self.q for load in self._route_loads(routes)):
                return False
        if self.lmax is not None:
            if any(length > self.lmax for length in self._route_lengths(routes)):
                return False
        if self.tw is not None:
            ready, due, service = self.tw
            dist = self.dist
            for route in routes:
                t = 0.0
                prev = 0
                for nid in route:
                    arrival = t + dist[prev][nid]
                    if arrival > due[nid]:
                        return False
                    t = max(arrival, ready[nid]) + service[nid]
                    prev = nid
        if self.pd_pairs:
            position = {}
            for ridx, route in enumerate(routes):
                for pos, nid in enumerate(route):
                    position[nid] = (ridx, pos)
            for pair in self.pd_pairs:
                if pair in self.pd_waived:
                    continue
                (rp, pp), (rd, pd_) = position[pair[0]], position[pair[1]]
                if rp != rd or pd_ < pp:
                    return False
        if self.groups:
            route_of = {nid: ridx for ridx, route in enumerate(routes) for nid in route}
            for gidx, group in enumerate(self.groups):
                if len({route_of[nid] for nid in group}) > self.allowed[gidx]:
                    return False
        if self.ranks is not None:
            for route in routes:
                for a in range(len(route)):
                    for b in range(a + 1, len(route)):
                        if (
                            self.ranks[route[a]] > self.ranks[route[b]]
                            and (route[a], route[b]) not in self.exempt
                        ):
                            return False
        return True


def evaluate(plan, inst):
    """Evaluate a plan against an instance.

    Returns (ObjectiveVector, breakdown entries).  The plan is validated
    first; solver-internal loops use :class:`Evaluator` directly.
    """
    routes = _routes_of(plan)
    RoutePlan.from_lists(routes).validate([n.id for n in inst.nodes[1:]])
    node_ids = [n.id for n in inst.nodes]
    try:
        for spec in inst.constraints:
            spec.validate(node_ids)
    except Exception as exc:
        raise EvaluationError(str(exc)) from exc
    evaluator = Evaluator(inst)
    return evaluator.evaluate(routes), evaluator.breakdown(routes)


# ---------------------------------------------------------------------------
# Pareto machinery
# ---------------------------------------------------------------------------

def dominates(u, v):
    """Minimization dominance: u <= v componentwise with at least one strict."""
    return u[0] <= v[0] and u[1] <= v[1] and (u[0] < v[0] or u[1] < v[1])


def non_dominated_sort(points):
    """Fast non-dominated sort; returns fronts as lists of original indices."""
    n = len(points)
    dominated_by = [[] for _ in range(n)]
    domination_count = [0] * n
    for i in range(n):
        pi = points[i]
        for j in range(i + 1, n):
            pj = points[j]
            if dominates(pi, pj):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif dominates(pj, pi):
                dominated_by[j].append(i)
                domination_count[i] += 1
    fronts = []
    current = [i for i in range(n) if domination_count[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
        if not current:
            break
    return fronts


def crowding_distance(points):
    """NSGA-II crowding distance for one mutually non-dominated front.

    Boundary points per objective get infinity; an interior point sums
    (next - prev) / (max - min) over the objectives; a degenerate objective
    (max == min) contributes 0.  Ties are ordered by original index.
    """
    n = len(points)
    if n == 0:
        return []
    if n <= 2:
        return [math.inf] * n
    distance = [0.0] * n
    m = len(points[0])
    for obj in range(m):
        order = sorted(range(n), key=lambda i: (points[i][obj], i))
        lo = points[order[0]][obj]
        hi = points[order[-1]][obj]
        distance[order[0]] = math.inf
        distance[order[-1]] = math.inf
        span = hi - lo
        if span <= 0.0:
            continue
        for k in range(1, n - 1):
            i = order[k]
            if distance[i] == math.inf:
                continue
            gap = points[order[k + 1]][obj] - points[order[k - 1]][obj]
            distance[i] += gap / span
    return distance
