"""Bi-objective route search: destroy&repair, Pareto local search, NSGA-II update.

One run evolves a population of route plans for a fixed number of
iterations.  Every evaluated solution feeds an external archive (a 2D
staircase of mutually non-dominated points) whose image approximates the
Pareto front of (cost, violation).

Traces use a deterministic work clock (objective evaluations at a nominal
rate) instead of wall time, so identical seeds yield byte-identical
artifacts; see NOMINAL_EVALS_PER_SECOND.

A single-objective baseline with the same operators is included for
comparison: it keeps one incumbent and accepts candidates that are feasible
and shorter, feasible over infeasible, or less violating (cost breaking
violation ties).
"""

from __future__ import annotations

import hashlib
import math
import time
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceError
from .evaluation import (
    Evaluator,
    ObjectiveVector,
    crowding_distance,
    dominates,
    non_dominated_sort,
)
from .metrics import hypervolume_2d

NOMINAL_EVALS_PER_SECOND = 100_000.0


@dataclass
class SolverConfig:
    population_size: int = 10
    iterations: int = 100
    spls_timeout: float = 1.0
    seed: int = 0
    mode: str = "multi_objective"  # or "baseline"
    destroy_fraction: tuple = (0.1, 0.3)
    decay: float = 0.2
    weight_floor: float = 0.05
    segment_cap: int = 6
    crowding_rule: str = "min"  # dominator choice in SPLS; "max" also supported

    def validate(self):
        lo, hi = self.destroy_fraction
        if self.population_size < 2:
            raise InstanceError("population size must be at least 2")
        if self.iterations < 0:
            raise InstanceError("iteration count must be nonnegative")
        if self.spls_timeout <= 0:
            raise InstanceError("spls timeout must be positive")
        if not (0 < lo <= hi <= 1):
            raise InstanceError(f"destroy fraction bounds must satisfy 0 < lo <= hi <= 1, got {(lo, hi)}")
        if not (0 < self.decay < 1):
            raise InstanceError("roulette decay must lie in (0, 1)")
        if self.weight_floor <= 0:
            raise InstanceError("weight floor must be positive")
        if self.segment_cap < 1:
            raise InstanceError("segment cap must be at least 1")
        if self.crowding_rule not in ("min", "max"):
            raise InstanceError(f"unknown crowding rule {self.crowding_rule!r}")
        if self.mode not in ("multi_objective", "baseline"):
            raise InstanceError(f"unknown mode {self.mode!r}")
        return self


@dataclass
class OperatorStats:
    """Adaptive roulette weights for the destroy operators."""

    names: tuple = ("random_removal", "string_removal")
    weights: list = field(default_factory=lambda: [1.0, 1.0])
    usage: list = field(default_factory=lambda: [0, 0])
    success: list = field(default_factory=lambda: [0, 0])

    def probabilities(self):
        total = sum(self.weights)
        return [w / total for w in self.weights]

    def select(self, rng):
        draw = rng.random()
        cumulative = 0.0
        probs = self.probabilities()
        for i, p in enumerate(probs):
            cumulative += p
            if draw < cumulative:
                self.usage[i] += 1
                return i
        self.usage[-1] += 1
        return len(probs) - 1

    def update(self, index, reward, decay, floor):
        if reward > 0:
            self.success[index] += 1
        self.weights[index] = max(floor, (1.0 - decay) * self.weights[index] + decay * reward)


def select_destroy_operator(stats, rng):
    """Roulette-wheel choice of a destroy operator index."""
    return stats.select(rng)


@dataclass
class Population:
    members: list  # (routes tuple, ObjectiveVector)
    generation: int = 0


class Archive:
    """Mutually non-dominated (cost, violation) staircase with plans attached.

    Costs are kept strictly ascending and violations strictly descending;
    duplicate objective vectors are rejected, keeping the first plan seen.
    """

    def __init__(self):
        self._costs = []
        self._viols = []
        self._plans = []

    def __len__(self):
        return len(self._costs)

    def add(self, obj, routes):
        cost, viol = obj[0], obj[1]
        costs, viols = self._costs, self._viols
        last_leq = bisect_right(costs, cost) - 1
        if last_leq >= 0 and viols[last_leq] <= viol:
            return False  # dominated by (or equal to) an existing entry
        idx = bisect_left(costs, cost)
        j = idx
        while j < len(costs) and viols[j] >= viol:
            j += 1
        del costs[idx:j], viols[idx:j], self._plans[idx:j]
        costs.insert(idx, cost)
        viols.insert(idx, viol)
        self._plans.insert(idx, tuple(tuple(r) for r in routes))
        return True

    def points(self):
        return [ObjectiveVector(c, v) for c, v in zip(self._costs, self._viols)]

    def entries(self):
        return list(zip(self._costs, self._viols, self._plans))

    def assert_mutually_non_dominated(self):
        pts = self.points()
        for i, u in enumerate(pts):
            for j, v in enumerate(pts):
                if i != j and dominates(u, v):
                    raise AssertionError(f"archive entry {u} dominates {v}")


@dataclass
class RunResult:
    mode: str
    inst: object
    archive: Archive
    population: Population
    trace: list
    reference: tuple
    evaluations: int

    @property
    def runtime_s(self):
        return self.evaluations / NOMINAL_EVALS_PER_SECOND

    def front_entries(self):
        """(cost, violation, routes) of the exported front for this mode."""
        if self.mode == "baseline":
            routes, obj = self.population.members[0]
            return [(obj.cost, obj.violation, routes)]
        return self.archive.entries()


def _member_rng(seed, member, iteration):
    return np.random.default_rng([seed, member, iteration])


def _random_plan(customer_ids, rng):
    n = len(customer_ids)
    perm = [customer_ids[i] for i in rng.permutation(n)]
    max_routes = max(1, math.ceil(n / 5))
    r = int(rng.integers(1, max_routes + 1))
    return [list(map(int, chunk)) for chunk in np.array_split(perm, r)]


def initialize_population(inst, cfg):
    """N random plans (random permutation cut into 1..ceil(n/5) routes), evaluated."""
    evaluator = Evaluator(inst)
    members = []
    for m in range(cfg.population_size):
        rng = _member_rng(cfg.seed, m, 0)
        routes = _random_plan(evaluator.customer_ids, rng)
        members.append((tuple(tuple(r) for r in routes), evaluator.evaluate(routes)))
    return Population(members=members, generation=0)


def _draw_k(rng, n, bounds):
    lo, hi = bounds
    kmin = max(1, min(n, math.ceil(lo * n)))
    kmax = max(kmin, min(n, math.ceil(hi * n)))
    return int(rng.integers(kmin, kmax + 1))


def destroy_random(routes, k, rng):
    """Remove k customers chosen uniformly without replacement."""
    flat = [nid for route in routes for nid in route]
    picked = rng.choice(len(flat), size=min(k, len(flat)), replace=False)
    removed = [flat[i] for i in picked]
    gone = set(removed)
    partial = [[nid for nid in route if nid not in gone] for route in routes]
    return [route for route in partial if route], removed


def destroy_string(routes, k, rng, dist, segment_cap):
    """Remove contiguous strings from routes near a random seed customer."""
    flat = [nid for route in routes for nid in route]
    seed_customer = flat[int(rng.integers(0, len(flat)))]
    order = sorted(flat, key=lambda c: (dist[seed_customer][c], c))
    route_of = {}
    for ridx, route in enumerate(routes):
        for nid in route:
            route_of[nid] = ridx
    k = min(k, len(flat))
    removed = []
    ruined = set()
    for c in order:
        if len(removed) >= k:
            break
        ridx = route_of[c]
        if ridx in ruined:
            continue
        ruined.add(ridx)
        route = routes[ridx]
        remaining = k - len(removed)
        max_len = min(segment_cap, len(route), remaining)
        length = int(rng.integers(1, max_len + 1))
        pos = route.index(c)
        start_lo = max(0, pos - length + 1)
        start_hi = min(pos, len(route) - length)
        start = int(rng.integers(start_lo, start_hi + 1))
        removed.extend(route[start:start + length])
    gone = set(removed)
    partial = [[nid for nid in route if nid not in gone] for route in routes]
    return [route for route in partial if route], removed


def repair_greedy(routes, removed, dist):
    """Reinsert customers in removal order at the cheapest position.

    Candidate positions span every slot of every route plus opening a new
    singleton route; ties break on (route index, position) with the new
    route ranked last.
    """
    plan = [list(r) for r in routes]
    for c in removed:
        best = (2.0 * dist[0][c], len(plan), 0)
        for ridx, route in enumerate(plan):
            prev = 0
            for pos in range(len(route) + 1):
                nxt = route[pos] if pos < len(route) else 0
                delta = dist[prev][c] + dist[c][nxt] - dist[prev][nxt]
                key = (delta, ridx, pos)
                if key < best:
                    best = key
                prev = nxt
        _delta, ridx, pos = best
        if ridx == len(plan):
            plan.append([c])
        else:
            plan[ridx].insert(pos, c)
    return plan


# ---------------------------------------------------------------------------
# Single-point Pareto local search
# ---------------------------------------------------------------------------

def _two_opt(routes, r, p, rng):
    route = routes[r]
    if len(route) < 2:
        return None
    j = int(rng.integers(0, len(route) - 1))
    if j >= p:
        j += 1
    lo, hi = (p, j) if p < j else (j, p)
    new_route = route[:lo] + route[lo:hi + 1][::-1] + route[hi + 1:]
    out = list(routes)
    out[r] = new_route
    return out


def _swap(routes, r, p, rng):
    positions = [(ri, pi) for ri in range(len(routes)) for pi in range(len(routes[ri]))]
    if len(positions) < 2:
        return None
    own = positions.index((r, p))
    t = int(rng.integers(0, len(positions) - 1))
    if t >= own:
        t += 1
    r2, p2 = positions[t]
    out = [list(rt) for rt in routes]
    out[r][p], out[r2][p2] = out[r2][p2], out[r][p]
    return out


def _shift(routes, r, p, rng):
    node = routes[r][p]
    reduced = []
    for ri, route in enumerate(routes):
        rest = [nid for pi, nid in enumerate(route) if not (ri == r and pi == p)]
        if rest:
            reduced.append(rest)
    slots = sum(len(route) + 1 for route in reduced) + 1  # +1 opens a new route
    t = int(rng.integers(0, slots))
    out = [list(rt) for rt in reduced]
    if t == slots - 1:
        out.append([node])
        return out
    for ridx, route in enumerate(out):
        if t <= len(route):
            route.insert(t, node)
            return out
        t -= len(route) + 1
    raise AssertionError("unreachable slot index")


_SPLS_OPERATORS = (_two_opt, _swap, _shift)


def _select_dominator(cur_obj, cand_objs, dominators, rule):
    """Pick among dominating candidates by crowding distance within the ranked set."""
    pool = [cur_obj] + cand_objs
    fronts = non_dominated_sort(pool)
    crowding = [0.0] * len(pool)
    for front in fronts:
        cd = crowding_distance([pool[i] for i in front])
        for i, value in zip(front, cd):
            crowding[i] = value
    sign = 1.0 if rule == "min" else -1.0
    best = None
    best_key = None
    for i in dominators:
        value = crowding[i + 1]
        key = (sign * value, i)
        if best_key is None or key < best_key:
            best_key = key
            best = i
    return best


def spls_step(routes, evaluator, cfg, rng, obj=None, on_eval=None):
    """Refine one plan with 2-OPT / SWAP / SHIFT under Pareto-dominance acceptance.

    Each pass proposes one randomly parameterized move per (operator, node
    position).  If any candidate dominates the current plan, the dominator
    chosen by the crowding rule replaces it and another pass starts; the
    loop ends at a fixed point or when the timeout elapses.
    """
    cur = [list(r) for r in routes]
    cur_obj = obj if obj is not None else evaluator.evaluate(cur)
    deadline = time.monotonic() + cfg.spls_timeout
    while True:
        candidates = []
        cand_objs = []
        positions = [(r, p) for r in range(len(cur)) for p in range(len(cur[r]))]
        for op in _SPLS_OPERATORS:
            for r, p in positions:
                cand = op(cur, r, p, rng)
                if cand is None:
                    continue
                cand_obj = evaluator.evaluate(cand)
                if on_eval is not None:
                    on_eval(cand_obj, cand)
                candidates.append(cand)
                cand_objs.append(cand_obj)
        dominators = [i for i, co in enumerate(cand_objs) if dominates(co, cur_obj)]
        if not dominators:
            break
        pick = _select_dominator(cur_obj, cand_objs, dominators, cfg.crowding_rule)
        cur = [list(r) for r in candidates[pick]]
        cur_obj = cand_objs[pick]
        if time.monotonic() >= deadline:
            break
    return cur, cur_obj


# ---------------------------------------------------------------------------
# NSGA-II population update
# ---------------------------------------------------------------------------

def nsga2_select(objectives, count):
    """Indices surviving environmental selection; ties break on index."""
    fronts = non_dominated_sort(objectives)
    selected = []
    for front in fronts:
        if len(selected) + len(front) <= count:
            selected.extend(front)
            continue
        cd = crowding_distance([objectives[i] for i in front])
        ranked = sorted(range(len(front)), key=lambda t: (-cd[t], front[t]))
        selected.extend(front[t] for t in ranked[: count - len(selected)])
        break
    return selected


def population_update(parents, children):
    """NSGA-II environmental selection over parents plus children."""
    pool = list(parents.members) + list(children)
    survivors = nsga2_select([member[1] for member in pool], len(parents.members))
    return Population(
        members=[pool[i] for i in survivors],
        generation=parents.generation + 1,
    )


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------

def _hv_reference(members):
    best_cost = min(member[1].cost for member in members)
    max_viol = max(member[1].violation for member in members)
    return (2.0 * best_cost if best_cost > 0 else 1.0, max_viol if max_viol > 0 else 1.0)


def _population_hash(members):
    payload = repr([(routes, (obj.cost, obj.violation)) for routes, obj in members])
    return hashlib.sha1(payload.encode()).hexdigest()[:16]


def _trace_row(iteration, archive, reference, evaluations, members):
    return {
        "iter": iteration,
        "archive_size": len(archive),
        "archive_hv": hypervolume_2d(archive.points(), reference),
        "elapsed_ms": evaluations / (NOMINAL_EVALS_PER_SECOND / 1000.0),
        "pop_hash": _population_hash(members),
    }


def run(inst, cfg):
    """Execute the multi-objective solver; returns archive, population and trace."""
    cfg.validate()
    evaluator = Evaluator(inst)
    archive = Archive()
    n = len(evaluator.customer_ids)
    members = []
    for m in range(cfg.population_size):
        rng = _member_rng(cfg.seed, m, 0)
        routes = _random_plan(evaluator.customer_ids, rng)
        obj = evaluator.evaluate(routes)
        archive.add(obj, routes)
        members.append((tuple(tuple(r) for r in routes), obj))
    pop = Population(members=members, generation=0)
    reference = _hv_reference(members)
    trace = [_trace_row(0, archive, reference, evaluator.evaluations, pop.members)]
    stats = OperatorStats()

    for iteration in range(1, cfg.iterations + 1):
        children = []
        ops_used = []
        for m, (routes, _obj) in enumerate(pop.members):
            rng = _member_rng(cfg.seed, m, iteration)
            op_idx = select_destroy_operator(stats, rng)
            plan = [list(r) for r in routes]
            k = _draw_k(rng, n, cfg.destroy_fraction)
            if op_idx == 0:
                partial, removed = destroy_random(plan, k, rng)
            else:
                partial, removed = destroy_string(plan, k, rng, evaluator.dist, cfg.segment_cap)
            child = repair_greedy(partial, removed, evaluator.dist)
            child_obj = evaluator.evaluate(child)
            archive.add(child_obj, child)
            child, child_obj = spls_step(
                child, evaluator, cfg, rng, obj=child_obj, on_eval=archive.add
            )
            children.append((tuple(tuple(r) for r in child), child_obj))
            ops_used.append(op_idx)

        pool_objs = [member[1] for member in pop.members] + [c[1] for c in children]
        first_front = set(non_dominated_sort(pool_objs)[0])
        rewards = {}
        for m, op_idx in enumerate(ops_used):
            hit = (len(pop.members) + m) in first_front
            rewards[op_idx] = max(rewards.get(op_idx, 0.0), 1.0 if hit else 0.0)
        for op_idx in sorted(rewards):
            stats.update(op_idx, rewards[op_idx], cfg.decay, cfg.weight_floor)

        pop = population_update(pop, children)
        trace.append(_trace_row(iteration, archive, reference, evaluator.evaluations, pop.members))

    return RunResult(
        mode="multi_objective",
        inst=inst,
        archive=archive,
        population=pop,
        trace=trace,
        reference=reference,
        evaluations=evaluator.evaluations,
    )


def ars_better(a, b):
    """True when objective vector ``a`` beats ``b`` under the baseline rule:
    feasible-and-shorter beats feasible, feasible beats infeasible, and among
    infeasibles the lower violation wins with cost breaking ties."""
    a_feasible = a.violation <= 0.0
    b_feasible = b.violation <= 0.0
    if a_feasible and b_feasible:
        return a.cost < b.cost
    if a_feasible != b_feasible:
        return a_feasible
    if a.violation != b.violation:
        return a.violation < b.violation
    return a.cost < b.cost


def _baseline_local_search(routes, evaluator, cfg, rng, on_eval):
    cur = [list(r) for r in routes]
    cur_obj = evaluator.evaluate(cur)
    on_eval(cur_obj, cur)
    deadline = time.monotonic() + cfg.spls_timeout
    while True:
        best = None
        best_obj = cur_obj
        positions = [(r, p) for r in range(len(cur)) for p in range(len(cur[r]))]
        for op in _SPLS_OPERATORS:
            for r, p in positions:
                cand = op(cur, r, p, rng)
                if cand is None:
                    continue
                cand_obj = evaluator.evaluate(cand)
                on_eval(cand_obj, cand)
                if ars_better(cand_obj, best_obj):
                    best = cand
                    best_obj = cand_obj
        if best is None:
            break
        cur = [list(r) for r in best]
        cur_obj = best_obj
        if time.monotonic() >= deadline:
            break
    return cur, cur_obj


def run_baseline(inst, cfg):
    """Single-incumbent run with the same operators and the baseline acceptance rule."""
    cfg.validate()
    evaluator = Evaluator(inst)
    archive = Archive()
    n = len(evaluator.customer_ids)
    rng = _member_rng(cfg.seed, 0, 0)
    cur = _random_plan(evaluator.customer_ids, rng)
    cur_obj = evaluator.evaluate(cur)
    archive.add(cur_obj, cur)
    members = [(tuple(tuple(r) for r in cur), cur_obj)]
    reference = _hv_reference(members)
    trace = [_trace_row(0, archive, reference, evaluator.evaluations, members)]
    stats = OperatorStats()

    for iteration in range(1, cfg.iterations + 1):
        rng = _member_rng(cfg.seed, 0, iteration)
        op_idx = select_destroy_operator(stats, rng)
        k = _draw_k(rng, n, cfg.destroy_fraction)
        if op_idx == 0:
            partial, removed = destroy_random([list(r) for r in cur], k, rng)
        else:
            partial, removed = destroy_string(
                [list(r) for r in cur], k, rng, evaluator.dist, cfg.segment_cap
            )
        cand = repair_greedy(partial, removed, evaluator.dist)
        cand, cand_obj = _baseline_local_search(cand, evaluator, cfg, rng, archive.add)
        accepted = ars_better(cand_obj, cur_obj)
        if accepted:
            cur, cur_obj = cand, cand_obj
        stats.update(op_idx, 1.0 if accepted else 0.0, cfg.decay, cfg.weight_floor)
        members = [(tuple(tuple(r) for r in cur), cur_obj)]
        trace.append(_trace_row(iteration, archive, reference, evaluator.evaluations, members))

    return RunResult(
        mode="baseline",
        inst=inst,
        archive=archive,
        population=Population(members=members, generation=cfg.iterations),
        trace=trace,
        reference=reference,
        evaluations=evaluator.evaluations,
    )
