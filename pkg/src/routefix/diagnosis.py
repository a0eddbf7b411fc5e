"""Constraint-parameter diagnosis of trade-off solutions.

Two strategies turn an analyzed route plan into concrete adjustments that
make that plan feasible:

* direct relaxation (DCR): every violated bound moves exactly onto the
  plan's attained value (max route load, max route length, actual arrival
  times); structural families (pickup/delivery, same-vehicle, priority)
  get per-subject waivers since they have no numeric right-hand side.
* parameter estimation (ECP): the norm-minimal adjustment over a
  per-family whitelist of parameters subject to the plan being feasible.
  With the plan fixed the implemented families separate, so each reduces
  to a closed form; for time windows the candidate bases are per-node due
  extensions versus one shared shift, compared by total norm.

Applying a report's adjustments to the instance and re-evaluating the plan
must always yield zero residual violation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .errors import InfeasibleDiagnosisError, InstanceError, UnsupportedConstraintError
from .evaluation import Evaluator, RoutePlan, _routes_of, evaluate
from .instances import FAMILY_ORDER, ConstraintSpec, Family, format_number


@dataclass(frozen=True)
class Adjustment:
    family: Family
    path: str
    old: float
    new: float
    conflict: bool = False

    def __post_init__(self):
        if self.new == self.old:
            raise InstanceError(f"adjustment on {self.path} has zero delta")

    @property
    def delta(self):
        return self.new - self.old


@dataclass(frozen=True)
class SuggestionReport:
    solution_index: object
    strategy: str
    adjustments: tuple
    text: str
    residual_violation: float

    @property
    def total_l1(self):
        return sum(abs(a.delta) for a in self.adjustments)

    def to_json_dict(self):
        return {
            "solution_index": self.solution_index,
            "strategy": self.strategy,
            "adjustments": [
                {"family": a.family.value, "path": a.path, "old": a.old, "new": a.new,
                 **({"conflict": True} if a.conflict else {})}
                for a in self.adjustments
            ],
            "residual_violation": self.residual_violation,
            "text": self.text,
        }


DEFAULT_WHITELIST = {
    Family.CAPACITY: ("Q",),
    Family.DISTANCE_LIMIT: ("Lmax",),
    Family.TIME_WINDOWS: ("due",),
    Family.PICKUP_DELIVERY: ("enforced",),
    Family.SAME_VEHICLE: ("max_routes",),
    Family.PRIORITY: ("enforced",),
    Family.DYNAMIC_DEMAND: (),
}


@dataclass(frozen=True)
class DiagnosisConfig:
    norm_p: float = 1.0
    whitelist: dict = field(default_factory=lambda: dict(DEFAULT_WHITELIST))

    def __post_init__(self):
        if self.norm_p < 1:
            raise InstanceError(f"norm order must be >= 1, got {self.norm_p}")


_HANDLED = frozenset(Family)


def _check_families(inst):
    for spec in inst.constraints:
        if spec.family not in _HANDLED:
            raise UnsupportedConstraintError(f"no diagnosis rule for family {spec.family}")


def _boundary_adjustments(evaluator, routes):
    """Per violated constraint, the relaxation that puts the plan on the boundary."""
    adjustments = []
    if evaluator.q is not None:
        max_load = max(evaluator._route_loads(routes), default=0.0)
        if max_load > evaluator.q:
            adjustments.append(
                Adjustment(Family.CAPACITY, "Capacity.Q", evaluator.q, max_load)
            )
    if evaluator.lmax is not None:
        max_length = max(evaluator._route_lengths(routes), default=0.0)
        if max_length > evaluator.lmax:
            adjustments.append(
                Adjustment(Family.DISTANCE_LIMIT, "DistanceLimit.Lmax", evaluator.lmax, max_length)
            )
    if evaluator.tw is not None:
        due = evaluator.tw[1]
        for nid, excess in evaluator._lateness(routes):
            adjustments.append(
                Adjustment(Family.TIME_WINDOWS, f"TimeWindows.due[{nid}]", due[nid], due[nid] + excess)
            )
    for pickup, delivery in evaluator._pd_breaches(routes):
        adjustments.append(
            Adjustment(Family.PICKUP_DELIVERY, f"PickupDelivery.enforced[{pickup},{delivery}]", 1.0, 0.0)
        )
    for gidx, extra in evaluator._group_breaches(routes):
        allowed = evaluator.allowed[gidx]
        adjustments.append(
            Adjustment(Family.SAME_VEHICLE, f"SameVehicle.max_routes[{gidx}]", allowed, allowed + extra)
        )
    for i, j in evaluator._rank_inversions(routes):
        adjustments.append(
            Adjustment(Family.PRIORITY, f"Priority.enforced[{i},{j}]", 1.0, 0.0)
        )
    return adjustments


def diagnose_dcr(plan, inst, solution_index=None):
    """Direct relaxation: move every violated bound onto the plan's attained value."""
    _check_families(inst)
    routes = _routes_of(plan)
    RoutePlan.from_lists(routes).validate([n.id for n in inst.nodes[1:]])
    evaluator = Evaluator(inst)
    adjustments = aggregate(_boundary_adjustments(evaluator, routes))
    return _finish(plan, inst, "DCR", adjustments, solution_index)


def diagnose_ecp(plan, inst, cfg=None, solution_index=None):
    """Norm-minimal parameter estimation over the whitelisted parameters."""
    cfg = cfg or DiagnosisConfig()
    _check_families(inst)
    routes = _routes_of(plan)
    RoutePlan.from_lists(routes).validate([n.id for n in inst.nodes[1:]])
    evaluator = Evaluator(inst)
    adjustments = []

    if evaluator.q is not None:
        max_load = max(evaluator._route_loads(routes), default=0.0)
        if max_load > evaluator.q:
            _require_param(cfg, Family.CAPACITY, "Q")
            adjustments.append(Adjustment(Family.CAPACITY, "Capacity.Q", evaluator.q, max_load))
    if evaluator.lmax is not None:
        max_length = max(evaluator._route_lengths(routes), default=0.0)
        if max_length > evaluator.lmax:
            _require_param(cfg, Family.DISTANCE_LIMIT, "Lmax")
            adjustments.append(
                Adjustment(Family.DISTANCE_LIMIT, "DistanceLimit.Lmax", evaluator.lmax, max_length)
            )
    if evaluator.tw is not None:
        late = evaluator._lateness(routes)
        if late:
            adjustments.extend(_ecp_time_windows(evaluator, inst, late, cfg))
    if evaluator._pd_breaches(routes):
        _require_param(cfg, Family.PICKUP_DELIVERY, "enforced")
        for pickup, delivery in evaluator._pd_breaches(routes):
            adjustments.append(
                Adjustment(Family.PICKUP_DELIVERY, f"PickupDelivery.enforced[{pickup},{delivery}]", 1.0, 0.0)
            )
    if evaluator._group_breaches(routes):
        _require_param(cfg, Family.SAME_VEHICLE, "max_routes")
        for gidx, extra in evaluator._group_breaches(routes):
            allowed = evaluator.allowed[gidx]
            adjustments.append(
                Adjustment(Family.SAME_VEHICLE, f"SameVehicle.max_routes[{gidx}]", allowed, allowed + extra)
            )
    if evaluator.ranks is not None and evaluator._rank_inversions(routes):
        _require_param(cfg, Family.PRIORITY, "enforced")
        for i, j in evaluator._rank_inversions(routes):
            adjustments.append(Adjustment(Family.PRIORITY, f"Priority.enforced[{i},{j}]", 1.0, 0.0))

    adjustments = aggregate(adjustments)
    return _finish(plan, inst, "ECP", adjustments, solution_index)


def _require_param(cfg, family, name):
    if name not in cfg.whitelist.get(family, ()):
        raise InfeasibleDiagnosisError(family.value)


def _ecp_time_windows(evaluator, inst, late, cfg):
    """Choose between per-node due extensions and one shared due shift."""
    allowed = cfg.whitelist.get(Family.TIME_WINDOWS, ())
    per_node_ok = "due" in allowed
    shift_ok = "shift" in allowed
    if not per_node_ok and not shift_ok:
        raise InfeasibleDiagnosisError(Family.TIME_WINDOWS.value)
    p = cfg.norm_p
    n_customers = len(evaluator.customer_ids)
    per_node_total = sum(excess ** p for _nid, excess in late) ** (1.0 / p)
    worst = max(excess for _nid, excess in late)
    shift_total = worst * n_customers ** (1.0 / p)
    use_shift = shift_ok and (not per_node_ok or shift_total < per_node_total)
    if use_shift:
        spec = inst.constraint(Family.TIME_WINDOWS)
        old_shift = float(spec.params.get("due_shift", 0.0)) if spec else 0.0
        return [Adjustment(Family.TIME_WINDOWS, "TimeWindows.due_shift", old_shift, old_shift + worst)]
    due = evaluator.tw[1]
    return [
        Adjustment(Family.TIME_WINDOWS, f"TimeWindows.due[{nid}]", due[nid], due[nid] + excess)
        for nid, excess in late
    ]


def _finish(plan, inst, strategy, adjustments, solution_index):
    text = _render(adjustments, inst.description)
    patched = apply_adjustments(inst, adjustments)
    residual, _entries = evaluate(plan, patched)
    return SuggestionReport(
        solution_index=solution_index,
        strategy=strategy,
        adjustments=tuple(adjustments),
        text=text,
        residual_violation=residual.violation,
    )


# ---------------------------------------------------------------------------
# Aggregation and application
# ---------------------------------------------------------------------------

def _path_key(adjustment):
    numbers = tuple(int(t) for t in re.findall(r"\d+", adjustment.path))
    return (FAMILY_ORDER[adjustment.family], adjustment.path.split("[")[0], numbers)


def aggregate(adjustments):
    """Keep one final adjustment per parameter path: the most demanding one.

    Upward and downward relaxations on the same path cannot be merged; both
    survive with a conflict flag.
    """
    by_path = {}
    for adj in adjustments:
        by_path.setdefault(adj.path, []).append(adj)
    out = []
    for path, group in by_path.items():
        ups = [a for a in group if a.new > a.old]
        downs = [a for a in group if a.new < a.old]
        if ups and downs:
            out.append(replace(max(ups, key=lambda a: a.new), conflict=True))
            out.append(replace(min(downs, key=lambda a: a.new), conflict=True))
        elif ups:
            out.append(max(ups, key=lambda a: a.new))
        else:
            out.append(min(downs, key=lambda a: a.new))
    return sorted(out, key=_path_key)


_PATH_RES = {
    "capacity_q": re.compile(r"^Capacity\.Q$"),
    "dlimit": re.compile(r"^DistanceLimit\.Lmax$"),
    "tw_due": re.compile(r"^TimeWindows\.due\[(\d+)\]$"),
    "tw_shift": re.compile(r"^TimeWindows\.due_shift$"),
    "pd": re.compile(r"^PickupDelivery\.enforced\[(\d+),(\d+)\]$"),
    "sv": re.compile(r"^SameVehicle\.max_routes\[(\d+)\]$"),
    "prio": re.compile(r"^Priority\.enforced\[(\d+),(\d+)\]$"),
    "dyn_k": re.compile(r"^DynamicDemand\.k$"),
}


def _copy_params(spec):
    p = dict(spec.params)
    if spec.family is Family.TIME_WINDOWS:
        p["windows"] = {k: tuple(v) for k, v in p.get("windows", {}).items()}
    elif spec.family is Family.PICKUP_DELIVERY:
        p["pairs"] = [tuple(x) for x in p["pairs"]]
        p["waived"] = [tuple(x) for x in p.get("waived", [])]
    elif spec.family is Family.SAME_VEHICLE:
        p["groups"] = [list(g) for g in p["groups"]]
        p["allowed"] = list(p.get("allowed", [1] * len(p["groups"])))
    elif spec.family is Family.PRIORITY:
        p["ranks"] = dict(p["ranks"])
        p["exempt"] = [tuple(x) for x in p.get("exempt", [])]
    return p


def apply_adjustments(inst, adjustments):
    """Return a copy of the instance with the adjustments written into its constraints."""
    params = {spec.family: _copy_params(spec) for spec in inst.constraints}

    def _family_params(family, path):
        if family not in params:
            raise InstanceError(f"parameter path not found: {path}")
        return params[family]

    for adj in adjustments:
        path = adj.path
        if _PATH_RES["capacity_q"].match(path):
            _family_params(Family.CAPACITY, path)["Q"] = adj.new
        elif _PATH_RES["dlimit"].match(path):
            _family_params(Family.DISTANCE_LIMIT, path)["Lmax"] = adj.new
        elif m := _PATH_RES["tw_due"].match(path):
            nid = int(m.group(1))
            p = _family_params(Family.TIME_WINDOWS, path)
            windows = p.setdefault("windows", {})
            if nid in windows:
                ready, _due, service = windows[nid]
            else:
                node = inst.node_by_id(nid)
                ready, service = node.ready, node.service
            windows[nid] = (ready, adj.new, service)
        elif _PATH_RES["tw_shift"].match(path):
            _family_params(Family.TIME_WINDOWS, path)["due_shift"] = adj.new
        elif m := _PATH_RES["pd"].match(path):
            pair = (int(m.group(1)), int(m.group(2)))
            p = _family_params(Family.PICKUP_DELIVERY, path)
            if pair not in p["pairs"]:
                raise InstanceError(f"parameter path not found: {path}")
            waived = set(p["waived"])
            if adj.new == 0:
                waived.add(pair)
            else:
                waived.discard(pair)
            p["waived"] = sorted(waived)
        elif m := _PATH_RES["sv"].match(path):
            gidx = int(m.group(1))
            p = _family_params(Family.SAME_VEHICLE, path)
            if gidx >= len(p["groups"]):
                raise InstanceError(f"parameter path not found: {path}")
            p["allowed"][gidx] = int(adj.new)
        elif m := _PATH_RES["prio"].match(path):
            pair = (int(m.group(1)), int(m.group(2)))
            p = _family_params(Family.PRIORITY, path)
            exempt = set(p["exempt"])
            if adj.new == 0:
                exempt.add(pair)
            else:
                exempt.discard(pair)
            p["exempt"] = sorted(exempt)
        elif _PATH_RES["dyn_k"].match(path):
            _family_params(Family.DYNAMIC_DEMAND, path)["k"] = adj.new
        else:
            raise InstanceError(f"parameter path not found: {path}")

    constraints = tuple(
        ConstraintSpec(spec.family, params[spec.family]) for spec in inst.constraints
    )
    return replace(inst, constraints=constraints)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _sentence(adjustment):
    path = adjustment.path
    old, new = format_number(adjustment.old), format_number(adjustment.new)
    prefix = "Note, two analyses disagree on this parameter: " if adjustment.conflict else ""
    if _PATH_RES["capacity_q"].match(path):
        return f"{prefix}Relax the vehicle capacity from {old} to {new} units."
    if _PATH_RES["dlimit"].match(path):
        return f"{prefix}Relax the maximum route length from {old} to {new} units."
    if m := _PATH_RES["tw_due"].match(path):
        return (
            f"{prefix}Extend the due time of customer {m.group(1)} "
            f"from {old} to {new} time units."
        )
    if _PATH_RES["tw_shift"].match(path):
        delta = format_number(adjustment.new - adjustment.old)
        return f"{prefix}Shift every customer due time later by {delta} time units (from offset {old} to {new})."
    if m := _PATH_RES["pd"].match(path):
        return (
            f"{prefix}Exempt the pickup and delivery pair ({m.group(1)}, {m.group(2)}) "
            f"from the same-vehicle, pickup-first requirement."
        )
    if m := _PATH_RES["sv"].match(path):
        return (
            f"{prefix}Allow the customers in group {m.group(1)} to be served by up to "
            f"{new} vehicles instead of {old}."
        )
    if m := _PATH_RES["prio"].match(path):
        return (
            f"{prefix}Allow customer {m.group(1)} to be visited before "
            f"higher-priority customer {m.group(2)}."
        )
    if _PATH_RES["dyn_k"].match(path):
        return f"{prefix}Reduce the dynamic demand growth factor from {old} to {new}."
    return f"{prefix}Adjust {path} from {old} to {new}."


def _render(adjustments, description):
    if not adjustments:
        return description
    sentences = [_sentence(a) for a in adjustments]
    return description + " " + " ".join(sentences)


def render_text(report, inst):
    """Augmented problem description for an aggregated report."""
    return _render(report.adjustments, inst.description)
