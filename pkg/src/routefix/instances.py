"""Problem instances: Solomon parsing, distance matrices and the variant catalog.

A problem instance couples node data (coordinates, demands, time windows)
with a set of constraint specifications.  Instances for the built-in variant
catalog are produced by :func:`build_variant`, which also generates the
natural-language requirement text used by the description parser.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import InstanceError, SolomonFormatError


class Family(str, Enum):
    """Constraint families, in canonical rendering order."""

    CAPACITY = "Capacity"
    DISTANCE_LIMIT = "DistanceLimit"
    TIME_WINDOWS = "TimeWindows"
    PICKUP_DELIVERY = "PickupDelivery"
    SAME_VEHICLE = "SameVehicle"
    PRIORITY = "Priority"
    DYNAMIC_DEMAND = "DynamicDemand"


FAMILY_ORDER = {fam: i for i, fam in enumerate(Family)}


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    demand: float
    ready: float
    due: float
    service: float

    def __post_init__(self):
        if self.ready > self.due:
            raise InstanceError(f"node {self.id}: ready {self.ready} > due {self.due}")
        if self.demand < 0:
            raise InstanceError(f"node {self.id}: negative demand {self.demand}")
        if self.id == 0 and self.demand != 0:
            raise InstanceError("depot must have zero demand")


@dataclass(frozen=True)
class ConstraintSpec:
    """One constraint family plus its family-specific parameters.

    Parameter keys by family:
      Capacity        Q
      DistanceLimit   Lmax
      TimeWindows     windows {node id: (ready, due, service)}, due_shift
      PickupDelivery  pairs [(pickup, delivery), ...], waived [...]
      SameVehicle     groups [[ids], ...], allowed [max vehicles per group]
      Priority        ranks {node id: rank}, exempt [(i, j), ...]
      DynamicDemand   node, k, depot
    """

    family: Family
    params: dict

    def validate(self, node_ids):
        ids = set(node_ids)
        p = self.params
        if self.family is Family.CAPACITY:
            _require_finite(p["Q"], "Q")
        elif self.family is Family.DISTANCE_LIMIT:
            _require_finite(p["Lmax"], "Lmax")
        elif self.family is Family.TIME_WINDOWS:
            for nid, (ready, due, _service) in p.get("windows", {}).items():
                if nid not in ids:
                    raise InstanceError(f"TimeWindows references unknown node {nid}")
                if ready > due:
                    raise InstanceError(f"TimeWindows node {nid}: ready > due")
        elif self.family is Family.PICKUP_DELIVERY:
            for pickup, delivery in p["pairs"]:
                if pickup == delivery:
                    raise InstanceError(f"pickup equals delivery: {pickup}")
                if pickup not in ids or delivery not in ids:
                    raise InstanceError(f"unknown node in pair ({pickup}, {delivery})")
        elif self.family is Family.SAME_VEHICLE:
            for group in p["groups"]:
                for nid in group:
                    if nid not in ids:
                        raise InstanceError(f"SameVehicle references unknown node {nid}")
        elif self.family is Family.PRIORITY:
            for nid in p["ranks"]:
                if nid not in ids:
                    raise InstanceError(f"Priority references unknown node {nid}")
        elif self.family is Family.DYNAMIC_DEMAND:
            if p["node"] not in ids:
                raise InstanceError(f"DynamicDemand references unknown node {p['node']}")
        return self


def _require_finite(value, name):
    if not math.isfinite(value):
        raise InstanceError(f"{name} must be finite, got {value}")


# ---------------------------------------------------------------------------
# Variant catalog
# ---------------------------------------------------------------------------

FLAG_CAPACITY = "C"
FLAG_LENGTH = "L"
FLAG_TIME_WINDOWS = "TW"
FLAG_PICKUP_DELIVERY = "PD"
FLAG_SAME_VEHICLE = "S"
FLAG_PRIORITY = "P"

_BASE_COMBOS = (
    (), ("P",), ("S",), ("S", "P"),
    ("PD",), ("PD", "P"), ("PD", "S"), ("PD", "S", "P"),
    ("TW",), ("TW", "P"), ("TW", "S"), ("TW", "S", "P"),
    ("PD", "TW"), ("PD", "TW", "P"), ("PD", "TW", "S"), ("PD", "TW", "S", "P"),
)
_CAP_COMBOS = (
    (), ("P",), ("S",), ("S", "P"),
    ("TW",), ("TW", "P"), ("TW", "S"), ("TW", "S", "P"),
    ("L",), ("L", "P"), ("L", "S"), ("L", "S", "P"),
    ("L", "TW"), ("L", "TW", "P"), ("L", "TW", "S"), ("L", "TW", "S", "P"),
)


@dataclass(frozen=True)
class VariantDescriptor:
    flags: frozenset
    dynamic: bool
    name: str

    @classmethod
    def from_flags(cls, flags, dynamic=False):
        flags = frozenset(flags)
        unknown = flags - {"C", "L", "TW", "PD", "S", "P"}
        if unknown:
            raise InstanceError(f"unknown constraint flags: {sorted(unknown)}")
        if dynamic and "C" not in flags:
            raise InstanceError("dynamic demand requires the capacity flag")
        return cls(flags=flags, dynamic=dynamic, name=_name_from_flags(flags, dynamic))

    @classmethod
    def from_name(cls, name):
        canonical = resolve_variant_name(name)
        flags, dynamic = _flags_from_name(canonical)
        return cls(flags=frozenset(flags), dynamic=dynamic, name=canonical)


def _name_from_flags(flags, dynamic):
    name = "D" if dynamic else ""
    name += "P" if "P" in flags else ""
    name += "C" if "C" in flags else ""
    name += "VRP"
    name += "PD" if "PD" in flags else ""
    if "L" in flags:
        name += "-L" if dynamic else "L"
    name += "S" if "S" in flags else ""
    name += "TW" if "TW" in flags else ""
    return name


_NAME_RE = re.compile(r"^(D)?(P)?(C)?VRP(PD)?(-?L)?(S)?(TW)?$")


def _flags_from_name(name):
    m = _NAME_RE.match(name)
    if m is None:
        raise InstanceError(f"unrecognized variant name: {name!r}")
    dynamic = m.group(1) is not None
    flags = set()
    if m.group(2):
        flags.add("P")
    if m.group(3):
        flags.add("C")
    if m.group(4):
        flags.add("PD")
    if m.group(5):
        flags.add("L")
    if m.group(6):
        flags.add("S")
    if m.group(7):
        flags.add("TW")
    return flags, dynamic


def _build_catalog():
    names = []
    for combo in _BASE_COMBOS:
        names.append(_name_from_flags(frozenset(combo), dynamic=False))
    for combo in _BASE_COMBOS:
        names.append(_name_from_flags(frozenset(combo) | {"L"}, dynamic=False))
    for combo in _CAP_COMBOS:
        names.append(_name_from_flags(frozenset(combo) | {"C"}, dynamic=False))
    names.append(_name_from_flags(frozenset({"C"}), dynamic=True))
    names.append(_name_from_flags(frozenset({"C", "L"}), dynamic=True))
    return tuple(names)


VARIANT_NAMES = _build_catalog()
_ALIASES = {name.replace("-", "").upper(): name for name in VARIANT_NAMES}


def resolve_variant_name(name):
    """Map a (possibly hyphenated) variant name to its canonical catalog form."""
    key = name.replace("-", "").upper()
    if key not in _ALIASES:
        raise InstanceError(f"unknown variant name: {name!r}")
    return _ALIASES[key]


# ---------------------------------------------------------------------------
# Solomon parsing and node utilities
# ---------------------------------------------------------------------------

def parse_solomon(text):
    """Parse Solomon-format content into (nodes, declared fleet capacity).

    Nodes are returned in file order with the depot (id 0) first.
    """
    lines = text.splitlines()
    capacity = None
    rows = []
    in_customers = False
    expect_vehicle_data = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        upper = line.upper()
        if "NUMBER" in upper and "CAPACITY" in upper:
            expect_vehicle_data = True
            continue
        if expect_vehicle_data:
            tokens = line.split()
            if len(tokens) != 2:
                raise SolomonFormatError("expected '<vehicles> <capacity>'", line=lineno)
            try:
                capacity = float(tokens[1])
            except ValueError:
                raise SolomonFormatError(f"bad capacity value {tokens[1]!r}", line=lineno)
            expect_vehicle_data = False
            continue
        if upper.startswith("CUSTOMER"):
            in_customers = True
            continue
        if in_customers:
            if "CUST" in upper or "XCOORD" in upper:
                continue  # column header
            tokens = line.split()
            if len(tokens) != 7:
                raise SolomonFormatError(
                    f"expected 7 fields, got {len(tokens)}", line=lineno
                )
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise SolomonFormatError(f"non-numeric field in {line!r}", line=lineno)
            rows.append(values)

    if capacity is None:
        raise SolomonFormatError("missing VEHICLE NUMBER/CAPACITY header")
    if not rows:
        raise SolomonFormatError("no customer rows found")
    if int(rows[0][0]) != 0:
        raise SolomonFormatError("first customer row must be the depot (id 0)")

    nodes = [
        Node(id=int(r[0]), x=r[1], y=r[2], demand=r[3], ready=r[4], due=r[5], service=r[6])
        for r in rows
    ]
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise SolomonFormatError("duplicate node ids")
    return nodes, capacity


def truncate(nodes, n):
    """Keep the depot plus the first ``n`` customers in file order."""
    if n < 1:
        raise InstanceError(f"need at least one customer, got n={n}")
    customers = nodes[1:]
    if n > len(customers):
        raise InstanceError(f"requested {n} customers, file has {len(customers)}")
    return [nodes[0]] + list(customers[:n])


def scale_time_windows(nodes, divisor):
    """Divide every customer's ready/due times by ``divisor``.

    The depot window and all service durations are left untouched so routes
    can always depart.
    """
    if divisor <= 0:
        raise InstanceError(f"divisor must be positive, got {divisor}")
    out = [nodes[0]]
    for node in nodes[1:]:
        out.append(replace(node, ready=node.ready / divisor, due=node.due / divisor))
    return out


def distance_matrix(nodes):
    """Full-precision Euclidean distance matrix over the given nodes."""
    if not nodes:
        raise InstanceError("cannot build a distance matrix from zero nodes")
    coords = np.array([(n.x, n.y) for n in nodes], dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    assert np.array_equal(dist, dist.T)
    assert np.all(np.diag(dist) == 0.0)
    dist.setflags(write=False)
    return dist


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    name: str
    nodes: tuple
    constraints: tuple
    dist: np.ndarray
    descriptor: VariantDescriptor
    description: str

    @property
    def customer_ids(self):
        return [n.id for n in self.nodes[1:]]

    def node_by_id(self, nid):
        return self.nodes[nid]

    def constraint(self, family):
        for spec in self.constraints:
            if spec.family is family:
                return spec
        return None

    def to_json(self):
        payload = {
            "name": self.name,
            "description": self.description,
            "nodes": [
                {
                    "id": n.id, "x": n.x, "y": n.y, "demand": n.demand,
                    "ready": n.ready, "due": n.due, "service": n.service,
                }
                for n in self.nodes
            ],
            "constraints": [_spec_to_json(s) for s in self.constraints],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        payload = json.loads(text)
        try:
            nodes = tuple(
                Node(
                    id=int(n["id"]), x=float(n["x"]), y=float(n["y"]),
                    demand=float(n["demand"]), ready=float(n["ready"]),
                    due=float(n["due"]), service=float(n["service"]),
                )
                for n in payload["nodes"]
            )
            constraints = tuple(_spec_from_json(c) for c in payload["constraints"])
            name = payload["name"]
            description = payload.get("description", "")
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"bad instance schema: {exc}") from exc
        if not nodes or nodes[0].id != 0:
            raise InstanceError("instance must list the depot (id 0) first")
        node_ids = [n.id for n in nodes]
        for spec in constraints:
            spec.validate(node_ids)
        try:
            descriptor = VariantDescriptor.from_name(name)
        except InstanceError:
            flags = _flags_from_families([s.family for s in constraints])
            dynamic = any(s.family is Family.DYNAMIC_DEMAND for s in constraints)
            descriptor = VariantDescriptor(flags=frozenset(flags), dynamic=dynamic, name=name)
        return cls(
            name=name, nodes=nodes, constraints=constraints,
            dist=distance_matrix(nodes), descriptor=descriptor, description=description,
        )


def _flags_from_families(families):
    mapping = {
        Family.CAPACITY: "C", Family.DISTANCE_LIMIT: "L", Family.TIME_WINDOWS: "TW",
        Family.PICKUP_DELIVERY: "PD", Family.SAME_VEHICLE: "S", Family.PRIORITY: "P",
        Family.DYNAMIC_DEMAND: "C",
    }
    return {mapping[f] for f in families}


def _spec_to_json(spec):
    out = {"family": spec.family.value}
    p = spec.params
    if spec.family is Family.TIME_WINDOWS:
        out["windows"] = {str(k): list(v) for k, v in sorted(p["windows"].items())}
        out["due_shift"] = p.get("due_shift", 0.0)
    elif spec.family is Family.PICKUP_DELIVERY:
        out["pairs"] = [list(pair) for pair in p["pairs"]]
        out["waived"] = [list(pair) for pair in p.get("waived", [])]
    elif spec.family is Family.SAME_VEHICLE:
        out["groups"] = [list(g) for g in p["groups"]]
        out["allowed"] = list(p.get("allowed", [1] * len(p["groups"])))
    elif spec.family is Family.PRIORITY:
        out["ranks"] = {str(k): v for k, v in sorted(p["ranks"].items())}
        out["exempt"] = [list(pair) for pair in p.get("exempt", [])]
    else:
        out.update(p)
    return out


def _spec_from_json(obj):
    family = Family(obj["family"])
    params = {k: v for k, v in obj.items() if k != "family"}
    if family is Family.TIME_WINDOWS:
        params["windows"] = {int(k): tuple(v) for k, v in params.get("windows", {}).items()}
        params.setdefault("due_shift", 0.0)
    elif family is Family.PICKUP_DELIVERY:
        params["pairs"] = [tuple(p) for p in params["pairs"]]
        params["waived"] = [tuple(p) for p in params.get("waived", [])]
    elif family is Family.SAME_VEHICLE:
        params["groups"] = [list(g) for g in params["groups"]]
        params.setdefault("allowed", [1] * len(params["groups"]))
    elif family is Family.PRIORITY:
        params["ranks"] = {int(k): int(v) for k, v in params["ranks"].items()}
        params["exempt"] = [tuple(p) for p in params.get("exempt", [])]
    return ConstraintSpec(family=family, params=params)


# ---------------------------------------------------------------------------
# Variant construction
# ---------------------------------------------------------------------------

TW_DIVISOR_DEFAULT = 10.0

_OVERRIDE_FLAGS = {
    "Q": "C",
    "Lmax": "L",
    "tw_divisor": "TW",
    "pd_pairs": "PD",
    "s_groups": "S",
    "p_ranks": "P",
    "dynamic_node": "dynamic",
    "dynamic_k": "dynamic",
}


def default_pd_pairs(customer_ids):
    """Pair customer 2k-1 (pickup) with 2k (delivery)."""
    ordered = sorted(customer_ids)
    return [(ordered[i], ordered[i + 1]) for i in range(0, len(ordered) - 1, 2)]


def default_s_groups(customer_ids):
    return [sorted(customer_ids)[:3]]


def default_p_ranks(customer_ids):
    return {cid: cid % 3 for cid in sorted(customer_ids)}


def build_variant(base_nodes, descriptor, params=None):
    """Construct a ProblemInstance realizing exactly the descriptor's flags.

    ``params`` may override the per-family defaults (Q=0, Lmax=0,
    tw_divisor=10, derived PD pairs / S groups / P ranks, dynamic node 19
    with k=5).  Overrides for a flag the descriptor lacks raise an error.
    """
    params = dict(params or {})
    for key in params:
        if key not in _OVERRIDE_FLAGS:
            raise InstanceError(f"unknown parameter override: {key!r}")
        flag = _OVERRIDE_FLAGS[key]
        if flag == "dynamic":
            if not descriptor.dynamic:
                raise InstanceError(f"override {key!r} requires a dynamic variant")
        elif flag not in descriptor.flags:
            raise InstanceError(f"override {key!r} requires flag {flag!r}")

    nodes = list(base_nodes)
    if FLAG_TIME_WINDOWS in descriptor.flags:
        nodes = scale_time_windows(nodes, params.get("tw_divisor", TW_DIVISOR_DEFAULT))
    customer_ids = [n.id for n in nodes[1:]]
    node_ids = [n.id for n in nodes]

    constraints = []
    sentences = []
    if FLAG_CAPACITY in descriptor.flags:
        q = float(params.get("Q", 0.0))
        constraints.append(ConstraintSpec(Family.CAPACITY, {"Q": q}))
        sentences.append(
            f"I need to make sure the total load on each route stays within {_fmt(q)} units."
        )
    if descriptor.dynamic:
        dyn_node = int(params.get("dynamic_node", 19 if 19 in customer_ids else customer_ids[-1]))
        dyn_k = float(params.get("dynamic_k", 5.0))
        constraints.append(
            ConstraintSpec(Family.DYNAMIC_DEMAND, {"node": dyn_node, "k": dyn_k, "depot": 0})
        )
        sentences.append(
            f"Specifically, for node [{dyn_node}], its base demand is augmented by "
            f"{_fmt(dyn_k)} times the square root of the accumulated travel distance "
            f"from the depot [0] to that node."
        )
    if FLAG_LENGTH in descriptor.flags:
        lmax = float(params.get("Lmax", 0.0))
        constraints.append(ConstraintSpec(Family.DISTANCE_LIMIT, {"Lmax": lmax}))
        sentences.append(
            f"I need to make sure each route is no longer than {_fmt(lmax)} units."
        )
    if FLAG_TIME_WINDOWS in descriptor.flags:
        windows = {n.id: (n.ready, n.due, n.service) for n in nodes[1:]}
        constraints.append(
            ConstraintSpec(Family.TIME_WINDOWS, {"windows": windows, "due_shift": 0.0})
        )
        sentences.append(
            "I need to make sure every customer is visited within its specified time window."
        )
    if FLAG_PICKUP_DELIVERY in descriptor.flags:
        pairs = [tuple(p) for p in params.get("pd_pairs", default_pd_pairs(customer_ids))]
        constraints.append(
            ConstraintSpec(Family.PICKUP_DELIVERY, {"pairs": pairs, "waived": []})
        )
        rendered = ", ".join(f"({p}, {d})" for p, d in pairs)
        sentences.append(
            "I need to make sure each pickup is completed by the same vehicle before "
            f"its corresponding delivery, with pickup and delivery pairs [{rendered}]."
        )
    if FLAG_SAME_VEHICLE in descriptor.flags:
        groups = [list(g) for g in params.get("s_groups", default_s_groups(customer_ids))]
        constraints.append(
            ConstraintSpec(Family.SAME_VEHICLE, {"groups": groups, "allowed": [1] * len(groups)})
        )
        rendered = ", ".join("[" + ", ".join(str(i) for i in g) + "]" for g in groups)
        sentences.append(
            "I need to make sure the customers in each of the groups "
            f"[{rendered}] are served by the same vehicle."
        )
    if FLAG_PRIORITY in descriptor.flags:
        ranks = {int(k): int(v) for k, v in params.get("p_ranks", default_p_ranks(customer_ids)).items()}
        constraints.append(ConstraintSpec(Family.PRIORITY, {"ranks": ranks, "exempt": []}))
        rendered = ", ".join(f"{k}: {v}" for k, v in sorted(ranks.items()))
        sentences.append(
            "I need to make sure customers with a smaller priority value are visited "
            f"earlier than higher-valued ones on each route, with priority values {{{rendered}}}."
        )

    for spec in constraints:
        spec.validate(node_ids)
    return ProblemInstance(
        name=descriptor.name,
        nodes=tuple(nodes),
        constraints=tuple(constraints),
        dist=distance_matrix(nodes),
        descriptor=descriptor,
        description=" ".join(sentences),
    )


def format_number(value):
    """Render a number the way the requirement templates expect."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


_fmt = format_number


def bundled_solomon_path():
    """Path of the Solomon-format base file shipped with the package."""
    from importlib.resources import files

    return files("routefix.data") / "solomon_c103.txt"


def load_bundled_base(n=None):
    """Load the bundled base file, optionally truncated to ``n`` customers."""
    text = bundled_solomon_path().read_text()
    nodes, capacity = parse_solomon(text)
    if n is not None:
        nodes = truncate(nodes, n)
    return nodes, capacity
