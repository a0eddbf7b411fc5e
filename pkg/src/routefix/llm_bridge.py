"""Optional chat-completion client with a deterministic offline fallback.

Free-text requirement descriptions are parsed rules-first against the
template sentences the instance builder emits; only spans those rules
cannot consume are (optionally) sent to an external endpoint, and any
external answer is schema-validated before use.  Suggestion rephrasing
likewise never trusts the external side: every numeric value must survive
verbatim or the template text is returned unchanged.
"""

from __future__ import annotations

import ast
import json
import os
import re
import warnings
from dataclasses import dataclass

from .instances import ConstraintSpec, Family, format_number


@dataclass(frozen=True)
class ChatClientConfig:
    endpoint: str = ""
    model: str = ""
    timeout: float = 30.0
    api_key_env: str = "ROUTEFIX_API_KEY"
    enabled: bool = False

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class ParseOutcome:
    constraints: tuple
    unparsed: tuple  # (start, end) character spans
    source: str  # "rules" or "external"


_NUM = r"-?\d+(?:\.\d+)?(?:e-?\d+)?"

_CAPACITY_RE = re.compile(rf"total load on each route stays within ({_NUM}) units")
_LENGTH_RE = re.compile(rf"each route is no longer than ({_NUM}) units")
_DYNAMIC_RE = re.compile(
    rf"for node \[(\d+)\], its base demand is augmented by ({_NUM}) times the square "
    rf"root of the accumulated travel distance from the depot \[(\d+)\]"
)
_TW_RE = re.compile(r"visited within its specified time window")
_PD_RE = re.compile(r"pickup and delivery pairs \[(.*)\]")
_S_RE = re.compile(r"customers in each of the groups \[(.*)\] are served by the same vehicle")
_P_RE = re.compile(r"priority values \{(.*)\}")


def _parse_capacity(m):
    return ConstraintSpec(Family.CAPACITY, {"Q": float(m.group(1))})


def _parse_length(m):
    return ConstraintSpec(Family.DISTANCE_LIMIT, {"Lmax": float(m.group(1))})


def _parse_dynamic(m):
    return ConstraintSpec(
        Family.DYNAMIC_DEMAND,
        {"node": int(m.group(1)), "k": float(m.group(2)), "depot": int(m.group(3))},
    )


def _parse_tw(_m):
    # Window values live in the instance data; an empty map means "use node windows".
    return ConstraintSpec(Family.TIME_WINDOWS, {"windows": {}, "due_shift": 0.0})


def _parse_pd(m):
    pairs = ast.literal_eval("[" + m.group(1) + "]")
    return ConstraintSpec(
        Family.PICKUP_DELIVERY,
        {"pairs": [tuple(map(int, p)) for p in pairs], "waived": []},
    )


def _parse_s(m):
    groups = ast.literal_eval("[" + m.group(1) + "]")
    return ConstraintSpec(
        Family.SAME_VEHICLE,
        {"groups": [list(map(int, g)) for g in groups], "allowed": [1] * len(groups)},
    )


def _parse_p(m):
    ranks = ast.literal_eval("{" + m.group(1) + "}")
    return ConstraintSpec(
        Family.PRIORITY,
        {"ranks": {int(k): int(v) for k, v in ranks.items()}, "exempt": []},
    )


_RULES = (
    (_DYNAMIC_RE, _parse_dynamic),  # before capacity: both mention units
    (_CAPACITY_RE, _parse_capacity),
    (_LENGTH_RE, _parse_length),
    (_TW_RE, _parse_tw),
    (_PD_RE, _parse_pd),
    (_S_RE, _parse_s),
    (_P_RE, _parse_p),
)


def _sentence_spans(text):
    spans = []
    start = 0
    for m in re.finditer(r"\.(?=\s|$)", text):
        end = m.end()
        if text[start:end].strip():
            spans.append((start, end))
        start = end
    if text[start:].strip():
        spans.append((start, len(text)))
    return spans


def parse_description(text, cfg=None, transport=None):
    """Extract constraint specs from a requirement description.

    The rule catalog runs first; when an external client is enabled and
    sentences remain unparsed, one structured call may fill the gap.
    """
    if not text:
        raise ValueError("description must be non-empty")
    cfg = cfg or ChatClientConfig()
    constraints = []
    unparsed = []
    for start, end in _sentence_spans(text):
        sentence = text[start:end]
        for pattern, builder in _RULES:
            m = pattern.search(sentence)
            if m:
                try:
                    constraints.append(builder(m))
                except (ValueError, SyntaxError):
                    unparsed.append((start, end))
                break
        else:
            unparsed.append((start, end))
    source = "rules"
    if cfg.enabled and unparsed:
        external = _external_parse(text, unparsed, cfg, transport)
        if external:
            constraints.extend(external)
            unparsed = []
            source = "external"
    return ParseOutcome(
        constraints=tuple(constraints), unparsed=tuple(unparsed), source=source
    )


def _external_parse(text, unparsed, cfg, transport):
    snippets = "\n".join(text[s:e] for s, e in unparsed)
    messages = [
        {
            "role": "user",
            "content": (
                "Translate the following routing requirements into a JSON object "
                '{"constraints": [{"family": ..., ...}]} using families '
                "Capacity, DistanceLimit, TimeWindows, PickupDelivery, SameVehicle, "
                "Priority, DynamicDemand.\n" + snippets
            ),
        }
    ]
    try:
        payload = _chat(cfg, messages, transport)
        content = payload["choices"][0]["message"]["content"]
        data = json.loads(content)
        specs = []
        from .instances import _spec_from_json

        for obj in data["constraints"]:
            specs.append(_spec_from_json(obj))
        return specs
    except Exception as exc:  # noqa: BLE001 - any failure falls back to rules
        warnings.warn(f"external parse failed, using rules result: {exc}", stacklevel=2)
        return None


def rephrase(report, cfg=None, transport=None):
    """Optionally reword a suggestion report; numeric values must survive verbatim."""
    cfg = cfg or ChatClientConfig()
    template_text = report.text
    if not cfg.enabled:
        return template_text
    messages = [
        {
            "role": "user",
            "content": (
                "Reword the following model revision note, keeping every number "
                "exactly as written:\n" + template_text
            ),
        }
    ]
    try:
        payload = _chat(cfg, messages, transport)
        content = payload["choices"][0]["message"]["content"]
    except Exception as exc:  # noqa: BLE001
        warnings.warn(f"external rephrase failed, using template text: {exc}", stacklevel=2)
        return template_text
    for adjustment in report.adjustments:
        for value in (adjustment.old, adjustment.new):
            if format_number(value) not in content:
                warnings.warn(
                    f"external rephrase dropped value {format_number(value)}; "
                    "using template text",
                    stacklevel=2,
                )
                return template_text
    return content


def _chat(cfg, messages, transport):
    request = {
        "model": cfg.model,
        "messages": messages,
        "response_format": {"type": "json_object"},
    }
    if transport is not None:
        return transport(request)
    import requests

    headers = {}
    key = os.environ.get(cfg.api_key_env, "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    response = requests.post(cfg.endpoint, json=request, headers=headers, timeout=cfg.timeout)
    response.raise_for_status()
    return response.json()
