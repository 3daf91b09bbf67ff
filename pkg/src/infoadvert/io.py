"""JSON instance / rule / report documents.

Instance documents carry a ``kind`` discriminator:

* ``single``: ``n_states``, ``n_actions``, ``utility`` (state-major rows),
  ``mu``, ``theta``; a converted disclosure problem replaces ``utility`` by
  ``linear_cost`` and records ``scale_factor``.
* ``multi``: ``n_states``, ``n_actions``, ``utility``, ``types`` (one belief
  per row), ``joint`` (``n_states`` rows, one column per type).
* ``disclosure``: ``prospects``, a list of ``{"p", "pi", "v"}`` objects.

Rule documents are ``{"signals": [{"pi_given_omega": [...], "price": x}, ...]}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ValidationError
from .model import (
    AdvertisingRule,
    DecisionProblem,
    MultiTypeInstance,
    Prospect,
    SingleTypeInstance,
)

SIG_DIGITS = 12


@dataclass
class InstanceFile:
    kind: str
    instance: SingleTypeInstance | MultiTypeInstance | None = None
    prospects: list[Prospect] | None = None
    scale_factor: float | None = None


def _load_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _field(doc: dict, key: str, where: str) -> Any:
    if key not in doc:
        raise ValidationError(f"{where}: missing field {key!r}")
    return doc[key]


def _matrix(value: Any, where: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: expected a numeric matrix") from exc
    if arr.ndim != 2 or (shape is not None and arr.shape != shape):
        want = f" of shape {shape}" if shape else ""
        raise ValidationError(f"{where}: expected a matrix{want}, got shape {arr.shape}")
    return arr


def _vector(value: Any, where: str, length: int | None = None) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: expected a numeric vector") from exc
    if arr.ndim != 1 or (length is not None and arr.size != length):
        want = f" of length {length}" if length is not None else ""
        raise ValidationError(f"{where}: expected a vector{want}, got shape {arr.shape}")
    return arr


def _located(where: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def _problem(doc: dict, where: str) -> DecisionProblem:
    n = int(_field(doc, "n_states", where))
    if "linear_cost" in doc:
        v = _vector(doc["linear_cost"], f"{where}.linear_cost", n)
        return _located(where, DecisionProblem.from_linear_cost, v)
    m = int(_field(doc, "n_actions", where))
    u = _matrix(_field(doc, "utility", where), f"{where}.utility", (n, m))
    return _located(where, DecisionProblem, u)


def parse_instance(doc: Any, where: str = "instance") -> InstanceFile:
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: expected a JSON object")
    kind = _field(doc, "kind", where)
    if kind == "single":
        problem = _problem(doc, where)
        n = problem.n_states
        mu = _vector(_field(doc, "mu", where), f"{where}.mu", n)
        theta = _vector(_field(doc, "theta", where), f"{where}.theta", n)
        inst = _located(where, SingleTypeInstance, problem, mu, theta)
        scale = doc.get("scale_factor")
        return InstanceFile("single", inst, scale_factor=None if scale is None else float(scale))
    if kind == "multi":
        problem = _problem(doc, where)
        n = problem.n_states
        types = _matrix(_field(doc, "types", where), f"{where}.types")
        if types.shape[1] != n:
            raise ValidationError(f"{where}.types: each type needs {n} entries")
        joint = _matrix(_field(doc, "joint", where), f"{where}.joint", (n, types.shape[0]))
        inst = _located(where, MultiTypeInstance, problem, types, joint)
        return InstanceFile("multi", inst)
    if kind == "disclosure":
        raw = _field(doc, "prospects", where)
        if not isinstance(raw, list) or not raw:
            raise ValidationError(f"{where}.prospects: expected a non-empty list")
        prospects = []
        for i, item in enumerate(raw):
            at = f"{where}.prospects[{i}]"
            if not isinstance(item, dict):
                raise ValidationError(f"{at}: expected an object with p, pi, v")
            try:
                prospects.append(Prospect(float(_field(item, "p", at)), float(_field(item, "pi", at)), float(_field(item, "v", at))))
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{at}: numeric fields required") from exc
        return InstanceFile("disclosure", prospects=prospects)
    raise ValidationError(f"{where}.kind: expected 'single', 'multi' or 'disclosure', got {kind!r}")


def load_instance(path: str | Path) -> InstanceFile:
    return parse_instance(_load_json(path), str(path))


def parse_rule(doc: Any, n_states: int | None = None, where: str = "rule") -> AdvertisingRule:
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: expected a JSON object")
    signals = _field(doc, "signals", where)
    if not isinstance(signals, list) or not signals:
        raise ValidationError(f"{where}.signals: expected a non-empty list")
    pis, prices = [], []
    for s, entry in enumerate(signals):
        at = f"{where}.signals[{s}]"
        if not isinstance(entry, dict):
            raise ValidationError(f"{at}: expected an object")
        pis.append(_vector(_field(entry, "pi_given_omega", at), f"{at}.pi_given_omega", n_states))
        try:
            prices.append(float(_field(entry, "price", at)))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{at}.price: expected a number") from exc
    lengths = {p.size for p in pis}
    if len(lengths) != 1:
        raise ValidationError(f"{where}.signals: pi_given_omega vectors differ in length")
    return _located(where, AdvertisingRule, np.array(pis), np.array(prices))


def load_rule(path: str | Path, n_states: int | None = None) -> AdvertisingRule:
    return parse_rule(_load_json(path), n_states, str(path))


def _num(x: float) -> float | int:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("non-finite number in report")
    r = float(f"{x:.{SIG_DIGITS}g}")
    return 0.0 if r == 0 else r


def clean(obj: Any) -> Any:
    """Recursively convert numpy values and round floats to fixed significant digits."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, (frozenset, set)):
        return sorted(clean(v) for v in obj)
    return obj


def dumps(doc: Any) -> str:
    return json.dumps(clean(doc), indent=2, ensure_ascii=False) + "\n"


def rule_doc(rule: AdvertisingRule) -> dict:
    return {
        "signals": [
            {"pi_given_omega": rule.pi[s], "price": rule.prices[s]} for s in range(rule.n_signals)
        ]
    }


def problem_doc(problem: DecisionProblem) -> dict:
    if problem.is_linear:
        return {"n_states": problem.n_states, "n_actions": 1, "linear_cost": problem.linear_cost}
    return {"n_states": problem.n_states, "n_actions": problem.n_actions, "utility": problem.utility}


def single_doc(instance: SingleTypeInstance, scale_factor: float | None = None) -> dict:
    doc = {"kind": "single", **problem_doc(instance.problem), "mu": instance.mu, "theta": instance.theta}
    if scale_factor is not None:
        doc["scale_factor"] = scale_factor
    return doc


def multi_doc(instance: MultiTypeInstance) -> dict:
    return {"kind": "multi", **problem_doc(instance.problem), "types": instance.types, "joint": instance.joint}
