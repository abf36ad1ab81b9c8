"""Model specification files (JSON syntax, rationals as "p/q" strings).

    {"name": "geom", "model": {"kind": "mixture_bernoulli", "components": [
        {"weight": "1", "p": {"family": "geometric", "c": "1/2", "r": "1/2"}}]}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from bcq.errors import InvalidInput
from bcq.measure import Event, FiniteProbabilitySpace, Partition
from bcq.models import (
    BernoulliComponent,
    ExplicitModel,
    MixtureBernoulli,
    MixtureMarkov,
    ProbFormula,
    SequenceModel,
)


class ModelFileError(InvalidInput):
    pass


@dataclass(frozen=True)
class ModelSpecDocument:
    name: str
    description: str
    model: SequenceModel
    raw: dict


def _fail(where: str, msg: str):
    raise ModelFileError(f"{where}: {msg}" if where else msg)


def _keys(obj, where: str, required: set, optional: set = frozenset()) -> None:
    if not isinstance(obj, dict):
        _fail(where, f"expected an object, got {type(obj).__name__}")
    missing = required - obj.keys()
    if missing:
        _fail(where, f"missing field(s) {sorted(missing)}")
    unknown = obj.keys() - required - set(optional)
    if unknown:
        _fail(where, f"unknown field(s) {sorted(unknown)}")


def _rational(x, where: str) -> Fraction:
    if not isinstance(x, str):
        _fail(where, f"rationals must be \"p/q\" strings, got {json.dumps(x)}")
    try:
        return Fraction(x.strip())
    except (ValueError, ZeroDivisionError):
        _fail(where, f"malformed rational {x!r}")


def _int_list(x, where: str) -> list[int]:
    if not isinstance(x, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in x):
        _fail(where, "expected a list of integers")
    return x


def _wrap(where: str, fn, *args):
    try:
        return fn(*args)
    except ModelFileError:
        raise
    except InvalidInput as exc:
        _fail(where, str(exc))


def _formula(obj, where: str) -> ProbFormula:
    _keys(obj, where, {"family", "c"}, {"r", "s"})
    family = obj["family"]
    c = _rational(obj["c"], f"{where}.c")
    if family == "constant":
        _keys(obj, where, {"family", "c"})
        return _wrap(where, ProbFormula.constant, c)
    if family == "geometric":
        _keys(obj, where, {"family", "c", "r"})
        return _wrap(where, ProbFormula.geometric, c, _rational(obj["r"], f"{where}.r"))
    if family == "power":
        _keys(obj, where, {"family", "c", "s"})
        s = obj["s"]
        if isinstance(s, str):
            s = _rational(s, f"{where}.s")
        elif not isinstance(s, int) or isinstance(s, bool):
            _fail(f"{where}.s", "exponent must be an integer")
        return _wrap(where, ProbFormula.power, c, s)
    _fail(f"{where}.family", f"unknown family {family!r}")


def build_model(node: dict, where: str = "model") -> SequenceModel:
    if not isinstance(node, dict) or "kind" not in node:
        _fail(where, "missing field 'kind'")
    kind = node["kind"]
    if kind == "explicit":
        _keys(node, where, {"kind", "weights", "partition", "events"}, {"labels"})
        weights = node["weights"]
        if not isinstance(weights, list):
            _fail(f"{where}.weights", "expected a list")
        weights = [_rational(w, f"{where}.weights[{i}]") for i, w in enumerate(weights)]
        space = _wrap(f"{where}.weights", FiniteProbabilitySpace, weights, node.get("labels"))
        blocks = node["partition"]
        if not isinstance(blocks, list):
            _fail(f"{where}.partition", "expected a list of blocks")
        blocks = [_int_list(b, f"{where}.partition[{i}]") for i, b in enumerate(blocks)]
        for i, b in enumerate(blocks):
            if len(set(b)) != len(b):
                _fail(f"{where}.partition[{i}]", "repeated outcome")
        partition = _wrap(f"{where}.partition", Partition, tuple(blocks))
        events = node["events"]
        if not isinstance(events, list):
            _fail(f"{where}.events", "expected a list of events")
        events = tuple(Event(frozenset(_int_list(e, f"{where}.events[{i}]")))
                       for i, e in enumerate(events))
        return _wrap(where, ExplicitModel, space, partition, events)
    if kind == "mixture_bernoulli":
        _keys(node, where, {"kind", "components"})
        comps = []
        for i, c in enumerate(_components(node, where)):
            at = f"{where}.components[{i}]"
            _keys(c, at, {"weight", "p"})
            comps.append(BernoulliComponent(_rational(c["weight"], f"{at}.weight"),
                                            _formula(c["p"], f"{at}.p")))
        return _wrap(where, MixtureBernoulli, tuple(comps))
    if kind == "mixture_markov":
        _keys(node, where, {"kind", "components"})
        rows = []
        for i, c in enumerate(_components(node, where)):
            at = f"{where}.components[{i}]"
            _keys(c, at, {"weight", "pi1", "q0", "q1"})
            rows.append(tuple(_rational(c[k], f"{at}.{k}") for k in ("weight", "pi1", "q0", "q1")))
        return _wrap(where, MixtureMarkov.of, *rows)
    _fail(f"{where}.kind", f"unknown kind {kind!r}")


def _components(node, where):
    comps = node["components"]
    if not isinstance(comps, list) or not comps:
        _fail(f"{where}.components", "expected a nonempty list")
    return comps


def load_document(data: dict) -> ModelSpecDocument:
    _keys(data, "", {"name", "model"}, {"description"})
    if not isinstance(data["name"], str):
        _fail("name", "expected a string")
    return ModelSpecDocument(data["name"], data.get("description", ""), build_model(data["model"]), data)


def parse_model(path) -> ModelSpecDocument:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelFileError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return load_document(data)
    except ModelFileError as exc:
        raise ModelFileError(f"{path}: {exc}") from None


def dump_model(model: SequenceModel, name: str = "model") -> dict:
    """Inverse of :func:`build_model`."""
    if isinstance(model, ExplicitModel):
        node = {"kind": "explicit",
                "weights": [str(w) for w in model.space.weights],
                "partition": [sorted(b) for b in model.partition.blocks],
                "events": [sorted(e.members) for e in model.events]}
    elif isinstance(model, MixtureBernoulli):
        comps = []
        for c in model.components:
            p = {"family": c.p.family, "c": str(c.p.c)}
            if c.p.r is not None:
                p["r"] = str(c.p.r)
            if c.p.s is not None:
                p["s"] = c.p.s
            comps.append({"weight": str(c.weight), "p": p})
        node = {"kind": "mixture_bernoulli", "components": comps}
    else:
        node = {"kind": "mixture_markov",
                "components": [{"weight": str(c.weight), "pi1": str(c.pi1),
                                "q0": str(c.q0), "q1": str(c.q1)}
                               for c in model.components]}
    return {"name": name, "model": node}
