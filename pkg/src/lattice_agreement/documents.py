"""JSON documents for lattices and agreement instances.

A lattice document::

    {"kind": "lattice", "family": "powerset", "params": {"weights": {"a": 1, "b": 5}}}

Families and their parameters:

- ``chain``: ``m`` (elements ``0..m``)
- ``table_chain``: ``m`` and ``table``, a list of ``[a, b, distance]`` rows
- ``powerset``: ``weights``, a mapping from universe member to positive weight
- ``vector_clock``: ``dim`` and ``cap``

An instance document::

    {"kind": "instance", "lattice": {...}, "inputs": [...], "outputs": [...],
     "reconciled": [...], "crashed": [0, 3]}

``lattice`` and ``reconciled`` are optional. Elements are encoded per
family: integers for chains, sorted lists of names for subsets, lists of
integers for vector clocks.
"""

from __future__ import annotations

import json
from typing import Any

from .agreement import AgreementInstance
from .lattice import LatticeError, QuasiMetric, build_space


class DocumentError(ValueError):
    pass


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def loads(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise DocumentError("document must be a JSON object")
    return doc


def space_to_doc(qm: QuasiMetric) -> dict:
    if qm.family == "custom":
        raise DocumentError("custom quasi-metrics cannot be serialized")
    return {"kind": "lattice", "family": qm.family, "params": qm.params}


def space_from_doc(doc: dict) -> QuasiMetric:
    if doc.get("kind", "lattice") != "lattice":
        raise DocumentError(f"expected a lattice document, got kind={doc.get('kind')!r}")
    try:
        return build_space(doc["family"], doc.get("params", {}))
    except KeyError as exc:
        raise DocumentError(f"lattice document is missing {exc}") from None
    except (TypeError, LatticeError) as exc:
        raise DocumentError(f"bad lattice document: {exc}") from None


def _decode_all(qm: QuasiMetric, values: Any, what: str) -> tuple:
    lat = qm.lattice
    if not isinstance(values, list):
        raise DocumentError(f"{what} must be a list")
    out = []
    for v in values:
        try:
            e = lat.decode(v)
        except (TypeError, ValueError) as exc:
            raise DocumentError(f"bad element {v!r} in {what}: {exc}") from None
        if e not in lat:
            raise DocumentError(f"{v!r} in {what} is not a lattice element")
        out.append(e)
    return tuple(out)


def instance_to_doc(inst: AgreementInstance, qm: QuasiMetric, embed_lattice: bool = True) -> dict:
    enc = qm.lattice.encode
    doc: dict = {
        "kind": "instance",
        "inputs": [enc(x) for x in inst.inputs],
        "outputs": [enc(y) for y in inst.outputs],
        "crashed": sorted(inst.crashed),
    }
    if inst.reconciled is not None:
        doc["reconciled"] = [enc(y) for y in inst.reconciled]
    if embed_lattice:
        doc["lattice"] = space_to_doc(qm)
    return doc


def instance_from_doc(
    doc: dict, qm: QuasiMetric | None = None
) -> tuple[AgreementInstance, QuasiMetric]:
    if doc.get("kind") != "instance":
        raise DocumentError(f"expected an instance document, got kind={doc.get('kind')!r}")
    if qm is None:
        if "lattice" not in doc:
            raise DocumentError("instance document has no lattice and none was given")
        qm = space_from_doc(doc["lattice"])
    try:
        inputs = _decode_all(qm, doc["inputs"], "inputs")
        outputs = _decode_all(qm, doc["outputs"], "outputs")
    except KeyError as exc:
        raise DocumentError(f"instance document is missing {exc}") from None
    reconciled = None
    if doc.get("reconciled") is not None:
        reconciled = _decode_all(qm, doc["reconciled"], "reconciled")
    try:
        inst = AgreementInstance(
            inputs, outputs, reconciled, frozenset(int(i) for i in doc.get("crashed", []))
        )
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"bad instance document: {exc}") from None
    return inst, qm


def load_space(path) -> QuasiMetric:
    with open(path) as fh:
        return space_from_doc(loads(fh.read()))


def load_instance(path, qm: QuasiMetric | None = None):
    with open(path) as fh:
        return instance_from_doc(loads(fh.read()), qm)
