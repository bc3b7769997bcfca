"""Versioned JSON envelopes for keys and ciphertexts.

::

    {"format_version": 1, "backend_id": 0, "backend": "debug-101",
     "object_type": "ct", "fields": {...}}

Group elements and scalars are the ``groups`` byte encoding in lowercase hex;
access matrices use ``AccessMatrix.dump``. ``fields`` may carry an extra
``payload`` entry (a sealed DEM blob) that is not part of the object itself.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .errors import BackendMismatch, FormatError
from .groups import Backend, DualElem, G1Elem, G2Elem, GTElem, deserialize, encode_scalar, get_backend
from .policy import load_matrix
from .scheme import (
    Ciphertext,
    CrossDomainUserKey,
    KeygenSecrets,
    MasterSecretKey,
    PublicKey,
    ReEncryptedCiphertext,
    ReKey,
    UserSecretKey,
)

FORMAT_VERSION = 1

_TYPES = {
    PublicKey: "pk",
    MasterSecretKey: "msk",
    UserSecretKey: "usk",
    Ciphertext: "ct",
    ReKey: "rk",
    ReEncryptedCiphertext: "rct",
    CrossDomainUserKey: "cdk",
}


def _e(x) -> str:
    return x.to_bytes().hex()


def _s(backend: Backend, s: int) -> str:
    return encode_scalar(backend, s).hex()


def _dual(d: DualElem) -> dict:
    return {"g1": _e(d.g1), "g2": _e(d.g2)}


def _fields(obj, b: Backend) -> dict:
    if isinstance(obj, PublicKey):
        return {
            "g": _dual(obj.g),
            "h": _dual(obj.h),
            "egg_m": _e(obj.egg_m),
            "W": {a: _dual(w) for a, w in obj.W.items()},
            "Wb": _dual(obj.Wb),
            "authority_pk": _dual(obj.authority_pk),
        }
    if isinstance(obj, MasterSecretKey):
        return {"m": _s(b, obj.m), "n": _s(b, obj.n), "beta": _s(b, obj.beta)}
    if isinstance(obj, UserSecretKey):
        out: dict[str, Any] = {
            "SK1": _e(obj.SK1),
            "SK2": None if obj.SK2 is None else [_e(x) for x in obj.SK2],
            "SK3": {a: [_e(x), _e(y)] for a, (x, y) in sorted(obj.SK3.items())},
            "retained": None,
        }
        if obj.retained is not None:
            r = obj.retained
            out["retained"] = {
                "k": _s(b, r.k),
                "kb": _s(b, r.kb),
                "ki": {a: _s(b, v) for a, v in sorted(r.ki.items())},
            }
        return out
    if isinstance(obj, Ciphertext):
        return {
            "A1": _e(obj.A1),
            "A2": _e(obj.A2),
            "Bb": _e(obj.Bb),
            "Cb": _e(obj.Cb),
            "leaves": {str(j): [_e(x), _e(y)] for j, (x, y) in sorted(obj.leaves.items())},
            "matrix": obj.matrix.dump(),
        }
    if isinstance(obj, ReKey):
        return {
            "rk1": _dual(obj.rk1),
            "rk2": _dual(obj.rk2),
            "rk3": {a: _e(x) for a, x in sorted(obj.rk3.items())},
            "target_pk": _dual(obj.target_pk),
        }
    if isinstance(obj, ReEncryptedCiphertext):
        return {
            "A1p": _e(obj.A1p),
            "A2p": _e(obj.A2p),
            "Bb": _e(obj.Bb),
            "Cb": _e(obj.Cb),
            "leaves": {str(j): [_e(x), _e(y)] for j, (x, y) in sorted(obj.leaves.items())},
            "matrix": obj.matrix.dump(),
            "mode": obj.mode,
        }
    if isinstance(obj, CrossDomainUserKey):
        return {
            "K0": _e(obj.K0),
            "D": {a: _e(x) for a, x in sorted(obj.D.items())},
            "Db": _e(obj.Db),
        }
    raise TypeError(f"no envelope format for {type(obj).__name__}")


def to_envelope(obj, payload: bytes | None = None) -> dict:
    if type(obj) not in _TYPES:
        raise TypeError(f"no envelope format for {type(obj).__name__}")
    b = obj.backend
    fields = _fields(obj, b)
    if payload is not None:
        fields["payload"] = payload.hex()
    return {
        "format_version": FORMAT_VERSION,
        "backend_id": b.backend_id,
        "backend": b.name,
        "object_type": _TYPES[type(obj)],
        "fields": fields,
    }


class _Reader:
    def __init__(self, backend: Backend):
        self.b = backend

    def el(self, hexstr: str, cls):
        try:
            data = bytes.fromhex(hexstr)
        except (TypeError, ValueError):
            raise FormatError(f"not a hex string: {hexstr!r}") from None
        return deserialize(data, self.b, cls)

    def scalar(self, hexstr: str) -> int:
        return self.el(hexstr, int)

    def dual(self, d: dict) -> DualElem:
        return DualElem(self.el(d["g1"], G1Elem), self.el(d["g2"], G2Elem))


def _build(kind: str, f: dict, b: Backend):
    r = _Reader(b)
    if kind == "pk":
        return PublicKey(
            backend=b,
            g=r.dual(f["g"]),
            h=r.dual(f["h"]),
            egg_m=r.el(f["egg_m"], GTElem),
            W={a: r.dual(w) for a, w in f["W"].items()},
            Wb=r.dual(f["Wb"]),
            authority_pk=r.dual(f["authority_pk"]),
        )
    if kind == "msk":
        return MasterSecretKey(b, r.scalar(f["m"]), r.scalar(f["n"]), r.scalar(f["beta"]))
    if kind == "usk":
        retained = None
        if f["retained"] is not None:
            x = f["retained"]
            retained = KeygenSecrets(r.scalar(x["k"]), r.scalar(x["kb"]),
                                     {a: r.scalar(v) for a, v in x["ki"].items()})
        SK2 = None if f["SK2"] is None else tuple(r.el(x, G2Elem) for x in f["SK2"])
        return UserSecretKey(
            r.el(f["SK1"], G2Elem),
            SK2,
            {a: (r.el(x, G2Elem), r.el(y, G2Elem)) for a, (x, y) in f["SK3"].items()},
            retained,
        )
    if kind == "ct":
        return Ciphertext(
            A1=r.el(f["A1"], GTElem),
            A2=r.el(f["A2"], G1Elem),
            Bb=r.el(f["Bb"], G1Elem),
            Cb=r.el(f["Cb"], G1Elem),
            leaves={int(j): (r.el(x, G1Elem), r.el(y, G1Elem)) for j, (x, y) in f["leaves"].items()},
            matrix=load_matrix(f["matrix"]),
        )
    if kind == "rk":
        return ReKey(
            r.dual(f["rk1"]),
            r.dual(f["rk2"]),
            {a: r.el(x, G1Elem) for a, x in f["rk3"].items()},
            r.dual(f["target_pk"]),
        )
    if kind == "rct":
        return ReEncryptedCiphertext(
            A1p=r.el(f["A1p"], GTElem),
            A2p=r.el(f["A2p"], G1Elem),
            Bb=r.el(f["Bb"], G1Elem),
            Cb=r.el(f["Cb"], G2Elem),
            leaves={int(j): (r.el(x, G1Elem), r.el(y, G2Elem)) for j, (x, y) in f["leaves"].items()},
            matrix=load_matrix(f["matrix"]),
            mode=f["mode"],
        )
    if kind == "cdk":
        return CrossDomainUserKey(
            r.el(f["K0"], G2Elem),
            {a: r.el(x, G1Elem) for a, x in f["D"].items()},
            r.el(f["Db"], G1Elem),
        )
    raise FormatError(f"unknown object_type {kind!r}")


def from_envelope(env: dict, expect: str | None = None):
    """Rebuild the object held in ``env``; ``expect`` pins the object_type."""
    try:
        if env["format_version"] != FORMAT_VERSION:
            raise FormatError(f"unsupported format_version {env['format_version']}")
        backend = get_backend(env["backend"])
        if backend.backend_id != env["backend_id"]:
            raise BackendMismatch(f"backend {env['backend']} does not have id {env['backend_id']}")
        kind = env["object_type"]
        if expect is not None and kind != expect:
            raise FormatError(f"expected a {expect!r} envelope, found {kind!r}")
        return _build(kind, env["fields"], backend)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed envelope: {exc!r}") from None


def payload_of(env: dict) -> bytes | None:
    p = env.get("fields", {}).get("payload")
    return None if p is None else bytes.fromhex(p)


def dumps(obj, payload: bytes | None = None) -> str:
    return json.dumps(to_envelope(obj, payload), indent=2) + "\n"


def loads(text: str, expect: str | None = None):
    try:
        env = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not JSON: {exc}") from None
    return from_envelope(env, expect)


def save(path, obj, payload: bytes | None = None) -> None:
    Path(path).write_text(dumps(obj, payload))


def load(path, expect: str | None = None):
    """Return ``(object, payload)`` read from an envelope file."""
    text = Path(path).read_text()
    obj = loads(text, expect)
    return obj, payload_of(json.loads(text))
