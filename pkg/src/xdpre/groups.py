"""Pairing groups with two interchangeable backends.

``CurveBackend`` runs on BLS12-381 through the mcl bindings. ``DebugBackend``
stores every element as its discrete log modulo a small prime, so the
pairing is just multiplication of exponents. The debug backend is the
correctness oracle for the scheme: any identity that holds "in the exponent"
can be read off directly via ``elem.exponent``.

All group elements use multiplicative notation regardless of backend:
``a * b`` is the group operation, ``a ** s`` exponentiation by an integer
scalar, ``a / b`` multiplication by the inverse.

Byte encoding of a single value::

    tag (1 byte) | backend id (1 byte) | big-endian payload

with tags 0x01 G1, 0x02 G2, 0x03 GT, 0x04 scalar. Debug payloads are the
4-byte exponent; curve payloads are mcl's compressed point encoding
(48 / 96 / 576 bytes) and 32-byte scalars.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Union

import pymcl

from .errors import BackendMismatch, DecodeError, EmptyLabel, EmptyMessage

TAG_G1 = 0x01
TAG_G2 = 0x02
TAG_GT = 0x03
TAG_SCALAR = 0x04

BACKEND_DEBUG = 0x00
BACKEND_CURVE = 0x01

DEFAULT_DEBUG_PRIME = 101


def sha_int(data: bytes) -> int:
    return int.from_bytes(hashlib.sha256(data).digest(), "big")


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


# ---------------------------------------------------------------------------
# backends


class Backend:
    """Primitive operations on raw group values, one instance per group setting."""

    backend_id: int
    order: int

    @property
    def name(self) -> str:
        raise NotImplementedError

    # elements -------------------------------------------------------------
    def g1(self) -> "G1Elem":
        return G1Elem(self, self._generator("G1"))

    def g2(self) -> "G2Elem":
        return G2Elem(self, self._generator("G2"))

    def gt(self) -> "GTElem":
        """The pairing of the two generators."""
        return GTElem(self, self._generator("GT"))

    def identity(self, group: str) -> "Element":
        return _ELEM_CLASSES[group](self, self._identity(group))

    def dual(self, s: int = 1) -> "DualElem":
        return DualElem(self.g1() ** s, self.g2() ** s)

    # scalars --------------------------------------------------------------
    def random_scalar(self, rng) -> int:
        """Uniform element of Z_p^* (never zero)."""
        return rng.randrange(1, self.order)

    def inv(self, s: int) -> int:
        return pow(s % self.order, -1, self.order)

    def random_gt(self, rng) -> "GTElem":
        return self.gt() ** rng.randrange(0, self.order)

    # hashing --------------------------------------------------------------
    def hash_to_scalar(self, data: bytes) -> int:
        """Deterministic digest-then-mod map into [1, p)."""
        return sha_int(data) % (self.order - 1) + 1

    def hash_to_g1(self, label: bytes) -> "G1Elem":
        if not label:
            raise EmptyLabel("hash_to_g1 needs a nonempty label")
        return G1Elem(self, self._hash_g1(label))

    def encode_message(self, msg: bytes) -> "GTElem":
        if not msg:
            raise EmptyMessage("cannot encode an empty message")
        return self.gt() ** self.hash_to_scalar(msg)

    # pairing --------------------------------------------------------------
    def pair(self, a: "G1Elem", b: "G2Elem") -> "GTElem":
        if not isinstance(a, G1Elem) or not isinstance(b, G2Elem):
            raise TypeError("pair expects (G1Elem, G2Elem)")
        if a.backend != self or b.backend != self:
            raise BackendMismatch(f"pairing elements from {a.backend.name} and {b.backend.name} on {self.name}")
        return GTElem(self, self._pair(a.raw, b.raw))

    # to be provided by subclasses
    def _generator(self, group): raise NotImplementedError
    def _identity(self, group): raise NotImplementedError
    def _op(self, group, a, b): raise NotImplementedError
    def _inv(self, group, a): raise NotImplementedError
    def _exp(self, group, a, s: int): raise NotImplementedError
    def _eq(self, group, a, b) -> bool: raise NotImplementedError
    def _pair(self, a, b): raise NotImplementedError
    def _hash_g1(self, label: bytes): raise NotImplementedError
    def _encode(self, group, raw) -> bytes: raise NotImplementedError
    def _decode(self, group, payload: bytes, pos: int): raise NotImplementedError
    def _payload_len(self, tag: int) -> int: raise NotImplementedError


@dataclass(frozen=True)
class DebugBackend(Backend):
    """Exponent-tracking backend: every element is its discrete log mod ``prime``.

    It is symmetric in spirit: G1, G2 and GT are all Z_p under addition,
    so formulas written for a single source group can be checked
    verbatim by comparing exponents.
    """

    prime: int = DEFAULT_DEBUG_PRIME
    backend_id = BACKEND_DEBUG

    def __post_init__(self):
        if not _is_prime(self.prime) or self.prime < 3 or self.prime >= 2**32:
            raise ValueError(f"debug backend needs a prime in [3, 2^32), got {self.prime}")

    @property
    def order(self) -> int:  # type: ignore[override]
        return self.prime

    @property
    def name(self) -> str:
        return f"debug-{self.prime}"

    def _generator(self, group):
        return 1

    def _identity(self, group):
        return 0

    def _op(self, group, a, b):
        return (a + b) % self.prime

    def _inv(self, group, a):
        return (-a) % self.prime

    def _exp(self, group, a, s):
        return (a * s) % self.prime

    def _eq(self, group, a, b):
        return a == b

    def _pair(self, a, b):
        return (a * b) % self.prime

    def _hash_g1(self, label):
        return sha_int(label) % self.prime

    def _encode(self, group, raw):
        return raw.to_bytes(4, "big")

    def _decode(self, group, payload, pos):
        value = int.from_bytes(payload, "big")
        if value >= self.prime:
            raise DecodeError(f"exponent {value} out of range for p={self.prime}", pos)
        return value

    def _payload_len(self, tag):
        return 4


_MCL_TYPES = {"G1": pymcl.G1, "G2": pymcl.G2, "GT": pymcl.GT}
_CURVE_LEN = {TAG_G1: 48, TAG_G2: 96, TAG_GT: 576, TAG_SCALAR: 32}


def _fr(s: int) -> pymcl.Fr:
    return pymcl.Fr(str(s % pymcl.r))


@dataclass(frozen=True)
class CurveBackend(Backend):
    """BLS12-381 (Type-3 pairing) through mcl."""

    backend_id = BACKEND_CURVE

    @property
    def order(self) -> int:  # type: ignore[override]
        return pymcl.r

    @property
    def name(self) -> str:
        return "bls12-381"

    def _generator(self, group):
        if group == "G1":
            return pymcl.g1
        if group == "G2":
            return pymcl.g2
        return _GT_GEN

    def _identity(self, group):
        return _MCL_TYPES[group]()

    # mcl writes G1/G2 additively and GT multiplicatively
    def _op(self, group, a, b):
        return a * b if group == "GT" else a + b

    def _inv(self, group, a):
        return ~a if group == "GT" else -a

    def _exp(self, group, a, s):
        return a ** _fr(s) if group == "GT" else a * _fr(s)

    def _eq(self, group, a, b):
        return a == b

    def _pair(self, a, b):
        return pymcl.pairing(a, b)

    def _hash_g1(self, label):
        return pymcl.G1.hash(label)

    def _encode(self, group, raw):
        return raw.serialize()

    def _decode(self, group, payload, pos):
        try:
            raw = _MCL_TYPES[group].deserialize(payload)
        except ValueError as exc:
            raise DecodeError(f"invalid {group} encoding: {exc}", pos) from None
        if raw.serialize() != payload:
            raise DecodeError(f"non-canonical {group} encoding", pos)
        if group == "GT" and not (raw ** _fr(-1) * raw).isOne():
            raise DecodeError("GT element outside the order-r subgroup", pos)
        return raw

    def _payload_len(self, tag):
        return _CURVE_LEN[tag]


_GT_GEN = pymcl.pairing(pymcl.g1, pymcl.g2)
CURVE = CurveBackend()
_BACKEND_BY_ID = {BACKEND_CURVE: CURVE}


def get_backend(name: str) -> Backend:
    """Resolve a backend by CLI name: ``debug``, ``debug-<p>``, ``curve`` or ``bls12-381``."""
    if name in ("curve", "bls12-381"):
        return CURVE
    if name == "debug":
        return DebugBackend()
    if name.startswith("debug-"):
        return DebugBackend(int(name[len("debug-"):]))
    raise ValueError(f"unknown backend {name!r}")


# ---------------------------------------------------------------------------
# elements


class Element:
    __slots__ = ("backend", "raw")
    group = ""
    tag = 0

    def __init__(self, backend: Backend, raw):
        self.backend = backend
        self.raw = raw

    def _check(self, other) -> None:
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {self.group} with {type(other).__name__}")
        if other.backend != self.backend:
            raise BackendMismatch(f"{self.backend.name} vs {other.backend.name}")

    def __mul__(self, other):
        self._check(other)
        return type(self)(self.backend, self.backend._op(self.group, self.raw, other.raw))

    def __truediv__(self, other):
        self._check(other)
        inv = self.backend._inv(self.group, other.raw)
        return type(self)(self.backend, self.backend._op(self.group, self.raw, inv))

    def __pow__(self, s: int):
        return type(self)(self.backend, self.backend._exp(self.group, self.raw, s % self.backend.order))

    def inverse(self):
        return type(self)(self.backend, self.backend._inv(self.group, self.raw))

    def is_identity(self) -> bool:
        return self == self.backend.identity(self.group)

    def __eq__(self, other):
        if type(other) is not type(self) or other.backend != self.backend:
            return NotImplemented if not isinstance(other, Element) else False
        return self.backend._eq(self.group, self.raw, other.raw)

    def __hash__(self):
        return hash(self.to_bytes())

    def to_bytes(self) -> bytes:
        return bytes([self.tag, self.backend.backend_id]) + self.backend._encode(self.group, self.raw)

    @property
    def exponent(self) -> int:
        """Discrete log relative to the group generator (debug backend only)."""
        if not isinstance(self.backend, DebugBackend):
            raise TypeError("exponents are only observable on the debug backend")
        return self.raw

    def __repr__(self):
        if isinstance(self.backend, DebugBackend):
            return f"{self.group}^{self.raw}"
        return f"{self.group}({self.backend._encode(self.group, self.raw)[:6].hex()}…)"


class G1Elem(Element):
    __slots__ = ()
    group = "G1"
    tag = TAG_G1


class G2Elem(Element):
    __slots__ = ()
    group = "G2"
    tag = TAG_G2


class GTElem(Element):
    __slots__ = ()
    group = "GT"
    tag = TAG_GT


_ELEM_CLASSES = {"G1": G1Elem, "G2": G2Elem, "GT": GTElem}
_CLASS_BY_TAG = {TAG_G1: G1Elem, TAG_G2: G2Elem, TAG_GT: GTElem}


@dataclass(frozen=True)
class DualElem:
    """The same discrete log published in both source groups."""

    g1: G1Elem
    g2: G2Elem

    @property
    def backend(self) -> Backend:
        return self.g1.backend

    def __mul__(self, other: "DualElem") -> "DualElem":
        return DualElem(self.g1 * other.g1, self.g2 * other.g2)

    def __pow__(self, s: int) -> "DualElem":
        return DualElem(self.g1 ** s, self.g2 ** s)

    def is_consistent(self) -> bool:
        b = self.backend
        return b.pair(self.g1, b.g2()) == b.pair(b.g1(), self.g2)


def pair(a: G1Elem, b: G2Elem) -> GTElem:
    if a.backend != b.backend:
        raise BackendMismatch(f"pairing {a.backend.name} with {b.backend.name}")
    return a.backend.pair(a, b)


# ---------------------------------------------------------------------------
# serialization

Value = Union[Element, int]


def encode_scalar(backend: Backend, s: int) -> bytes:
    width = backend._payload_len(TAG_SCALAR)
    return bytes([TAG_SCALAR, backend.backend_id]) + (s % backend.order).to_bytes(width, "big")


def serialize(value: Element) -> bytes:
    return value.to_bytes()


def deserialize(data: bytes, backend: Backend, expect: type | None = None):
    """Decode one group element or scalar encoded for ``backend``.

    ``expect`` optionally pins the type (``G1Elem``, ``G2Elem``, ``GTElem`` or
    ``int``); a different tag is a DecodeError.
    """
    if len(data) < 2:
        raise DecodeError("truncated header", len(data))
    tag, bid = data[0], data[1]
    if tag not in (TAG_G1, TAG_G2, TAG_GT, TAG_SCALAR):
        raise DecodeError(f"unknown type tag 0x{tag:02x}", 0)
    if bid != backend.backend_id:
        raise BackendMismatch(f"encoding is for backend id 0x{bid:02x}, expected {backend.name}")
    want = backend._payload_len(tag)
    payload = data[2:]
    if len(payload) != want:
        raise DecodeError(f"payload is {len(payload)} bytes, expected {want}", 2 + min(len(payload), want))
    if tag == TAG_SCALAR:
        if expect not in (None, int):
            raise DecodeError(f"expected {expect.__name__}, found scalar", 0)
        value = int.from_bytes(payload, "big")
        if value >= backend.order:
            raise DecodeError("scalar out of range", 2)
        return value
    cls = _CLASS_BY_TAG[tag]
    if expect is not None and expect is not cls:
        raise DecodeError(f"expected {getattr(expect, '__name__', expect)}, found {cls.__name__}", 0)
    return cls(backend, backend._decode(cls.group, payload, 2))
