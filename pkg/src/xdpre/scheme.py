"""Six-phase attribute-based proxy re-encryption.

Group placement on the asymmetric curve: ciphertext components live in G1,
key components in G2, and anything paired from both sides (g, h, W_i, W_b,
cross-domain public keys) is a ``DualElem``.

Two re-encryption paths exist:

* ``reencrypt_paper`` evaluates the original closed-form CT'_1 expression
  under fixed readings of its undefined symbols. Its output is structurally valid but
  is not expected to decrypt.
* ``reencrypt_corrected`` lets the proxy (which holds the master key)
  unblind the session key and re-blind it under the requester's public key.
  This path round-trips through ``decrypt_reencrypted``.

The symmetric key ``K`` is a GT element; payload bytes go through ``kdf`` and
the demo-grade ``dem_seal``/``dem_open``.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .errors import (
    BackendMismatch,
    DuplicateAttribute,
    IntegrityError,
    KeyMismatch,
    MalformedCiphertext,
    MissingProtectionKey,
    RetainedSecretsRequired,
    ReservedAttribute,
    TargetKeyNotDual,
    UnknownAttribute,
    UnsupportedMode,
)
from .groups import CURVE, Backend, DualElem, G1Elem, G2Elem, GTElem
from .policy import (
    PROTECTION_ATTR,
    AccessMatrix,
    PolicyNode,
    build_matrix,
    generate_shares,
    leaves,
    parse_policy,
    recon_coefficients,
    satisfying_rows,
)

MODE_PAPER = "paper"
MODE_CORRECTED = "corrected"


# ---------------------------------------------------------------------------
# key and ciphertext types


@dataclass(frozen=True)
class MasterSecretKey:
    backend: Backend
    m: int
    n: int
    # secret of this domain's cross-domain authority (issues CrossDomainUserKeys)
    beta: int


@dataclass(frozen=True)
class PublicKey:
    backend: Backend
    g: DualElem
    h: DualElem
    egg_m: GTElem
    W: dict[str, DualElem]
    Wb: DualElem
    # g^beta: what other domains re-encrypt towards
    authority_pk: DualElem

    @property
    def universe(self) -> tuple[str, ...]:
        return tuple(self.W)


@dataclass(frozen=True)
class KeygenSecrets:
    """Randomness a data owner keeps for its own key; needed by ``rekeygen_paper``."""

    k: int
    kb: int
    ki: dict[str, int]


@dataclass(frozen=True)
class UserSecretKey:
    SK1: G2Elem
    SK2: Optional[tuple[G2Elem, G2Elem]]
    SK3: dict[str, tuple[G2Elem, G2Elem]]
    retained: Optional[KeygenSecrets] = None

    @property
    def attrs(self) -> frozenset[str]:
        return frozenset(self.SK3)

    @property
    def backend(self) -> Backend:
        return self.SK1.backend


@dataclass(frozen=True)
class SymmetricKey:
    K: GTElem

    @property
    def derived(self) -> bytes:
        return kdf(self)


@dataclass(frozen=True)
class Ciphertext:
    A1: GTElem
    A2: G1Elem
    Bb: G1Elem
    Cb: G1Elem
    # row index -> (B_i, C_i) for every non-protection row
    leaves: dict[int, tuple[G1Elem, G1Elem]]
    matrix: AccessMatrix

    @property
    def backend(self) -> Backend:
        return self.A2.backend


@dataclass(frozen=True)
class ReKey:
    rk1: DualElem
    rk2: DualElem
    rk3: dict[str, G1Elem]
    target_pk: DualElem

    @property
    def backend(self) -> Backend:
        return self.target_pk.backend


@dataclass(frozen=True)
class ReEncryptedCiphertext:
    A1p: GTElem
    A2p: G1Elem
    Bb: G1Elem
    Cb: G2Elem
    leaves: dict[int, tuple[G1Elem, G2Elem]]
    matrix: AccessMatrix
    mode: str

    @property
    def backend(self) -> Backend:
        return self.A2p.backend


@dataclass(frozen=True)
class CrossDomainUserKey:
    K0: G2Elem
    D: dict[str, G1Elem]
    Db: G1Elem

    @property
    def attrs(self) -> frozenset[str]:
        return frozenset(self.D)

    @property
    def backend(self) -> Backend:
        return self.K0.backend


# ---------------------------------------------------------------------------
# helpers


def _as_policy(policy: Union[str, PolicyNode]) -> PolicyNode:
    return parse_policy(policy) if isinstance(policy, str) else policy


def _check_known(attrs: Iterable[str], universe: Iterable[str]) -> None:
    known = set(universe)
    missing = sorted(set(attrs) - known)
    if missing:
        raise UnknownAttribute(f"not in attribute universe: {', '.join(missing)}")


def _check_same_backend(*backends: Backend) -> None:
    first = backends[0]
    for b in backends[1:]:
        if b != first:
            raise BackendMismatch(f"{first.name} vs {b.name}")


def random_symmetric_key(backend: Backend, rng) -> SymmetricKey:
    return SymmetricKey(backend.random_gt(rng))


def _combine(backend: Backend, values: dict[int, GTElem], coeffs: dict[int, int]) -> GTElem:
    out = backend.identity("GT")
    for row, w in coeffs.items():
        out = out * values[row] ** w
    return out


# ---------------------------------------------------------------------------
# Setup / KeyGen / Encrypt / Decrypt


def setup(universe: Iterable[str], rng, backend: Backend = CURVE) -> tuple[MasterSecretKey, PublicKey]:
    """Draws, in order: m, n, one p_i per attribute, p_b, beta."""
    universe = list(universe)
    seen: set[str] = set()
    for a in universe:
        if a == PROTECTION_ATTR:
            raise ReservedAttribute(f"attribute {PROTECTION_ATTR!r} is reserved")
        if a in seen:
            raise DuplicateAttribute(a)
        seen.add(a)
    m = backend.random_scalar(rng)
    n = backend.random_scalar(rng)
    W = {a: backend.dual(backend.random_scalar(rng)) for a in universe}
    Wb = backend.dual(backend.random_scalar(rng))
    beta = backend.random_scalar(rng)
    pk = PublicKey(
        backend=backend,
        g=backend.dual(),
        h=backend.dual(n),
        egg_m=backend.gt() ** m,
        W=W,
        Wb=Wb,
        authority_pk=backend.dual(beta),
    )
    return MasterSecretKey(backend, m, n, beta), pk


def keygen(msk: MasterSecretKey, pk: PublicKey, attrs: Iterable[str], rng, retain: bool = False) -> UserSecretKey:
    """Draws k, kb, then one k_i per attribute in sorted order."""
    b = pk.backend
    attrs = sorted(set(attrs))
    _check_known(attrs, pk.universe)
    k = b.random_scalar(rng)
    kb = b.random_scalar(rng)
    ki = {a: b.random_scalar(rng) for a in attrs}
    g2 = b.g2()
    gk = g2 ** k
    SK1 = g2 ** ((msk.m + k) * b.inv(msk.n))
    SK2 = (g2 ** kb, gk * pk.Wb.g2 ** kb)
    SK3 = {a: (g2 ** ki[a], gk * pk.W[a].g2 ** ki[a]) for a in attrs}
    return UserSecretKey(SK1, SK2, SK3, KeygenSecrets(k, kb, ki) if retain else None)


def encrypt(pk: PublicKey, policy: Union[str, PolicyNode], K: SymmetricKey, rng) -> Ciphertext:
    """Draws v, then the share randomness y_2..y_c."""
    b = pk.backend
    policy = _as_policy(policy)
    _check_known(leaves(policy), pk.universe)
    _check_same_backend(b, K.K.backend)
    v = b.random_scalar(rng)
    matrix = build_matrix(policy)
    sv = generate_shares(matrix, v, b.order, rng)
    g1 = b.g1()
    vb = sv.shares[matrix.protection_row]
    rows = {}
    for j, attr in enumerate(matrix.rho):
        if j == matrix.protection_row:
            continue
        vj = sv.shares[j]
        rows[j] = (g1 ** vj, pk.W[attr].g1 ** vj)
    return Ciphertext(
        A1=K.K * pk.egg_m ** v,
        A2=pk.h.g1 ** v,
        Bb=g1 ** vb,
        Cb=pk.Wb.g1 ** vb,
        leaves=rows,
        matrix=matrix,
    )


def _check_ct_shape(ct) -> None:
    expected = {j for j in range(ct.matrix.r) if j != ct.matrix.protection_row}
    if set(ct.leaves) != expected:
        raise MalformedCiphertext("leaf components do not match the access matrix rows")
    if ct.matrix.rho[ct.matrix.protection_row] != PROTECTION_ATTR:
        raise MalformedCiphertext("protection row is not mapped to the protection attribute")


def leaf_values(pk: PublicKey, usk: UserSecretKey, ct: Ciphertext, rows: Iterable[int]) -> dict[int, GTElem]:
    """F_i = e(B_i, g^k W_i^{k_i}) / e(C_i, g^{k_i}) for each requested row, which equals e(g,g)^{k v_i}."""
    b = pk.backend
    out = {}
    for j in rows:
        if j == ct.matrix.protection_row:
            if usk.SK2 is None:
                raise MissingProtectionKey("key has no protection component")
            first, second = usk.SK2
            B, C = ct.Bb, ct.Cb
        else:
            first, second = usk.SK3[ct.matrix.rho[j]]
            B, C = ct.leaves[j]
        out[j] = b.pair(B, second) / b.pair(C, first)
    return out


def decrypt(pk: PublicKey, usk: UserSecretKey, ct: Ciphertext) -> SymmetricKey:
    b = pk.backend
    _check_same_backend(b, usk.backend, ct.backend)
    _check_ct_shape(ct)
    if usk.SK2 is None:
        raise MissingProtectionKey("key has no protection component")
    rows = satisfying_rows(ct.matrix, usk.attrs, has_protection=True)
    plan = recon_coefficients(ct.matrix, rows, b.order)
    F = leaf_values(pk, usk, ct, plan.rows)
    Fw = _combine(b, F, plan.coeffs)
    return SymmetricKey(ct.A1 * Fw / b.pair(ct.A2, usk.SK1))


# ---------------------------------------------------------------------------
# ReKeyGen / ReEncrypt


def crossdomain_public_key(backend: Backend, beta: int) -> DualElem:
    return backend.dual(beta)


def issue_crossdomain_key(backend: Backend, beta: int, attrs: Iterable[str]) -> CrossDomainUserKey:
    """Requester-side credential: K0 = g2^beta, D[a] = H(a)^beta, plus the protection entry."""
    attrs = sorted(set(attrs))
    if PROTECTION_ATTR in attrs:
        raise ReservedAttribute(f"attribute {PROTECTION_ATTR!r} is reserved")
    D = {a: backend.hash_to_g1(a.encode()) ** beta for a in attrs}
    Db = backend.hash_to_g1(PROTECTION_ATTR.encode()) ** beta
    return CrossDomainUserKey(backend.g2() ** beta, D, Db)


def rekeygen_paper(usk: UserSecretKey, target_pk, pk: PublicKey, rng) -> ReKey:
    """Draws alpha, mu, t. Needs the owner's retained k_i values."""
    if not isinstance(target_pk, DualElem):
        raise TargetKeyNotDual("the target public key must be published in both source groups")
    if usk.retained is None:
        raise RetainedSecretsRequired("rk3 needs the k_i values kept by the data owner")
    b = pk.backend
    _check_same_backend(b, usk.backend, target_pk.backend)
    alpha = b.random_scalar(rng)
    mu = b.random_scalar(rng)
    t = b.random_scalar(rng)
    g_alpha = b.dual(alpha)
    rk1 = g_alpha * target_pk
    rk2 = g_alpha * pk.Wb ** mu
    rk3 = {a: b.g1() ** (ki * t) for a, ki in sorted(usk.retained.ki.items())}
    return ReKey(rk1, rk2, rk3, target_pk)


def _hashed_rows(backend: Backend, matrix: AccessMatrix, shares: dict[int, int], rng):
    """B'_i = g1^{v'_i} H(rho'(i))^{-r'_i}, C'_i = g2^{r'_i}; r'_i drawn in row order."""
    g1, g2 = backend.g1(), backend.g2()
    comps = {}
    for j, attr in enumerate(matrix.rho):
        r = backend.random_scalar(rng)
        H = backend.hash_to_g1(attr.encode())
        comps[j] = (g1 ** shares[j] * H ** (-r), g2 ** r)
    prot = comps.pop(matrix.protection_row)
    return prot, comps


def _reencrypt_body(backend: Backend, policy2, rng, universe):
    policy2 = _as_policy(policy2)
    if universe is not None:
        _check_known(leaves(policy2), universe)
    v2 = backend.random_scalar(rng)
    matrix = build_matrix(policy2)
    sv = generate_shares(matrix, v2, backend.order, rng)
    (Bb, Cb), rows = _hashed_rows(backend, matrix, sv.shares, rng)
    return v2, matrix, sv, Bb, Cb, rows


def reencrypt_paper(pk: PublicKey, rk: ReKey, ct: Ciphertext, policy2, rng, universe=None) -> ReEncryptedCiphertext:
    """Re-encryption by the original closed-form CT'_1 expression.

    Undefined symbols are read as: g^beta -> the target key, s' -> v',
    e(., rk3) -> product over the rk3 entries, and a G1-only factor is lifted
    to GT by pairing with g2. No round-trip guarantee.
    Draws v', the share randomness, then r'_i in row order.
    """
    b = pk.backend
    _check_same_backend(b, ct.backend, rk.target_pk.backend)
    _check_ct_shape(ct)
    v2, matrix, sv, Bb, Cb, rows = _reencrypt_body(b, policy2, rng, universe)
    target = rk.target_pk
    g2 = b.g2()
    term_target = b.pair(target.g1 ** v2, g2)
    term_rk3 = b.identity("GT")
    for elem in rk.rk3.values():
        term_rk3 = term_rk3 * b.pair(elem, target.g2)
    num = ct.A1 * term_target * term_rk3 * b.pair(ct.A2, rk.rk1.g2)
    den = b.pair(ct.A2, rk.rk2.g2) * b.pair(ct.A2, target.g2)
    return ReEncryptedCiphertext(num / den, b.g1() ** v2, Bb, Cb, rows, matrix, MODE_PAPER)


def reencrypt_corrected(msk: MasterSecretKey, pk: PublicKey, target_pk, ct: Ciphertext, policy2, rng,
                        universe=None) -> ReEncryptedCiphertext:
    """Proxy-side unblinding and re-blinding under ``e(g1, target)^{v'}``.

    ``target_pk`` may be a G2 element (a requester key's K0) or a DualElem.
    Draws v', the share randomness, then r'_i in row order.
    """
    b = pk.backend
    target = target_pk.g2 if isinstance(target_pk, DualElem) else target_pk
    _check_same_backend(b, msk.backend, ct.backend, target.backend)
    if pk.h.g1 != b.g1() ** msk.n or pk.egg_m != b.gt() ** msk.m:
        raise KeyMismatch("master secret key does not match the public key")
    _check_ct_shape(ct)
    # e(g,g)^{mv} = e(g^{nv}, g2)^{m/n}
    blind = b.pair(ct.A2, b.g2()) ** (msk.m * b.inv(msk.n))
    K = ct.A1 / blind
    v2, matrix, sv, Bb, Cb, rows = _reencrypt_body(b, policy2, rng, universe)
    A1p = K * b.pair(b.g1(), target) ** v2
    return ReEncryptedCiphertext(A1p, b.g1() ** v2, Bb, Cb, rows, matrix, MODE_CORRECTED)


def reencrypted_leaf_values(cdk: CrossDomainUserKey, ct2: ReEncryptedCiphertext, rows: Iterable[int]) -> dict[int, GTElem]:
    """F'_i = e(B'_i, K0) * e(D[rho'(i)], C'_i), which equals e(g1,g2)^{beta v'_i}."""
    b = cdk.backend
    out = {}
    for j in rows:
        if j == ct2.matrix.protection_row:
            B, C = ct2.Bb, ct2.Cb
            D = cdk.Db
        else:
            B, C = ct2.leaves[j]
            D = cdk.D[ct2.matrix.rho[j]]
        out[j] = b.pair(B, cdk.K0) * b.pair(D, C)
    return out


def decrypt_reencrypted(cdk: CrossDomainUserKey, ct2: ReEncryptedCiphertext) -> SymmetricKey:
    if ct2.mode != MODE_CORRECTED:
        raise UnsupportedMode(f"cannot decrypt a {ct2.mode!r}-mode re-encryption")
    b = cdk.backend
    _check_same_backend(b, ct2.backend)
    _check_ct_shape(ct2)
    rows = satisfying_rows(ct2.matrix, cdk.attrs, has_protection=True)
    plan = recon_coefficients(ct2.matrix, rows, b.order)
    F = reencrypted_leaf_values(cdk, ct2, plan.rows)
    return SymmetricKey(ct2.A1p / _combine(b, F, plan.coeffs))


# ---------------------------------------------------------------------------
# KDF and demo-grade DEM (not for production use)

_TAG_LEN = 32


def kdf(K: SymmetricKey) -> bytes:
    return hashlib.sha256(K.K.to_bytes()).digest()


def _keystream(key: bytes, n: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < n:
        out += hashlib.sha256(key + counter.to_bytes(8, "big")).digest()
        counter += 1
    return bytes(out[:n])


def dem_seal(key: bytes, payload: bytes) -> bytes:
    """XOR with a SHA-256 counter keystream, then append sha256(key || ciphertext)."""
    body = bytes(x ^ y for x, y in zip(payload, _keystream(key, len(payload))))
    return body + hashlib.sha256(key + body).digest()


def dem_open(key: bytes, sealed: bytes) -> bytes:
    if len(sealed) < _TAG_LEN:
        raise IntegrityError("sealed payload shorter than its tag")
    body, tag = sealed[:-_TAG_LEN], sealed[-_TAG_LEN:]
    if not hmac.compare_digest(tag, hashlib.sha256(key + body).digest()):
        raise IntegrityError("integrity tag mismatch")
    return bytes(x ^ y for x, y in zip(body, _keystream(key, len(body))))
