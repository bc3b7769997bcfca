"""End-to-end acceptance checks. Each test is one criterion (test_cNN_...);
conftest prints a PASS/FAIL line per criterion after the run."""

import dataclasses
import itertools
import json
import random
import time
from pathlib import Path

import pytest

from helpers import (
    GOLDEN_PAYLOAD,
    RecordingRng,
    all_subsets,
    evaluate,
    golden_objects,
    leaf_count,
    random_tree,
    row_set_authorized,
)
from xdpre import envelope
from xdpre.bench import A1, A2, MESSAGES, BenchConfig, challenge_pair, policy_for, run_suite
from xdpre.errors import MissingProtectionKey, NotAuthorized, PolicyNotSatisfied
from xdpre.groups import CURVE, DebugBackend, encode_scalar, pair
from xdpre.indcpa import GameConfig, run_game
from xdpre.policy import (
    build_matrix,
    generate_shares,
    recon_coefficients,
    recon_coefficients_solve,
    spans_target,
)
from xdpre.scheme import (
    decrypt,
    decrypt_reencrypted,
    encrypt,
    issue_crossdomain_key,
    kdf,
    keygen,
    random_symmetric_key,
    reencrypt_corrected,
    reencrypt_paper,
    rekeygen_paper,
    setup,
)
from xdpre.sites import DEMO_PAYLOAD, run_demo

DBG = DebugBackend()
# large debug prime: a chance collision in a failed decryption has probability ~2^-31
DBG_WIDE = DebugBackend(2**31 - 1)
BACKENDS = {"debug": DBG, "curve": CURVE}
BUDGET = {"debug": 5.0, "curve": 60.0}
UNIVERSE = [f"U{i}" for i in range(8)]
UNIVERSE2 = [f"V{i}" for i in range(8)]


def random_attrs(rng, universe):
    return {a for a in universe if rng.random() < 0.6}


def dot(row, u, order):
    return sum(x * y for x, y in zip(row, u)) % order


# 1 ----------------------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_c01_same_domain_round_trip(name):
    backend = BACKENDS[name]
    rng = random.Random(101)
    outcomes = {True: 0, False: 0}
    start = time.perf_counter()
    for _ in range(100):
        tree = random_tree(rng, UNIVERSE, max_depth=3, max_leaves=8)
        attrs = random_attrs(rng, UNIVERSE)
        msk, pk = setup(UNIVERSE, rng, backend)
        usk = keygen(msk, pk, attrs, rng)
        K = random_symmetric_key(backend, rng)
        ct = encrypt(pk, tree, K, rng)
        if evaluate(tree, attrs):
            assert decrypt(pk, usk, ct) == K
        else:
            with pytest.raises(PolicyNotSatisfied):
                decrypt(pk, usk, ct)
        outcomes[evaluate(tree, attrs)] += 1
    elapsed = time.perf_counter() - start
    assert outcomes[True] >= 20 and outcomes[False] >= 20, outcomes
    assert elapsed < BUDGET[name], elapsed


# 2 ----------------------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_c02_corrected_cross_domain_round_trip(name):
    backend = BACKENDS[name]
    rng = random.Random(202)
    outcomes = {True: 0, False: 0}
    start = time.perf_counter()
    for _ in range(100):
        policy1 = random_tree(rng, UNIVERSE)
        policy2 = random_tree(rng, UNIVERSE2)
        attrs2 = random_attrs(rng, UNIVERSE2)
        msk, pk = setup(UNIVERSE, rng, backend)
        msk_r, pk_r = setup(UNIVERSE2, rng, backend)
        cdk = issue_crossdomain_key(backend, msk_r.beta, attrs2)
        K = random_symmetric_key(backend, rng)
        ct = encrypt(pk, policy1, K, rng)
        ct2 = reencrypt_corrected(msk, pk, pk_r.authority_pk, ct, policy2, rng)
        ok = evaluate(policy2, attrs2)
        if ok:
            assert decrypt_reencrypted(cdk, ct2) == K
        else:
            with pytest.raises(PolicyNotSatisfied):
                decrypt_reencrypted(cdk, ct2)
        outcomes[ok] += 1
    elapsed = time.perf_counter() - start
    assert outcomes[True] >= 20 and outcomes[False] >= 20, outcomes
    assert elapsed < BUDGET[name], elapsed


# 3 ----------------------------------------------------------------------------------------


def test_c03_leaf_identity():
    from xdpre.scheme import leaf_values

    rng = random.Random(303)
    p = DBG.order
    checked = 0
    for _ in range(50):
        tree = random_tree(rng, UNIVERSE)
        msk, pk = setup(UNIVERSE, rng, DBG)
        usk = keygen(msk, pk, UNIVERSE, rng, retain=True)
        enc_rng = RecordingRng(rng.getrandbits(32))
        ct = encrypt(pk, tree, random_symmetric_key(DBG, rng), enc_rng)
        u = enc_rng.draws[: ct.matrix.c]  # v, then y_2..y_c
        F = leaf_values(pk, usk, ct, range(ct.matrix.r))
        k = usk.retained.k
        for j, row in enumerate(ct.matrix.rows):
            assert F[j].exponent == k * dot(row, u, p) % p
            checked += 1
    assert checked >= 100


# 4 ----------------------------------------------------------------------------------------


def collusion_instance(rng, universe):
    """A policy and two disjoint attribute sets that satisfy it jointly but not alone."""
    while True:
        tree = random_tree(rng, universe, max_leaves=6)
        held = set(universe)
        order = list(universe)
        rng.shuffle(order)
        for a in order:  # shrink to a minimal satisfying set
            if evaluate(tree, held - {a}):
                held.discard(a)
        if len(held) < 2:
            continue
        held = sorted(held)
        rng.shuffle(held)
        cut = rng.randint(1, len(held) - 1)
        s1, s2 = set(held[:cut]), set(held[cut:])
        if not evaluate(tree, s1) and not evaluate(tree, s2):
            return tree, s1, s2


@pytest.mark.parametrize("backend", [DBG_WIDE, CURVE], ids=["debug", "curve"])
def test_c04_negative_properties(backend):
    from xdpre.scheme import UserSecretKey

    rng = random.Random(404)
    false_decryptions = 0

    # (a) no protection component
    for _ in range(20):
        tree = random_tree(rng, UNIVERSE)
        msk, pk = setup(UNIVERSE, rng, backend)
        full = keygen(msk, pk, UNIVERSE, rng)
        K = random_symmetric_key(backend, rng)
        ct = encrypt(pk, tree, K, rng)
        with pytest.raises(MissingProtectionKey):
            decrypt(pk, dataclasses.replace(full, SK2=None), ct)
        # without the protection row no row set reconstructs the secret
        with pytest.raises(NotAuthorized):
            recon_coefficients_solve(ct.matrix, set(range(1, ct.matrix.r)), backend.order)
        # an attribute component passed off as the protection component
        for a in UNIVERSE:
            forged = dataclasses.replace(full, SK2=full.SK3[a])
            false_decryptions += decrypt(pk, forged, ct) == K

    # (b) collusion between two same-domain users
    for _ in range(20):
        tree, s1, s2 = collusion_instance(rng, UNIVERSE)
        msk, pk = setup(UNIVERSE, rng, backend)
        u1, u2 = keygen(msk, pk, s1, rng), keygen(msk, pk, s2, rng)
        K = random_symmetric_key(backend, rng)
        ct = encrypt(pk, tree, K, rng)
        # attribute components always come from both users; SK1 and SK2 from either
        sk3 = {**u1.SK3, **u2.SK3}
        for base, prot in itertools.product((u1, u2), repeat=2):
            hybrid = UserSecretKey(base.SK1, prot.SK2, sk3)
            false_decryptions += decrypt(pk, hybrid, ct) == K

    # (c) cross-domain keys from two different authorities
    for _ in range(20):
        tree, s1, s2 = collusion_instance(rng, UNIVERSE2)
        msk, pk = setup(UNIVERSE, rng, backend)
        msk_r, pk_r = setup(UNIVERSE2, rng, backend)
        beta2 = backend.random_scalar(rng)
        assert beta2 != msk_r.beta
        good = issue_crossdomain_key(backend, msk_r.beta, s1)
        other = issue_crossdomain_key(backend, beta2, s2)
        other_full = issue_crossdomain_key(backend, beta2, s1 | s2)
        K = random_symmetric_key(backend, rng)
        ct = encrypt(pk, random_tree(rng, UNIVERSE), K, rng)
        ct2 = reencrypt_corrected(msk, pk, pk_r.authority_pk, ct, tree, rng)
        false_decryptions += decrypt_reencrypted(other_full, ct2) == K
        attrs = sorted(s1 | s2)
        for k0_src, db_src in itertools.product((good, other), repeat=2):
            D = {a: (good.D.get(a) or other.D[a]) for a in attrs}
            hybrid = type(good)(k0_src.K0, D, db_src.Db)
            false_decryptions += decrypt_reencrypted(hybrid, ct2) == K
            # also every mix where an attribute held by both keys comes from either one
            both = {a: (good.D[a], other_full.D[a]) for a in attrs if a in good.D}
            for picks in itertools.product((0, 1), repeat=len(both)):
                D2 = dict(D)
                for (a, pair_), pick in zip(both.items(), picks):
                    D2[a] = pair_[pick]
                hybrid = type(good)(k0_src.K0, D2, db_src.Db)
                false_decryptions += decrypt_reencrypted(hybrid, ct2) == K

    assert false_decryptions == 0


# 5 ----------------------------------------------------------------------------------------


@pytest.mark.parametrize("order", [101, CURVE.order], ids=["p101", "bls-r"])
def test_c05_lsss_oracle_agreement(order):
    rng = random.Random(505)
    authorized = 0
    while authorized < 100:
        tree = random_tree(rng, UNIVERSE)
        m = build_matrix(tree)
        rows = {0} | {j for j in range(1, m.r) if rng.random() < 0.6}
        if not row_set_authorized(m, rows):
            continue
        authorized += 1
        a = recon_coefficients(m, rows, order)
        b = recon_coefficients_solve(m, rows, order)
        assert spans_target(m, a, order) and spans_target(m, b, order)
        secret = rng.randrange(1, order)
        sv = generate_shares(m, secret, order, rng)
        assert a.combine(sv.shares, order) == b.combine(sv.shares, order) == secret

    small = 0
    while small < 100:
        tree = random_tree(rng, UNIVERSE[:4], max_leaves=5)
        m = build_matrix(tree)
        if m.r > 6:
            continue
        small += 1
        for rows in map(set, all_subsets(range(m.r))):
            if row_set_authorized(m, rows):
                recon_coefficients(m, rows, order)
                assert spans_target(m, recon_coefficients_solve(m, rows, order), order)
            else:
                with pytest.raises(NotAuthorized):
                    recon_coefficients(m, rows, order)
                with pytest.raises(NotAuthorized):
                    recon_coefficients_solve(m, rows, order)


# 6 ----------------------------------------------------------------------------------------


def test_c06_indcpa_win_rate():
    start = time.perf_counter()
    rates = {}
    for set_name, attrs in (("A1", A1), ("A2", A2)):
        for message in MESSAGES:
            m0, m1 = challenge_pair(message)
            stats = run_game(GameConfig(trials=2000, policy=policy_for(attrs), m0=m0, m1=m1, seed=6))
            rates[(set_name, message)] = stats.win_rate
    elapsed = time.perf_counter() - start
    print("win rates:", rates, f"{elapsed:.1f}s")
    assert all(0.465 <= r <= 0.535 for r in rates.values()), rates
    assert elapsed < 30.0, elapsed


# 7 ----------------------------------------------------------------------------------------


@pytest.mark.slow
def test_c07_cost_ordering():
    config = BenchConfig(samples=10)
    report = run_suite(config)
    short, long_ = sorted(MESSAGES, key=len)
    for trials in config.trial_counts:
        for message in MESSAGES:
            a1 = report.cell("A1", message, trials).median_ms
            a2 = report.cell("A2", message, trials).median_ms
            assert a2 > a1, (message, trials, a1, a2)
        for set_name in ("A1", "A2"):
            s = report.cell(set_name, short, trials).median_ms
            l_ = report.cell(set_name, long_, trials).median_ms
            assert l_ >= 0.95 * s, (set_name, trials, s, l_)


# 8 ----------------------------------------------------------------------------------------


def paper_instance(backend, seed):
    rng = random.Random(seed)
    msk, pk = setup(UNIVERSE, rng, backend)
    _, pk_r = setup(UNIVERSE2, rng, backend)
    owner = keygen(msk, pk, UNIVERSE, rng, retain=True)
    ct = encrypt(pk, random_tree(rng, UNIVERSE), random_symmetric_key(backend, rng), rng)
    rk = rekeygen_paper(owner, pk_r.authority_pk, pk, rng)
    policy2 = random_tree(rng, UNIVERSE2)
    re_rng = RecordingRng(seed)
    return reencrypt_paper(pk, rk, ct, policy2, re_rng), re_rng.draws


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_c08_paper_mode_structure(name):
    backend = BACKENDS[name]
    g2, gt = backend.g2(), backend.gt()
    for seed in range(50):
        ct2, draws = paper_instance(backend, seed)
        again, _ = paper_instance(backend, seed)
        assert ct2 == again
        u = draws[: ct2.matrix.c]  # v', then y'_2..y'_c
        assert ct2.A2p == backend.g1() ** u[0]
        for j, (row, attr) in enumerate(zip(ct2.matrix.rows, ct2.matrix.rho)):
            B, C = (ct2.Bb, ct2.Cb) if j == ct2.matrix.protection_row else ct2.leaves[j]
            lhs = pair(B, g2) * pair(backend.hash_to_g1(attr.encode()), C)
            assert lhs == gt ** dot(row, u, backend.order)


# 9 ----------------------------------------------------------------------------------------


def key_material(result):
    """Every secret a log must not contain, as raw bytes and as hex text."""
    secrets = [DEMO_PAYLOAD]
    for site in result.sim.sites.values():
        b = site.backend
        secrets += [encode_scalar(b, s) for s in (site.msk.m, site.msk.n, site.msk.beta)]
        for usk in site.users.values():
            secrets.append(usk.SK1.to_bytes())
            secrets += [x.to_bytes() for x in usk.SK2]
            secrets += [x.to_bytes() for pair_ in usk.SK3.values() for x in pair_]
        for cdk in site.crossdomain_users.values():
            secrets += [cdk.K0.to_bytes(), cdk.Db.to_bytes()] + [x.to_bytes() for x in cdk.D.values()]
    sub = result.sim.sites["subcontractor"]
    K = decrypt_reencrypted(sub.crossdomain_users["carol"], result.task.payload_ct)
    secrets += [K.K.to_bytes(), kdf(K)]
    return secrets


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_c09_sites_demo(name, tmp_path):
    log = tmp_path / "events.jsonl"
    result = run_demo(seed=9, backend=BACKENDS[name], log_path=log)
    assert result.report.violations == []
    assert result.opened_payload == DEMO_PAYLOAD
    data = log.read_bytes()
    assert len(data.splitlines()) == len(result.sim.log.events)
    for secret in key_material(result):
        assert secret not in data
        assert secret.hex().encode() not in data
    for word in DEMO_PAYLOAD.split():
        if len(word) >= 6:
            assert word not in data


# 10 ---------------------------------------------------------------------------------------

GOLDEN = Path(__file__).parent / "golden" / "envelopes"


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_c10_golden_serialization(name):
    fresh = golden_objects(BACKENDS[name])
    for kind in ("pk", "msk", "usk", "ct", "rk", "rct", "cdk"):
        payload = GOLDEN_PAYLOAD if kind in ("ct", "rct") else None
        text = (GOLDEN / name / f"{kind}.json").read_text()
        assert envelope.dumps(fresh[kind], payload) == text
        obj = envelope.loads(text, kind)
        assert envelope.dumps(obj, envelope.payload_of(json.loads(text))) == text
