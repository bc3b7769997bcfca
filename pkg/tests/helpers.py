"""Test oracles and fixtures that do not go through the code under test."""

from __future__ import annotations

import random
from itertools import combinations

from xdpre.policy import Gate, Leaf


class ScriptedRng:
    """Returns pre-set values from ``randrange``; falls back to a seeded RNG when exhausted."""

    def __init__(self, values, fallback_seed=0):
        self.values = list(values)
        self.fallback = random.Random(fallback_seed)

    def randrange(self, start, stop=None):
        if self.values:
            v = self.values.pop(0)
            lo, hi = (0, start) if stop is None else (start, stop)
            assert lo <= v < hi, (v, lo, hi)
            return v
        return self.fallback.randrange(start, stop) if stop is not None else self.fallback.randrange(start)

    def getrandbits(self, k):
        return self.fallback.getrandbits(k)

    def random(self):
        return self.fallback.random()


class RecordingRng(random.Random):
    """A seeded RNG that remembers every ``randrange`` result in order."""

    def __init__(self, seed):
        super().__init__(seed)
        self.draws = []

    def randrange(self, *args, **kwargs):
        v = super().randrange(*args, **kwargs)
        self.draws.append(v)
        return v


def evaluate(node, held) -> bool:
    """Plain boolean threshold evaluation of a policy tree."""
    if isinstance(node, Leaf):
        return node.attr in held
    return sum(evaluate(c, held) for c in node.children) >= node.threshold


def row_set_authorized(matrix, rows) -> bool:
    """Is this row set authorized for AND(b, policy)? Evaluated on the tree, per leaf position."""
    counter = iter(range(matrix.r))

    def walk(node):
        if isinstance(node, Leaf):
            return next(counter) in rows
        return sum(walk(c) for c in node.children) >= node.threshold

    # rows are emitted depth-first over AND(b, policy); walk in the same order
    return walk(matrix.tree)


def random_tree(rng: random.Random, attrs, max_depth=3, max_leaves=8):
    """Random monotone threshold tree with depth <= max_depth and <= max_leaves leaves."""
    budget = [max_leaves]

    def build(d):
        if d == max_depth or budget[0] <= 1 or rng.random() < 0.35:
            budget[0] -= 1
            return Leaf(rng.choice(attrs))
        n = rng.randint(2, min(4, budget[0]))
        budget[0] -= n  # reserve one leaf per child
        children = []
        for _ in range(n):
            budget[0] += 1
            children.append(build(d + 1))
        return Gate(rng.randint(1, n), tuple(children))

    return build(0)


def leaf_count(node) -> int:
    return 1 if isinstance(node, Leaf) else sum(leaf_count(c) for c in node.children)


def tree_depth(node) -> int:
    return 0 if isinstance(node, Leaf) else 1 + max(tree_depth(c) for c in node.children)


def all_subsets(items):
    items = list(items)
    for k in range(len(items) + 1):
        yield from combinations(items, k)


GOLDEN_PAYLOAD = b"golden payload"


def golden_objects(backend, seed=2024):
    """One instance of every envelope object type, built from a fixed seed."""
    from xdpre import scheme

    rng = random.Random(seed)
    msk, pk = scheme.setup(["Doctor", "Professor", "Researcher"], rng, backend)
    msk2, pk2 = scheme.setup(["Electrician", "Foreman"], rng, backend)
    usk = scheme.keygen(msk, pk, ["Doctor", "Professor"], rng, retain=True)
    K = scheme.random_symmetric_key(backend, rng)
    ct = scheme.encrypt(pk, "(Doctor AND kofn(1, Professor, Researcher))", K, rng)
    rk = scheme.rekeygen_paper(usk, pk2.authority_pk, pk, rng)
    rct = scheme.reencrypt_corrected(msk, pk, pk2.authority_pk, ct, "(Electrician OR Foreman)", rng)
    cdk = scheme.issue_crossdomain_key(backend, msk2.beta, ["Electrician"])
    return {"pk": pk, "msk": msk, "usk": usk, "ct": ct, "rk": rk, "rct": rct, "cdk": cdk}
