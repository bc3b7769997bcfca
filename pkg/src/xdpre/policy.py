"""Monotone access policies compiled to LSSS matrices.

Policy DSL::

    expr := attr | "(" expr ("AND" expr)+ ")" | "(" expr ("OR" expr)+ ")"
          | "kofn(" t "," expr ("," expr)* ")"
    attr := [A-Za-z0-9_]+

Every compiled matrix encodes ``AND(b, policy)`` where ``b`` is the
protection attribute, so no authorized row set can omit the protection row.

Matrices are built by Vandermonde threshold embedding: a t-of-n gate with
parent vector ``w`` allocates t-1 fresh columns and hands child ``i`` the
vector ``w`` followed by ``(i, i^2, ..., i^(t-1))`` in the fresh columns.
Reconstruction coefficients are then products of Lagrange bases at x=0,
one per gate along the path to each leaf.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import NotAuthorized, ParseError, PolicyNotSatisfied, ReservedAttribute

PROTECTION_ATTR = "b"
_IDENT = re.compile(r"[A-Za-z0-9_]+")


@dataclass(frozen=True)
class Leaf:
    attr: str


@dataclass(frozen=True)
class Gate:
    threshold: int
    children: tuple["PolicyNode", ...]

    def __post_init__(self):
        n = len(self.children)
        if n < 1 or not 1 <= self.threshold <= n:
            raise ValueError(f"invalid gate: threshold {self.threshold} over {n} children")


PolicyNode = Union[Leaf, Gate]


def AND(*children: PolicyNode) -> Gate:
    return Gate(len(children), tuple(children))


def OR(*children: PolicyNode) -> Gate:
    return Gate(1, tuple(children))


def leaves(node: PolicyNode) -> list[str]:
    """Leaf attributes in depth-first (row) order, duplicates kept."""
    if isinstance(node, Leaf):
        return [node.attr]
    out: list[str] = []
    for child in node.children:
        out.extend(leaves(child))
    return out


def depth(node: PolicyNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(depth(c) for c in node.children)


def to_text(node: PolicyNode) -> str:
    """Canonical pretty-printer; ``parse_policy(to_text(t)) == t``."""
    if isinstance(node, Leaf):
        return node.attr
    n, t = len(node.children), node.threshold
    parts = [to_text(c) for c in node.children]
    if n >= 2 and t == n:
        return "(" + " AND ".join(parts) + ")"
    if n >= 2 and t == 1:
        return "(" + " OR ".join(parts) + ")"
    return f"kofn({t}, " + ", ".join(parts) + ")"


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _loc(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def fail(self, expected, pos: int | None = None):
        line, col = self._loc(self.pos if pos is None else pos)
        raise ParseError(line, col, expected)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek_ident(self) -> str | None:
        self.skip_ws()
        m = _IDENT.match(self.text, self.pos)
        return m.group(0) if m else None

    def expect(self, s: str):
        self.skip_ws()
        if not self.text.startswith(s, self.pos):
            self.fail({repr(s)})
        self.pos += len(s)

    def at(self, s: str) -> bool:
        self.skip_ws()
        return self.text.startswith(s, self.pos)

    def parse(self) -> PolicyNode:
        node = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            self.fail({"end of input"})
        return node

    def expr(self) -> PolicyNode:
        self.skip_ws()
        if self.at("("):
            return self.group()
        start = self.pos
        ident = self.peek_ident()
        if ident is None:
            self.fail({"'('", "'kofn('", "attribute"})
        if ident == "kofn" and self.text.startswith("(", self.pos + 4):
            return self.kofn()
        if ident in ("AND", "OR"):
            self.fail({"'('", "'kofn('", "attribute"})
        if ident == PROTECTION_ATTR:
            line, col = self._loc(start)
            raise ReservedAttribute(f"attribute {PROTECTION_ATTR!r} is reserved (line {line}, column {col})")
        self.pos += len(ident)
        return Leaf(ident)

    def group(self) -> PolicyNode:
        self.expect("(")
        children = [self.expr()]
        op = None
        while True:
            self.skip_ws()
            if self.at(")"):
                self.pos += 1
                break
            word = self.peek_ident()
            if word not in ("AND", "OR") or (op is not None and word != op):
                self.fail({"')'"} | ({"'AND'", "'OR'"} if op is None else {repr(op)}))
            op = word
            self.pos += len(word)
            children.append(self.expr())
        if op is None:
            return children[0]
        return Gate(len(children) if op == "AND" else 1, tuple(children))

    def kofn(self) -> PolicyNode:
        self.pos += len("kofn")
        self.expect("(")
        self.skip_ws()
        m = re.compile(r"[0-9]+").match(self.text, self.pos)
        if not m:
            self.fail({"threshold"})
        t_pos = self.pos
        t = int(m.group(0))
        self.pos = m.end()
        children = []
        while True:
            self.skip_ws()
            if self.at(","):
                self.pos += 1
                children.append(self.expr())
                continue
            if self.at(")") and children:
                self.pos += 1
                break
            self.fail({"','", "')'"} if children else {"','"})
        if not 1 <= t <= len(children):
            self.fail({f"threshold in [1, {len(children)}]"}, t_pos)
        return Gate(t, tuple(children))


def parse_policy(text: str) -> PolicyNode:
    return _Parser(text).parse()


def check_user_policy(node: PolicyNode) -> None:
    if PROTECTION_ATTR in leaves(node):
        raise ReservedAttribute(f"attribute {PROTECTION_ATTR!r} is reserved")


# ---------------------------------------------------------------------------
# matrix


@dataclass(frozen=True)
class AccessMatrix:
    """LSSS matrix (M, rho) for ``AND(b, policy)``.

    ``rows`` are integer row vectors of width ``c``; entries are small
    Vandermonde powers and are reduced mod p only when used.
    """

    rows: tuple[tuple[int, ...], ...]
    rho: tuple[str, ...]
    protection_row: int
    policy: PolicyNode
    tree: Gate = field(repr=False, compare=False)
    # leaf path (child indices from the root) -> row index
    leaf_rows: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def r(self) -> int:
        return len(self.rows)

    @property
    def c(self) -> int:
        return len(self.rows[0])

    def dump(self) -> str:
        """Canonical text form: policy line, row-major scalars, then ``row:attr`` lines."""
        lines = [f"policy: {to_text(self.policy)}", f"size: {self.r} {self.c}"]
        lines += [" ".join(str(x) for x in row) for row in self.rows]
        lines += [f"{i}:{a}" for i, a in enumerate(self.rho)]
        return "\n".join(lines) + "\n"


def load_matrix(text: str) -> AccessMatrix:
    """Rebuild a matrix from ``AccessMatrix.dump`` output and check it matches."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("policy: "):
        raise ValueError("matrix dump must start with a policy line")
    matrix = build_matrix(parse_policy(lines[0][len("policy: "):]))
    if matrix.dump() != text:
        raise ValueError("matrix dump does not match its policy")
    return matrix


def build_matrix(tree: PolicyNode) -> AccessMatrix:
    check_user_policy(tree)
    effective = Gate(2, (Leaf(PROTECTION_ATTR), tree))
    vectors: list[list[int]] = []
    rho: list[str] = []
    leaf_rows: dict[tuple[int, ...], int] = {}
    width = 1

    def walk(node: PolicyNode, vec: list[int], path: tuple[int, ...]):
        nonlocal width
        if isinstance(node, Leaf):
            leaf_rows[path] = len(vectors)
            vectors.append(vec)
            rho.append(node.attr)
            return
        t = node.threshold
        base = vec + [0] * (width - len(vec))
        start = width
        width += t - 1
        for i, child in enumerate(node.children, start=1):
            extra = [pow(i, k) for k in range(1, t)]
            walk(child, base[:start] + extra, path + (i,))

    walk(effective, [1], ())
    rows = tuple(tuple(v + [0] * (width - len(v))) for v in vectors)
    return AccessMatrix(rows, tuple(rho), 0, tree, effective, leaf_rows)


# ---------------------------------------------------------------------------
# shares and reconstruction


@dataclass(frozen=True)
class ShareVector:
    shares: dict[int, int]
    secret: int
    u: tuple[int, ...]


def generate_shares(matrix: AccessMatrix, secret: int, order: int, rng) -> ShareVector:
    """Shares ``M_j . u`` with ``u = (secret, y_2, ..., y_c)``, y_j drawn from Z_p^*."""
    if matrix.c < 1:
        raise ValueError("matrix has no columns")
    u = [secret % order] + [rng.randrange(1, order) for _ in range(matrix.c - 1)]
    shares = {j: sum(a * b for a, b in zip(row, u)) % order for j, row in enumerate(matrix.rows)}
    return ShareVector(shares, secret % order, tuple(u))


def _gate_label(node: PolicyNode) -> str:
    return to_text(node) if not (isinstance(node, Gate) and node.children[0] == Leaf(PROTECTION_ATTR)) \
        else f"(b AND {to_text(node.children[1])})"


def satisfying_rows(matrix: AccessMatrix, attrs: Iterable[str], has_protection: bool) -> frozenset[int]:
    """Minimal authorized row set, taking the lowest-index satisfied children at every gate."""
    held = set(attrs)
    held.discard(PROTECTION_ATTR)
    if has_protection:
        held.add(PROTECTION_ATTR)
    first_fail: list[str] = []

    def walk(node, path) -> set[int] | None:
        if isinstance(node, Leaf):
            return {matrix.leaf_rows[path]} if node.attr in held else None
        chosen: set[int] = set()
        count = 0
        for i, child in enumerate(node.children, start=1):
            got = walk(child, path + (i,))
            if got is not None:
                chosen |= got
                count += 1
                if count == node.threshold:
                    return chosen
        if not first_fail:
            first_fail.append(_gate_label(node))
        return None

    rows = walk(matrix.tree, ())
    if rows is None:
        raise PolicyNotSatisfied(f"unsatisfied gate: {first_fail[0]}")
    return frozenset(rows)


def lagrange_at_zero(i: int, xs: Iterable[int], order: int) -> int:
    """Lagrange basis coefficient at 0 for point ``i`` over the set ``xs`` (mod order)."""
    num, den = 1, 1
    for j in xs:
        if j == i:
            continue
        num = num * (0 - j) % order
        den = den * (i - j) % order
    return num * pow(den, -1, order) % order


@dataclass(frozen=True)
class ReconPlan:
    rows: frozenset[int]
    coeffs: dict[int, int]

    def combine(self, shares: dict[int, int], order: int) -> int:
        return sum(self.coeffs[j] * shares[j] for j in self.rows) % order


def recon_coefficients(matrix: AccessMatrix, rows: Iterable[int], order: int) -> ReconPlan:
    """Coefficients via per-gate Lagrange interpolation over the policy tree."""
    allowed = set(rows)

    def walk(node, path) -> dict[int, int] | None:
        if isinstance(node, Leaf):
            row = matrix.leaf_rows[path]
            return {row: 1} if row in allowed else None
        picked: list[tuple[int, dict[int, int]]] = []
        for i, child in enumerate(node.children, start=1):
            sub = walk(child, path + (i,))
            if sub is not None:
                picked.append((i, sub))
                if len(picked) == node.threshold:
                    break
        if len(picked) < node.threshold:
            return None
        xs = [i for i, _ in picked]
        out: dict[int, int] = {}
        for i, sub in picked:
            delta = lagrange_at_zero(i, xs, order)
            for row, coeff in sub.items():
                out[row] = (out.get(row, 0) + delta * coeff) % order
        return out

    coeffs = walk(matrix.tree, ())
    if coeffs is None:
        raise NotAuthorized(f"rows {sorted(allowed)} do not satisfy {_gate_label(matrix.tree)}")
    return ReconPlan(frozenset(coeffs), coeffs)


def recon_coefficients_solve(matrix: AccessMatrix, rows: Iterable[int], order: int) -> ReconPlan:
    """Coefficients by Gaussian elimination on ``sum_j w_j M_j = e_1`` over Z_p.

    Free variables are set to zero. Independent of the policy tree: it only
    looks at the selected rows of M.
    """
    sel = sorted(set(rows))
    c = matrix.c
    # augmented system: c equations (one per column), len(sel) unknowns
    aug = [[matrix.rows[j][col] % order for j in sel] + [1 if col == 0 else 0] for col in range(c)]
    n = len(sel)
    pivots: list[int] = []
    r = 0
    for col in range(n):
        pivot = next((i for i in range(r, c) if aug[i][col]), None)
        if pivot is None:
            continue
        aug[r], aug[pivot] = aug[pivot], aug[r]
        inv = pow(aug[r][col], -1, order)
        aug[r] = [x * inv % order for x in aug[r]]
        for i in range(c):
            if i != r and aug[i][col]:
                f = aug[i][col]
                aug[i] = [(x - f * y) % order for x, y in zip(aug[i], aug[r])]
        pivots.append(col)
        r += 1
        if r == c:
            break
    if any(aug[i][n] for i in range(r, c)):
        raise NotAuthorized(f"rows {sel} do not span the target vector")
    coeffs = {j: 0 for j in sel}
    for i, col in enumerate(pivots):
        coeffs[sel[col]] = aug[i][n]
    used = frozenset(j for j, w in coeffs.items() if w)
    return ReconPlan(used, {j: coeffs[j] for j in used})


def spans_target(matrix: AccessMatrix, plan: ReconPlan, order: int) -> bool:
    """Check the defining equation ``sum_j coeffs[j] * M_j == e_1 (mod p)``."""
    total = [0] * matrix.c
    for j in plan.rows:
        for k, x in enumerate(matrix.rows[j]):
            total[k] = (total[k] + plan.coeffs[j] * x) % order
    return total == [1] + [0] * (matrix.c - 1)
