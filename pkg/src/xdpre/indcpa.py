"""IND-CPA game simulation with a BDHE-style challenge term.

One round:

1. Setup: the challenger runs ``setup`` over the attribute universe and hands
   ``pk`` to the adversary.
2. Query phase 1: the adversary may ask the key oracle for attribute sets.
   Sets satisfying the challenge policy are refused (and the refusal is
   recorded), everything else gets a freshly generated key.
3. Challenge: the challenger flips ``challenge_bit``, encrypts
   ``M_b = encode_message(m_b)`` under the challenge policy and replaces the
   first component with ``M_b * T``, where T is a real or random BDHE term.
4. Query phase 2 and guess: the adversary outputs a bit.

Rounds are independent; round ``i`` of a game seeded with ``seed`` uses its
own RNG stream derived from ``(seed, i)``.
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .errors import InvalidParameter, LengthMismatch, PolicyNotSatisfied
from .groups import Backend, DebugBackend, GTElem
from .policy import AccessMatrix, PolicyNode, build_matrix, leaves, parse_policy, satisfying_rows
from .scheme import Ciphertext, PublicKey, SymmetricKey, UserSecretKey, encrypt, keygen, setup


@dataclass(frozen=True)
class BdheChallenge:
    T: GTElem
    is_real: bool
    l: int
    a: int
    s: int


def sample_bdhe(l: int, rng, backend: Backend) -> BdheChallenge:
    """Fair coin between ``e(g1,g2)^(a^(l+1))`` and a uniform GT element."""
    if l < 1:
        raise InvalidParameter(f"l must be >= 1, got {l}")
    is_real = rng.randrange(2) == 1
    a = backend.random_scalar(rng)
    s = backend.random_scalar(rng)
    if is_real:
        T = backend.gt() ** pow(a, l + 1, backend.order)
    else:
        T = backend.random_gt(rng)
    return BdheChallenge(T, is_real, l, a, s)


# ---------------------------------------------------------------------------
# oracle and strategies


@dataclass(frozen=True)
class OracleCall:
    phase: int
    attrs: tuple[str, ...]
    refused: bool
    key: Optional[UserSecretKey] = field(default=None, repr=False)


class KeyOracle:
    """Key-generation oracle that refuses attribute sets satisfying the challenge policy."""

    def __init__(self, msk, pk: PublicKey, matrix: AccessMatrix, rng):
        self._msk = msk
        self._pk = pk
        self._matrix = matrix
        self._rng = rng
        self.phase = 1
        self.transcript: list[OracleCall] = []

    def keygen(self, attrs) -> Optional[UserSecretKey]:
        attrs = tuple(sorted(set(attrs)))
        try:
            satisfying_rows(self._matrix, attrs, has_protection=True)
        except PolicyNotSatisfied:
            key = keygen(self._msk, self._pk, attrs, self._rng)
            self.transcript.append(OracleCall(self.phase, attrs, False, key))
            return key
        self.transcript.append(OracleCall(self.phase, attrs, True))
        return None


@dataclass
class AdversaryView:
    """Everything a strategy may see: never the challenge bit, is_real, or msk."""

    pk: PublicKey
    oracle: KeyOracle
    rng: random.Random
    m0: bytes
    m1: bytes
    challenge: Optional[Ciphertext] = None


class Strategy:
    name = "base"

    def query_phase1(self, view: AdversaryView) -> None:
        """Ask for a key over all but one universe attribute (refused if it satisfies the policy)."""
        universe = sorted(view.pk.universe)
        if len(universe) > 1:
            view.oracle.keygen(universe[:-1])

    def guess(self, view: AdversaryView) -> int:
        raise NotImplementedError


class RandomGuess(Strategy):
    name = "random-guess"

    def guess(self, view):
        return view.rng.randrange(2)


class ConstantZero(Strategy):
    name = "constant-zero"

    def guess(self, view):
        return 0


STRATEGIES = {s.name: s for s in (RandomGuess, ConstantZero)}


def get_strategy(name: str) -> Strategy:
    try:
        return STRATEGIES[name]()
    except KeyError:
        raise InvalidParameter(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None


# ---------------------------------------------------------------------------
# rounds and games


@dataclass(frozen=True)
class GameRound:
    challenge_bit: int
    adversary_guess: int
    is_real: bool
    challenge: Ciphertext = field(repr=False)
    transcript: tuple[OracleCall, ...] = field(repr=False)

    @property
    def win(self) -> bool:
        return self.challenge_bit == self.adversary_guess


def equal_length_pair(m0: bytes, m1: bytes) -> tuple[bytes, bytes]:
    """Right-pad the shorter message with spaces."""
    n = max(len(m0), len(m1))
    return m0.ljust(n, b" "), m1.ljust(n, b" ")


def _policy(policy) -> PolicyNode:
    return parse_policy(policy) if isinstance(policy, str) else policy


def run_round(policy, m0: bytes, m1: bytes, strategy: Strategy, rng, backend: Backend,
              universe=None, adversary_rng=None) -> GameRound:
    if len(m0) != len(m1):
        raise LengthMismatch(f"challenge messages must have equal length ({len(m0)} != {len(m1)})")
    policy = _policy(policy)
    if universe is None:
        universe = list(dict.fromkeys(leaves(policy)))
    adversary_rng = adversary_rng or random.Random(rng.getrandbits(64))

    msk, pk = setup(universe, rng, backend)
    matrix = build_matrix(policy)
    oracle = KeyOracle(msk, pk, matrix, rng)
    view = AdversaryView(pk, oracle, adversary_rng, m0, m1)
    strategy.query_phase1(view)

    challenge_bit = rng.randrange(2)
    Mb = backend.encode_message(m1 if challenge_bit else m0)
    bdhe = sample_bdhe(matrix.r, rng, backend)
    ct = encrypt(pk, policy, SymmetricKey(Mb), rng)
    challenge = dataclasses.replace(ct, A1=Mb * bdhe.T)

    oracle.phase = 2
    view.challenge = challenge
    guess = strategy.guess(view)
    return GameRound(challenge_bit, guess, bdhe.is_real, challenge, tuple(oracle.transcript))


@dataclass(frozen=True)
class GameConfig:
    trials: int
    policy: str
    m0: bytes
    m1: bytes
    strategy: str = "random-guess"
    seed: int = 0
    backend: Backend = field(default_factory=DebugBackend)
    universe: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class GameStats:
    trials: int
    wins: int
    real_count: int
    wins_real: int
    seed: int

    @property
    def win_rate(self) -> float:
        return self.wins / self.trials

    @property
    def advantage(self) -> float:
        return abs(self.win_rate - 0.5)

    @property
    def real_fraction(self) -> float:
        return self.real_count / self.trials

    @property
    def win_rate_given_real(self) -> Optional[float]:
        return self.wins_real / self.real_count if self.real_count else None

    @property
    def win_rate_given_random(self) -> Optional[float]:
        n = self.trials - self.real_count
        return (self.wins - self.wins_real) / n if n else None

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "wins": self.wins,
            "win_rate": self.win_rate,
            "advantage": self.advantage,
            "real_fraction": self.real_fraction,
            "seed": self.seed,
        }


def round_rng(seed: int, index: int) -> random.Random:
    return random.Random(f"{seed}/{index}")


def iter_rounds(config: GameConfig) -> Iterator[GameRound]:
    """The rounds of a game, one at a time (round i uses ``round_rng(seed, i)``)."""
    if config.trials < 1:
        raise InvalidParameter(f"trials must be >= 1, got {config.trials}")
    policy = _policy(config.policy)
    strategy = get_strategy(config.strategy)
    for i in range(config.trials):
        yield run_round(policy, config.m0, config.m1, strategy, round_rng(config.seed, i), config.backend,
                        universe=config.universe, adversary_rng=random.Random(f"{config.seed}/{i}/adversary"))


def summarize(config: GameConfig, rounds: Iterable[GameRound]) -> GameStats:
    wins = real = wins_real = 0
    for rnd in rounds:
        wins += rnd.win
        real += rnd.is_real
        wins_real += rnd.win and rnd.is_real
    return GameStats(config.trials, wins, real, wins_real, config.seed)


def run_game(config: GameConfig) -> GameStats:
    if config.trials < 1:
        raise InvalidParameter(f"trials must be >= 1, got {config.trials}")
    return summarize(config, iter_rounds(config))
