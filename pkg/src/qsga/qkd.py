"""Key distribution from a group action with SWAP-test checks.

Every state in the protocol is an element state ``|psi_e>``, so a round is
tracked by its label ``e``. A SWAP test between ``|psi_a>`` and ``|psi_b>``
passes with probability ``(1 + |Gamma(b - a)|^2) / 2``, where ``Gamma`` is the
overlap profile of the action. Outcomes are Bernoulli draws with that
probability rather than ancilla-circuit simulations.

The classical authenticated channel is tamper-proof by assumption; only
Alice's first quantum message can be modified. Information reconciliation
and privacy amplification are not modeled, so keys are raw bit strings.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .group_action import ActionContext

ADVERSARIES = ("none", "tamper_first", "passive_observe")
SUBSTITUTES = ("orthogonal", "own")
SUBSET_ENUMERATION_CAP = 2**16


@dataclass(frozen=True)
class ProtocolConfig:
    """Protocol parameters.

    ``tamper`` is the number of leading positions whose first-message state
    the adversary replaces. With ``substitutes="orthogonal"`` the replacement
    for position ``i`` is ``|psi_(g_i + d_i)>`` with ``d_i`` uniform and nonzero,
    so it is orthogonal to Alice's state whenever the action is orthogonal;
    ``"own"`` resends Alice's state unchanged. ``force_b`` fixes every ``b_i``.
    """

    n: int
    ctx: ActionContext
    adversary: str = "none"
    tamper: int = 0
    substitutes: str = "orthogonal"
    force_b: int | None = None

    def __post_init__(self) -> None:
        if self.n < 2 or self.n % 2:
            raise ValueError(f"the number of rounds must be even and positive, got {self.n}")
        if self.adversary not in ADVERSARIES:
            raise ValueError(f"adversary must be one of {ADVERSARIES}")
        if self.substitutes not in SUBSTITUTES:
            raise ValueError(f"substitutes must be one of {SUBSTITUTES}")
        if not 0 <= self.tamper <= self.n:
            raise ValueError(f"tamper count must lie in [0, {self.n}]")
        if self.adversary != "tamper_first" and self.tamper:
            raise ValueError("only the tamper_first adversary replaces states")
        if self.force_b not in (None, 0, 1):
            raise ValueError("force_b must be None, 0 or 1")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "action": self.ctx.to_dict(),
            "adversary": self.adversary,
            "tamper": self.tamper,
            "substitutes": self.substitutes,
            "force_b": self.force_b,
        }


def swap_pass_probability(ctx: ActionContext, a: int, b: int) -> float:
    """SWAP-test pass probability between ``|psi_a>`` and ``|psi_b>``."""
    gamma = ctx.overlap_profile[(int(b) - int(a)) % ctx.N]
    return 0.5 * (1.0 + float(abs(gamma)) ** 2)


@dataclass
class QkdTranscript:
    n: int
    alice_g: list[int]
    received: list[int]
    subset: list[int]
    check_outcomes: dict[int, bool]
    abort_probability: float
    aborted: bool
    bob_h: dict[int, int] = field(default_factory=dict)
    bob_b: dict[int, int] = field(default_factory=dict)
    bob_u: dict[int, int] = field(default_factory=dict)
    decode_outcomes: dict[int, bool] = field(default_factory=dict)
    decode_pass_probability: dict[int, float] = field(default_factory=dict)
    tampered: list[int] = field(default_factory=list)
    observed: int = 0

    @property
    def key_positions(self) -> list[int]:
        return [i for i in range(self.n) if i not in set(self.subset)]

    @property
    def bob_key(self) -> list[int]:
        return [] if self.aborted else [self.bob_b[i] for i in self.key_positions]

    @property
    def alice_key(self) -> list[int]:
        if self.aborted:
            return []
        return [0 if self.decode_outcomes[i] else 1 for i in self.key_positions]

    def rows(self) -> list[dict]:
        """One row per position: ``i, b, b_prime, checked, swap_pass``."""
        out = []
        checked = set(self.subset)
        for i in range(self.n):
            if i in checked:
                out.append({"i": i, "b": "", "b_prime": "", "checked": 1,
                            "swap_pass": int(self.check_outcomes[i]) if i in self.check_outcomes else ""})
            elif self.aborted:
                out.append({"i": i, "b": "", "b_prime": "", "checked": 0, "swap_pass": ""})
            else:
                ok = self.decode_outcomes[i]
                out.append({"i": i, "b": self.bob_b[i], "b_prime": 0 if ok else 1, "checked": 0,
                            "swap_pass": int(ok)})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["i", "b", "b_prime", "checked", "swap_pass"],
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()


def run_protocol(config: ProtocolConfig, rng: np.random.Generator) -> QkdTranscript:
    ctx, n, N = config.ctx, config.n, config.ctx.N
    g = [int(v) for v in rng.integers(0, N, size=n)]
    received = list(g)
    tampered = []
    if config.adversary == "tamper_first":
        for i in range(config.tamper):
            d = 0 if config.substitutes == "own" else int(rng.integers(1, N))
            received[i] = (g[i] + d) % N
            tampered.append(i)
    observed = n if config.adversary == "passive_observe" else 0

    subset = sorted(int(i) for i in rng.choice(n, size=n // 2, replace=False))
    checks: dict[int, bool] = {}
    pass_all = 1.0
    aborted = False
    for i in subset:
        p = swap_pass_probability(ctx, g[i], received[i])
        pass_all *= p
        ok = bool(rng.random() < p)
        checks[i] = ok
        if not ok:
            aborted = True
            break
    if aborted:
        # the remaining checks never run, but the abort probability covers all of them
        for i in subset[len(checks):]:
            pass_all *= swap_pass_probability(ctx, g[i], received[i])
        return QkdTranscript(n, g, received, subset, checks, 1.0 - pass_all, True,
                             tampered=tampered, observed=observed)

    t = QkdTranscript(n, g, received, subset, checks, 1.0 - pass_all, False,
                      tampered=tampered, observed=observed)
    for i in t.key_positions:
        h = int(rng.integers(0, N))
        b = int(rng.integers(0, 2)) if config.force_b is None else config.force_b
        u = (received[i] + h) % N if b == 0 else int(rng.integers(0, N))
        p = swap_pass_probability(ctx, (g[i] + h) % N, u)
        t.bob_h[i], t.bob_b[i], t.bob_u[i] = h, b, u
        t.decode_pass_probability[i] = p
        t.decode_outcomes[i] = bool(rng.random() < p)
    return t


def agreement_fraction(t: QkdTranscript) -> float:
    if t.aborted:
        raise ValueError("the protocol aborted, so there are no keys to compare")
    k, kp = t.bob_key, t.alice_key
    return sum(int(a == b) for a, b in zip(k, kp)) / len(k)


def tamper_pass_probability(ctx: ActionContext, substitutes: str) -> float:
    """Pass probability of one check on a tampered position, averaged over the substitute."""
    if substitutes == "own":
        return 1.0
    gamma = np.abs(ctx.overlap_profile[1:]) ** 2
    return float(0.5 * (1.0 + gamma.mean()))


def analytic_abort_rate(n: int, tamper: int, q: float) -> float:
    """Mean of ``1 - q^|T cap S|`` over all subsets ``S`` of size ``n/2``.

    ``T`` is the first ``tamper`` positions. Subsets are enumerated when there
    are at most ``SUBSET_ENUMERATION_CAP`` of them; otherwise the
    hypergeometric law of ``|T cap S|`` is used.
    """
    half = n // 2
    if math.comb(n, half) <= SUBSET_ENUMERATION_CAP:
        total = 0.0
        count = 0
        for S in itertools.combinations(range(n), half):
            hits = sum(1 for i in S if i < tamper)
            total += 1.0 - q**hits
            count += 1
        return total / count
    law = stats.hypergeom(n, tamper, half)
    j = np.arange(0, min(tamper, half) + 1)
    return float((law.pmf(j) * (1.0 - q**j)).sum())


@dataclass(frozen=True)
class DetectionReport:
    trials: int
    aborts: int
    rate: float
    analytic: float
    sigma: float

    @property
    def within_3sigma(self) -> bool:
        return abs(self.rate - self.analytic) <= 3 * self.sigma + 1e-12

    def to_dict(self) -> dict:
        d = {key: getattr(self, key) for key in self.__dataclass_fields__}
        d["within_3sigma"] = self.within_3sigma
        return d


def trial_streams(rng: np.random.Generator, trials: int) -> list[np.random.Generator]:
    seed = int(rng.integers(0, 2**63))
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def detection_probability(config: ProtocolConfig, trials: int, rng: np.random.Generator
                          ) -> DetectionReport:
    """Empirical abort rate against the subset-averaged analytic value."""
    if config.adversary != "tamper_first":
        raise ValueError("detection_probability needs the tamper_first adversary")
    aborts = sum(int(run_protocol(config, r).aborted) for r in trial_streams(rng, trials))
    q = tamper_pass_probability(config.ctx, config.substitutes)
    analytic = analytic_abort_rate(config.n, config.tamper, q)
    rate = aborts / trials
    sigma = math.sqrt(analytic * (1 - analytic) / trials)
    return DetectionReport(trials, aborts, rate, analytic, sigma)
