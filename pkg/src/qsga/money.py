"""Quantum money mini-scheme from the hash action.

Two minting routes give the same notes:

* hash route: measure ``H`` on the start state; serial ``h`` and the
  collapsed preimage superposition ``|$_h>``;
* action route: prepare ``N^-1/2 sum_g |g> (g * |psi_0>)``, Fourier transform
  the serial register and measure it, giving ``sigma`` and a note supported
  on ``H(x) = -sigma``.

The serials are related by ``sigma = -h mod N``; both are kept on the note.

Verification measures ``H`` and then applies a Test that recognizes the
genuine note. Here Test is the exact projector onto ``|$_h>``. A simulator
can do this; a real verifier needs a non-collapsing hash (equivalently, the
ability to recognize set elements). This is where the hardness assumption
lives, and none of it is simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .group_action import ActionContext, element_amplitudes
from .quantum_core import Layout, PureState, bits, measure_label_function, qft_zn, sample_record, zn

ROUTES = ("hash", "action")
STRATEGIES = ("measure_and_copy", "keep_and_start")


def hash_serial(route: str, serial: int, N: int) -> int:
    """The ``H`` value that a note with this serial is supported on."""
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}")
    return int(serial) % N if route == "hash" else (-int(serial)) % N


@dataclass(frozen=True)
class Banknote:
    serial: int
    note: PureState
    route: str = "hash"

    def hash_value(self, N: int) -> int:
        return hash_serial(self.route, self.serial, N)

    def dump(self) -> str:
        return f"serial : {self.serial}\nroute : {self.route}\n" + self.note.dump()

    @classmethod
    def from_dump(cls, text: str, layout: Layout) -> "Banknote":
        lines = text.strip().splitlines()
        serial = int(lines[0].split(":")[1])
        route = lines[1].split(":")[1].strip()
        amps = {}
        for line in lines[2:]:
            label, value = line.split(":")
            re_, im = value.split(",")
            parts = label.strip().split(",")
            key = tuple(int(tok, 2 if reg.kind == "bits" else 10)
                        for reg, tok in zip(layout.registers, parts))
            amps[key] = complex(float(re_), float(im))
        return cls(serial, PureState.from_map(layout, amps), route)


@dataclass(frozen=True)
class VerificationVerdict:
    serial_match: bool
    test_pass: bool
    accept_probability: float

    @property
    def accept(self) -> bool:
        return self.serial_match and self.test_pass

    def to_dict(self) -> dict:
        return {
            "serial_match": self.serial_match,
            "test_pass": self.test_pass,
            "accept": self.accept,
            "accept_probability": self.accept_probability,
        }


def genuine_note(ctx: ActionContext, h: int) -> PureState:
    """``|$_h>``: the start state projected onto ``H^-1(h)`` and renormalized."""
    mask = ctx.table == int(h) % ctx.N
    vec = np.where(mask, ctx.start_state.amplitudes, 0)
    if not np.any(vec):
        raise ValueError(f"serial value {h} has no preimage")
    return PureState(ctx.layout, vec, normalize=True)


def gen_hash_route(ctx: ActionContext, rng: np.random.Generator) -> Banknote:
    rec = sample_record(measure_label_function(ctx.start_state, ctx.table), rng)
    return Banknote(int(rec.outcome), rec.collapsed, "hash")


def action_route_state(ctx: ActionContext) -> PureState:
    """``N^-1/2 sum_g |g> (g * |psi_0>)`` on a serial register and the money register."""
    N = ctx.N
    layout = Layout([zn("serial", N), bits("x", ctx.k)])
    rows = np.array([element_amplitudes(ctx, g) for g in range(N)]) / math.sqrt(N)
    return PureState(layout, rows.reshape(-1))


def gen_action_route(ctx: ActionContext, rng: np.random.Generator) -> Banknote:
    s = qft_zn(action_route_state(ctx), register=0)
    dim_x = 2**ctx.k
    keys = np.repeat(np.arange(ctx.N), dim_x)
    rec = sample_record(measure_label_function(s, keys), rng)
    sigma = int(rec.outcome)
    money = rec.collapsed.amplitudes.reshape(ctx.N, dim_x)[sigma]
    return Banknote(sigma, PureState(ctx.layout, money, normalize=True), "action")


def acceptance_probability(ctx: ActionContext, serial: int, candidate: PureState,
                           route: str = "hash") -> float:
    """Exact probability that :func:`verify` accepts: ``|<$_h|candidate>|^2``."""
    h = hash_serial(route, serial, ctx.N)
    if not np.any(ctx.table == h):
        return 0.0
    return float(abs(np.vdot(genuine_note(ctx, h).amplitudes, candidate.amplitudes)) ** 2)


def verify(ctx: ActionContext, serial: int, candidate: PureState, rng: np.random.Generator,
           route: str = "hash") -> VerificationVerdict:
    """Measure ``H`` and abort on a mismatch, then run Test on what is left.

    The analytic acceptance probability is reported next to the sampled verdict.
    """
    if candidate.layout != ctx.layout:
        raise ValueError(f"candidate must live on one {ctx.k}-bit register")
    h = hash_serial(route, serial, ctx.N)
    amps = candidate.amplitudes
    mask = ctx.table == h
    mass = float(np.vdot(amps[mask], amps[mask]).real)
    analytic = acceptance_probability(ctx, serial, candidate, route)
    if mass <= 0.0 or rng.random() >= mass:
        return VerificationVerdict(False, False, analytic)
    test_p = min(1.0, analytic / mass)
    return VerificationVerdict(True, bool(rng.random() < test_p), analytic)


def preimage_counts(ctx: ActionContext) -> np.ndarray:
    return np.bincount(ctx.table, minlength=ctx.N)


def measure_and_copy_analytic(ctx: ActionContext) -> float:
    """Joint acceptance of two copies of a measured note.

    A note measured to ``x`` passes each check with probability ``w_x / p_h``
    (``1/P`` for a uniform start), so the joint rate is
    ``sum_x w_x (w_x / p_{H(x)})^2``, which is ``E[1/P^2]`` over the serial.
    """
    w = ctx.weights
    p = ctx.pushforward[ctx.table]
    return float((w * (w / p) ** 2).sum())


def keep_and_start_analytic(ctx: ActionContext) -> float:
    """Joint acceptance when one copy is the genuine note and the other a fresh
    start state: ``sum_h p_h^2``."""
    p = ctx.pushforward
    return float((p**2).sum())


@dataclass(frozen=True)
class CounterfeitReport:
    strategy: str
    trials: int
    both_accept: int
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


def counterfeit_experiment(ctx: ActionContext, strategy: str, trials: int,
                           rng: np.random.Generator) -> CounterfeitReport:
    """Mint, turn one note into two with ``strategy``, verify both.

    ``measure_and_copy`` measures the note in the computational basis and
    hands out the classical outcome twice. ``keep_and_start`` keeps the
    genuine note and offers a fresh start state as the second copy.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    analytic = (measure_and_copy_analytic(ctx) if strategy == "measure_and_copy"
                else keep_and_start_analytic(ctx))
    both = 0
    for _ in range(trials):
        note = gen_hash_route(ctx, rng)
        if strategy == "measure_and_copy":
            probs = np.abs(note.note.amplitudes) ** 2
            x = int(rng.choice(probs.shape[0], p=probs / probs.sum()))
            first = second = PureState.basis(ctx.layout, (x,))
        else:
            first, second = note.note, ctx.start_state
        ok1 = verify(ctx, note.serial, first, rng).accept
        ok2 = verify(ctx, note.serial, second, rng).accept
        both += int(ok1 and ok2)
    sigma = math.sqrt(analytic * (1 - analytic) / trials) if trials else 0.0
    return CounterfeitReport(strategy, trials, both, both / trials if trials else 0.0, analytic, sigma)
