"""Config-driven experiment dispatch.

A config is a JSON object::

    {"experiment": "gmp-verify", "seed": 7, "params": {...},
     "tolerances": {...}, "budget_seconds": 60}

:func:`run` returns a report with a deterministic ``body`` (config echo,
metrics, verdicts, tolerances, mode markers, library version) and a separate
``timings`` block. Identical config, seed and version give a byte-identical
body whatever the thread count, because trials draw from pre-spawned RNG
streams and results are reduced in trial order.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import __version__
from ..attacks import BooleanContext, check_orthogonal, dlog_trial
from ..finite_math import GroupMatrix, lhl_epsilon
from ..gmp_lab import (
    GmpInstance,
    SecretDistribution,
    ddh,
    extended_lhs,
    game_report,
    good_fraction,
    hybrid_chain,
    lhs,
    lhs_independent,
    mh_injectivity,
    offpattern_max,
    structured_distance,
    verify_densmatrix_lemma,
)
from ..group_action import ActionContext, orthogonality_audit
from ..hash_families import HashSpec, image_report, kwise_audit, sample_hash
from ..money import (
    acceptance_probability,
    counterfeit_experiment,
    gen_action_route,
    gen_hash_route,
    genuine_note,
)
from ..qkd import ProtocolConfig, agreement_fraction, detection_probability, run_protocol
from ..quantum_core import fidelity

SCHEMA_VERSION = 1
DEFAULT_BUDGET = 60.0
EXPERIMENTS = (
    "orthogonality", "gmp-verify", "game-distance", "structured", "lhs-fraction", "mh-inj",
    "attack-simon", "attack-dlog", "money", "qkd", "hash-audit",
)


class ConfigError(ValueError):
    """A configuration violates a precondition; the message names it."""


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    budget_seconds: float = DEFAULT_BUDGET

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose one of {', '.join(EXPERIMENTS)}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an integer in [0, 2^64)")
        if not isinstance(self.params, dict) or not isinstance(self.tolerances, dict):
            raise ConfigError("params and tolerances must be JSON objects")
        if not self.budget_seconds > 0:
            raise ConfigError("budget_seconds must be positive")

    @classmethod
    def from_dict(cls, d: dict, experiment: str | None = None, seed: int | None = None
                  ) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - {"experiment", "seed", "params", "tolerances", "budget_seconds"}
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        exp = d.get("experiment", experiment)
        if experiment is not None and exp != experiment:
            raise ConfigError(f"config is for {exp!r} but the command asked for {experiment!r}")
        if exp is None:
            raise ConfigError("config names no experiment")
        return cls(
            experiment=exp,
            seed=int(d.get("seed", 0)) if seed is None else int(seed),
            params=dict(d.get("params", {})),
            tolerances=dict(d.get("tolerances", {})),
            budget_seconds=float(d.get("budget_seconds", DEFAULT_BUDGET)),
        )

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "params": self.params,
            "tolerances": self.tolerances,
            "budget_seconds": self.budget_seconds,
        }


@dataclass
class Outcome:
    metrics: dict
    verdicts: dict
    tolerances: dict
    mode: str = "exact"
    complete: bool = True
    rows: list = field(default_factory=list)


def thread_count() -> int:
    raw = os.environ.get("QSGA_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"QSGA_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("QSGA_THREADS must be at least 1")
    return n


class Budget:
    def __init__(self, seconds: float):
        self.seconds = seconds
        self.start = time.perf_counter()

    def exceeded(self) -> bool:
        return time.perf_counter() - self.start > self.seconds


def map_trials(fn: Callable, streams: list, budget: Budget) -> tuple[list, bool]:
    """Apply ``fn`` to every stream in order; stop early once the budget is spent.

    Work is handed out in fixed-size chunks so the results (and the point
    where a run stops) do not depend on the thread count beyond chunk
    boundaries. Returns the results in trial order and a completeness flag.
    """
    threads = thread_count()
    chunk = 16
    out = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for lo in range(0, len(streams), chunk):
            if budget.exceeded():
                return out, False
            out.extend(pool.map(fn, streams[lo:lo + chunk]))
    return out, True


def spawn(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    seed = int(rng.integers(0, 2**63))
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def _int(params: dict, name: str, default=None, lo: int | None = None) -> int:
    if name not in params and default is None:
        raise ConfigError(f"missing parameter {name!r}")
    v = params.get(name, default)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"parameter {name!r} must be an integer")
    if lo is not None and v < lo:
        raise ConfigError(f"parameter {name!r} must be at least {lo}")
    return v


def _hash(params: dict, rng: np.random.Generator, default: dict | None = None):
    spec = params.get("hash", default)
    if spec is None:
        raise ConfigError("missing parameter 'hash' (family, k, N, optional seed and params)")
    try:
        hs = HashSpec.from_dict(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid hash spec: {exc}") from None
    return sample_hash(hs, rng)


def _verdict(ok: bool | None, value, tolerance, rule: str) -> dict:
    return {"pass": ok, "value": value, "tolerance": tolerance, "rule": rule}


def _matrix(params: dict, N: int, rng: np.random.Generator):
    """A preset or explicit matrix with its secret distribution."""
    preset = params.get("preset", "ddh")
    if "M" in params:
        M = GroupMatrix(params["M"], N)
        secrets = SecretDistribution.from_dict(params.get("secrets", {"kind": "uniform_zn", "m": M.cols}))
        return M, secrets, "explicit"
    m = params.get("m", 2)
    if preset == "ddh":
        p = ddh(N)
    elif preset == "lhs":
        p = lhs(m, params.get("samples", 2), N, rng)
    elif preset == "lhs_independent":
        p = lhs_independent(m, N, rng)
    elif preset == "extended_lhs":
        p = extended_lhs(m, N, rng)
    else:
        raise ConfigError(f"unknown preset {preset!r}")
    return p.M, p.secrets, p.name


def _orthogonality(cfg, rng, budget) -> Outcome:
    h = _hash(cfg.params, rng)
    ctx = ActionContext(h)
    rep = orthogonality_audit(ctx, cfg.params.get("sample_pairs"), rng)
    tol = cfg.tolerances.get("bound_slack", 1e-9)
    verdicts = {"overlap_below_mass_deviation": _verdict(
        rep.max_offdiag_overlap <= rep.mass_deviation + tol, rep.max_offdiag_overlap,
        rep.mass_deviation + tol, "max overlap <= sum_i |p_i - 1/N| + slack")}
    tolerances = {"bound_slack": tol}
    if "max_overlap" in cfg.tolerances:
        cap = cfg.tolerances["max_overlap"]
        verdicts["overlap_cap"] = _verdict(rep.max_offdiag_overlap <= cap, rep.max_offdiag_overlap,
                                           cap, "max overlap <= cap")
        tolerances["max_overlap"] = cap
    return Outcome(rep.to_dict(), verdicts, tolerances, "sampled" if rep.sampled else "exact")


def _gmp_verify(cfg, rng, budget) -> Outcome:
    h = _hash(cfg.params, rng)
    ctx = ActionContext(h)
    M, secrets, name = _matrix(cfg.params, h.N, rng)
    b = _int(cfg.params, "b", 0)
    sampling = cfg.params.get("pattern_sampling", "independent")
    try:
        inst = GmpInstance(M, secrets, ctx, b, sampling)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    tol = cfg.tolerances.get("trace_dist", 1e-9)
    mode = cfg.params.get("mode", "auto")
    comp = verify_densmatrix_lemma(inst, tol, mode, cfg.params.get("samples", 4096), rng)
    metrics = comp.metrics()
    metrics.update({"preset": name, "offpattern_max": offpattern_max(inst)})
    if comp.mode == "exact":
        verdict = _verdict(comp.passed, comp.trace_dist, tol, "trace_dist <= tolerance")
    else:
        # a sampled ensemble carries O(1/sqrt(samples)) noise, so nothing is asserted
        verdict = _verdict(None, comp.trace_dist, comp.standard_error,
                           "Monte Carlo: reported with its standard error, not asserted")
    return Outcome(metrics, {"densmatrix_identity": verdict}, {"trace_dist": tol}, comp.mode)


def _game_distance(cfg, rng, budget) -> Outcome:
    h = _hash(cfg.params, rng)
    ctx = ActionContext(h)
    M, _, name = _matrix(cfg.params, h.N, rng)
    rep = game_report(ctx, M)
    metrics = rep.to_dict()
    metrics["preset"] = name
    verdicts, tolerances = {}, {}
    if "max_distance" in cfg.tolerances:
        cap = cfg.tolerances["max_distance"]
        verdicts["distance_at_most"] = _verdict(rep.distance <= cap, rep.distance, cap, "distance <= cap")
        tolerances["max_distance"] = cap
    if "min_distance" in cfg.tolerances:
        lo = cfg.tolerances["min_distance"]
        verdicts["distance_at_least"] = _verdict(rep.distance >= lo, rep.distance, lo, "distance >= floor")
        tolerances["min_distance"] = lo
    return Outcome(metrics, verdicts, tolerances)


def _structured(cfg, rng, budget) -> Outcome:
    h = _hash(cfg.params, rng)
    ctx = ActionContext(h)
    M, secrets, name = _matrix(cfg.params, h.N, rng)
    try:
        inst = GmpInstance(M, secrets, ctx, 0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    eps = cfg.params.get("epsilon")
    if eps is None:
        eps = lhl_epsilon(secrets.min_entropy(h.N), h.N)
    rep = structured_distance(inst, eps, rng=rng)
    slack = cfg.tolerances.get("entry_slack", 1e-12)
    chain_slack = cfg.tolerances.get("chain_slack", 1e-9)
    m = rep.metrics()
    m["preset"] = name
    verdicts = {
        "entry_cap": _verdict(
            None if rep.entry_cap_ok is None else rep.max_offpattern_entry <= rep.entry_cap + slack,
            rep.max_offpattern_entry, rep.entry_cap + slack, "only asserted when the matrix is good"),
        "frobenius_chain": _verdict(
            rep.comparison.bound_chain["trace_norm"] <= rep.comparison.bound_chain["frobenius_cap"] + chain_slack,
            rep.comparison.bound_chain["trace_norm"], rep.comparison.bound_chain["frobenius_cap"] + chain_slack,
            "trace norm <= 2^(nk/2) * Frobenius + slack"),
    }
    return Outcome(m, verdicts, {"entry_slack": slack, "chain_slack": chain_slack})


def _lhs_fraction(cfg, rng, budget) -> Outcome:
    p = cfg.params
    N, m = _int(p, "N", lo=2), _int(p, "m", lo=1)
    n = _int(p, "n", 2, lo=1)
    h = _hash(p, rng, {"family": "random_table", "k": 2, "N": N})
    if h.N != N:
        raise ConfigError("hash modulus must equal N")
    secrets = SecretDistribution.uniform_binary(m)
    eps = p.get("epsilon", lhl_epsilon(m, N))
    trials = _int(p, "matrix_trials", 500, lo=30)
    rep = good_fraction(n, m, N, secrets, h, eps, trials, rng)
    sig = cfg.tolerances.get("sigmas", 3.0)
    floor = rep.target - sig * rep.sigma
    return Outcome(rep.to_dict(), {"good_fraction": _verdict(
        rep.fraction >= floor, rep.fraction, floor, "fraction >= 1 - sqrt(eps) - sigmas * sigma")},
        {"sigmas": sig}, "sampled")


def _mh_inj(cfg, rng, budget) -> Outcome:
    p = cfg.params
    h = _hash(p, rng)
    if "M" in p:
        M = GroupMatrix(p["M"], h.N)
    else:
        M = GroupMatrix.random(_int(p, "n", 1, lo=1), _int(p, "m", 1, lo=1), h.N, rng)
    rep = mh_injectivity(M, h, exhaustive=p.get("exhaustive"), trials=p.get("trials", 100_000), rng=rng)
    metrics = rep.to_dict()
    if p.get("hybrids"):
        metrics["hybrids"] = [s.to_dict() for s in hybrid_chain("expanding", M, {"H": h})]
    return Outcome(metrics, {"within_bound": _verdict(
        rep.within_bound, rep.fraction, rep.reference_bound, "count / 2^(2kn) <= 2^(2kn) / N")},
        {}, "exact" if rep.exhaustive else "sampled")


def _attack(cfg, rng, budget, boolean: bool) -> Outcome:
    p = cfg.params
    if boolean:
        n = _int(p, "n", lo=1)
        k = _int(p, "k", n, lo=n)
        h = _hash(p, rng, {"family": "balanced_table", "k": k, "N": 2**n})
        ctx = BooleanContext(h)
    else:
        N = _int(p, "N", lo=2)
        k = _int(p, "k", max(1, math.ceil(math.log2(N))), lo=1)
        h = _hash(p, rng, {"family": "balanced_table", "k": k, "N": N})
        ctx = ActionContext(h)
    try:
        worst = check_orthogonal(ctx)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ell = _int(p, "ell", lo=0)
    trials = _int(p, "trials", 100, lo=1)
    streams = spawn(rng, trials)
    results, complete = map_trials(lambda r: dlog_trial(ctx, ell, r), streams, budget)
    successes = sum(int(g == r) for g, r in results)
    done = len(results)
    rate = successes / done if done else 0.0
    floor = cfg.tolerances.get("min_success_rate", 0.99 if boolean else 0.95)
    rows = [{"trial": i, "planted": g, "recovered": "" if r is None else r, "success": int(g == r)}
            for i, (g, r) in enumerate(results)]
    metrics = {"trials": done, "successes": successes, "success_rate": rate,
               "samples_per_trial": ell, "copies_consumed": ell * done, "max_overlap": worst,
               "group": "boolean" if boolean else "cyclic", "N": ctx.N}
    verdicts = {"success_rate": _verdict(rate >= floor, rate, floor, "success rate >= floor")}
    if "max_success_rate" in cfg.tolerances:
        cap = cfg.tolerances["max_success_rate"]
        verdicts["success_rate_cap"] = _verdict(rate <= cap, rate, cap, "success rate <= cap")
    return Outcome(metrics, verdicts, {"min_success_rate": floor, **cfg.tolerances}, "sampled",
                   complete, rows)


def _money(cfg, rng, budget) -> Outcome:
    p = cfg.params
    h = _hash(p, rng, {"family": "random_table", "k": 8, "N": 16})
    ctx = ActionContext(h)
    mints = _int(p, "mints", 50, lo=1)
    fid_tol = cfg.tolerances.get("fidelity", 1e-9)
    worst_fid, worst_acc = 1.0, 1.0
    for _ in range(mints):
        a = gen_action_route(ctx, rng)
        worst_fid = min(worst_fid, fidelity(a.note, genuine_note(ctx, (-a.serial) % ctx.N)))
        b = gen_hash_route(ctx, rng)
        worst_acc = min(worst_acc, acceptance_probability(ctx, b.serial, b.note))
    trials = _int(p, "trials", 10_000, lo=1)
    strategy = p.get("strategy", "measure_and_copy")
    try:
        cf = counterfeit_experiment(ctx, strategy, trials, rng)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    metrics = {"mints": mints, "min_route_fidelity": worst_fid,
               "min_genuine_acceptance": worst_acc, "counterfeit": cf.to_dict()}
    verdicts = {
        "route_equivalence": _verdict(worst_fid >= 1 - fid_tol, worst_fid, 1 - fid_tol, "fidelity >= 1 - tol"),
        "genuine_acceptance": _verdict(worst_acc >= 1 - fid_tol, worst_acc, 1 - fid_tol, "acceptance >= 1 - tol"),
        "counterfeit_rate": _verdict(cf.within_3sigma, cf.rate, cf.analytic,
                                     "|rate - analytic| <= 3 sigma"),
    }
    return Outcome(metrics, verdicts, {"fidelity": fid_tol, "sigmas": 3.0}, "sampled")


def _qkd(cfg, rng, budget) -> Outcome:
    p = cfg.params
    h = _hash(p, rng, {"family": "balanced_table", "k": 8, "N": 256})
    ctx = ActionContext(h)
    n = _int(p, "n", 1024, lo=2)
    adversary = p.get("adversary", "none")
    try:
        pc = ProtocolConfig(n, ctx, adversary, p.get("tamper", 0), p.get("substitutes", "orthogonal"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    runs = _int(p, "runs", 100, lo=1)
    if adversary == "tamper_first":
        rep = detection_probability(pc, runs, rng)
        return Outcome(rep.to_dict(), {"abort_rate": _verdict(
            rep.within_3sigma, rep.rate, rep.analytic, "|rate - analytic| <= 3 sigma")},
            {"sigmas": 3.0}, "sampled")
    lo, hi = cfg.tolerances.get("window", [0.70, 0.80])
    need = cfg.tolerances.get("min_runs_in_window", 0.99)
    streams = spawn(rng, runs)
    transcripts, complete = map_trials(lambda r: run_protocol(pc, r), streams, budget)
    fr = [agreement_fraction(t) for t in transcripts if not t.aborted]
    inside = sum(int(lo <= f <= hi) for f in fr)
    share = inside / len(transcripts) if transcripts else 0.0
    rows = [{"run": i, "aborted": int(t.aborted),
             "agreement": "" if t.aborted else agreement_fraction(t)} for i, t in enumerate(transcripts)]
    metrics = {"runs": len(transcripts), "aborts": len(transcripts) - len(fr), "in_window": inside,
               "mean_agreement": float(np.mean(fr)) if fr else None,
               "min_agreement": min(fr) if fr else None, "max_agreement": max(fr) if fr else None}
    return Outcome(metrics, {"agreement_window": _verdict(
        share >= need, share, need, "share of runs with agreement in window >= floor")},
        {"window": [lo, hi], "min_runs_in_window": need}, "sampled", complete, rows)


def _hash_audit(cfg, rng, budget) -> Outcome:
    p = cfg.params
    h = _hash(p, rng)
    rep = image_report(h, _int(p, "n", 1, lo=1))
    metrics = {"image": rep.to_dict()}
    verdicts = {}
    if h.family == "lossy_composed":
        verdicts["lossy_image_bound"] = _verdict(rep.bound_ok, rep.image_size, None,
                                                 "lossy image within 2^(k - r)")
    if "kwise" in p:
        kw = p["kwise"]
        try:
            audit = kwise_audit(h.spec, kw["t"], kw["points"], kw.get("draws", 2000), rng)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid kwise audit: {exc}") from None
        metrics["kwise"] = audit.to_dict()
        alpha = cfg.tolerances.get("kwise_alpha", 1e-3)
        verdicts["kwise_uniform"] = _verdict(audit.p_value >= alpha, audit.p_value, alpha,
                                             "chi-square p-value >= alpha")
    if "expected_image_size" in cfg.tolerances:
        want = cfg.tolerances["expected_image_size"]
        verdicts["image_size"] = _verdict(rep.image_size == want, rep.image_size, want, "image size equals")
    return Outcome(metrics, verdicts, dict(cfg.tolerances))


DISPATCH: dict[str, Callable] = {
    "orthogonality": _orthogonality,
    "gmp-verify": _gmp_verify,
    "game-distance": _game_distance,
    "structured": _structured,
    "lhs-fraction": _lhs_fraction,
    "mh-inj": _mh_inj,
    "attack-simon": lambda c, r, b: _attack(c, r, b, True),
    "attack-dlog": lambda c, r, b: _attack(c, r, b, False),
    "money": _money,
    "qkd": _qkd,
    "hash-audit": _hash_audit,
}


def _clean(obj):
    """Make a metrics tree JSON-safe with deterministic content."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return v
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def run(config: ExperimentConfig) -> dict:
    """Run one experiment; returns ``{"body": ..., "timings": ..., "rows": ...}``."""
    rng = np.random.default_rng(config.seed)
    budget = Budget(config.budget_seconds)
    t0 = time.perf_counter()
    out = DISPATCH[config.experiment](config, rng, budget)
    elapsed = time.perf_counter() - t0
    verdict_values = [v["pass"] for v in out.verdicts.values() if v["pass"] is not None]
    body = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "config": config.to_dict(),
        "metrics": out.metrics,
        "verdicts": out.verdicts,
        "tolerances": out.tolerances,
        "mode": out.mode,
        "complete": out.complete,
        "all_pass": bool(out.complete and all(verdict_values)),
    }
    return {
        "body": _clean(body),
        "timings": {"seconds": elapsed, "budget_seconds": config.budget_seconds,
                    "threads": thread_count()},
        "rows": _clean(out.rows),
    }
