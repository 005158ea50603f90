"""Batch simulation of the product-state polygraph test.

Alice prepares sqrt(1-delta)|0..0> + sqrt(delta)|phi> with |phi> orthogonal to
|0..0>, the state goes through the depolarizing channel, and Bob compares
the output Rényi entropy with the leading-order accept/reject thresholds.
Bob's estimator is the exact entropy plus optional Gaussian noise.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import DepolarizingParams, depolarize_operator
from .core import PreconditionError, PureState, hamming_weights, max_product_fidelity, perturbed_product
from .entropy import min_output_renyi_closed, renyi_entropy
from .stability import StabilityThresholds, Verdict, classify


@dataclass(frozen=True)
class TrialConfig:
    """One batch of protocol runs.

    ``delta_range`` is the interval the true infidelity is drawn from
    (uniformly). It defaults to ``(0, eps)`` for honest runs and
    ``(eps, delta_max)`` for cheating runs.
    """

    params: DepolarizingParams
    p: float
    eps: float
    honest: bool = True
    trials: int = 100
    seed: int = 0
    sigma: float = 0.0
    delta_range: tuple[float, float] | None = None
    delta_max: float = 0.1
    allow_weight_one: bool = False
    restarts: int = 8

    def __post_init__(self):
        if not self.eps > 0:
            raise PreconditionError(f"eps must be > 0, got {self.eps}")
        if not self.p >= 1:
            raise PreconditionError(f"p must be >= 1, got {self.p}")
        if not 0.0 < self.params.lam < 1.0:
            raise PreconditionError("polygraph needs 0 < lambda < 1 (thresholds are undefined at the endpoints)")
        if self.params.n < 2 and not self.allow_weight_one:
            raise PreconditionError("n = 1 has no weight >= 2 directions; set allow_weight_one")
        if self.trials < 1:
            raise PreconditionError("trials must be >= 1")
        if self.sigma < 0:
            raise PreconditionError("sigma must be >= 0")
        if not 0.0 < self.delta_max < 1.0:
            raise PreconditionError(f"delta_max must lie in (0, 1), got {self.delta_max}")
        lo, hi = self.delta_bounds
        if not 0.0 <= lo <= hi < 1.0:
            raise PreconditionError(f"delta range ({lo}, {hi}) must satisfy 0 <= lo <= hi < 1")

    @property
    def delta_bounds(self) -> tuple[float, float]:
        if self.delta_range is not None:
            return tuple(self.delta_range)
        return (0.0, self.eps) if self.honest else (self.eps, self.delta_max)

    @property
    def theorem_backed(self) -> bool:
        return not self.allow_weight_one


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    delta: float
    max_fidelity: float
    s_value: float
    s_min: float
    verdict: Verdict
    margin_accept: float
    margin_reject: float


@dataclass(frozen=True)
class ProtocolSummary:
    trials: int
    accept: int
    undecided: int
    reject: int
    false_accept: int
    false_reject: int
    theorem_backed: bool = True

    @property
    def undecided_rate(self) -> float:
        return self.undecided / self.trials


@dataclass(frozen=True)
class ProtocolRun:
    config: TrialConfig
    thresholds: StabilityThresholds
    records: list[TrialRecord] = field(repr=False)
    summary: ProtocolSummary


def _direction(rng: np.random.Generator, params: DepolarizingParams, allow_weight_one: bool) -> PureState:
    weights = hamming_weights(params.d, params.n)
    allowed = weights >= (1 if allow_weight_one else 2)
    vec = np.zeros(params.d**params.n, dtype=complex)
    k = int(allowed.sum())
    vec[allowed] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return PureState(vec / np.linalg.norm(vec), params.d, params.n)


def run_trial(config: TrialConfig, index: int) -> TrialRecord:
    """Run a single trial; its randomness depends only on (seed, index)."""
    rng = np.random.default_rng([config.seed, index])
    params = config.params
    lo, hi = config.delta_bounds
    delta = float(rng.uniform(lo, hi))
    phi = _direction(rng, params, config.allow_weight_one)
    psi = perturbed_product(delta, phi)
    out = depolarize_operator(params, np.outer(psi.amplitudes, psi.amplitudes.conj()))
    s_value = renyi_entropy(out, config.p)
    if config.sigma > 0:
        s_value += float(rng.normal(0.0, config.sigma))
    s_min = min_output_renyi_closed(params, config.p)
    fid, _ = max_product_fidelity(psi, restarts=config.restarts, seed=rng)
    th = StabilityThresholds.compute(params, config.p)
    excess = s_value - s_min
    return TrialRecord(
        trial=index,
        delta=delta,
        max_fidelity=fid,
        s_value=s_value,
        s_min=s_min,
        verdict=classify(s_value, config.eps, th, s_min),
        margin_accept=excess - config.eps * th.accept_coeff,
        margin_reject=excess - config.eps * th.reject_coeff,
    )


def _run_chunk(args):
    config, indices = args
    return [run_trial(config, i) for i in indices]


def summarize(config: TrialConfig, records: Sequence[TrialRecord]) -> ProtocolSummary:
    counts = {v: 0 for v in Verdict}
    false_accept = false_reject = 0
    for rec in records:
        counts[rec.verdict] += 1
        if rec.verdict is Verdict.ACCEPT and rec.delta > config.eps:
            false_accept += 1
        if rec.verdict is Verdict.REJECT and rec.delta <= config.eps:
            false_reject += 1
    return ProtocolSummary(
        trials=len(records),
        accept=counts[Verdict.ACCEPT],
        undecided=counts[Verdict.UNDECIDED],
        reject=counts[Verdict.REJECT],
        false_accept=false_accept,
        false_reject=false_reject,
        theorem_backed=config.theorem_backed,
    )


def run_protocol(config: TrialConfig, workers: int = 1) -> ProtocolRun:
    """Simulate ``config.trials`` independent rounds of the test.

    Trials are seeded per index, so serial and parallel runs return
    identical records in index order.
    """
    indices = list(range(config.trials))
    if workers > 1 and config.trials > 1:
        chunks = [indices[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [(config, c) for c in chunks])
            records = sorted((r for part in parts for r in part), key=lambda r: r.trial)
    else:
        records = [run_trial(config, i) for i in indices]
    th = StabilityThresholds.compute(config.params, config.p)
    return ProtocolRun(config, th, records, summarize(config, records))


@dataclass(frozen=True)
class GapRow:
    p: float
    accept_coeff: float
    reject_coeff: float
    gap: float
    undecided_rate: float


def gap_width_report(config: TrialConfig, p_list: Sequence[float], workers: int = 1) -> list[GapRow]:
    """Thresholds, gap width and the observed undecided rate for each order in ``p_list``.

    The same infidelity sampler (from ``config``) is reused for every p.
    """
    if not p_list:
        raise PreconditionError("p_list must be nonempty")
    rows = []
    for p in sorted(set(float(p) for p in p_list)):
        if p < 2 or math.isinf(p):
            raise PreconditionError(f"gap report covers finite p >= 2, got {p}")
        run = run_protocol(replace(config, p=p), workers=workers)
        th = run.thresholds
        rows.append(GapRow(p, th.accept_coeff, th.reject_coeff, th.gap, run.summary.undecided_rate))
    return rows


def record_dict(rec: TrialRecord) -> dict:
    d = asdict(rec)
    d["verdict"] = rec.verdict.value
    return d
