"""Numerical verification suite run by ``renyistab verify``.

Checks keyed ``c1`` .. ``c9`` are the headline acceptance checks (``c7``
is split into ``c7`` and ``c7-crit``); the remaining keys cover the
per-module invariants. Each check returns a :class:`CheckResult`; only
blocking checks affect the exit status.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import polygraph
from .channel import (
    DepolarizingParams,
    apply_depolarizing,
    depolarize_operator,
    expand_spectrum,
    product_output_spectrum,
    weyl_kraus_operators,
)
from .core import (
    DensityMatrix,
    PureState,
    eig_hermitian,
    fidelity_pure,
    hamming_weights,
    max_product_fidelity,
    partial_trace,
    perturbed_product,
    sample_state,
    tensor,
    trace_distance,
    weight_decomposition,
)
from .entropy import min_output_renyi_closed, min_output_renyi_numeric, renyi_entropy
from .perturb import (
    DEFAULT_T_GRID,
    apply_L,
    apply_Q,
    finite_difference_coeff,
    fit_loglog_slope,
    expansion_remainder,
    power_function,
    random_family,
    renyi_second_order_coeff,
    second_divided_diff,
    stability_family,
    taylor_residual_check,
    trace_L,
    trace_Q,
    xlogx,
)
from .stability import (
    accept_coeff,
    f_p,
    f_vn,
    gap,
    gap_limit,
    h_critical_point,
    h_critical_value_printed,
    h_min_check,
    h_poly,
    monotonicity_scan,
    predicted_excess,
    reject_coeff,
)

GRID_D = (2, 3, 5)
GRID_LAM = (0.1, 0.3, 0.5, 0.7, 0.9)
GRID_P = (2, 3, 5, 10)
EPS0_GRID = (1e-2, 1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class CheckResult:
    key: str
    title: str
    passed: bool
    detail: str
    blocking: bool = True
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else ("FAIL" if self.blocking else "NOTE")
        return f"{status} [{self.key}] {self.title}: {self.detail}"


def _grid():
    for d, lam, p in itertools.product(GRID_D, GRID_LAM, GRID_P):
        yield DepolarizingParams(lam, d), p


def _output(params: DepolarizingParams, psi: PureState) -> np.ndarray:
    return depolarize_operator(params, np.outer(psi.amplitudes, psi.amplitudes.conj()))


def _direction(rng: np.random.Generator, d: int, n: int, min_weight: int) -> PureState:
    allowed = hamming_weights(d, n) >= min_weight
    vec = np.zeros(d**n, dtype=complex)
    k = int(allowed.sum())
    vec[allowed] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return PureState(vec / np.linalg.norm(vec), d, n)


def _random_hermitian(rng: np.random.Generator, side: int) -> np.ndarray:
    g = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
    return (g + g.conj().T) / 2


def _random_density(rng: np.random.Generator, d: int, n: int, rank: int | None = None) -> DensityMatrix:
    side = d**n
    g = rng.standard_normal((side, rank or side)) + 1j * rng.standard_normal((side, rank or side))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, d, n)


# ---------------------------------------------------------------- acceptance


def check_threshold_identity():
    worst = max(abs(accept_coeff(prm, p) - f_p(2, prm, p)) for prm, p in _grid())
    spot = accept_coeff(DepolarizingParams(0.5, 2), 2)
    ok = worst <= 1e-10 and abs(spot - 0.96) <= 1e-10
    return ok, f"max |accept - f_p(2)| = {worst:.2e} over {len(GRID_D) * len(GRID_LAM) * len(GRID_P)} points; spot {spot:.12g} (want 0.96)"


def check_monotonicity():
    worst_p = min(monotonicity_scan(prm, p).worst for prm, p in _grid())
    worst_vn = min(monotonicity_scan(DepolarizingParams(lam, d), 1).worst for d in GRID_D for lam in GRID_LAM)
    ok = worst_p >= -1e-12 and worst_vn >= -1e-12
    return ok, f"worst f_p step {worst_p:.3e}, worst f_vn step {worst_vn:.3e}"


def check_monotonicity_low_p():
    worst = min(
        monotonicity_scan(DepolarizingParams(lam, d), p).worst for d in GRID_D for lam in GRID_LAM for p in (1.2, 1.5, 1.8)
    )
    return worst >= -1e-12, f"p in (1.2, 1.5, 1.8): worst step {worst:.3e} (recorded only)"


def check_second_order_coefficient():
    ps = (0.5, 1, 2, 3, 5)
    fams = [random_family(2 + s % 15, s) for s in range(24)]
    rng = np.random.default_rng(7)
    for d, n in ((2, 2), (2, 3), (3, 2)):
        fams.append(stability_family(DepolarizingParams(0.5, d, n), _direction(rng, d, n, 2)))
    fams.append(stability_family(DepolarizingParams(0.5, 2, 2), PureState.basis([1, 1], 2)))
    min_slope, worst_rel, exact = math.inf, 0.0, 0
    for fam, p in itertools.product(fams, ps):
        fit = taylor_residual_check(fam, p, DEFAULT_T_GRID)
        if fit.exact:
            exact += 1
        else:
            min_slope = min(min_slope, fit.slope)
        c = renyi_second_order_coeff(fam, p)
        fd = finite_difference_coeff(fam, p, 1e-4)
        worst_rel = max(worst_rel, abs(c - fd) / max(abs(c), 1e-300))
    ok = min_slope >= 2.7 and worst_rel <= 1e-3
    return ok, (
        f"{len(fams)} families x p in {ps}: min slope {min_slope:.3f} ({exact} exact), "
        f"worst relative finite-difference error {worst_rel:.2e}"
    )


def check_operator_expansion():
    rng = np.random.default_rng(11)
    fns = [power_function(q) for q in (0.5, 2, 2.5, 3.5)] + [xlogx()]
    min_slope, worst_tr = math.inf, 0.0
    for trial in range(12):
        side = 2 + trial % 8
        a = rng.uniform(0.1, 1.0, side)
        b = _random_hermitian(rng, side)
        b /= np.linalg.norm(b, 2)
        for f in fns:
            res = [expansion_remainder(a, 0.05 * b, f, t) for t in DEFAULT_T_GRID]
            fit = fit_loglog_slope(DEFAULT_T_GRID, res)
            if not fit.exact:
                min_slope = min(min_slope, fit.slope)
            worst_tr = max(
                worst_tr,
                abs(trace_L(a, b, f) - np.trace(apply_L(a, b, f)).real),
                abs(trace_Q(a, b, f) - np.trace(apply_Q(a, b, f)).real),
            )
    ok = min_slope >= 2.7 and worst_tr <= 1e-12
    return ok, f"min remainder slope {min_slope:.3f}; max trace-formula mismatch {worst_tr:.2e}"


def check_min_output():
    worst_gap, worst_beat = 0.0, 0.0
    for (n, d), p, lam in itertools.product(((1, 2), (2, 2), (3, 2), (2, 3)), (1, 2, 3, 5), (0.3, 0.7)):
        prm = DepolarizingParams(lam, d, n)
        closed = min_output_renyi_closed(prm, p)
        num, _ = min_output_renyi_numeric(prm, p)
        worst_gap = max(worst_gap, abs(num - closed))
        worst_beat = max(worst_beat, closed - num)
    ok = worst_gap <= 1e-6 and worst_beat <= 1e-6
    return ok, f"max |numeric - closed| {worst_gap:.2e}; largest undercut {worst_beat:.2e}"


def _excess_ratios(params: DepolarizingParams, phi: PureState, p: float) -> list[float]:
    w = weight_decomposition(phi)
    s_min = min_output_renyi_closed(params, p)
    out = []
    for e in EPS0_GRID:
        actual = renyi_entropy(_output(params, perturbed_product(e, phi)), p) - s_min
        out.append(abs(actual - predicted_excess(w, e, params, p)) / e**1.4)
    return out


def check_predicted_excess():
    # C is fitted on the two largest eps0 (with a factor 2 margin) and must
    # then bound the smaller ones
    rng = np.random.default_rng(3)
    cases = [(2, 2, 2), (2, 3, 2), (3, 2, 2), (2, 3, 1), (3, 2, 1), (2, 4, 1)]
    worst_c, fails = 0.0, 0
    for (d, n, mw), p in itertools.product(cases, (1, 2, 3, 5)):
        for lam in (0.3, 0.7):
            prm = DepolarizingParams(lam, d, n)
            ratios = _excess_ratios(prm, _direction(rng, d, n, mw), p)
            c = 2.0 * max(ratios[:2])
            worst_c = max(worst_c, c)
            fails += any(x > c for x in ratios[2:])
    return fails == 0 and math.isfinite(worst_c), f"fitted C <= {worst_c:.3g}; {fails} cases exceed C eps0^1.4"


def check_gap_claims():
    worst_id, worst_margin = 0.0, math.inf
    for prm, p in _grid():
        worst_id = max(worst_id, abs(gap(p, prm) - (reject_coeff(p) - accept_coeff(prm, p))))
        worst_margin = min(worst_margin, gap(2, prm) - gap_limit(prm))
    # lambda with r = 3 at d = 2: a/b = (1 + lam)/(1 - lam) = 3
    lim3 = gap_limit(DepolarizingParams(0.5, 2))
    h_mins = {d: h_min_check(d).grid_min for d in range(2, 11)}
    ok = worst_id <= 1e-12 and worst_margin > 0 and abs(lim3 - 1 / 3) <= 1e-9 and min(h_mins.values()) > 0
    return ok, (
        f"identity err {worst_id:.1e}; min gap(2)-limit {worst_margin:.4f}; limit(r=3) {lim3:.12f}; "
        f"min h on grid {min(h_mins.values()):.4f}"
    )


def check_critical_value_formula():
    errs = {d: h_critical_value_printed(d) - h_poly(h_critical_point(d), d) for d in range(4, 11)}
    worst = max(abs(e) for e in errs.values())
    return worst <= 1e-9, f"quoted closed form minus h at critical point: d=4 {errs[4]:+.4f}, worst {worst:.4f}"


def _run_bytes(cfg: polygraph.TrialConfig) -> tuple[polygraph.ProtocolRun, bytes]:
    run = polygraph.run_protocol(cfg)
    rows = [polygraph.record_dict(r) for r in run.records]
    blob = "\n".join(",".join(repr(v) for v in row.values()) for row in rows).encode()
    return run, blob


def check_polygraph():
    fr = fa = 0
    same = True
    for p in (2, 5):
        prm = DepolarizingParams(0.5, 2, 2)
        honest = polygraph.TrialConfig(prm, p, 1e-3, honest=True, trials=200, seed=0)
        cheat = polygraph.TrialConfig(prm, p, 1e-3, honest=False, trials=200, seed=1, delta_range=(1e-2, 0.1))
        for cfg in (honest, cheat):
            run, blob = _run_bytes(cfg)
            same &= blob == _run_bytes(cfg)[1]
            fr += run.summary.false_reject
            fa += run.summary.false_accept
    return fr == 0 and fa == 0 and same, f"false rejects {fr}, false accepts {fa}, reruns identical: {same}"


def check_metric_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        d, n = int(rng.integers(2, 4)), int(rng.integers(1, 3))
        psi, phi = sample_state("haar", d, n, rng), sample_state("haar", d, n, rng)
        td = trace_distance(psi.projector(), phi.projector())
        worst = max(worst, abs(td**2 - 4 * (1 - fidelity_pure(psi, phi))))
    return worst <= 1e-10, f"max deviation {worst:.2e} over 100 pairs"


# ----------------------------------------------------------------- invariants


def check_eig():
    rng = np.random.default_rng(13)
    worst_rec = worst_orth = 0.0
    for side in (1, 2, 5, 8, 16, 27, 64, 81):
        m = _random_hermitian(rng, side)
        sp = eig_hermitian(m)
        u = sp.eigenvectors
        worst_rec = max(worst_rec, np.max(np.abs(sp.reconstruct() - m)) / np.linalg.norm(m, 2))
        worst_orth = max(worst_orth, np.max(np.abs(u.conj().T @ u - np.eye(side))))
    return worst_rec <= 1e-10 and worst_orth <= 1e-10, f"reconstruction {worst_rec:.1e}, orthonormality {worst_orth:.1e}"


def check_core_states():
    rng = np.random.default_rng(17)
    worst_tr = worst_w = worst_f = 0.0
    min_eig = 0.0
    for _ in range(30):
        d, n = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        rho = _random_density(rng, d, n, rank=int(rng.integers(1, 4)))
        red = partial_trace(rho, int(rng.integers(0, n)))
        worst_tr = max(worst_tr, abs(np.trace(red.matrix).real - 1))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(red.matrix)[0]))
        phi = _direction(rng, d, n, 1)
        worst_w = max(worst_w, abs(sum(weight_decomposition(phi).values()) - 1))
        e = float(rng.uniform(0, 0.5))
        psi = perturbed_product(e, phi)
        anchor = PureState.basis([0] * n, d)
        worst_f = max(worst_f, abs(fidelity_pure(anchor, psi) - (1 - e)))
    ok = worst_tr <= 1e-12 and min_eig >= -1e-10 and worst_w <= 1e-12 and worst_f <= 1e-12
    return ok, (
        f"partial trace: trace err {worst_tr:.1e}, min eig {min_eig:.1e}; weight sum err {worst_w:.1e}; "
        f"anchor fidelity err {worst_f:.1e}"
    )


def check_product_fidelity():
    rng = np.random.default_rng(19)
    bad = 0
    for _ in range(10):
        psi = sample_state("haar", 2, 3, rng)
        seed = int(rng.integers(1 << 31))
        vals = [max_product_fidelity(psi, restarts=r, seed=seed)[0] for r in (1, 4, 16)]
        bad += any(b < a for a, b in zip(vals, vals[1:]))
    bell = PureState.from_vector(np.array([1, 0, 0, 1]) / math.sqrt(2), 2)
    prod = tensor([sample_state("haar", 3, 1, rng) for _ in range(3)])
    fb, fp = max_product_fidelity(bell)[0], max_product_fidelity(prod)[0]
    ok = bad == 0 and abs(fb - 0.5) <= 1e-10 and abs(fp - 1) <= 1e-10
    return ok, f"restart monotonicity violations {bad}; Bell {fb:.12f}; product {fp:.12f}"


def check_channel():
    rng = np.random.default_rng(23)
    worst_spec = worst_tr = worst_kraus = worst_order = 0.0
    min_eig = 0.0
    for d, n in itertools.product((2, 3), (1, 2, 3, 4)):
        if d**n > 81:
            continue
        for lam in (0.0, 0.3, 1.0):
            prm = DepolarizingParams(lam, d, n)
            prod = tensor([sample_state("haar", d, 1, rng) for _ in range(n)])
            w = np.linalg.eigvalsh(_output(prm, prod))
            worst_spec = max(worst_spec, np.max(np.abs(w - expand_spectrum(product_output_spectrum(prm)))))
        prm = DepolarizingParams(float(rng.uniform()), d, n)
        rho = _random_density(rng, d, n)
        out = apply_depolarizing(prm, rho).matrix
        worst_tr = max(worst_tr, abs(np.trace(out).real - 1))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(out)[0]))
        if n >= 2:
            # one site at a time, in reverse order, through n = 1 channels on reshaped axes
            t = rho.matrix.reshape((d,) * (2 * n))
            single = DepolarizingParams(prm.lam, d, 1)
            for s in reversed(range(n)):
                t = np.moveaxis(t, (s, n + s), (0, 1))
                sh = t.shape
                flat = t.reshape(d, d, -1)
                flat = np.stack([depolarize_operator(single, flat[:, :, k]) for k in range(flat.shape[2])], axis=-1)
                t = np.moveaxis(flat.reshape(sh), (0, 1), (s, n + s))
            worst_order = max(worst_order, np.max(np.abs(t.reshape(out.shape) - out)))
        if n == 1:
            kraus = sum(k @ rho.matrix @ k.conj().T for k in weyl_kraus_operators(prm))
            worst_kraus = max(worst_kraus, np.max(np.abs(kraus - out)))
    ok = worst_spec <= 1e-10 and worst_tr <= 1e-12 and min_eig >= -1e-10 and worst_order <= 1e-12 and worst_kraus <= 1e-12
    return ok, (
        f"product spectrum err {worst_spec:.1e}; trace err {worst_tr:.1e}; min eig {min_eig:.1e}; "
        f"site order err {worst_order:.1e}; Kraus err {worst_kraus:.1e}"
    )


def check_entropy():
    rng = np.random.default_rng(29)
    ps = (0.5, 1, 1.5, 2, 3, 5, 10)
    worst_mono = worst_cont = worst_closed = 0.0
    for _ in range(40):
        w = rng.dirichlet(np.full(int(rng.integers(2, 17)), 0.5))
        vals = [renyi_entropy(w, p) for p in ps]
        worst_mono = max(worst_mono, max(b - a for a, b in zip(vals, vals[1:])))
        s1 = renyi_entropy(w, 1)
        worst_cont = max(worst_cont, *(abs(renyi_entropy(w, 1 + h) - s1) for h in (1e-6, -1e-6)))
    for d, n, lam, p in itertools.product((2, 3), (1, 2, 3), GRID_LAM, (1, 2, 3, 5)):
        prm = DepolarizingParams(lam, d, n)
        worst_closed = max(worst_closed, abs(renyi_entropy(product_output_spectrum(prm), p) - min_output_renyi_closed(prm, p)))
    ok = worst_mono <= 1e-12 and worst_cont <= 1e-4 and worst_closed <= 1e-10
    return ok, f"max increase in p {worst_mono:.1e}; p->1 jump {worst_cont:.1e}; closed-form err {worst_closed:.1e}"


def check_divided_differences():
    rng = np.random.default_rng(31)
    worst_sym = worst_cont = 0.0
    for q in (0.5, 2, 2.5, 3.5):
        f = power_function(q)
        for _ in range(20):
            x = rng.uniform(0.05, 1, 3)
            if rng.uniform() < 0.3:
                x[1] = x[0] * (1 + 1e-9)
            perms = [second_divided_diff(f, *x[list(pm)]) for pm in itertools.permutations(range(3))]
            worst_sym = max(worst_sym, max(perms) - min(perms))
        a = np.array([0.3, 0.3, 0.4])
        b = _random_hermitian(rng, 3)
        for op in (apply_L, apply_Q):
            base = op(a, b, f)
            moved = op(a + np.array([0, 1e-9, 0]), b, f)
            worst_cont = max(worst_cont, np.max(np.abs(moved - base)) / np.max(np.abs(base)))
    ok = worst_sym <= 1e-12 and worst_cont <= 1e-6
    return ok, f"permutation spread {worst_sym:.1e}; degenerate continuity {worst_cont:.1e}"


def check_stability_bounds():
    # strict below the supremum while the gap is resolvable in double precision,
    # never above it anywhere
    worst_sup, worst_over = math.inf, -math.inf
    worst_large = 0.0
    for prm, p in _grid():
        rc = reject_coeff(p)
        worst_sup = min(worst_sup, min(rc - f_p(x, prm, p) for x in range(0, 11)))
        worst_over = max(worst_over, max(f_p(x, prm, p) - rc for x in range(0, 201)))
        if prm.r >= 2:
            worst_large = max(worst_large, abs(f_p(1000, prm, p) - rc))
    worst_vn = 0.0
    for d, lam, x in itertools.product(GRID_D, GRID_LAM, range(2, 11)):
        prm = DepolarizingParams(lam, d)
        v = f_vn(x, prm)
        worst_vn = max(worst_vn, abs(v - f_p(x, prm, 1 + 1e-7)) / max(1.0, abs(v)))
    ok = worst_sup > 0 and worst_over <= 1e-12 and worst_large <= 1e-3 and worst_vn <= 1e-5
    return ok, (
        f"min (reject - f_p) for x <= 10 {worst_sup:.2e}; max overshoot {worst_over:.1e}; "
        f"max |f_p(1000) - reject| {worst_large:.1e}; f_vn vs f_p at p = 1 + 1e-7 {worst_vn:.1e}"
    )


def check_two_sided_excess():
    # near-product states with weight >= 2 directions: the excess lies between
    # eps0 * accept and eps0 * reject up to C eps0^1.4
    rng = np.random.default_rng(37)
    worst_low = worst_high = -math.inf
    for (d, n), p, lam in itertools.product(((2, 2), (2, 3), (3, 2)), (2, 3, 5), (0.3, 0.5, 0.7)):
        prm = DepolarizingParams(lam, d, n)
        s_min = min_output_renyi_closed(prm, p)
        acc, rej = accept_coeff(prm, p), reject_coeff(p)
        phi = _direction(rng, d, n, 2)
        for e in (1e-3, 1e-4, 1e-5):
            psi = perturbed_product(e, phi)
            fid, _ = max_product_fidelity(psi, restarts=4, seed=0)
            excess = renyi_entropy(_output(prm, psi), p) - s_min
            # the best product overlap may slightly exceed the anchor's, so use it as eps0
            e0 = 1 - fid
            worst_low = max(worst_low, (e0 * acc - excess) / e0**1.4)
            worst_high = max(worst_high, (excess - e0 * rej) / e0**1.4)
    ok = worst_low <= 1.0 and worst_high <= 1.0
    return ok, f"max (eps0 acc - excess)/eps0^1.4 {worst_low:.2e}; max (excess - eps0 rej)/eps0^1.4 {worst_high:.2e}"


def check_verdict_consistency():
    prm = DepolarizingParams(0.5, 2, 3)
    cfg = polygraph.TrialConfig(prm, 2, 1e-3, honest=False, trials=40, seed=2, sigma=1e-4, delta_range=(0, 5e-3))
    run = polygraph.run_protocol(cfg)
    from .stability import classify

    bad = sum(r.verdict is not classify(r.s_value, cfg.eps, run.thresholds, r.s_min) for r in run.records)
    return bad == 0, f"{bad} of {len(run.records)} records disagree with the classifier"


# key, title, function, blocking
CHECKS: list[tuple[str, str, Callable[[], tuple[bool, str]], bool]] = [
    ("c1", "accept threshold equals f_p(2)", check_threshold_identity, True),
    ("c2", "f_p and f_vn nondecreasing in weight", check_monotonicity, True),
    ("c2-low-p", "monotonicity scan for 1 < p < 2", check_monotonicity_low_p, False),
    ("c3", "second-order entropy coefficient", check_second_order_coefficient, True),
    ("c4", "operator second-order expansion", check_operator_expansion, True),
    ("c5", "numeric vs closed-form minimal output entropy", check_min_output, True),
    ("c6", "predicted entropy excess", check_predicted_excess, True),
    ("c7", "gap identity, limit and positivity", check_gap_claims, True),
    ("c7-crit", "quoted closed form for h at its critical point", check_critical_value_formula, True),
    ("c8", "polygraph soundness and determinism", check_polygraph, True),
    ("c9", "trace distance vs fidelity", check_metric_identity, True),
    ("core-eig", "Hermitian eigendecomposition", check_eig, True),
    ("core-states", "partial trace, weights, perturbed states", check_core_states, True),
    ("core-fidelity", "best product fidelity", check_product_fidelity, True),
    ("channel", "depolarizing channel", check_channel, True),
    ("entropy", "Rényi entropy properties", check_entropy, True),
    ("perturb-dd", "divided differences", check_divided_differences, True),
    ("stability-sup", "supremum and p -> 1 limit of f_p", check_stability_bounds, True),
    ("stability-excess", "two-sided excess bounds", check_two_sided_excess, True),
    ("polygraph-verdicts", "recorded verdicts", check_verdict_consistency, True),
]


def run_checks(only: Iterable[str] | None = None, skip: Iterable[str] = ()) -> list[CheckResult]:
    keys = {k for k, *_ in CHECKS}
    only = set(only) if only else None
    skip = set(skip)
    unknown = ((only or set()) | skip) - keys
    if unknown:
        raise KeyError(f"unknown check keys: {sorted(unknown)}")
    results = []
    for key, title, fn, blocking in CHECKS:
        if key in skip or (only is not None and key not in only):
            continue
        t0 = time.perf_counter()
        passed, detail = fn()
        results.append(CheckResult(key, title, bool(passed), detail, blocking, time.perf_counter() - t0))
    return results
