"""Allocation engines.

All engines take a canonical Instance (unit capacities) and per-class
weights and return a SolveResult whose allocation respects every capacity
constraint within tolerance.

solve_alpha_scs maximizes sum_c q_c * (phi_c/q_c)^(1-alpha) / (1-alpha)
(the log form at alpha=1) subject to the capacity constraints, by iterating
resource prices: stationarity pins phi_c = q_c * price_c^(-1/alpha) with
price_c = sum_r d_c^r nu_r, and prices move multiplicatively by
nu_r <- nu_r * usage_r^kappa until feasibility and complementary slackness
hold.  maxmin_waterfill computes the weighted max-min allocation exactly by
progressive filling.  class_alpha_fair swaps the per-user weighting for a
class-level alpha-fair objective.  static_partition solves each slice alone
on a share-scaled copy of the resources.
"""

from dataclasses import dataclass

import numpy as np

from .model import Allocation, ClassWeights, ValidationError

ALPHA_ONE_THRESHOLD = 1e-6


class SolverError(RuntimeError):
    """Engine failed to converge; carries the last residuals for diagnosis."""

    def __init__(self, message, residuals=None, iterations=None):
        super().__init__(message)
        self.residuals = residuals
        self.iterations = iterations


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 100_000
    step_clip: float = 2.0


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class Residuals:
    """feasibility: worst capacity overshoot.  complementary_slackness:
    worst |1 - usage| over resources whose dual still carries weight in
    some class price.  stationarity holds exactly for price-driven rates."""

    feasibility: float
    complementary_slackness: float | None = None
    stationarity: float | None = None

    def worst(self) -> float:
        vals = [v for v in (self.feasibility, self.complementary_slackness,
                            self.stationarity) if v is not None]
        return max(vals)


@dataclass(frozen=True)
class SolveResult:
    allocation: Allocation
    iterations: int
    residuals: Residuals


def _weight_array(weights):
    q = np.asarray(weights.values if isinstance(weights, ClassWeights) else weights, float)
    if (q < 0).any() or not np.isfinite(q).all():
        raise ValidationError("weights must be finite and >= 0")
    return q


def _price_iteration(Dn, g, alpha, opts, warm=None):
    """Multiplicative dual ascent on the normalized problem (capacities 1).

    Dn and g cover positive-weight classes only.  Returns
    (rates, prices, iterations, feasibility residual, slackness residual,
    converged flag).
    """
    n_res = Dn.shape[1]
    inv_alpha = 1.0 if abs(alpha - 1.0) < ALPHA_ONE_THRESHOLD else 1.0 / alpha
    used = Dn.max(axis=0) > 0.0
    if warm is not None and np.isfinite(warm).all():
        nu = np.where(used, np.maximum(np.asarray(warm, float), 1e-10), 0.0)
    else:
        nu = np.where(used, 1.0 / n_res, 0.0)

    kappa0 = float(np.clip(alpha, 1e-2, 64.0))
    kappa = np.full(n_res, kappa0)
    log_g = np.log(g)
    rates = np.zeros(len(g))
    usage = np.zeros(n_res)
    feas = cs = np.inf
    prev_logu = None
    flipped_prev = np.zeros(n_res, dtype=bool)
    calm = np.zeros(n_res, dtype=int)
    boost = np.ones(n_res)
    side = np.zeros(n_res)
    run = np.zeros(n_res, dtype=int)
    for it in range(1, opts.max_iters + 1):
        price = Dn @ nu
        rates = np.exp(log_g - inv_alpha * np.log(price))
        usage = rates @ Dn
        over = usage - 1.0
        feas = max(float(over.max()), 0.0)
        # a resource only matters while its dual carries weight in some price;
        # duals of slack resources decay until they fall below relevance and
        # drop out of the test (absolute nu*|1-usage| would be scale-blind)
        relevant = ((Dn * nu) / price[:, None]).max(axis=0) > 1e-9
        cs = float(np.abs(over[relevant]).max(initial=0.0))
        res = feas if feas > cs else cs
        if res <= opts.tol:
            return rates, nu, it, feas, cs, True
        pos = usage > 0.0
        log_u = np.log(usage, out=np.zeros_like(usage), where=pos)

        # Newton sweep on the price-carrying duals: log-usage responds to
        # log-duals through -(1/alpha) M P, both factors row-normalized,
        # so one small lstsq snaps the live duals onto the usage-1
        # manifold once the iterate is near its basin.  Keep the step only
        # if the residual actually improves.
        if it % 8 == 0 and relevant.any():
            A = np.flatnonzero(relevant)
            M = (Dn[:, A] * rates[:, None]).T / usage[A][:, None]
            P = (Dn[:, A] * nu[A]) / price[:, None]
            dx, *_ = np.linalg.lstsq(M @ P, log_u[A], rcond=1e-10)
            if np.isfinite(dx).all():
                cand = nu.copy()
                cand[A] = nu[A] * np.exp(np.clip(dx / inv_alpha, -3.0, 3.0))
                c_price = Dn @ cand
                c_rates = np.exp(log_g - inv_alpha * np.log(c_price))
                c_usage = c_rates @ Dn
                c_over = c_usage - 1.0
                c_rel = ((Dn * cand) / c_price[:, None]).max(axis=0) > 1e-9
                c_res = max(float(c_over.max()), 0.0,
                            float(np.abs(c_over[c_rel]).max(initial=0.0)))
                if c_res < res:
                    nu = cand
                    prev_logu = None
                    flipped_prev[:] = False
                    continue

        # a dual whose usage crosses 1 on consecutive iterations is
        # overshooting; halve its own step so one hovering resource does
        # not stall the rest
        if prev_logu is not None:
            flip = (log_u * prev_logu < 0) & (np.abs(log_u) > 1e-9) & relevant
            two = flip & flipped_prev
            kappa = np.where(two, np.maximum(kappa * 0.5, 1e-3), kappa)
            flipped_prev = flip & ~two
            calm = np.where(flip, 0, calm + 1)
            rec = (calm >= 50) & (kappa < kappa0)
            if rec.any():
                kappa[rec] = np.minimum(kappa[rec] * 1.3, kappa0)
                calm[rec] = 0
        prev_logu = log_u.copy()
        # the plain step moves a dual only in proportion to |log usage|,
        # which decays degenerate binds (usage -> 1 from below with a
        # vanishing dual) harmonically and wakes floored duals under a
        # newly tight resource just as slowly.  double the step of any
        # dual whose usage sat strictly on one side of 1 for a whole
        # window; changing side resets the boost.
        side_now = np.sign(log_u)
        cont = (side_now == side) & (side_now != 0.0)
        run = np.where(cont, run + 1, 0)
        boost = np.where(cont, boost, 1.0)
        side = side_now
        ramp = run >= 16
        if ramp.any():
            boost[ramp] = np.minimum(boost[ramp] * 2.0, 2.0 ** 30)
            run[ramp] = 0
        step = np.clip(kappa * boost * log_u, -opts.step_clip, opts.step_clip)
        nu = nu * np.exp(step)
        # slack duals must decay below relevance but stay within waking
        # distance in case the active set shifts on a later warm start;
        # floor each one relative to the cheapest price it feeds
        ratio = price[:, None] / np.where(Dn > 0.0, Dn, 1.0)
        lo = 1e-18 * np.min(np.where(Dn > 0.0, ratio, np.inf), axis=0,
                            initial=np.inf)
        nu = np.where(pos, np.maximum(nu, np.where(np.isfinite(lo), lo, 0.0)), 0.0)
    return rates, nu, opts.max_iters, feas, cs, False


def _solve_with_caps(instance, q_full, alpha, caps, opts, warm_duals=None):
    """Price-iteration wrapper for arbitrary per-resource capacity vectors.

    Classes that demand any zero-capacity resource are pinned to rate 0.
    Returned duals are on the original capacity scale.
    """
    D = instance.demand_matrix
    caps = np.asarray(caps, float)
    n_cls, n_res = D.shape
    open_res = caps > 0.0
    forced = (D[:, ~open_res] > 0).any(axis=1)
    active = (q_full > 0) & ~forced
    rates = np.zeros(n_cls)
    duals = np.zeros(n_res)
    if not active.any():
        return SolveResult(Allocation(tuple(rates), tuple(duals)), 0,
                           Residuals(0.0, 0.0, 0.0))
    Dn = D[np.ix_(active, open_res)] / caps[open_res]
    warm = None
    if warm_duals is not None:
        warm = np.asarray(warm_duals, float)[open_res] * caps[open_res]
    r, nu, iters, feas, cs, ok = _price_iteration(Dn, q_full[active], alpha, opts, warm)
    if not ok:
        raise SolverError(
            f"price iteration did not reach tol={opts.tol} in {opts.max_iters} iterations",
            residuals=Residuals(feas, cs, 0.0), iterations=iters)
    rates[active] = r
    # converged iterates may overshoot capacity by O(tol); rescale so the
    # returned rates are feasible outright
    usage = rates @ (D / np.where(caps > 0, caps, 1.0))
    peak = usage[open_res].max(initial=0.0)
    if peak > 1.0:
        rates /= peak
        feas = 0.0
    duals[open_res] = nu / caps[open_res]
    return SolveResult(Allocation(tuple(rates), tuple(duals)), iters,
                       Residuals(feas, cs, 0.0))


def solve_alpha_scs(instance, weights, alpha, opts=DEFAULT_OPTIONS,
                    warm_duals=None) -> SolveResult:
    """Alpha-fair allocation under per-user share-constrained weights."""
    if not (alpha > 0) or not np.isfinite(alpha):
        raise ValidationError("alpha must be finite and > 0")
    q = _weight_array(weights)
    if not (q > 0).any():
        raise ValidationError("all-zero weights")
    return _solve_with_caps(instance, q, alpha, np.ones(instance.n_resources),
                            opts, warm_duals)


def class_alpha_fair(instance, weights, alpha, opts=DEFAULT_OPTIONS,
                     warm_duals=None) -> SolveResult:
    """Class-level alpha-fair allocation: maximize sum_c q_c phi_c^(1-alpha)/(1-alpha).

    Stationarity gives phi_c = (q_c)^(1/alpha) * price_c^(-1/alpha), so this
    reuses the price iteration with transformed weights.  As alpha grows the
    weights wash out and the solution tends to the unweighted max-min rates.
    """
    if not (alpha > 0) or not np.isfinite(alpha):
        raise ValidationError("alpha must be finite and > 0")
    q = _weight_array(weights)
    if not (q > 0).any():
        raise ValidationError("all-zero weights")
    g = q.copy()
    if abs(alpha - 1.0) >= ALPHA_ONE_THRESHOLD:
        g[q > 0] = q[q > 0] ** (1.0 / alpha)
    return _solve_with_caps(instance, g, alpha, np.ones(instance.n_resources), opts)


def maxmin_waterfill(instance, weights) -> SolveResult:
    """Exact weighted max-min allocation by progressive filling.

    Raises the common level t (phi_c = q_c * t) until a resource saturates,
    freezes every class using a newly saturated resource, and repeats with
    the survivors.  Ties freeze together; each frozen class records the
    lexicographically smallest resource that saturated on it.
    """
    q = _weight_array(weights)
    D = instance.demand_matrix
    n_cls, n_res = D.shape
    rates = np.zeros(n_cls)
    bottlenecks: dict[str, str] = {}
    active = q > 0
    frozen_usage = np.zeros(n_res)
    rounds = 0
    while active.any():
        rounds += 1
        coef = q[active] @ D[active]
        live = np.flatnonzero(coef > 0)
        levels = (1.0 - frozen_usage[live]) / coef[live]
        t = float(levels.min())
        saturated = np.zeros(n_res, bool)
        saturated[live[levels <= t * (1.0 + 1e-12) + 1e-15]] = True
        froze = active & (D[:, saturated] > 0).any(axis=1)
        assert froze.any(), "a saturated resource must freeze at least one class"
        rates[froze] = q[froze] * t
        for i in np.flatnonzero(froze):
            mine = [instance.resource_ids[r] for r in np.flatnonzero(saturated)
                    if D[i, r] > 0]
            bottlenecks[instance.class_ids[i]] = min(mine)
        frozen_usage = frozen_usage + rates[froze] @ D[froze]
        active = active & ~froze
    feas = max(float((frozen_usage - 1.0).max()), 0.0) if n_res else 0.0
    return SolveResult(Allocation(tuple(rates), None, bottlenecks), rounds,
                       Residuals(feasibility=feas))


def static_partition(instance, weights, alpha, opts=DEFAULT_OPTIONS) -> dict[str, SolveResult]:
    """Per-slice solve against a share-scaled copy of every resource.

    Slice v gets capacity share_v of each resource and allocates it to its
    own classes with the same alpha-fair objective.  Returns a SolveResult
    per slice id; rates vectors are full length with zeros off-slice.
    """
    if not (alpha > 0) or not np.isfinite(alpha):
        raise ValidationError("alpha must be finite and > 0")
    q = _weight_array(weights)
    results = {}
    for v, s in enumerate(instance.slices):
        qv = np.zeros_like(q)
        idx = list(instance.slice_classes[v])
        qv[idx] = q[idx]
        if not (qv > 0).any():
            results[s.id] = SolveResult(
                Allocation(tuple(np.zeros_like(q)), tuple(np.zeros(instance.n_resources))),
                0, Residuals(0.0, 0.0, 0.0))
            continue
        caps = np.full(instance.n_resources, s.share)
        results[s.id] = _solve_with_caps(instance, qv, alpha, caps, opts)
    return results


def _share_and_count(instance, pop):
    pop.check(instance)
    slice_totals = pop.slice_counts(instance)
    return slice_totals


def drf_weights(instance, pop) -> ClassWeights:
    """Dominant-resource-fairness weights with equal intra-slice split.

    Each present user of class c carries weight (share_v / n_v) * delta_c,
    where delta_c = 1 / max_r d_c^r is the reciprocal dominant demand, so
    q_c = share_v * n_c * delta_c / n_v.  Not share-constrained in general.
    """
    slice_totals = _share_and_count(instance, pop)
    D = instance.demand_matrix
    values = []
    for i, c in enumerate(instance.classes):
        v = instance.class_slice[i]
        nv = slice_totals[v]
        if pop.counts[i] == 0 or nv == 0:
            values.append(0.0)
            continue
        delta = 1.0 / D[i].max()
        values.append(instance.slices[v].share * pop.counts[i] * delta / nv)
    return ClassWeights(tuple(values), "drf")


def dps_weights(instance, pop) -> ClassWeights:
    """Discriminatory processor sharing weights: every user weighs share_v.

    q_c = n_c * share_v; weights scale with the population instead of being
    normalized to the share, so a busy slice can crowd out a small one.
    """
    slice_totals = _share_and_count(instance, pop)
    del slice_totals
    values = []
    for i, c in enumerate(instance.classes):
        v = instance.class_slice[i]
        values.append(instance.slices[v].share * pop.counts[i])
    return ClassWeights(tuple(values), "dps")


def drf_unconstrained_weights(instance, pop) -> ClassWeights:
    """DRF-flavored DPS weights: every user of class c weighs share_v * delta_c.

    Like dps_weights but discounted by the reciprocal dominant demand, with
    no per-slice normalization (q_c = n_c * share_v * delta_c).
    """
    _share_and_count(instance, pop)
    D = instance.demand_matrix
    values = []
    for i, c in enumerate(instance.classes):
        v = instance.class_slice[i]
        if pop.counts[i] == 0:
            values.append(0.0)
            continue
        delta = 1.0 / D[i].max()
        values.append(instance.slices[v].share * pop.counts[i] * delta)
    return ClassWeights(tuple(values), "drf-unconstrained")
