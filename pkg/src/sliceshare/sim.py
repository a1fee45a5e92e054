"""Event-driven simulator for elastic traffic over the allocation engines.

Users of class c arrive Poisson(arrival_rate), carry a workload drawn per
the class distribution, and are served at phi_c / n_c until the workload
completes.  Rates are piecewise constant between events; depletion times
are exact, so there is no time-stepping error.  Traffic randomness is
engine-independent: each class owns labeled substreams derived from the
scenario seed, and engines never touch them, so runs that differ only in
the engine share identical arrival/workload sample paths.
"""

import bisect
import math
from dataclasses import dataclass, replace

import numpy as np

from .model import (PopulationState, ValidationError, scwa_weights,
                    EXPONENTIAL, DETERMINISTIC)
from .engines import (DEFAULT_OPTIONS, SolverError, solve_alpha_scs,
                      maxmin_waterfill, static_partition, drf_weights,
                      dps_weights, drf_unconstrained_weights)

ENGINE_KINDS = ("scs", "maxmin-scs", "drf", "dps", "drf_unconstrained",
                "static-partition")
_ALPHA_KINDS = ("scs", "static-partition")


@dataclass(frozen=True)
class EngineSpec:
    kind: str
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in ENGINE_KINDS:
            raise ValidationError(f"unknown engine {self.kind!r}")
        if self.kind in _ALPHA_KINDS:
            if self.alpha is None or not (self.alpha > 0):
                raise ValidationError(f"engine {self.kind} needs alpha > 0")
        elif self.alpha is not None:
            raise ValidationError(f"engine {self.kind} takes no alpha")

    @classmethod
    def from_string(cls, text):
        """Parse 'dps', 'scs(1)', 'static-partition(0.5)' forms."""
        text = text.strip()
        if text.endswith(")") and "(" in text:
            kind, arg = text[:-1].split("(", 1)
            try:
                return cls(kind.strip(), float(arg))
            except ValueError as e:
                raise ValidationError(f"bad engine alpha {arg!r}") from e
        return cls(text)

    @property
    def key(self) -> str:
        if self.alpha is None:
            return self.kind
        return f"{self.kind}({self.alpha:g})"


@dataclass(frozen=True)
class Scenario:
    instance: object
    engine: EngineSpec
    horizon: float
    warmup: float = 0.1
    seed: int = 0
    max_departures: int | None = None
    label: str = ""

    def __post_init__(self):
        if not (self.horizon > 0):
            raise ValidationError("horizon must be > 0")
        if not (0 <= self.warmup < 1):
            raise ValidationError("warmup fraction must be in [0, 1)")


@dataclass(frozen=True)
class SliceStats:
    mean_delay: float
    mean_throughput: float
    departures: int


@dataclass(frozen=True)
class Metrics:
    window: tuple[float, float]
    arrivals_total: int
    departures: int
    per_slice: dict[str, SliceStats]
    mean_delay: float
    mean_throughput: float
    mean_population: float
    busy_fractions: tuple[float, ...]
    quarter_means: tuple[float, float, float, float]

    @property
    def frac_idle(self) -> float:
        return self.busy_fractions[0]

    @property
    def frac_one_busy(self) -> float:
        return self.busy_fractions[1] if len(self.busy_fractions) > 1 else 0.0

    @property
    def frac_both_busy(self) -> float:
        """Fraction of time at least two slices are busy."""
        return float(sum(self.busy_fractions[2:]))

    @property
    def stability_verdict(self) -> str:
        q2, q4 = self.quarter_means[1], self.quarter_means[3]
        if q4 <= 1.2 * q2:
            return "consistent-with-stable"
        if q4 >= 2.0 * q2:
            return "growing"
        return "inconclusive"

    def numbers(self, slice_ids) -> dict[str, float]:
        out = {}
        for sid in slice_ids:
            out[f"delay_{sid}"] = self.per_slice[sid].mean_delay
        for sid in slice_ids:
            out[f"tput_{sid}"] = self.per_slice[sid].mean_throughput
        out["mean_delay"] = self.mean_delay
        out["mean_throughput"] = self.mean_throughput
        out["frac_idle"] = self.frac_idle
        out["frac_one_busy"] = self.frac_one_busy
        out["frac_both_busy"] = self.frac_both_busy
        out["mean_population"] = self.mean_population
        out["departures"] = float(self.departures)
        return out


@dataclass(frozen=True)
class TraceEvent:
    time: float
    kind: str
    class_id: str
    counts: tuple[int, ...]
    alloc_id: int


@dataclass(frozen=True)
class Trace:
    events: tuple[TraceEvent, ...]
    allocations: tuple[tuple[float, ...], ...]
    class_slices: tuple[int, ...]
    n_slices: int


@dataclass(frozen=True)
class RunResult:
    metrics: Metrics
    trace: Trace | None


def _class_rng(seed, class_idx, label):
    return np.random.default_rng(np.random.SeedSequence((seed, class_idx, label)))


class Simulation:
    """One deterministic run.  Mutable; create fresh per run."""

    def __init__(self, scenario, keep_trace=False, arrival_schedule=None,
                 resample_exponential=False, opts=DEFAULT_OPTIONS):
        self.scenario = scenario
        self.inst = scenario.instance
        self.opts = opts
        n_cls = self.inst.n_classes
        self.t = 0.0
        self.counts = [0] * n_cls
        self.slice_counts = [0] * self.inst.n_slices
        self.offsets = [0.0] * n_cls
        self.users = [[] for _ in range(n_cls)]   # sorted (key, uid, t_arr, work)
        self.next_uid = 0
        self.events_done = 0
        self.keep_trace = keep_trace
        self.resample = resample_exponential

        self.schedule = None
        if arrival_schedule is not None:
            idx = self.inst.class_index
            self.schedule = sorted(
                ((float(t), idx[cid], float(w)) for t, cid, w in arrival_schedule))
            self.sched_pos = 0
            self.arr_rng = self.work_rng = self.res_rng = None
            self.next_arrival = [math.inf] * n_cls
        else:
            seed = scenario.seed
            self.arr_rng = [_class_rng(seed, c, 0) for c in range(n_cls)]
            self.work_rng = [_class_rng(seed, c, 1) for c in range(n_cls)]
            self.res_rng = [_class_rng(seed, c, 2) for c in range(n_cls)]
            self.next_arrival = [
                self.t + self.arr_rng[c].exponential(1.0 / cl.arrival_rate)
                if cl.arrival_rate > 0 else math.inf
                for c, cl in enumerate(self.inst.classes)]

        self._alloc_cache = {}
        self._alloc_list = []
        self._warm = None
        self.rates, self.alloc_id = self._allocate()

        # accumulators
        h = scenario.horizon
        self.window = (scenario.warmup * h, h)
        self.pop_integral = 0.0
        self.busy_time = [0.0] * (self.inst.n_slices + 1)
        self.quarter_integrals = [0.0] * 4
        self.arrivals_total = 0
        nv = self.inst.n_slices
        self.dep_count = [0] * nv
        self.delay_sum = [0.0] * nv
        self.tput_sum = [0.0] * nv
        self.trace_events = []

    def _allocate(self):
        key = tuple(self.counts)
        hit = self._alloc_cache.get(key)
        if hit is not None:
            # consecutive events differ by one user, so the duals of the
            # population just revisited are the best warm start available
            self._warm = hit[2]
            return hit[:2]
        duals = self._warm
        if not any(self.counts):
            rates = (0.0,) * self.inst.n_classes
        else:
            pop = PopulationState(key)
            kind = self.scenario.engine.kind
            alpha = self.scenario.engine.alpha
            try:
                if kind == "scs":
                    res = solve_alpha_scs(self.inst, scwa_weights(self.inst, pop),
                                          alpha, self.opts, warm_duals=self._warm)
                    duals = self._warm = res.allocation.duals
                    rates = res.allocation.rates
                elif kind == "maxmin-scs":
                    rates = maxmin_waterfill(
                        self.inst, scwa_weights(self.inst, pop)).allocation.rates
                elif kind == "drf":
                    rates = maxmin_waterfill(
                        self.inst, drf_weights(self.inst, pop)).allocation.rates
                elif kind == "dps":
                    rates = maxmin_waterfill(
                        self.inst, dps_weights(self.inst, pop)).allocation.rates
                elif kind == "drf_unconstrained":
                    rates = maxmin_waterfill(
                        self.inst,
                        drf_unconstrained_weights(self.inst, pop)).allocation.rates
                else:   # static-partition
                    parts = static_partition(self.inst,
                                             scwa_weights(self.inst, pop),
                                             alpha, self.opts)
                    total = np.zeros(self.inst.n_classes)
                    for r in parts.values():
                        total += r.allocation.array()
                    rates = tuple(float(x) for x in total)
            except SolverError as e:
                raise SolverError(
                    f"engine failed at event {self.events_done} "
                    f"(population {key}): {e}",
                    residuals=e.residuals, iterations=e.iterations) from e
        alloc_id = len(self._alloc_list)
        self._alloc_list.append(tuple(rates))
        self._alloc_cache[key] = (tuple(rates), alloc_id, duals)
        return self._alloc_cache[key][:2]

    def _next_scheduled_arrival(self):
        if self.schedule is not None and self.sched_pos < len(self.schedule):
            return self.schedule[self.sched_pos][0]
        return math.inf

    def next_event(self):
        """Peek the earliest pending event without applying it.

        Returns (time, kind, class_idx, uid) with kind 'arrival' or
        'departure'; departures win ties, lowest uid first.
        """
        best = (math.inf, 2, 0, -1)
        for c in range(self.inst.n_classes):
            if self.users[c] and self.rates[c] > 0:
                key, uid, _, _ = self.users[c][0]
                per_user = self.rates[c] / self.counts[c]
                dt = (key - self.offsets[c]) / per_user
                cand = (self.t + max(dt, 0.0), 0, uid, c)
                if cand[:3] < best[:3]:
                    best = (cand[0], 0, uid, c)
        if self.schedule is not None:
            ts = self._next_scheduled_arrival()
            if ts < math.inf:
                c = self.schedule[self.sched_pos][1]
                if (ts, 1, c) < best[:3]:
                    best = (ts, 1, c, -1)
        else:
            for c in range(self.inst.n_classes):
                ta = self.next_arrival[c]
                if (ta, 1, c) < best[:3]:
                    best = (ta, 1, c, -1)
        time, prio, tie, extra = best
        if time == math.inf:
            return None
        if prio == 0:
            return (time, "departure", extra, tie)
        return (time, "arrival", tie, -1)

    def _accumulate(self, t0, t1):
        if t1 <= t0:
            return
        total = sum(self.counts)
        busy = sum(1 for x in self.slice_counts if x > 0)
        w0, w1 = self.window
        a, b = max(t0, w0), min(t1, w1)
        if b > a:
            self.pop_integral += total * (b - a)
            self.busy_time[busy] += b - a
        h = self.scenario.horizon
        for qisl in range(4):
            qa, qb = qisl * h / 4.0, (qisl + 1) * h / 4.0
            o0, o1 = max(t0, qa), min(t1, qb)
            if o1 > o0:
                self.quarter_integrals[qisl] += total * (o1 - o0)

    def _advance_offsets(self, dt):
        if dt <= 0:
            return
        for c in range(self.inst.n_classes):
            if self.counts[c] and self.rates[c] > 0:
                self.offsets[c] += self.rates[c] / self.counts[c] * dt

    def _resample_residuals(self):
        for c, cl in enumerate(self.inst.classes):
            if cl.workload != EXPONENTIAL or not self.users[c]:
                continue
            fresh = []
            for _, uid, t_arr, work in self.users[c]:
                draw = self.res_rng[c].exponential(cl.mean_workload)
                fresh.append((draw + self.offsets[c], uid, t_arr, work))
            fresh.sort()
            self.users[c] = fresh

    def step(self):
        """Apply the next event; False once the horizon is reached."""
        ev = self.next_event()
        horizon = self.scenario.horizon
        if ev is None or ev[0] > horizon:
            self._accumulate(self.t, horizon)
            self.t = horizon
            return False
        te, kind, c, uid = ev
        self._accumulate(self.t, te)
        self._advance_offsets(te - self.t)
        self.t = te
        slice_idx = self.inst.class_slice[c]

        if kind == "departure":
            key, uid, t_arr, work = self.users[c].pop(0)
            self.offsets[c] = key
            self.counts[c] -= 1
            self.slice_counts[slice_idx] -= 1
            if self.counts[c] == 0:
                self.offsets[c] = 0.0
            w0, w1 = self.window
            if w0 <= te <= w1:
                sojourn = te - t_arr
                self.dep_count[slice_idx] += 1
                self.delay_sum[slice_idx] += sojourn
                self.tput_sum[slice_idx] += work / sojourn
        else:
            if self.schedule is not None:
                _, _, work = self.schedule[self.sched_pos]
                self.sched_pos += 1
            else:
                cl = self.inst.classes[c]
                if cl.workload == DETERMINISTIC:
                    work = cl.mean_workload
                else:
                    work = float(self.work_rng[c].exponential(cl.mean_workload))
                self.next_arrival[c] = te + float(
                    self.arr_rng[c].exponential(1.0 / cl.arrival_rate))
            uid = self.next_uid
            self.next_uid += 1
            self.arrivals_total += 1
            bisect.insort(self.users[c], (work + self.offsets[c], uid, te, work))
            self.counts[c] += 1
            self.slice_counts[slice_idx] += 1

        if self.resample:
            self._resample_residuals()
        self.rates, self.alloc_id = self._allocate()
        self.events_done += 1
        if self.keep_trace:
            self.trace_events.append(TraceEvent(
                te, kind, self.inst.class_ids[c], tuple(self.counts),
                self.alloc_id))
        return True

    def run(self) -> RunResult:
        cap = self.scenario.max_departures
        while self.step():
            if cap is not None and sum(self.dep_count) >= cap:
                self._accumulate(self.t, self.t)
                break
        return RunResult(self._metrics(), self._trace())

    def _metrics(self) -> Metrics:
        w0, w1 = self.window
        end = min(self.t, w1) if self.scenario.max_departures else w1
        span = max(end - w0, 0.0)
        per_slice = {}
        for v, s in enumerate(self.inst.slices):
            n = self.dep_count[v]
            per_slice[s.id] = SliceStats(
                self.delay_sum[v] / n if n else math.nan,
                self.tput_sum[v] / n if n else math.nan,
                n)
        total_dep = sum(self.dep_count)
        mean_delay = sum(self.delay_sum) / total_dep if total_dep else math.nan
        mean_tput = sum(self.tput_sum) / total_dep if total_dep else math.nan
        busy = tuple(x / span if span else 0.0 for x in self.busy_time)
        h = self.scenario.horizon
        quarters = tuple(4.0 * q / h for q in self.quarter_integrals)
        return Metrics((w0, end), self.arrivals_total, total_dep, per_slice,
                       mean_delay, mean_tput,
                       self.pop_integral / span if span else 0.0,
                       busy, quarters)

    def _trace(self):
        if not self.keep_trace:
            return None
        return Trace(tuple(self.trace_events), tuple(self._alloc_list),
                     tuple(int(v) for v in self.inst.class_slice),
                     self.inst.n_slices)


def run_simulation(scenario, keep_trace=False, opts=DEFAULT_OPTIONS,
                   **kwargs) -> RunResult:
    return Simulation(scenario, keep_trace=keep_trace, opts=opts, **kwargs).run()


def busy_fractions(trace, window) -> tuple[float, ...]:
    """Recompute k-slices-busy time fractions from a trace.

    Counts are all-zero before the first event; each event's population
    snapshot applies from its time until the next event (the last one
    extends to the window end).  Entry k of the result is the fraction of
    the window with exactly k busy slices.
    """
    w0, w1 = window
    if not (w1 > w0):
        raise ValidationError("empty busy-fraction window")

    def busy_count(counts):
        per = [0] * trace.n_slices
        for i, n in enumerate(counts):
            per[trace.class_slices[i]] += n
        return sum(1 for x in per if x > 0)

    k_time = [0.0] * (trace.n_slices + 1)
    t_prev, k_prev = 0.0, 0
    for ev in trace.events:
        a, b = max(t_prev, w0), min(ev.time, w1)
        if b > a:
            k_time[k_prev] += b - a
        t_prev, k_prev = ev.time, busy_count(ev.counts)
    if w1 > max(t_prev, w0):
        k_time[k_prev] += w1 - max(t_prev, w0)
    total = w1 - w0
    return tuple(x / total for x in k_time)


def stability_probe(scenario, engine=None, opts=DEFAULT_OPTIONS):
    """Effective-load arithmetic plus an empirical growth verdict."""
    if engine is not None:
        scenario = replace(scenario, engine=engine)
    inst = scenario.instance
    load = np.zeros(inst.n_resources)
    for i, cl in enumerate(inst.classes):
        rho = cl.arrival_rate * cl.mean_workload
        load += rho * inst.demand_matrix[i]
    metrics = run_simulation(scenario, opts=opts).metrics
    return StabilityReport(float(load.max()), metrics.stability_verdict,
                           metrics.quarter_means, metrics)


@dataclass(frozen=True)
class StabilityReport:
    max_effective_load: float
    verdict: str
    quarter_means: tuple[float, float, float, float]
    metrics: Metrics


@dataclass(frozen=True)
class Summary:
    mean: float
    half_width: float
    values: tuple[float, ...]


def replicate(scenario, engines, seeds, opts=DEFAULT_OPTIONS):
    """Independent runs per engine x seed; 95% normal CIs per metric."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValidationError("replicate needs at least 2 seeds")
    out = {}
    ids = scenario.instance.slice_ids
    for eng in engines:
        rows = []
        for seed in seeds:
            sc = replace(scenario, engine=eng, seed=seed)
            rows.append(run_simulation(sc, opts=opts).metrics.numbers(ids))
        fields = rows[0].keys()
        summ = {}
        for f in fields:
            vals = np.array([r[f] for r in rows], float)
            half = 1.96 * vals.std(ddof=1) / math.sqrt(len(vals))
            summ[f] = Summary(float(vals.mean()), float(half),
                              tuple(float(x) for x in vals))
        out[eng.key] = summ
    return out
