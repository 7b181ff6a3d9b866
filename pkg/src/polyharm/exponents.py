"""Exponent arithmetic and the integrability bootstrap iteration.

Everything here is exact 64-bit arithmetic on the exponent relations of
the boundedness theorem: the derived pair

    alpha = 2m(p+1)/(pq-1),    beta = 2m(q+1)/(pq-1),

the regime split max(alpha, beta) vs n - m, and the finite chain of
integrability upgrades k -> k/rho that ends once k clears the threshold
(n+m) p q / (2m (q+1)).  Strict inequalities carry an explicit 1e-12
slack so the validator never trips on machine rounding.

The trace validator re-checks every inequality independently of the
generator; each check is tagged with the inequality label it enforces
so injected faults name their violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NotApplicableError, ParameterError

SLACK = 1e-12
# Runaway guard only.  The iteration provably terminates (rho is bounded
# away from 1 per trace), but the fixed midpoint rho rule needs on the
# order of 1/margin rounds when (p, q) sits within `margin` of the
# bounded-regime border, so the guard is generous.
MAX_ROUNDS = 50_000

# Selection-rule defaults: the proof leaves epsilon, rho, k1, k2 free up
# to strict inequalities; these knobs pin one deterministic choice.
EPSILON_BACKOFF = 0.02       # initial k at (1 - backoff) * (n+m)/(n-m) ...
THRESHOLD_PULL = 0.25        # ... or pulled a quarter of the way to the threshold
RHO_MIDPOINT = 0.5           # rho halfway between its floor and 1
K1_STEP = 0.1                # 1/k1 a tenth into its window, near its floor


@dataclass(frozen=True)
class ExponentParams:
    """Derived exponents with (p, q) normalized so q >= p."""

    p: float
    q: float
    m: int
    alpha: float
    beta: float
    swapped: bool

    def to_doc(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "m": self.m,
            "alpha": self.alpha,
            "beta": self.beta,
            "swapped": self.swapped,
        }


def compute_exponents(p: float, q: float, m: int) -> ExponentParams:
    """alpha = 2m(p+1)/(pq-1), beta = 2m(q+1)/(pq-1); swaps to enforce q >= p."""
    if not (p > 0 and q > 0 and math.isfinite(p) and math.isfinite(q)):
        raise ParameterError("p and q must be finite and positive")
    if m < 1:
        raise ParameterError("m must be >= 1")
    if p * q <= 1:
        raise ParameterError(f"pq > 1 required, got pq = {p * q:.6g}")
    swapped = p > q
    if swapped:
        p, q = q, p
    denom = p * q - 1.0
    return ExponentParams(p=p, q=q, m=m, alpha=2 * m * (p + 1) / denom,
                          beta=2 * m * (q + 1) / denom, swapped=swapped)


def classify_regime(params: ExponentParams, n: int, m: int) -> str:
    """low_dimension / bounded / singular / border by max(alpha, beta) vs n-m."""
    if n <= m:
        return "low_dimension"
    top = max(params.alpha, params.beta)
    edge = n - m
    if abs(top - edge) <= SLACK * max(1.0, edge):
        return "border"
    return "bounded" if top > edge else "singular"


@dataclass(frozen=True)
class BootstrapRound:
    k: float
    eta: float
    rho: float
    k1: float
    k2: float

    def to_doc(self) -> dict:
        return {"k": self.k, "eta": self.eta, "rho": self.rho, "k1": self.k1, "k2": self.k2}


@dataclass
class BootstrapTrace:
    """Full record of the exponent iteration, validated independently."""

    p: float
    q: float
    m: int
    n: int
    epsilon: float
    initial_k: float
    rounds: list = field(default_factory=list)
    k_bar: float = math.nan
    k1_final: float = math.nan
    terminated: bool = False
    failure: str | None = None

    def to_doc(self) -> dict:
        return {
            "inputs": {"p": self.p, "q": self.q, "m": self.m, "n": self.n},
            "epsilon": self.epsilon,
            "initial_k": self.initial_k,
            "rounds": [r.to_doc() for r in self.rounds],
            "k_bar": self.k_bar,
            "k1_final": self.k1_final,
            "k2_final": "inf",
            "terminated": self.terminated,
            "failure": self.failure,
        }


def _threshold(n: int, m: int, p: float, q: float) -> float:
    return (n + m) * p * q / (2 * m * (q + 1))


def run_bootstrap(p: float, q: float, m: int, n: int) -> BootstrapTrace:
    """Run the integrability bootstrap under the default selection rules.

    Applicable only in the bounded regime with n > m (for n <= m the
    sup-norm bound needs no iteration).  Emits the full trace and fails
    loudly, via the validator, if any generated round breaks a required
    inequality.
    """
    params = compute_exponents(p, q, m)
    regime = classify_regime(params, n, m)
    if regime != "bounded":
        top = max(params.alpha, params.beta)
        raise NotApplicableError(
            f"bootstrap applies only in the bounded regime: max(alpha, beta) = {top:.6g} "
            f"vs n - m = {n - m} gives regime '{regime}'"
        )
    p, q = params.p, params.q
    beta = params.beta

    cap = (n + m) / (n - m)
    thr = _threshold(n, m, p, q)
    k = min(cap * (1.0 - EPSILON_BACKOFF), cap - THRESHOLD_PULL * (cap - thr))
    floor_soft = p
    # (3.100) and (3.18) both bound k from below; stay strictly above.
    floor_strict = max((n + m) / beta, p / (1.0 / q + 2 * m / (n + m)))
    if k < floor_soft:
        k = floor_soft
    if k <= floor_strict + SLACK:
        k = 0.5 * (floor_strict + cap)
    if not (floor_strict + SLACK < k < cap - SLACK and k >= floor_soft):
        raise ParameterError(
            f"infeasible epsilon window for initial k: need k in "
            f"(max({floor_strict:.6g}, {floor_soft:.6g}), {cap:.6g})"
        )
    trace = BootstrapTrace(p=p, q=q, m=m, n=n, epsilon=cap - k, initial_k=k)

    two_m = 2 * m / (n + m)
    while k <= thr:
        if len(trace.rounds) >= MAX_ROUNDS:
            trace.failure = f"no termination within {MAX_ROUNDS} rounds"
            return trace
        eta = two_m * (q + 1) * k - (p * q - 1)
        lo_rho = max((n - m) * p / (n + m), 1.0 - eta, 0.0)
        rho = lo_rho + RHO_MIDPOINT * (1.0 - lo_rho)
        a = p / k - two_m
        hi1 = min(rho / k, 1.0 / q)
        lo1 = max(a, 0.0)
        inv_k1 = lo1 + K1_STEP * (hi1 - lo1)
        k1 = 1.0 / inv_k1
        lo2 = max(q * inv_k1 - two_m, 0.0)
        hi2 = rho / k
        k2 = 2.0 / (lo2 + hi2)
        trace.rounds.append(BootstrapRound(k=k, eta=eta, rho=rho, k1=k1, k2=k2))
        k = k / rho

    trace.k_bar = k
    a = p / k - two_m
    lo1 = (n + m) * q / (2 * m)
    trace.k1_final = 0.5 * (lo1 + 1.0 / a) if a > 0 else 1.5 * lo1
    trace.terminated = True
    violations = validate_trace(trace)
    if violations:
        raise ParameterError("generated trace violates: " + "; ".join(violations))
    return trace


def validate_trace(trace: BootstrapTrace) -> list:
    """Re-check every inequality of the trace; returns violation messages.

    Pure function of the trace fields; an empty list means the trace is
    internally consistent with the proof's constraints.
    """
    p, q, m, n = trace.p, trace.q, trace.m, trace.n
    out = []
    if not trace.terminated:
        out.append(f"trace not terminated: {trace.failure}")
    params = compute_exponents(p, q, m)
    beta = params.beta
    cap = (n + m) / (n - m)
    thr = _threshold(n, m, p, q)
    two_m = 2 * m / (n + m)
    k_expect = trace.initial_k

    for idx, rnd in enumerate(trace.rounds):
        tag = f"round {idx}"
        k = rnd.k
        if abs(k - k_expect) > 1e-9 * max(1.0, abs(k_expect)):
            out.append(f"{tag}: k {k:.12g} does not chain from previous round (expected {k_expect:.12g})")
        if k < p - SLACK:
            out.append(f"{tag}: (3.6) k >= p violated (k={k:.6g}, p={p:.6g})")
        if idx == 0:
            if not (cap - trace.epsilon - 1e-9 <= k < cap - SLACK):
                out.append(f"{tag}: (3.6) initial k must satisfy (n+m)/(n-m) - eps <= k < (n+m)/(n-m)")
        if k <= (n + m) / beta + SLACK:
            out.append(f"{tag}: (3.100) k > (n+m)/beta violated (k={k:.6g})")
        if k > thr + SLACK:
            out.append(f"{tag}: (3.16) rounds require k <= threshold {thr:.6g} (k={k:.6g})")
        eta = two_m * (q + 1) * k - (p * q - 1)
        if abs(eta - rnd.eta) > 1e-9 * max(1.0, abs(eta)):
            out.append(f"{tag}: stored eta {rnd.eta:.12g} disagrees with recomputed {eta:.12g}")
        if not (rnd.rho < 1.0 - SLACK):
            out.append(f"{tag}: (3.19) rho < 1 violated (rho={rnd.rho:.6g})")
        if not (rnd.rho > (n - m) * p / (n + m) + SLACK):
            out.append(f"{tag}: (3.19) rho > (n-m)p/(n+m) violated (rho={rnd.rho:.6g})")
        if not (rnd.rho > 1.0 - eta + SLACK):
            out.append(f"{tag}: (3.21) rho > 1 - eta violated (rho={rnd.rho:.6g}, eta={eta:.6g})")
        if not ((p - rnd.rho) / k < two_m - SLACK):
            out.append(f"{tag}: (3.17) (p - rho)/k < 2m/(n+m) violated")
        a = p / k - two_m
        if not (a < 1.0 / q - SLACK):
            out.append(f"{tag}: (3.18) p/k - 2m/(n+m) < 1/q violated")
        inv_k1 = 1.0 / rnd.k1
        if not (inv_k1 > a + SLACK):
            out.append(f"{tag}: (3.7)/(3.14) 1/k1 > p/k - 2m/(n+m) violated (k1={rnd.k1:.6g})")
        if not (rnd.k1 > q + SLACK):
            out.append(f"{tag}: (3.11) k1 > q violated (k1={rnd.k1:.6g}, q={q:.6g})")
        if not (inv_k1 < rnd.rho / k - SLACK):
            out.append(f"{tag}: (3.14) 1/k1 < rho/k violated")
        inv_k2 = 0.0 if math.isinf(rnd.k2) else 1.0 / rnd.k2
        lo2 = q * inv_k1 - two_m
        if not (inv_k2 > lo2 + SLACK) and lo2 > 0:
            out.append(f"{tag}: (3.12)/(3.15) 1/k2 > q/k1 - 2m/(n+m) violated")
        if not (inv_k2 < rnd.rho / k - SLACK):
            out.append(f"{tag}: (3.15) 1/k2 < rho/k violated")
        k_expect = k / rnd.rho

    if trace.terminated:
        if trace.rounds and abs(trace.k_bar - k_expect) > 1e-9 * max(1.0, abs(k_expect)):
            out.append("final k_bar does not chain from the last round")
        if not trace.rounds and abs(trace.k_bar - trace.initial_k) > SLACK:
            out.append("zero-round trace must have k_bar equal to the initial k")
        if not (trace.k_bar > thr + SLACK):
            out.append(f"(3.16) negation: k_bar > {thr:.6g} required (k_bar={trace.k_bar:.6g})")
        lo1 = (n + m) * q / (2 * m)
        if not (trace.k1_final > lo1 + SLACK):
            out.append(f"final k1 > (n+m)q/2m = {lo1:.6g} violated (k1={trace.k1_final:.6g})")
        a = p / trace.k_bar - two_m
        if not (1.0 / trace.k1_final > a + SLACK):
            out.append("(3.7) for the final k1 violated")
        if not (q / trace.k1_final - two_m < -SLACK):
            out.append("final phase requires q/k1 - 2m/(n+m) < 0 so that k2 = inf is admissible")

    # growth factor >= 1 + delta with delta fixed by the round-0 eta gap
    if trace.rounds:
        eta0 = trace.rounds[0].eta
        l_star = max((n - m) * p / (n + m), 1.0 - eta0, 0.0)
        rho_cap = l_star + RHO_MIDPOINT * (1.0 - l_star)
        for idx, rnd in enumerate(trace.rounds):
            if rnd.rho > rho_cap + 1e-9:
                out.append(
                    f"round {idx}: growth factor fell below 1 + delta "
                    f"(rho={rnd.rho:.6g} > cap {rho_cap:.6g})"
                )
    return out


def growth_delta(trace: BootstrapTrace) -> float:
    """The per-round growth margin delta derived from the round-0 eta gap."""
    if not trace.rounds:
        return math.inf
    p, q, m, n = trace.p, trace.q, trace.m, trace.n
    eta0 = trace.rounds[0].eta
    l_star = max((n - m) * p / (n + m), 1.0 - eta0, 0.0)
    return (1.0 - l_star) / (1.0 + l_star)
