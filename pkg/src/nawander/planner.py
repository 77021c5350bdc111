"""Combinatorial data of the construction: (n_k), (m_k), tau_k, I_k.

A plan of depth K is built from integers n_1 < n_2 < ... < n_{K+1} with
n_1 > 1 and n_{k+1} >= n_k + 2.  Each m_k is the minimal integer whose
shrink product satisfies 2^(2m) rho_m^2 ... rho_1^2 < 2^-(n_{k+1}+1)
(equivalently m + 2^(1-m) > n_{k+1} + 3), each tau_k is the midpoint of
the open exponent window (-n_{k+1} - 1/2, -n_k - 5/2 + 2^(1-m_k)), and
I_k = sum_{j<=k} (n_j + 3(m_j - 1) + 2) with I_0 = 0.

The radius trace replays the wandering-disk recursion
r_{k} = 2^{n_k} r_{k-1} 2^(2 m_k) rho_{m_k}^2 ... rho_1^2 together with
every intra-block chain inequality, all in exact exponent arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

from .valgroup import ValExp, rho_exponent, shrink_exponent


class PlanError(ValueError):
    pass


def choose_m(n_next: int) -> int:
    """Minimal m with 2^(2m) rho_m^2 ... rho_1^2 < 2^-(n_next + 1)."""
    if n_next < 3:
        raise PlanError(f"choose_m needs n_next >= 3, got {n_next}")
    target = ValExp(-(n_next + 1))
    m = 1
    while not shrink_exponent(m) < target:
        m += 1
        if m > 4 * n_next + 16:
            raise PlanError("choose_m scan exceeded its bound")
    return m


def tau_window(n_k: int, m_k: int, n_next: int) -> Tuple[Fraction, Fraction]:
    """Open exponent interval for tau_k; raises when empty."""
    lo = Fraction(-n_next) - Fraction(1, 2)
    hi = Fraction(-n_k) - Fraction(5, 2) + Fraction(1, 2 ** (m_k - 1))
    if not lo < hi:
        raise PlanError(
            f"empty tau window for (n_k, m_k, n_next) = ({n_k}, {m_k}, {n_next})"
        )
    return lo, hi


def choose_tau(n_k: int, m_k: int, n_next: int) -> Fraction:
    """Midpoint of the tau window (exact rational exponent)."""
    lo, hi = tau_window(n_k, m_k, n_next)
    return (lo + hi) / 2


def block_lengths(n: List[int], m: List[int]) -> List[int]:
    """[I_0, I_1, ..., I_K] with I_k = sum_{j<=k} (n_j + 3(m_j-1) + 2)."""
    out = [0]
    for n_k, m_k in zip(n, m):
        out.append(out[-1] + n_k + 3 * (m_k - 1) + 2)
    return out


@dataclass(frozen=True)
class Plan:
    """Validated sequence data; n has K+1 entries, m/tau have K."""

    n: Tuple[int, ...]
    m: Tuple[int, ...]
    tau_exponents: Tuple[Fraction, ...]
    I: Tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.m)

    def tau(self, k: int) -> ValExp:
        """tau_k as a ValExp (1-based k)."""
        return ValExp(self.tau_exponents[k - 1])

    def validate(self) -> None:
        n, m, taus = self.n, self.m, self.tau_exponents
        if len(n) != len(m) + 1 or len(m) != len(taus):
            raise PlanError("plan length mismatch")
        if len(self.I) != len(m) + 1 or self.I[0] != 0:
            raise PlanError("I list must start at I_0 = 0 and have K+1 entries")
        if n[0] <= 1:
            raise PlanError("n_1 must exceed 1")
        for k in range(len(n) - 1):
            if n[k + 1] < n[k] + 2:
                raise PlanError(f"n_{k+2} must be >= n_{k+1} + 2")
        for k, m_k in enumerate(m):
            if not shrink_exponent(m_k) < ValExp(-(n[k + 1] + 1)):
                raise PlanError(f"m_{k+1} fails the shrink condition")
        for k, t in enumerate(taus):
            lo, hi = tau_window(n[k], m[k], n[k + 1])
            if not (lo < t < hi):
                raise PlanError(f"tau_{k+1} is outside its window")
            if k and not t < taus[k - 1]:
                raise PlanError("tau must decrease strictly")
        if list(self.I) != block_lengths(list(n), list(m)):
            raise PlanError("I list disagrees with the block formula")

    def serialize(self) -> dict:
        return {
            "n": list(self.n),
            "m": list(self.m),
            "tau": [f"{t.numerator}/{t.denominator}" for t in self.tau_exponents],
            "I": list(self.I),
        }

    @classmethod
    def deserialize(cls, data: dict) -> "Plan":
        taus = []
        for t in data["tau"]:
            num, _, den = t.partition("/")
            taus.append(Fraction(int(num), int(den or "1")))
        plan = cls(
            n=tuple(data["n"]),
            m=tuple(data["m"]),
            tau_exponents=tuple(taus),
            I=tuple(data["I"]),
        )
        plan.validate()
        return plan


def make_plan(n: List[int]) -> Plan:
    """Plan from the n-sequence alone: minimal m_k, midpoint tau_k."""
    if len(n) < 2:
        raise PlanError("a plan needs at least two n entries")
    m = [choose_m(n[k + 1]) for k in range(len(n) - 1)]
    taus = [choose_tau(n[k], m[k], n[k + 1]) for k in range(len(m))]
    plan = Plan(
        n=tuple(n),
        m=tuple(m),
        tau_exponents=tuple(taus),
        I=tuple(block_lengths(n[:-1], m)),
    )
    plan.validate()
    return plan


def default_plan(depth: int) -> Plan:
    """The reproducible default: n_k = 2k for k = 1..depth+1."""
    if depth < 1:
        raise PlanError("depth must be >= 1")
    return make_plan([2 * k for k in range(1, depth + 2)])


# -- Theorem A radius recursion ------------------------------------------------


@dataclass(frozen=True)
class TraceStage:
    stage: int                    # k for r_k
    r: ValExp
    bound: Optional[ValExp]       # sqrt2 rho_{m_{k+1}}^2 / 2^{n_{k+1}}, if any
    ok: bool
    chain_ok: bool                # intra-block chain inequalities of block k


def _entry_bound(n_k: int, m_k: int) -> ValExp:
    return ValExp(Fraction(1, 2) + 2 * rho_exponent(m_k).exponent - n_k)


def _chain_inequalities(n_k: int, m_k: int, r_prev: ValExp) -> bool:
    """2^{n_k} r_{k-1} 2^{2j} rho_{m_k}^2 ... rho_{m_k-j+1}^2 < sqrt2 rho_{m_k-j}^2
    for all j in 1..m_k-1."""
    partial = Fraction(0)
    base = r_prev.exponent + n_k
    for j in range(1, m_k):
        partial += 2 * rho_exponent(m_k - j + 1).exponent
        lhs = base + 2 * j + partial
        rhs = Fraction(1, 2) + 2 * rho_exponent(m_k - j).exponent
        if not lhs < rhs:
            return False
    return True


def radius_trace_report(plan: Plan, r0: ValExp) -> List[TraceStage]:
    """Replay the radius recursion; never raises, reports pass/fail per stage."""
    stages: List[TraceStage] = []
    entry = _entry_bound(plan.n[0], plan.m[0])
    stages.append(TraceStage(stage=0, r=r0, bound=entry, ok=r0 < entry,
                             chain_ok=True))
    r = r0
    for k in range(1, plan.depth + 1):
        n_k, m_k = plan.n[k - 1], plan.m[k - 1]
        chain_ok = _chain_inequalities(n_k, m_k, r)
        r = ValExp(r.exponent + n_k) * shrink_exponent(m_k)
        if k < plan.depth:
            bound = _entry_bound(plan.n[k], plan.m[k])
            ok = r < bound
        else:
            bound, ok = None, True
        stages.append(TraceStage(stage=k, r=r, bound=bound, ok=ok,
                                 chain_ok=chain_ok))
    return stages


def radius_trace(plan: Plan, r0: ValExp) -> List[ValExp]:
    """Radius exponents [r_0, ..., r_K]; raises PlanError on any violation."""
    report = radius_trace_report(plan, r0)
    for st in report:
        if not st.ok:
            raise PlanError(f"radius bound violated at stage {st.stage}")
        if not st.chain_ok:
            raise PlanError(f"intra-block chain violated in block {st.stage}")
    return [st.r for st in report]


# -- itinerary pattern ----------------------------------------------------------


def itinerary_pattern(plan: Plan, depth: Optional[int] = None):
    """Per-step (case, aux) region pattern of a depth-d itinerary.

    Entry s describes the region of R^s(x): ("near_one", |R^s(x)-1|),
    ("small", |R^s(x)|) or ("psi", k).  Pattern length is I_d + 1.
    """
    d = plan.depth if depth is None else depth
    if not 1 <= d <= plan.depth:
        raise PlanError(f"pattern depth must be in 1..{plan.depth}")
    pattern = []
    for k in range(1, d + 1):
        n_k, m_k = plan.n[k - 1], plan.m[k - 1]
        pattern.append(("near_one", ValExp(Fraction(-n_k) - Fraction(1, 2))))
        for t in range(1, n_k + 1):
            pattern.append(
                ("small", ValExp(Fraction(-(n_k - t + 1)) - Fraction(1, 2)))
            )
        pattern.append(("psi", m_k))
        for j in range(1, m_k):
            pattern.append(("near_one", ValExp(Fraction(-3, 2))))
            pattern.append(("small", ValExp(Fraction(-3, 2))))
            pattern.append(("psi", m_k - j))
        # the step from the last Psi_1 point lands at I_k
    pattern.append(("near_one", ValExp(None)))
    return pattern
