"""Finite checks of the weight-sequence conditions behind Komatsu classes.

For a positive sequence ``M_0, ..., M_K`` and constants ``A, H > 0``:

1. ``M_0 = 1``
2. ``M_{k+1} <= A H^k M_k``                         for ``0 <= k <= K-1``
3. ``M_{2k} <= A H^k min_{0<=q<=k} M_q M_{k-q}``     for ``0 <= 2k <= K``

Condition 3 is evaluated exactly as written above. It fails for factorial
growth already at ``k = 2`` with ``A = 1, H = 2``; the report records that
instead of substituting a different inequality. All verdicts hold "up to K"
only. Comparisons use exact rational arithmetic on the given floats.
"""

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import InvariantError, ParseError, SearchCapExceeded
from .spectrum import _read_text

__all__ = [
    "KomatsuSequence",
    "ConditionResult",
    "KomatsuReport",
    "validate_conditions",
    "find_constants",
    "load_komatsu",
]


@dataclass(frozen=True)
class KomatsuSequence:
    values: tuple
    A: float
    H: float

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise InvariantError("empty weight sequence")
        for k, v in enumerate(vals):
            if not math.isfinite(v) or v <= 0:
                raise InvariantError(f"M_{k} = {v!r} is not positive and finite")
        for name in ("A", "H"):
            c = float(getattr(self, name))
            if not math.isfinite(c) or c <= 0:
                raise InvariantError(f"{name} must be positive and finite")
            object.__setattr__(self, name, c)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class ConditionResult:
    name: str
    holds: bool
    first_violation: int | None  # value of k at the first failure
    checked_up_to: int

    def as_dict(self) -> dict:
        return {
            "condition": self.name,
            "holds": self.holds,
            "first_violation": self.first_violation,
            "checked_up_to": self.checked_up_to,
        }


@dataclass(frozen=True)
class KomatsuReport:
    K: int
    conditions: tuple

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.conditions)

    def __getitem__(self, i: int) -> ConditionResult:
        return self.conditions[i - 1]

    def as_dict(self) -> dict:
        return {"K": self.K, "conditions": [c.as_dict() for c in self.conditions]}


def _check2(M, A, H, K):
    for k in range(K):
        if M[k + 1] > A * H**k * M[k]:
            return k
    return None


def _check3(M, A, H, K):
    for k in range(K // 2 + 1):
        rhs = A * H**k * min(M[q] * M[k - q] for q in range(k + 1))
        if M[2 * k] > rhs:
            return k
    return None


def validate_conditions(m: KomatsuSequence, K: int | None = None) -> KomatsuReport:
    K = len(m.values) - 1 if K is None else int(K)
    if K < 2:
        raise InvariantError("need K >= 2")
    if K > len(m.values) - 1:
        raise InvariantError(f"K = {K} exceeds the {len(m.values)} given values")
    M = [Fraction(v) for v in m.values[: K + 1]]
    A, H = Fraction(m.A), Fraction(m.H)
    v2 = _check2(M, A, H, K)
    v3 = _check3(M, A, H, K)
    c1 = ConditionResult("M0=1", M[0] == 1, None if M[0] == 1 else 0, 0)
    c2 = ConditionResult("M_{k+1}<=A*H^k*M_k", v2 is None, v2, K - 1)
    c3 = ConditionResult("M_{2k}<=A*H^k*min_q M_q*M_{k-q}", v3 is None, v3, K // 2)
    return KomatsuReport(K, (c1, c2, c3))


def find_constants(
    values: Sequence[float],
    K: int | None = None,
    a_cap: float | None = None,
    h_cap: float = 1e12,
):
    """Constants ``(A, H)`` for conditions 1-2 up to ``K``: smallest H, then smallest A.

    ``H`` is minimised subject to ``A <= a_cap``. The default cap is the
    least admissible ``A``, namely ``M_1 / M_0`` from the ``k = 0`` inequality.
    Given ``A`` the least ``H`` is ``max_k (M_{k+1} / (A M_k))^{1/k}``; it is
    nudged upward ulp by ulp until the exact check accepts it.
    """
    vals = [float(v) for v in values]
    K = len(vals) - 1 if K is None else int(K)
    if K < 2 or K > len(vals) - 1:
        raise InvariantError(f"K must lie in 2..{len(vals) - 1}")
    probe = KomatsuSequence(vals, 1.0, 1.0)  # validates positivity
    if probe.values[0] != 1.0:
        raise SearchCapExceeded("condition M_0 = 1 fails; no constants can repair it")
    ratios = [vals[k + 1] / vals[k] for k in range(K)]
    a_min = ratios[0]
    A = a_min if a_cap is None else float(a_cap)
    if A < a_min:
        # rounding in the ratio can put the exact bound one ulp higher
        if Fraction(vals[1]) > Fraction(A) * Fraction(vals[0]):
            raise SearchCapExceeded(f"A must be at least M_1/M_0 = {a_min!r}, cap is {A!r}")
    while Fraction(vals[1]) > Fraction(A) * Fraction(vals[0]):
        A = math.nextafter(A, math.inf)
    H = max((ratios[k] / A) ** (1.0 / k) for k in range(1, K))
    H = max(H, math.ulp(0.0))
    for _ in range(64):
        if H > h_cap:
            break
        if validate_conditions(KomatsuSequence(vals, A, H), K)[2].holds:
            return A, H
        H = math.nextafter(H, math.inf)
    raise SearchCapExceeded(f"no H <= {h_cap!r} satisfies condition 2 with A = {A!r}")


def load_komatsu(source) -> KomatsuSequence:
    try:
        obj = json.loads(_read_text(source))
        return KomatsuSequence(tuple(obj["values"]), obj["A"], obj["H"])
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, InvariantError):
            raise
        raise ParseError(f"malformed komatsu json: {exc}") from exc
