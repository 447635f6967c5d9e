"""Capacity assembly from indexed circles, the ellipsoid oracle, Besse/Zoll.

The load-bearing rule: a nondegenerate critical circle with (even)
transverse index m is a candidate for capacity slot k = m/2 + 1, and c_k is
the smallest candidate action for that k.  The rule is validated, never
assumed: ellipsoid runs must reproduce the closed-form multiset oracle or
the acceptance suite fails.
"""

import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InsufficientCapacities, MissingIndexData


def ellipsoid_oracle(a, k_max):
    """k_max smallest elements of the action multiset {m * a_i : m >= 1}.

    Brute-force enumeration with m <= k_max suffices: any value with m
    beyond that already dominates k_max multiples of the smallest semiaxis.
    """
    a = np.sort(np.asarray(a, dtype=float))
    if np.any(a <= 0):
        raise ValueError("semiaxes must be positive")
    vals = [m * ai for m in range(1, k_max + 1) for ai in a]
    return sorted(vals)[:k_max]


def ellipsoid_oracle_labeled(a, k_max):
    """Sorted multiset with provenance labels [(value, plane, multiple)].

    Ties are ordered by (value, plane, multiple) so that the position of a
    given orbit label in the list is deterministic.
    """
    a = np.sort(np.asarray(a, dtype=float))
    items = [
        (m * ai, i, m)
        for m in range(1, k_max + 1)
        for i, ai in enumerate(a)
    ]
    items.sort()
    return items[:k_max]


@dataclass
class CapacityEntry:
    k: int
    value: Optional[float]
    source: str = ""
    method: str = "index_dictionary"  # or "oracle"


@dataclass
class CapacityReport:
    n: int
    k_max: int
    caps: List[CapacityEntry]
    besse: Optional[dict] = None
    zoll: Optional[bool] = None
    warnings: List[str] = field(default_factory=list)

    def values(self):
        return [e.value for e in self.caps]

    def to_dict(self):
        return {
            "n": self.n,
            "k_max": self.k_max,
            "caps": [
                {"k": e.k, "value": e.value, "source": e.source, "method": e.method}
                for e in self.caps
            ],
            "besse": self.besse,
            "zoll": self.zoll,
            "warnings": list(self.warnings),
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)


def capacities_from_spectrum(circles, n, k_max):
    """Assemble c_1..c_k from circles carrying even transverse indices.

    Candidates for slot k are the circles with transverse index 2k - 2;
    c_k is their minimal action.  Monotonicity is enforced afterwards with
    a warning whenever enforcement changes a value (an undiscovered orbit),
    and slots with no candidate stay undetected rather than interpolated.
    """
    indexed = [c for c in circles if c.transverse_index is not None]
    if not indexed:
        raise MissingIndexData("no circle carries a transverse index")
    warnings = []
    odd = [c for c in indexed if c.transverse_index % 2 != 0]
    if odd:
        warnings.append(
            "odd transverse indices excluded: "
            + ", ".join(f"action {c.action:.6g} index {c.transverse_index}" for c in odd)
        )
        indexed = [c for c in indexed if c.transverse_index % 2 == 0]
    entries = []
    prev_value = None
    for k in range(1, k_max + 1):
        cands = [c for c in indexed if c.transverse_index == 2 * (k - 1)]
        if not cands:
            warnings.append(f"no candidate circle for c_{k}: slot undetected")
            entries.append(CapacityEntry(k, None, source="", method="index_dictionary"))
            continue
        best = min(cands, key=lambda c: c.action)
        value = best.action
        method = best.index_method or "index_dictionary"
        if prev_value is not None and value < prev_value - 1e-12:
            warnings.append(
                f"monotonicity enforcement at k={k}: {value:.8g} raised to "
                f"{prev_value:.8g} (suggests an undiscovered orbit)"
            )
            value = prev_value
        entries.append(
            CapacityEntry(k, float(value), source=best.provenance, method=method)
        )
        prev_value = value
    return CapacityReport(n=n, k_max=k_max, caps=entries, warnings=warnings)


def besse_check(report, tol=1e-6):
    """Smallest i with c_i = c_{i+n-1} (relative tol), as (i, tau, mu).

    mu follows the common-index formula mu = 2 (i - 1) + n.  Returns None
    when no coincidence exists among the available capacities.
    """
    n = report.n
    vals = report.values()
    if len(vals) < n or any(v is None for v in vals[:n]):
        raise InsufficientCapacities(f"need capacities through index {n}")
    found = None
    for i in range(1, len(vals) - n + 2):
        ci = vals[i - 1]
        cj = vals[i + n - 2]
        if ci is None or cj is None:
            continue
        if abs(ci - cj) < tol * abs(ci):
            found = {"i": i, "tau": float(ci), "mu": 2 * (i - 1) + n}
            break
    return found


def zoll_check(report, tol=1e-6):
    """True iff c_1 = c_n within relative tolerance."""
    vals = report.values()
    if len(vals) < report.n or vals[0] is None or vals[report.n - 1] is None:
        raise InsufficientCapacities(f"need capacities through index {report.n}")
    return bool(abs(vals[0] - vals[report.n - 1]) < tol * abs(vals[0]))
