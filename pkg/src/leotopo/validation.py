"""Argument checks shared by the estimators and the command line."""
from __future__ import annotations

from sklearn.utils.validation import check_is_fitted  # noqa: F401  (re-exported)

from .annealing import SurrogateWeights
from .shell import Snapshot
from .stable import CandidateLinks


def check_snapshot(x) -> Snapshot:
    if not isinstance(x, Snapshot):
        raise TypeError(f"expected a Snapshot, got {type(x).__name__}")
    if len(x) == 0:
        raise ValueError("snapshot has no satellites")
    return x


def check_candidates(candidates, snapshot: Snapshot) -> CandidateLinks:
    if not isinstance(candidates, CandidateLinks):
        raise TypeError(f"expected CandidateLinks, got {type(candidates).__name__}")
    if candidates.snapshot is not snapshot and candidates.snapshot != snapshot:
        raise ValueError("candidate links were built for a different snapshot")
    return candidates


def check_budget(budget, minimum: int = 2) -> int:
    if isinstance(budget, bool) or int(budget) != budget or budget < minimum:
        raise ValueError(f"degree budget must be an integer >= {minimum}, got {budget!r}")
    return int(budget)


def parse_weights(text: str) -> SurrogateWeights:
    """``"a,b,c"`` in table order (alpha_L, alpha_U, alpha_M)."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 3:
        raise ValueError(f"weights need three comma-separated values, got {text!r}")
    try:
        l, u, m = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"weights must be numbers, got {text!r}") from None
    return SurrogateWeights.from_table(l, u, m)


def parse_range(text: str) -> list[int]:
    """``"10..100"`` (step 10), ``"10..100:5"`` or ``"10,20,50"``."""
    text = str(text).strip()
    if ".." in text:
        lo, _, rest = text.partition("..")
        hi, _, step = rest.partition(":")
        lo, hi = int(lo), int(hi)
        step = int(step) if step else 10
        if step <= 0 or hi < lo:
            raise ValueError(f"bad range {text!r}")
        return list(range(lo, hi + 1, step))
    vals = [int(v) for v in text.split(",") if v.strip()]
    if not vals or min(vals) < 1:
        raise ValueError(f"bad pair counts {text!r}")
    return vals
