"""Rank-gradient brackets and the finite subgroup-count inequalities."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from branchlab.errors import EmptyTable, InequalityViolated
from branchlab.lattice import GrowthTables

# closed forms as printed for the two builtin families (informational)
PRINTED_WINDOWS = {
    "grigorchuk": ("9/40", "6"),
    "gupta_sidki": ("1/8", "(3p^2-4p+1)/2"),
}
PRINTED_UPPER = {"gupta_sidki": "3p^2-4p+1"}


@dataclass
class AlphaEstimate:
    group_id: str
    k: int
    ell: int
    d: int
    dp_K: int
    dp_table: list  # (m, dp, stabilized)
    lower: Fraction
    optimistic: Fraction
    upper: Fraction
    per_m: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.lower <= self.upper

    def to_json(self) -> dict:
        out = {
            "schema": 1,
            "group_id": self.group_id,
            "k": self.k,
            "ell": self.ell,
            "d": self.d,
            "dp_K": self.dp_K,
            "lower": str(self.lower),
            "optimistic": str(self.optimistic),
            "upper": str(self.upper),
            "consistent": self.consistent,
            "per_m": [{"m": m, "dp": dp, "term": str(t), "stabilized": st} for m, dp, t, st in self.per_m],
            "note": "bracket for the self-replicating subgroup K; commensurability carries it to G",
        }
        kind = _family(self.group_id)
        if kind in PRINTED_UPPER:
            out["upper_printed"] = PRINTED_UPPER[kind]
        return out

    @classmethod
    def from_json(cls, data) -> "AlphaEstimate":
        per_m = [(r["m"], r["dp"], Fraction(r["term"]), r["stabilized"]) for r in data["per_m"]]
        return cls(data["group_id"], data["k"], data["ell"], data["d"], data["dp_K"],
                   [(m, dp, st) for m, dp, _, st in per_m], Fraction(data["lower"]),
                   Fraction(data["optimistic"]), Fraction(data["upper"]), per_m)


def _family(group_id: str) -> str:
    g = (group_id or "").lower().replace("-", "_")
    if g.startswith("grigorchuk"):
        return "grigorchuk"
    if g.startswith("gupta_sidki"):
        return "gupta_sidki"
    return g


def _rows(dp_table):
    if isinstance(dp_table, GrowthTables):
        return [(r.m, r.dp_max, r.stabilized) for r in dp_table.rows if r.dp_max is not None]
    if isinstance(dp_table, dict):
        return [(m, v, True) for m, v in sorted(dp_table.items())]
    out = []
    for row in dp_table:
        if len(row) == 2:
            out.append((row[0], row[1], True))
        else:
            out.append(tuple(row[:3]))
    return out


def alpha_estimate(dp_table, k: int, ell: int, d: int, dp_K: int, group_id: str = "group") -> AlphaEstimate:
    """lower = sup_m d_p(m) / (m + ell/(k-1)) over stabilized entries; upper = (k-1) d_p(K) + d."""
    if k < 2 or ell < 1 or d < 0 or dp_K < 0:
        raise ValueError("need k >= 2, ell >= 1 and non-negative ranks")
    rows = _rows(dp_table)
    if not rows:
        raise EmptyTable("the d_p table is empty")
    shift = Fraction(ell, k - 1)
    per_m = [(m, dp, Fraction(dp) / (m + shift), bool(st)) for m, dp, st in rows]
    base = Fraction((k - 1) * dp_K, ell)
    lower = max([base] + [t for _, _, t, st in per_m if st])
    optimistic = max([base] + [t for _, _, t, _ in per_m])
    upper = Fraction((k - 1) * dp_K + d)
    return AlphaEstimate(group_id, k, ell, d, dp_K, rows, lower, optimistic, upper, per_m)


def alpha_for_builtin(group, tables: GrowthTables, dp_K: int | None = None) -> AlphaEstimate:
    meta = group.metadata
    dK = dp_K if dp_K is not None else meta.get("dK", tables.dp_max(0))
    return alpha_estimate(tables, meta["k"], meta["l"], meta["d"], dK, group.name)


def window(alpha_lower: Fraction, alpha_upper: Fraction) -> tuple[Fraction, Fraction]:
    """Endpoints a^2/(4(a+1)) and a/2 of the asymptotic window."""
    return alpha_lower ** 2 / (4 * (alpha_lower + 1)), alpha_upper / 2


def check_subgroup_counts(tables: GrowthTables) -> list[dict]:
    """Violations of p^(mu (d_p(m-mu) - mu)) <= s_{p^m} <= p^(sum_{nu<m} d(nu))."""
    p = tables.p
    dps = [r.dp_max for r in tables.rows]
    out = []
    for r in tables.rows:
        m = r.m
        if any(x is None for x in dps[:m]):
            continue
        upper_exp = sum(dps[:m])
        if r.s_count > p ** upper_exp:
            out.append({"m": m, "side": "upper", "s": r.s_count, "bound_exp": upper_exp})
        for mu in range(m + 1):
            dq = dps[m - mu]
            if dq is None or mu > dq:
                continue
            e = mu * (dq - mu)
            if p ** e > r.s_count:
                out.append({"m": m, "side": "lower", "mu": mu, "s": r.s_count, "bound_exp": e})
    return out


def growth_bounds_report(tables: GrowthTables, alpha: AlphaEstimate | None = None) -> dict:
    violations = check_subgroup_counts(tables)
    rows = []
    for r in tables.rows:
        if r.m == 0:
            continue
        log_s = _log_p_exact(r.s_count, tables.p)
        rows.append({"m": r.m, "s_count": str(r.s_count), "log_p_s_over_m2": log_s / r.m ** 2})
    report = {
        "schema": 1,
        "group_id": tables.group_id,
        "p": tables.p,
        "level": tables.level,
        "inequalities_checked": len(tables.rows),
        "violations": violations,
        "pass": not violations,
        "informational": {"rows": rows},
    }
    info = report["informational"]
    if alpha is not None:
        lo, hi = window(alpha.lower, alpha.upper)
        info["window_from_bracket"] = [str(lo), str(hi)]
    kind = _family(tables.group_id)
    if kind in PRINTED_WINDOWS:
        info["window_printed"] = list(PRINTED_WINDOWS[kind])
    if violations:
        err = InequalityViolated(f"{len(violations)} subgroup-count inequalities fail")
        err.report = report
        raise err
    return report


def _log_p_exact(n: int, p: int) -> float:
    import math

    return math.log(n, p) if n > 0 else float("-inf")


def validate_report(data: dict) -> bool:
    """Recheck an emitted growth report or alpha estimate from its own numbers."""
    if "lower" in data and "upper" in data and "per_m" in data and "k" in data:
        est = AlphaEstimate.from_json(data)
        again = alpha_estimate(est.dp_table, est.k, est.ell, est.d, est.dp_K, est.group_id)
        return again.lower == est.lower and again.upper == est.upper and est.consistent
    if "per_m" in data:
        return not check_subgroup_counts(GrowthTables.from_json(data))
    return bool(data.get("pass", True))
