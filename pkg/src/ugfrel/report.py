from __future__ import annotations

from typing import Any, Optional, Sequence

from .oracle import MonteCarloResult, OracleCheck, OracleResult
from .stochastic import DiscretizedDistribution
from .system import ReliabilityReport
from .ugf import UFunction, make_ufunction

# text output shows this many leading terms of long u-functions
TEXT_TERM_LIMIT = 12


def terms_payload(u: UFunction) -> list[list[float]]:
    return u.to_pairs()


def ufunction_from_terms(terms: Sequence[Sequence[float]]) -> UFunction:
    return make_ufunction((float(v), float(p)) for v, p in terms)


def report_payload(
    report: ReliabilityReport,
    *,
    oracle: Optional[OracleResult] = None,
    check: Optional[OracleCheck] = None,
    monte_carlo: Optional[MonteCarloResult] = None,
) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "lole_hr_per_yr": report.lole,
        "eens_mwh_per_yr": report.eens_mwh,
        "loss_probability": report.loss_probability,
        "expected_unserved_kw": report.expected_unserved_kw,
        "horizon_hours": report.horizon_hours,
        "strict_loss": report.strict_loss,
        "availability_at_peak_load": report.availability_at_peak,
        "state_counts": report.state_counts._asdict(),
        "redundant_states": dict(report.redundant),
        "generation_terms": terms_payload(report.generation_ufunction),
        "load_terms": terms_payload(report.load_ufunction),
    }
    if oracle is not None:
        section: dict[str, Any] = {
            "loss_probability": oracle.loss_probability,
            "expected_unserved_kw": oracle.expected_unserved_kw,
            "total_probability": oracle.total_probability,
            "joint_states": oracle.n_states,
        }
        if check is not None:
            section.update(check._asdict())
        payload["oracle"] = section
    if monte_carlo is not None:
        payload["monte_carlo"] = monte_carlo._asdict()
    return payload


def format_terms(u: UFunction, *, limit: Optional[int] = None, indent: str = "  ") -> list[str]:
    terms = u.terms if limit is None else u.terms[:limit]
    lines = [f"{indent}{t.value:>12.4g}  {t.probability:.4g}" for t in terms]
    if limit is not None and len(u) > limit:
        lines.append(f"{indent}... ({len(u) - limit} more terms)")
    return lines


def format_report(
    report: ReliabilityReport,
    *,
    oracle: Optional[OracleResult] = None,
    check: Optional[OracleCheck] = None,
    monte_carlo: Optional[MonteCarloResult] = None,
) -> str:
    lines: list[str] = []
    sc = report.state_counts
    loss_rule = "L > G" if report.strict_loss else "L >= G"

    lines.append(f"LOLE: {report.lole:.4g} h over {report.horizon_hours} h")
    lines.append(f"EENS: {report.eens_mwh:.4g} MWh")
    lines.append(f"loss probability: {report.loss_probability:.4g} ({loss_rule})")
    lines.append(f"availability at peak load: {report.availability_at_peak:.4g}")
    lines.append("")
    lines.append("Terms per component:")
    for name in ("solar", "wind", "ev", "transformer", "generation"):
        delta = report.redundant.get(name, 0)
        lines.append(f"  {name:<12} {getattr(sc, name):>6}  (collected {delta})")
    lines.append("")
    lines.append(f"Generation ({len(report.generation_ufunction)} terms):")
    lines.extend(format_terms(report.generation_ufunction, limit=TEXT_TERM_LIMIT))
    lines.append("")
    lines.append(f"Load ({len(report.load_ufunction)} terms):")
    lines.extend(format_terms(report.load_ufunction))

    if oracle is not None:
        lines.append("")
        lines.append(f"Oracle ({oracle.n_states} joint states):")
        lines.append(f"  loss probability: {oracle.loss_probability:.4g}")
        lines.append(f"  expected unserved: {oracle.expected_unserved_kw:.4g} kW")
        if check is not None:
            verdict = "match" if check.matches else "MISMATCH"
            lines.append(
                f"  {verdict} (relative error {check.loss_rel_error:.2g} / {check.unserved_rel_error:.2g})"
            )
    if monte_carlo is not None:
        mc = monte_carlo
        lines.append("")
        lines.append(f"Monte Carlo ({mc.n_samples} samples, seed {mc.seed}):")
        lines.append(f"  loss probability: {mc.loss_probability:.4g} +/- {mc.loss_probability_ci:.2g}")
        lines.append(f"  EENS: {mc.eens_kwh / 1000.0:.4g} +/- {mc.eens_kwh_ci / 1000.0:.2g} MWh")

    return "\n".join(lines).rstrip() + "\n"


def ufunction_payload(name: str, u: UFunction) -> dict[str, Any]:
    return {"component": name, "n_terms": len(u), "terms": terms_payload(u)}


def format_ufunction(name: str, u: UFunction) -> str:
    lines = [f"{name} ({len(u)} terms):", *format_terms(u)]
    return "\n".join(lines) + "\n"


def discretization_payload(dist: DiscretizedDistribution) -> dict[str, Any]:
    return {
        "n_states": dist.n_states,
        "step": dist.step,
        "max": dist.max_value,
        "states": [[v, p] for v, p in zip(dist.state_values.tolist(), dist.state_probs.tolist())],
    }


def format_discretization(dist: DiscretizedDistribution) -> str:
    lines = [f"{'state':>6}  {'value':>10}  probability"]
    for i, (v, p) in enumerate(zip(dist.state_values.tolist(), dist.state_probs.tolist()), start=1):
        lines.append(f"{i:>6}  {v:>10.4g}  {p:.4g}")
    return "\n".join(lines) + "\n"
