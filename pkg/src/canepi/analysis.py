"""Incidence metrics, paired t-test, scenario comparison and CSV output."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ComputationError, DegenerateInputError, ParameterError


@dataclass(frozen=True)
class YearMetrics:
    year: int
    new_infections: int
    susceptible_person_years: float
    incidence_per_100py: float
    diagnosed_fraction: float
    stage_negative: int
    stage_pi: int
    stage_ap: int
    stage_aids: int
    new_diagnoses: int = 0
    deaths: int = 0
    steady_pairs: int = 0
    risk_factor: float = float("nan")
    therapy_mode: str = ""

    @property
    def population(self) -> int:
        return self.stage_negative + self.stage_pi + self.stage_ap + self.stage_aids


def incidence(new_infections: float, susceptible_py: float) -> float:
    """New infections per 100 person-years at risk."""
    if susceptible_py < 0:
        raise ParameterError(f"person-years must be non-negative, got {susceptible_py}")
    if susceptible_py == 0:
        if new_infections == 0:
            return 0.0
        raise ComputationError(f"{new_infections} infections over zero person-years")
    return 100.0 * new_infections / susceptible_py


def susceptible_person_years(susceptible_at_start: int, new_infections: int) -> float:
    """Person-years at risk; each incident case counts half a year."""
    return susceptible_at_start - new_infections / 2.0


# Regularized incomplete beta by Lentz's continued fraction.

def _beta_cf(a: float, b: float, x: float, eps: float = 1e-16, max_iter: int = 10_000) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ComputationError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ParameterError("incomplete beta needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ParameterError("incomplete beta needs 0 <= x <= 1")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student's t."""
    if df <= 0:
        raise ParameterError("degrees of freedom must be positive")
    a, b = df / 2.0, 0.5
    x = df / (df + t * t)
    if x < (a + 1.0) / (a + b + 2.0):
        return regularized_incomplete_beta(a, b, x)
    # small |t|: take the complement with 1 - x formed exactly
    return 1.0 - regularized_incomplete_beta(b, a, t * t / (df + t * t))


@dataclass(frozen=True)
class TTestReport:
    t: float
    df: int
    p_value: float
    alpha: float
    reject: bool
    mean_difference: float
    n: int

    def __str__(self):
        verdict = "reject" if self.reject else "fail to reject"
        return (f"paired t-test: n={self.n} t={self.t:.6f} df={self.df} p={self.p_value:.6g} "
                f"alpha={self.alpha} -> {verdict} H0 (no difference)")


def paired_t_test(series_a: Sequence[float], series_b: Sequence[float], alpha: float = 0.05) -> TTestReport:
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError(f"series must be 1-d and of equal length, got {a.shape} and {b.shape}")
    n = len(a)
    if n < 2:
        raise ParameterError("paired t-test needs at least two pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateInputError("all paired differences are identical")
    mean = float(d.mean())
    t = mean / (sd / math.sqrt(n))
    p = student_t_sf2(t, n - 1)
    return TTestReport(t=t, df=n - 1, p_value=p, alpha=alpha, reject=p < alpha, mean_difference=mean, n=n)


@dataclass(frozen=True)
class ComparisonRow:
    year: int
    scenario: str
    incidence: float
    reference: float
    pct_vs_rs: float

    @property
    def direction(self) -> str:
        if self.pct_vs_rs > 0:
            return "↑"
        if self.pct_vs_rs < 0:
            return "↓"
        return "="

    def __str__(self):
        return f"{self.year} {self.scenario}: {self.incidence:.5f} {abs(self.pct_vs_rs):.2f}% {self.direction}"


def _incidence_by_year(result) -> Mapping[int, float]:
    if hasattr(result, "mean_incidence"):
        return result.mean_incidence()
    return {int(y): float(v) for y, v in result.items()}


def scenario_comparison_table(results: Mapping[str, object], years: Sequence[int],
                              reference: str = "rs") -> list[ComparisonRow]:
    """Percentage difference of each scenario's mean incidence from the reference.

    ``results`` maps scenario name to a simulation result or to a plain
    ``{year: incidence}`` mapping.
    """
    if reference not in results:
        raise ParameterError(f"reference scenario {reference!r} missing")
    series = {name: _incidence_by_year(r) for name, r in results.items()}
    rows = []
    for year in years:
        for name, values in series.items():
            if year not in values:
                raise ParameterError(f"scenario {name!r} has no value for year {year}")
        ref = series[reference][year]
        for name, values in series.items():
            if name == reference:
                continue
            pct = 100.0 * (values[year] - ref) / ref if ref else float("nan")
            rows.append(ComparisonRow(year, name, values[year], ref, pct))
    return rows


SCENARIO_COLUMNS = ["year", "mean_incidence_per_100py", "sd_incidence", "mean_diagnosed_fraction",
                    "new_infections_mean", "stage_negative", "stage_pi", "stage_ap", "stage_aids"]
COMPARISON_COLUMNS = ["year", "scenario", "incidence", "pct_vs_rs"]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _header_lines(metadata: Optional[dict]) -> list[str]:
    lines = []
    for key, value in (metadata or {}).items():
        text = value if isinstance(value, str) else json.dumps(value, sort_keys=True, default=str)
        lines.append(f"# {key}: {text}")
    return lines


def _write(path: Path, header: list[str], columns: list[str], rows: list[list[str]]) -> None:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def scenario_rows(result) -> list[list[str]]:
    inc_mean, inc_sd = result.mean("incidence_per_100py"), result.sd("incidence_per_100py")
    diag = result.mean("diagnosed_fraction")
    new = result.mean("new_infections")
    stages = [result.mean(s) for s in ("stage_negative", "stage_pi", "stage_ap", "stage_aids")]
    rows = []
    for k, year in enumerate(result.years):
        rows.append([str(year), _fmt(inc_mean[k]), _fmt(inc_sd[k]), _fmt(diag[k]), _fmt(new[k]),
                     *(_fmt(s[k]) for s in stages)])
    return rows


def write_scenario_csv(path: Path, result, metadata: Optional[dict] = None) -> None:
    _write(path, _header_lines(metadata), SCENARIO_COLUMNS, scenario_rows(result))


def write_comparison_csv(path: Path, rows: Sequence[ComparisonRow], metadata: Optional[dict] = None) -> None:
    body = [[str(r.year), r.scenario, _fmt(r.incidence), f"{r.pct_vs_rs:.2f}"] for r in rows]
    _write(path, _header_lines(metadata), COMPARISON_COLUMNS, body)


def write_edge_csv(path: Path, edges) -> None:
    _write(path, [], ["node_i", "node_j", "tag"], [[str(i), str(j), tag] for i, j, tag in edges.rows()])


def read_table(path: Path) -> list[dict]:
    """Rows of a CSV written by this package, skipping ``#`` comment lines."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def load_historical(path: Path) -> dict[int, float]:
    """Two-column CSV ``year,incidence_per_100py`` into a year -> value map."""
    try:
        rows = read_table(path)
    except OSError as exc:
        raise ParameterError(f"cannot read historical series {path}: {exc}") from exc
    if not rows or set(rows[0]) != {"year", "incidence_per_100py"}:
        raise ParameterError(f"{path}: expected header 'year,incidence_per_100py'")
    try:
        return {int(r["year"]): float(r["incidence_per_100py"]) for r in rows}
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"{path}: {exc}") from exc


def validate_against_history(result, historical: Mapping[int, float], alpha: float = 0.05) -> TTestReport:
    """Paired t-test of simulated mean incidence against observed values on shared years."""
    simulated = _incidence_by_year(result)
    years = sorted(set(simulated) & set(historical))
    if len(years) < 2:
        raise ParameterError("fewer than two overlapping years with the historical series")
    return paired_t_test([simulated[y] for y in years], [historical[y] for y in years], alpha)
