"""
Propensity score matching experiments: treatment rules, propensity models,
greedy nearest-neighbor pairing, balance diagnostics and paired inference.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import logit

from .config import DEFAULT_MANY_TO_ONE_RATIO, REGRESSION_COVARIATES
from .exceptions import InsufficientPairsError, MatchingError, NoContrastError
from .glm import add_derived_columns, fit_logistic
from .stats import t_interval, t_two_sided_p, wilcoxon_signed_rank
from .trends import TrendClass

logger = logging.getLogger("vibrancy.psm")

Pair = Tuple[str, str]


class MatchMode(str, Enum):
    ONE_TO_ONE = "one_to_one"
    MANY_TO_ONE = "many_to_one"


@dataclass(frozen=True)
class AboveMedian:
    """Treated iff the measure is strictly above its median over defined units."""
    measure: str

    @property
    def label(self) -> str:
        return f"{self.measure} above median"


@dataclass(frozen=True)
class SignificantTrend:
    """Treated iff the measure's trend class equals direction."""
    measure: str
    direction: TrendClass

    @property
    def label(self) -> str:
        return f"{self.measure} trend {self.direction.value}"


TreatmentRule = Union[AboveMedian, SignificantTrend]


@dataclass
class Matching:
    pairs: List[Pair]
    mode: MatchMode
    dropped_treated: List[str] = field(default_factory=list)


@dataclass
class PairedInference:
    mean_diff: float
    ci_lower: float
    ci_upper: float
    t_stat: float
    t_p: float
    wilcoxon_p: float
    wilcoxon_method: str
    n_pairs: int

    @property
    def ci95(self) -> Tuple[float, float]:
        return (self.ci_lower, self.ci_upper)


@dataclass
class OddsRatio:
    """Discordant-pair odds ratio b/c; undefined when b or c is zero."""
    b: int
    c: int
    odds_ratio: Optional[float]
    ci_lower: Optional[float]
    ci_upper: Optional[float]

    @property
    def defined(self) -> bool:
        return self.odds_ratio is not None


@dataclass
class MatchedExperiment:
    name: str
    rule: TreatmentRule
    outcome: str
    labels: Dict[str, bool]
    scores: Dict[str, float]
    pairs: List[Pair]
    mode: MatchMode
    balance: pd.DataFrame
    dropped_treated: List[str]
    naive_diff: float
    odds_ratio: Optional[OddsRatio] = None

    @property
    def n_treated(self) -> int:
        return sum(self.labels.values())

    @property
    def n_control(self) -> int:
        return len(self.labels) - self.n_treated


def _defined(value: Any) -> bool:
    if value is None:
        return False
    try:
        return not math.isnan(float(value))
    except (TypeError, ValueError):
        return True


def define_treatment(values: Mapping[str, Any], rule: TreatmentRule) -> Dict[str, bool]:
    """
    Label units treated (True) or control (False).

    Units whose value is undefined get no label.

    Args:
        values: id -> measure value (AboveMedian) or trend class (SignificantTrend)
        rule: treatment rule

    Returns:
        dict: id -> treated flag, in ascending id order
    """
    defined = {k: v for k, v in sorted(values.items()) if _defined(v)}
    if isinstance(rule, AboveMedian):
        numbers = np.array([float(v) for v in defined.values()])
        if len(numbers) == 0 or np.ptp(numbers) == 0:
            raise NoContrastError(f"{rule.label}: all values are equal, no treatment contrast")
        median = float(np.median(numbers))
        labels = {k: float(v) > median for k, v in defined.items()}
    else:
        direction = TrendClass(rule.direction)
        labels = {k: TrendClass(v) == direction for k, v in defined.items()}
    treated = sum(labels.values())
    if treated == 0 or treated == len(labels):
        raise NoContrastError(f"{rule.label}: {treated} treated of {len(labels)} units, no contrast")
    return labels


def estimate_propensity(
    profiles: pd.DataFrame,
    labels: Mapping[str, bool],
    covariates: Sequence[str] = REGRESSION_COVARIATES,
) -> Dict[str, float]:
    """
    Propensity scores from a logistic regression of the treatment label on covariates.

    Covariates constant over the labeled units are left out of the model.

    Args:
        profiles: covariates indexed by blockgroup_id
        labels: id -> treated flag; every id must have complete covariates
        covariates: predictor columns

    Returns:
        dict: id -> fitted probability of treatment
    """
    frame = add_derived_columns(profiles)
    ids = sorted(labels)
    data = frame.loc[ids, list(covariates)].astype(float)
    if data.isna().any().any():
        raise MatchingError("Propensity covariates are undefined for some labeled units")
    used = [c for c in covariates if np.ptp(data[c].to_numpy()) > 0]
    if len(used) < len(covariates):
        logger.warning(f"Dropping constant propensity covariates: {', '.join(c for c in covariates if c not in used)}")
    X = np.column_stack([data[used].to_numpy(), np.ones(len(ids))]) if used else np.ones((len(ids), 1))
    y = np.array([1.0 if labels[i] else 0.0 for i in ids])
    fit = fit_logistic(X, y, used + ["const"])
    eta = X @ fit.coefficients
    probabilities = 1.0 / (1.0 + np.exp(-eta))
    return dict(zip(ids, probabilities.tolist()))


def matching_distance(scores: Mapping[str, float], match_on: str = "logit") -> Dict[str, float]:
    """Values matched on: the logit of the propensity (default) or the propensity itself."""
    if match_on == "probability":
        return dict(scores)
    if match_on != "logit":
        raise MatchingError(f"Unknown matching scale '{match_on}'")
    clipped = np.clip(np.array(list(scores.values()), dtype=float), 1e-15, 1 - 1e-15)
    return dict(zip(scores.keys(), logit(clipped).tolist()))


def match_pairs(
    scores: Mapping[str, float],
    labels: Mapping[str, bool],
    mode: MatchMode = MatchMode.ONE_TO_ONE,
    caliper: Optional[float] = None,
) -> Matching:
    """
    Greedy nearest-neighbor matching on scores.

    ONE_TO_ONE processes treated units in descending score order (ties by id);
    each takes the closest unmatched control, ties broken by the smaller
    control id. MANY_TO_ONE matches every treated unit to its closest control
    with replacement. Treated units left without a control, or without one
    within the caliper, are reported in dropped_treated.

    Args:
        scores: id -> matching value
        labels: id -> treated flag
        mode: matching mode
        caliper: maximum absolute score distance, None for no limit

    Returns:
        Matching: (treated_id, control_id) pairs in processing order
    """
    treated = sorted((i for i, t in labels.items() if t), key=lambda i: (-scores[i], i))
    controls = sorted(i for i, t in labels.items() if not t)
    if not treated or not controls:
        raise NoContrastError(f"Matching needs treated and control units ({len(treated)} treated, {len(controls)} control)")
    control_scores = np.array([scores[c] for c in controls], dtype=float)
    available = np.ones(len(controls), dtype=bool)

    pairs: List[Pair] = []
    dropped: List[str] = []
    for t in treated:
        distance = np.abs(control_scores - scores[t])
        if mode == MatchMode.ONE_TO_ONE:
            distance = np.where(available, distance, np.inf)
        if caliper is not None:
            distance = np.where(distance <= caliper, distance, np.inf)
        best = int(np.argmin(distance))
        if not np.isfinite(distance[best]):
            dropped.append(t)
            continue
        pairs.append((t, controls[best]))
        if mode == MatchMode.ONE_TO_ONE:
            available[best] = False
    if dropped:
        logger.info(f"{len(dropped)} treated units left unmatched")
    return Matching(pairs=pairs, mode=mode, dropped_treated=dropped)


def _group_values(frame: pd.DataFrame, ids: Sequence[str], column: str) -> np.ndarray:
    return frame.loc[list(ids), column].to_numpy(dtype=float)


def standardized_differences(
    profiles: pd.DataFrame,
    labels: Mapping[str, bool],
    pairs: Optional[Sequence[Pair]] = None,
    covariates: Sequence[str] = REGRESSION_COVARIATES,
) -> Dict[str, float]:
    """
    Standardized mean difference (treated minus control) per covariate.

    The denominator is always the pooled standard deviation of the unmatched
    groups, sqrt((s_T^2 + s_C^2) / 2). With pairs, the means are taken over
    the pair lists, so a control matched several times counts several times.

    Returns:
        dict: covariate -> SMD, NaN where the pooled variance is zero
    """
    frame = add_derived_columns(profiles)
    treated = [i for i, t in labels.items() if t]
    control = [i for i, t in labels.items() if not t]
    result: Dict[str, float] = {}
    for column in covariates:
        t_values = _group_values(frame, treated, column)
        c_values = _group_values(frame, control, column)
        pooled = math.sqrt((np.var(t_values, ddof=1) + np.var(c_values, ddof=1)) / 2.0) \
            if len(t_values) > 1 and len(c_values) > 1 else float("nan")
        if pairs is not None:
            t_values = _group_values(frame, [p[0] for p in pairs], column)
            c_values = _group_values(frame, [p[1] for p in pairs], column)
        if not pooled > 0 or len(t_values) == 0:
            result[column] = float("nan")
            continue
        result[column] = float((t_values.mean() - c_values.mean()) / pooled)
    return result


def balance_table(
    profiles: pd.DataFrame,
    labels: Mapping[str, bool],
    pairs: Sequence[Pair],
    covariates: Sequence[str] = REGRESSION_COVARIATES,
) -> pd.DataFrame:
    before = standardized_differences(profiles, labels, None, covariates)
    after = standardized_differences(profiles, labels, pairs, covariates)
    return pd.DataFrame({
        "covariate": list(covariates),
        "smd_before": [before[c] for c in covariates],
        "smd_after": [after[c] for c in covariates],
    })


def paired_inference(outcome: Mapping[str, float], pairs: Sequence[Pair]) -> PairedInference:
    """
    Inference on within-pair differences (treated minus control).

    Args:
        outcome: id -> outcome value for every paired unit
        pairs: (treated_id, control_id) pairs

    Returns:
        PairedInference: mean difference, t-based 95% CI on n-1 df, t test and
        Wilcoxon signed-rank p-values
    """
    if len(pairs) < 2:
        raise InsufficientPairsError(f"Paired inference needs at least 2 pairs, got {len(pairs)}")
    diffs = np.array([float(outcome[t]) - float(outcome[c]) for t, c in pairs])
    if not np.all(np.isfinite(diffs)):
        raise MatchingError("Outcome is undefined for some matched units")
    n = len(diffs)
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    se = sd / math.sqrt(n)
    if se > 0:
        t_stat = mean / se
        t_p = t_two_sided_p(t_stat, n - 1)
        lower, upper = t_interval(mean, se, n - 1)
    else:
        t_stat = 0.0 if mean == 0 else math.copysign(math.inf, mean)
        t_p = 1.0 if mean == 0 else 0.0
        lower = upper = mean
    _, wilcoxon_p, method = wilcoxon_signed_rank(diffs)
    return PairedInference(
        mean_diff=mean, ci_lower=lower, ci_upper=upper, t_stat=t_stat, t_p=t_p,
        wilcoxon_p=wilcoxon_p, wilcoxon_method=method, n_pairs=n,
    )


def matched_odds_ratio(binary_outcome: Mapping[str, float], pairs: Sequence[Pair]) -> OddsRatio:
    """
    Conditional odds ratio from discordant pairs.

    b counts pairs with the treated unit 1 and the control 0, c the reverse.
    The 95% CI is exp(ln(b/c) +- 1.96 sqrt(1/b + 1/c)).
    """
    b = c = 0
    for t, ctrl in pairs:
        y_t, y_c = binary_outcome[t], binary_outcome[ctrl]
        if y_t not in (0, 1) or y_c not in (0, 1):
            raise MatchingError("Odds ratio needs 0/1 outcomes")
        if y_t == 1 and y_c == 0:
            b += 1
        elif y_t == 0 and y_c == 1:
            c += 1
    if b == 0 or c == 0:
        return OddsRatio(b=b, c=c, odds_ratio=None, ci_lower=None, ci_upper=None)
    log_or = math.log(b / c)
    half = 1.96 * math.sqrt(1.0 / b + 1.0 / c)
    return OddsRatio(b=b, c=c, odds_ratio=b / c, ci_lower=math.exp(log_or - half), ci_upper=math.exp(log_or + half))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

# outcome name -> (source column, binary)
OUTCOMES: Dict[str, Tuple[str, bool]] = {
    "log_crime_total": ("log_crime_total", False),
    "log_crime_violent": ("log_crime_violent", False),
    "log_crime_nonviolent": ("log_crime_nonviolent", False),
    "log_crime_vice": ("log_crime_vice", False),
    "crime_trend_slope": ("crime_total_slope", False),
    "crime_trend_positive": ("crime_total_positive", True),
    "crime_trend_negative": ("crime_total_negative", True),
}


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    rule: TreatmentRule
    outcome: str


def experiment_catalog() -> List[ExperimentSpec]:
    """
    The two aggregate experiments (permits and spontaneous proportion above
    their medians, outcome log total crime) followed by the twelve trend
    experiments: four trend treatments crossed with three crime-trend outcomes.
    """
    specs = [
        ExperimentSpec("permits_above_median__log_crime_total", AboveMedian("n_events"), "log_crime_total"),
        ExperimentSpec(
            "spontaneity_above_median__log_crime_total", AboveMedian("spontaneous_proportion"), "log_crime_total",
        ),
    ]
    for measure, short in (("permits", "permits"), ("spontaneous_proportion", "spontaneity")):
        for direction in (TrendClass.POSITIVE, TrendClass.NEGATIVE):
            for outcome in ("crime_trend_slope", "crime_trend_positive", "crime_trend_negative"):
                specs.append(ExperimentSpec(
                    f"{short}_trend_{direction.value}__{outcome}", SignificantTrend(measure, direction), outcome,
                ))
    return specs


def select_experiments(names: Union[str, Sequence[str]]) -> List[ExperimentSpec]:
    catalog = experiment_catalog()
    if names == "all":
        return catalog
    by_name = {spec.name: spec for spec in catalog}
    unknown = [n for n in names if n not in by_name]
    if unknown:
        raise MatchingError(f"Unknown experiments: {', '.join(unknown)}")
    return [by_name[n] for n in names]


def _treatment_values(rule: TreatmentRule, measures: pd.DataFrame, trends: Optional[pd.DataFrame]) -> pd.Series:
    if isinstance(rule, AboveMedian):
        if rule.measure not in measures.columns:
            raise MatchingError(f"Unknown treatment measure '{rule.measure}'")
        return measures[rule.measure]
    column = f"{rule.measure}_class"
    if trends is None or column not in trends.columns:
        raise MatchingError(f"No trend classes for '{rule.measure}'")
    return trends[column]


def run_experiment(
    profiles: pd.DataFrame,
    measures: pd.DataFrame,
    trends: Optional[pd.DataFrame],
    rule: TreatmentRule,
    outcome_spec: str,
    name: str = "",
    covariates: Sequence[str] = REGRESSION_COVARIATES,
    match_on: str = "logit",
    caliper: Optional[float] = None,
    many_to_one_ratio: float = DEFAULT_MANY_TO_ONE_RATIO,
) -> Tuple[MatchedExperiment, PairedInference]:
    """
    Run one matching experiment end to end.

    Treatment labels come from every unit with a defined treatment value, so
    the median threshold does not depend on the outcome. Units enter the
    match when their covariates and outcome are also defined. MANY_TO_ONE
    matching is used when treated units outnumber controls by more than
    many_to_one_ratio.

    Args:
        profiles: covariates indexed by blockgroup_id
        measures: measure table indexed by blockgroup_id
        trends: wide trend frame indexed by blockgroup_id (needed for trend rules and outcomes)
        rule: treatment rule
        outcome_spec: key of OUTCOMES
        name: experiment name for logs and reports
        covariates: propensity model covariates
        match_on: 'logit' or 'probability'
        caliper: maximum distance in standard deviations of the matching values
        many_to_one_ratio: treated/control ratio above which matching is many-to-one

    Returns:
        tuple: (MatchedExperiment, PairedInference)
    """
    if outcome_spec not in OUTCOMES:
        raise MatchingError(f"Unknown outcome '{outcome_spec}'; known: {', '.join(OUTCOMES)}")
    column, binary = OUTCOMES[outcome_spec]
    sources = [add_derived_columns(profiles)[list(covariates)], measures]
    if trends is not None:
        sources.append(trends)
    frame = pd.concat(sources, axis=1, join="inner") if len(sources) > 1 else sources[0]
    frame = frame.loc[:, ~frame.columns.duplicated()]
    if column not in frame.columns:
        raise MatchingError(f"Outcome column '{column}' is not available")

    treatment = _treatment_values(rule, frame, frame if trends is not None else None)
    # the median threshold is city-wide; outcome and covariate gaps only remove units afterwards
    city_labels = define_treatment({str(i): v for i, v in treatment.items()}, rule)
    usable = frame[list(covariates)].notna().all(axis=1) & frame[column].notna() & treatment.map(_defined)
    units = frame.index[usable]
    labels = {str(i): city_labels[str(i)] for i in units}
    n_treated = sum(labels.values())
    n_control = len(labels) - n_treated
    if n_treated == 0 or n_control == 0:
        raise NoContrastError(
            f"{rule.label}: {n_treated} treated and {n_control} control units with a defined {outcome_spec}"
        )
    mode = MatchMode.MANY_TO_ONE if n_treated / n_control > many_to_one_ratio else MatchMode.ONE_TO_ONE

    scores = estimate_propensity(frame, labels, covariates)
    distance = matching_distance(scores, match_on)
    absolute_caliper = None
    if caliper is not None:
        absolute_caliper = caliper * float(np.std(list(distance.values()), ddof=1))
    matching = match_pairs(distance, labels, mode, absolute_caliper)

    outcome = {str(i): float(frame.at[i, column]) for i in units}
    inference = paired_inference(outcome, matching.pairs)
    treated_mean = np.mean([outcome[i] for i, t in labels.items() if t])
    control_mean = np.mean([outcome[i] for i, t in labels.items() if not t])
    odds = matched_odds_ratio(outcome, matching.pairs) if binary else None

    experiment = MatchedExperiment(
        name=name or f"{rule.label} -> {outcome_spec}", rule=rule, outcome=outcome_spec,
        labels=labels, scores=scores, pairs=matching.pairs, mode=mode,
        balance=balance_table(frame, labels, matching.pairs, covariates),
        dropped_treated=matching.dropped_treated, naive_diff=float(treated_mean - control_mean),
        odds_ratio=odds,
    )
    logger.info(
        f"Experiment {experiment.name}: {n_treated} treated, {n_control} control, "
        f"{inference.n_pairs} pairs ({mode.value}), estimate {inference.mean_diff:.4f}"
    )
    return experiment, inference
