"""Tiered risk assessment and regression-ready feature export."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .errors import ConfigError, EmptyList, InvalidPolicy
from .metrics import ContactMetrics
from .preprocess import read_key_values


class Tier(str, enum.Enum):
    NONE = "none"
    VIGILANCE = "vigilance"
    ISOLATE = "isolate"


_TIER_RANK = {Tier.NONE: 0, Tier.VIGILANCE: 1, Tier.ISOLATE: 2}


@dataclass(frozen=True)
class RiskPolicy:
    vigilance_threshold_s: int = 1
    isolate_threshold_s: int = 900
    isolate_days_min: int = 5
    isolate_days_max: int = 14
    count_lagged: bool = False
    lag_weights: dict[int, float] = field(default_factory=dict)
    default_lag_weight: float = 0.0

    def __post_init__(self):
        if not 0 <= self.vigilance_threshold_s <= self.isolate_threshold_s:
            raise InvalidPolicy("need 0 <= vigilance_threshold_s <= isolate_threshold_s")
        if not 0 <= self.isolate_days_min <= self.isolate_days_max:
            raise InvalidPolicy("need 0 <= isolate_days_min <= isolate_days_max")
        if self.default_lag_weight < 0 or any(w < 0 for w in self.lag_weights.values()):
            raise InvalidPolicy("lag weights must be non-negative")
        if any(k < 1 for k in self.lag_weights):
            raise InvalidPolicy("lag weights are keyed by offsets >= 1")

    def lag_weight(self, k: int) -> float:
        return self.lag_weights.get(k, self.default_lag_weight)

    def tier_for(self, exposure_s: float) -> Tier:
        if exposure_s >= self.isolate_threshold_s:
            return Tier.ISOLATE
        if exposure_s >= self.vigilance_threshold_s and exposure_s > 0:
            return Tier.VIGILANCE
        return Tier.NONE

    def recommendation(self, tier: Tier) -> str:
        if tier is Tier.ISOLATE:
            return (f"Exposure reached {self.isolate_threshold_s // 60} minutes or more: "
                    f"self-isolate for {self.isolate_days_min} to {self.isolate_days_max} days.")
        if tier is Tier.VIGILANCE:
            return (f"Exposure below {self.isolate_threshold_s // 60} minutes: wear a mask, wash hands often, "
                    "limit contact with at-risk people and monitor body temperature.")
        return "No contact with contagious agents was found."


_POLICY_INT_KEYS = ("vigilance_threshold_s", "isolate_threshold_s", "isolate_days_min", "isolate_days_max")


def parse_policy(text: str) -> RiskPolicy:
    """Policy from ``key = value`` text; per-lag weights use ``lag_weight.<k> = <w>``."""
    kwargs: dict = {}
    weights: dict[int, float] = {}
    try:
        for key, raw in read_key_values(text).items():
            if key in _POLICY_INT_KEYS:
                kwargs[key] = int(raw)
            elif key == "count_lagged":
                kwargs[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif key == "default_lag_weight":
                kwargs[key] = float(raw)
            elif key.startswith("lag_weight."):
                weights[int(key.split(".", 1)[1])] = float(raw)
            else:
                raise InvalidPolicy(f"unknown policy key {key!r}")
    except (ValueError, ConfigError) as exc:
        raise InvalidPolicy(str(exc)) from None
    return RiskPolicy(lag_weights=weights, **kwargs)


def load_policy(path=None) -> RiskPolicy:
    if path is None:
        return RiskPolicy()
    with open(path, encoding="utf-8") as fh:
        return parse_policy(fh.read())


@dataclass(frozen=True)
class RiskAssessment:
    tier: Tier
    simultaneous_exposure_s: int
    lagged_exposure_s: int
    contributing_agents: int
    recommendation: str
    scored_exposure_s: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tier"] = self.tier.value
        return d


def assess(metrics: ContactMetrics | Sequence[ContactMetrics], policy: RiskPolicy | None = None) -> RiskAssessment:
    """Tier from simultaneous exposure, summed over every contagious contributor.

    Lagged contact is always reported; it only moves the tier when
    ``policy.count_lagged`` is set, weighted per lag offset.
    """
    policy = policy or RiskPolicy()
    items = [metrics] if isinstance(metrics, ContactMetrics) else list(metrics)
    simultaneous = lagged = 0
    scored = 0.0
    contributors = 0
    for m in items:
        if m.window_s <= 0:
            raise ValueError("metrics.window_s must be positive")
        simultaneous += m.sc_tot_raw * m.window_s
        lagged += m.lagged_raw * m.window_s
        scored += m.sc_tot_raw * m.window_s
        if policy.count_lagged:
            scored += sum(policy.lag_weight(k) * c * m.window_s for k, c in m.lag_profile.items())
        contributors += m.c_tot_raw > 0
    tier = policy.tier_for(scored)
    return RiskAssessment(tier, simultaneous, lagged, contributors, policy.recommendation(tier), scored)


@dataclass(frozen=True)
class AgentFeatures:
    agent: str
    c_tot_raw: int
    sc_tot_raw: int
    c_sus: float
    sc_sus: float
    maxline_central: int
    maxline_lagged: int
    lag_profile: dict[int, int]


FEATURE_COLUMNS = ("agent", "c_tot_raw", "sc_tot_raw", "c_sus", "sc_sus",
                   "maxline_central", "maxline_lagged", "lag_profile")


@dataclass(frozen=True)
class FeatureVector:
    agents: list[AgentFeatures]
    vector_count: int
    c_tot_raw: int
    sc_tot_raw: int
    lag_profile: dict[int, int]

    def to_csv(self) -> str:
        """One row per contagious agent; ``lag_profile`` encoded as ``k:count`` pairs joined by ``;``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FEATURE_COLUMNS)
        for a in self.agents:
            lags = ";".join(f"{k}:{c}" for k, c in sorted(a.lag_profile.items()))
            w.writerow([a.agent, a.c_tot_raw, a.sc_tot_raw, repr(a.c_sus), repr(a.sc_sus),
                        a.maxline_central, a.maxline_lagged, lags])
        return buf.getvalue()

    def to_dict(self) -> dict:
        def lags(p):
            return {str(k): v for k, v in sorted(p.items())}
        return {
            "vector_count": self.vector_count,
            "c_tot_raw": self.c_tot_raw,
            "sc_tot_raw": self.sc_tot_raw,
            "lag_profile": lags(self.lag_profile),
            "agents": [{**asdict(a), "lag_profile": lags(a.lag_profile)} for a in self.agents],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def export_features(per_agent: Sequence[ContactMetrics], agent_ids: Sequence[str] | None = None) -> FeatureVector:
    per_agent = list(per_agent)
    if not per_agent:
        raise EmptyList("no per-agent metrics to export")
    if agent_ids is None:
        agent_ids = [str(i) for i in range(len(per_agent))]
    if len(agent_ids) != len(per_agent):
        raise ValueError("agent_ids and metrics differ in length")
    rows = []
    merged: dict[int, int] = {}
    for aid, m in zip(agent_ids, per_agent):
        rows.append(AgentFeatures(aid, m.c_tot_raw, m.sc_tot_raw, m.c_sus, m.sc_sus,
                                  m.maxline_central, m.maxline_lagged, dict(m.lag_profile)))
        for k, c in m.lag_profile.items():
            merged[k] = merged.get(k, 0) + c
    return FeatureVector(
        agents=rows,
        vector_count=sum(m.c_tot_raw > 0 for m in per_agent),
        c_tot_raw=sum(m.c_tot_raw for m in per_agent),
        sc_tot_raw=sum(m.sc_tot_raw for m in per_agent),
        lag_profile=dict(sorted(merged.items())),
    )
