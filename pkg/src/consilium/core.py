"""Domain model shared across the package: segments, roles, judgments, turns, transcripts."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Any


class ConfigError(ValueError):
    """Raised when a RunConfig violates one or more of its bounds."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class VulnCategory(str, enum.Enum):
    FC = "FC"
    AE = "AE"
    AU = "AU"
    PU = "PU"

    @classmethod
    def parse(cls, code: str) -> "VulnCategory":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"unknown vulnerability category {code!r} (expected one of FC, AE, AU, PU)") from None


CATEGORY_DESCRIPTIONS: dict[VulnCategory, str] = {
    VulnCategory.FC: "library/API function call",
    VulnCategory.AE: "arithmetic expression",
    VulnCategory.AU: "array usage",
    VulnCategory.PU: "pointer usage",
}


class Role(str, enum.Enum):
    TESTER = "tester"
    DEVELOPER = "developer"

    @property
    def peer(self) -> "Role":
        return Role.DEVELOPER if self is Role.TESTER else Role.TESTER


class Stage(str, enum.Enum):
    INITIALIZATION = "initialization"
    DISCUSSION = "discussion"
    CONCLUSION = "conclusion"


class PromptStyle(str, enum.Enum):
    BASIC = "basic"
    COT = "cot"


class Approach(str, enum.Enum):
    SINGLE_ROLE = "single_role"
    MULTI_ROLE = "multi_role"


@dataclass(frozen=True)
class CodeSegment:
    id: str
    source_text: str
    label: bool
    category: VulnCategory

    def __post_init__(self):
        if not self.source_text.strip():
            raise ValueError(f"segment {self.id!r}: source_text is empty")


@dataclass(frozen=True)
class Judgment:
    verdict: int
    reasoning: str = ""

    def __post_init__(self):
        if self.verdict not in (0, 1):
            raise ValueError(f"verdict must be 0 or 1, got {self.verdict!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.verdict, "reasoning": self.reasoning}

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> "Judgment | None":
        if data is None:
            return None
        return cls(verdict=int(data["verdict"]), reasoning=data.get("reasoning", ""))


@dataclass(frozen=True)
class Turn:
    index: int
    role: Role
    stage: Stage
    raw_text: str
    judgment: Judgment | None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    # True when the provider gave no usage and the counts come from the whitespace heuristic.
    usage_estimated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "role": self.role.value,
            "stage": self.stage.value,
            "raw_text": self.raw_text,
            "judgment": self.judgment.to_dict() if self.judgment else None,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "usage_estimated": self.usage_estimated,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Turn":
        return cls(
            index=int(data["index"]),
            role=Role(data["role"]),
            stage=Stage(data["stage"]),
            raw_text=data["raw_text"],
            judgment=Judgment.from_dict(data.get("judgment")),
            prompt_tokens=int(data.get("prompt_tokens", 0)),
            completion_tokens=int(data.get("completion_tokens", 0)),
            usage_estimated=bool(data.get("usage_estimated", False)),
        )


@dataclass(frozen=True)
class DiscussionTranscript:
    """Ordered record of one segment's run.

    ``final_judgment`` is None only when the tester never produced a parseable
    verdict; such segments are counted as unparseable and kept out of P/R/F1.
    """

    segment_id: str
    turns: tuple[Turn, ...]
    rounds_used: int
    consensus_reached: bool
    final_judgment: Judgment | None

    @property
    def unparseable(self) -> bool:
        return self.final_judgment is None

    def last_judgment(self, role: Role) -> Judgment | None:
        for turn in reversed(self.turns):
            if turn.role is role and turn.judgment is not None:
                return turn.judgment
        return None

    @property
    def prompt_tokens(self) -> int:
        return sum(t.prompt_tokens for t in self.turns)

    @property
    def completion_tokens(self) -> int:
        return sum(t.completion_tokens for t in self.turns)

    def check(self, config: RunConfig | None = None) -> list[str]:
        """Return the invariant violations of this transcript (empty when consistent)."""
        problems = []
        if [t.index for t in self.turns] != list(range(len(self.turns))):
            problems.append("turn indices are not contiguous from 0")
        if self.final_judgment != self.last_judgment(Role.TESTER):
            problems.append("final_judgment differs from the last tester judgment")
        if self.consensus_reached and any(t.role is Role.DEVELOPER for t in self.turns):
            tester, developer = self.last_judgment(Role.TESTER), self.last_judgment(Role.DEVELOPER)
            if tester is None or developer is None or tester.verdict != developer.verdict:
                problems.append("consensus_reached but latest verdicts differ")
        if self.rounds_used < 1:
            problems.append("rounds_used < 1")
        if config is not None:
            if self.rounds_used > config.max_depth:
                problems.append(f"rounds_used {self.rounds_used} exceeds max_depth {config.max_depth}")
            for t in self.turns:
                if not t.usage_estimated and t.completion_tokens > config.max_response_tokens:
                    problems.append(f"turn {t.index} completion_tokens over the response cap")
        return problems

    def to_dict(self) -> dict[str, Any]:
        return {
            "segment_id": self.segment_id,
            "turns": [t.to_dict() for t in self.turns],
            "rounds_used": self.rounds_used,
            "consensus_reached": self.consensus_reached,
            "final_judgment": self.final_judgment.to_dict() if self.final_judgment else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DiscussionTranscript":
        return cls(
            segment_id=str(data["segment_id"]),
            turns=tuple(Turn.from_dict(t) for t in data["turns"]),
            rounds_used=int(data["rounds_used"]),
            consensus_reached=bool(data["consensus_reached"]),
            final_judgment=Judgment.from_dict(data.get("final_judgment")),
        )


@dataclass(frozen=True)
class RunConfig:
    approach: Approach = Approach.MULTI_ROLE
    prompt_style: PromptStyle = PromptStyle.BASIC
    max_depth: int = 5
    max_response_tokens: int = 120
    model_name: str = "gpt-3.5-turbo-0125"
    temperature: float = 0.0
    parse_retries: int = 2
    seed: int = 0

    def with_(self, **changes: Any) -> "RunConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "approach": self.approach.value,
            "prompt_style": self.prompt_style.value,
            "max_depth": self.max_depth,
            "max_response_tokens": self.max_response_tokens,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "parse_retries": self.parse_retries,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError([f"unknown config field {name!r}" for name in unknown])
        if "approach" in known:
            known["approach"] = Approach(known["approach"])
        if "prompt_style" in known:
            known["prompt_style"] = PromptStyle(known["prompt_style"])
        return cls(**known)


def validate_config(config: RunConfig) -> RunConfig:
    """Return ``config`` unchanged, or raise ConfigError listing every violated bound."""
    problems = []

    def is_int(value: Any) -> bool:
        return isinstance(value, int) and not isinstance(value, bool)

    if not is_int(config.max_depth) or config.max_depth < 1:
        problems.append("max_depth must be ≥ 1")
    if not is_int(config.max_response_tokens) or config.max_response_tokens < 1:
        problems.append("max_response_tokens must be ≥ 1")
    if not isinstance(config.temperature, (int, float)) or config.temperature < 0:
        problems.append("temperature must be ≥ 0")
    if not is_int(config.parse_retries) or config.parse_retries < 0:
        problems.append("parse_retries must be ≥ 0")
    if not is_int(config.seed):
        problems.append("seed must be an integer")
    if not isinstance(config.model_name, str) or not config.model_name:
        problems.append("model_name must be a non-empty string")
    if not isinstance(config.approach, Approach):
        problems.append("approach must be single_role or multi_role")
    if not isinstance(config.prompt_style, PromptStyle):
        problems.append("prompt_style must be basic or cot")
    if problems:
        raise ConfigError(problems)
    return config


@dataclass(frozen=True)
class TranscriptRecord:
    """One line of the transcript store: a transcript plus the context needed to score it."""

    transcript: DiscussionTranscript
    config: RunConfig
    group: str
    category: VulnCategory
    label: bool
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.group, self.transcript.segment_id, self.config.approach.value, self.config.prompt_style.value)

    def to_dict(self) -> dict[str, Any]:
        data = self.transcript.to_dict()
        data["config"] = self.config.to_dict()
        data["group"] = self.group
        data["category"] = self.category.value
        data["label"] = int(self.label)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TranscriptRecord":
        return cls(
            transcript=DiscussionTranscript.from_dict(data),
            config=RunConfig.from_dict(data["config"]),
            group=str(data["group"]),
            category=VulnCategory.parse(data["category"]),
            label=bool(data["label"]),
        )
