from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from consilium.core import (
    Approach,
    CodeSegment,
    ConfigError,
    DiscussionTranscript,
    Judgment,
    PromptStyle,
    Role,
    RunConfig,
    Stage,
    TranscriptRecord,
    Turn,
    VulnCategory,
    validate_config,
)


def test_default_config_is_valid():
    config = validate_config(RunConfig())
    assert config.max_depth == 5
    assert config.max_response_tokens == 120
    assert config.model_name == "gpt-3.5-turbo-0125"
    assert config.temperature == 0.0
    assert config.parse_retries == 2


def test_max_depth_zero_rejected():
    with pytest.raises(ConfigError) as err:
        validate_config(RunConfig(max_depth=0))
    assert "max_depth must be ≥ 1" in str(err.value)


def test_all_violations_reported():
    with pytest.raises(ConfigError) as err:
        validate_config(RunConfig(max_depth=0, max_response_tokens=0, temperature=-1, parse_retries=-1))
    fields = " ".join(err.value.problems)
    for name in ("max_depth", "max_response_tokens", "temperature", "parse_retries"):
        assert name in fields


def test_validate_returns_config_unchanged():
    config = RunConfig(max_response_tokens=120, max_depth=3)
    assert validate_config(config) is config


def test_category_parsing():
    assert [c.value for c in VulnCategory] == ["FC", "AE", "AU", "PU"]
    assert VulnCategory.parse("AU") is VulnCategory.AU
    with pytest.raises(ValueError, match="XX"):
        VulnCategory.parse("XX")


def test_roles():
    assert len(Role) == 2
    assert Role.TESTER.peer is Role.DEVELOPER and Role.DEVELOPER.peer is Role.TESTER


def test_segment_rejects_blank_source():
    with pytest.raises(ValueError):
        CodeSegment("a", "  \n\t", True, VulnCategory.FC)


@pytest.mark.parametrize("verdict", [-1, 2, "1", None])
def test_judgment_verdict_domain(verdict):
    with pytest.raises(ValueError):
        Judgment(verdict)


def test_config_from_dict_rejects_unknown_fields():
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({"bogus": 1})
    assert RunConfig.from_dict({"approach": "single_role", "prompt_style": "cot"}).approach is Approach.SINGLE_ROLE


judgments = st.builds(Judgment, st.sampled_from([0, 1]), st.text(max_size=40))


@st.composite
def transcripts(draw):
    n = draw(st.integers(0, 8))
    turns = tuple(
        Turn(i, draw(st.sampled_from(list(Role))), draw(st.sampled_from(list(Stage))), draw(st.text(max_size=30)),
             draw(st.one_of(st.none(), judgments)), draw(st.integers(0, 500)), draw(st.integers(0, 120)),
             draw(st.booleans()))
        for i in range(n)
    )
    return DiscussionTranscript(draw(st.text(min_size=1, max_size=10)), turns, draw(st.integers(1, 5)),
                                draw(st.booleans()), draw(st.one_of(st.none(), judgments)))


@given(transcripts())
def test_transcript_json_round_trip(transcript):
    assert DiscussionTranscript.from_dict(json.loads(json.dumps(transcript.to_dict()))) == transcript


@given(transcripts(), st.sampled_from(list(VulnCategory)), st.booleans())
def test_record_round_trip(transcript, category, label):
    config = RunConfig(approach=Approach.SINGLE_ROLE, prompt_style=PromptStyle.COT, seed=7)
    record = TranscriptRecord(transcript, config, "Group2", category, label)
    line = json.dumps(record.to_dict())
    back = TranscriptRecord.from_dict(json.loads(line))
    assert back == record
    assert json.loads(line)["config"]["max_depth"] == 5


def test_check_flags_inconsistent_final_judgment():
    turns = (Turn(0, Role.TESTER, Stage.INITIALIZATION, "VERDICT: 1", Judgment(1)),)
    bad = DiscussionTranscript("s", turns, 1, True, Judgment(0))
    assert any("final_judgment" in p for p in bad.check())
    good = DiscussionTranscript("s", turns, 1, True, Judgment(1))
    assert good.check(RunConfig()) == []


def test_check_flags_depth_and_token_cap():
    turns = (Turn(0, Role.TESTER, Stage.INITIALIZATION, "x", Judgment(1), 10, 121),)
    t = DiscussionTranscript("s", turns, 6, True, Judgment(1))
    problems = t.check(RunConfig())
    assert any("max_depth" in p for p in problems)
    assert any("cap" in p for p in problems)
