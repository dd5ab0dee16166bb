"""Verdict extraction from raw model replies.

The strict rule expects the first non-blank line to be ``VERDICT: 0`` or
``VERDICT: 1``. When a reply ignores that format, the fallback table below is
scanned and the match ending last in the text wins.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .core import Judgment

PARSER_VERSION = "1"

STRICT_HEADER_RE = re.compile(r"^VERDICT:[ \t]*([01])[ \t]*$")

_NEG = r"(?:non[- ]?vulnerable|not[ \t]+vulnerable|invulnerable)"
_WORD = rf"(?P<word>{_NEG}|vulnerable|vulnerability)"
_DIGIT = r"(?<![\w.])(?P<digit>[01])(?!\w|\.\d)"

# Fallback rules, frozen. Each pattern yields a digit and optionally the
# adjacent word; the digit is the verdict. Matches where a negative word sits
# next to a 1 are contradictory and ignored.
FALLBACK_RULES: tuple[tuple[str, re.Pattern[str]], ...] = (
    # "verdict is 1", "Verdict = 0", "the answer is 1" anywhere in the text
    ("verdict-keyword", re.compile(rf"\b(?:verdict|answer|judge?ment)\b[ \t]*(?:is|:|=|-)?[ \t]*\**[ \t]*{_DIGIT}", re.I)),
    # "non-vulnerable (0)", "Vulnerable: 1", "not vulnerable - 0"
    ("word-then-digit", re.compile(rf"\b{_WORD}\W{{0,2}}[ \t]*(?:[:=(\[-][ \t]*)?{_DIGIT}[ \t]*[)\]]?", re.I)),
    # "1 (vulnerable)", "0 - non-vulnerable", "0, i.e. not vulnerable"
    ("digit-then-word",
     re.compile(rf"{_DIGIT}[ \t]*[)\]]?[ \t]*(?:[:=,(\[-]|i\.e\.,?|means)?[ \t]*\(?[ \t]*(?:the[ \t]+code[ \t]+is[ \t]+)?{_WORD}", re.I)),
)


class ParseRule(str, enum.Enum):
    STRICT_HEADER = "strict_header"
    FALLBACK_PATTERN = "fallback_pattern"
    FAILED = "failed"


@dataclass(frozen=True)
class ParseOutcome:
    judgment: Judgment | None
    rule_used: ParseRule
    diagnostics: str = ""

    @property
    def ok(self) -> bool:
        return self.judgment is not None


def _instruction_echo(text: str, end: int) -> bool:
    # "1 for vulnerable, 0 for non-vulnerable" repeats the prompt, it is not a verdict.
    return re.match(r"[ \t]*\)?[ \t]*(?:for|=[ \t]*if|if)\b", text[end:], re.I) is not None


def _fallback(text: str) -> tuple[int, str, str] | None:
    best: tuple[int, str, str] | None = None
    for name, pattern in FALLBACK_RULES:
        for m in pattern.finditer(text):
            digit = m.group("digit")
            word = (m.groupdict().get("word") or "").lower()
            if word and re.fullmatch(_NEG, word, re.I) and digit == "1":
                continue
            if word and name == "word-then-digit" and _instruction_echo(text, m.end("digit")):
                continue
            if name == "digit-then-word" and re.match(r"[ \t]*for\b", text[m.end("digit"):], re.I):
                continue
            if best is None or m.end() > best[0]:
                best = (m.end(), digit, name)
    return best


def parse_judgment(raw_text: str) -> ParseOutcome:
    """Extract a Judgment from ``raw_text``. Never raises."""
    if not isinstance(raw_text, str):
        return ParseOutcome(None, ParseRule.FAILED, f"expected str, got {type(raw_text).__name__}")
    lines = raw_text.splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        m = STRICT_HEADER_RE.match(line.strip())
        if m:
            reasoning = "\n".join(lines[i + 1:]).strip()
            return ParseOutcome(Judgment(int(m.group(1)), reasoning), ParseRule.STRICT_HEADER)
        break

    found = _fallback(raw_text)
    if found is None:
        if not raw_text.strip():
            return ParseOutcome(None, ParseRule.FAILED, "empty reply")
        return ParseOutcome(None, ParseRule.FAILED, "no VERDICT header and no fallback pattern matched")
    _, digit, rule = found
    return ParseOutcome(
        Judgment(int(digit), raw_text.strip()),
        ParseRule.FALLBACK_PATTERN,
        f"fallback rule {rule!r}",
    )
