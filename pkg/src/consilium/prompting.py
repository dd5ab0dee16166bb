"""Prompt construction for the tester and developer roles.

Templates are plain-text files named ``<role>-<stage>[-<style>].txt`` using
``{{name}}`` placeholders. The built-in set lives in ``consilium/templates``;
a directory of files with the same names overrides individual entries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .core import CATEGORY_DESCRIPTIONS, CodeSegment, Judgment, PromptStyle, Role

PLACEHOLDER_RE = re.compile(r"\{\{\s*([a-z_]+)\s*\}\}")

KNOWN_PLACEHOLDERS = frozenset(
    {"code", "categories", "peer_judgment", "peer_reasoning", "own_judgment", "role_description"}
)

# Placeholders each template must contain. Changing this table changes what
# counts as a valid override file.
REQUIRED_PLACEHOLDERS: dict[str, frozenset[str]] = {
    "tester-initial-basic": frozenset({"code", "categories"}),
    "tester-initial-cot": frozenset({"code", "categories"}),
    "developer-initial-basic": frozenset({"code", "categories", "peer_judgment", "peer_reasoning"}),
    "developer-initial-cot": frozenset({"code", "categories", "peer_judgment", "peer_reasoning"}),
    "tester-discussion": frozenset({"code", "peer_judgment", "peer_reasoning"}),
    "developer-discussion": frozenset({"code", "peer_judgment", "peer_reasoning"}),
}

ROLE_DESCRIPTIONS: dict[Role, str] = {
    Role.TESTER: (
        "You are a software tester on a code review team. You are responsible for finding "
        "security vulnerabilities in C/C++ code before it ships, and you hold final "
        "responsibility for the review verdict."
    ),
    Role.DEVELOPER: (
        "You are a software developer on a code review team. You know how code like this is "
        "written and what it is meant to do, and you challenge review findings that "
        "misread the implementation."
    ),
}

FORMAT_REMINDER = (
    "Your previous reply could not be read. Reply again, and make the first line exactly "
    '"VERDICT: 1" (vulnerable) or "VERDICT: 0" (non-vulnerable), followed by your reasoning.'
)


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str

    @property
    def required_placeholders(self) -> frozenset[str]:
        return REQUIRED_PLACEHOLDERS.get(self.name, frozenset())

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(PLACEHOLDER_RE.findall(self.text))

    def validate(self) -> None:
        missing = self.required_placeholders - self.placeholders
        if missing:
            raise TemplateError(f"template {self.name!r} lacks required placeholder(s): "
                                + ", ".join("{{%s}}" % m for m in sorted(missing)))
        unknown = self.placeholders - KNOWN_PLACEHOLDERS
        if unknown:
            raise TemplateError(f"template {self.name!r} uses unknown placeholder(s): "
                                + ", ".join("{{%s}}" % m for m in sorted(unknown)))

    def render(self, values: Mapping[str, str]) -> str:
        unbound = self.placeholders - set(values)
        if unbound:
            raise TemplateError(f"template {self.name!r}: unbound placeholder(s) {sorted(unbound)}")
        # Single pass, so placeholder-like text inside values is never expanded.
        return PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], self.text)


@dataclass(frozen=True)
class RenderedPrompt:
    system_text: str
    user_text: str

    def __post_init__(self):
        if not self.system_text.strip() or not self.user_text.strip():
            raise TemplateError("rendered prompt has an empty part")


def template_name(role: Role, stage: str, style: PromptStyle | None = None) -> str:
    if stage == "discussion":
        return f"{role.value}-discussion"
    return f"{role.value}-{stage}-{style.value}"


def _builtin_templates() -> dict[str, PromptTemplate]:
    folder = resources.files("consilium") / "templates"
    out = {}
    for name in REQUIRED_PLACEHOLDERS:
        out[name] = PromptTemplate(name, (folder / f"{name}.txt").read_text(encoding="utf-8"))
    return out


def load_templates(path: str | Path | None = None) -> dict[str, PromptTemplate]:
    """Load the template set: built-ins, overridden by ``*.txt`` files under ``path``.

    ``path`` may be a directory or a single template file. A missing path
    yields the built-in set. Raises TemplateError on unknown names, duplicate
    names, or templates that lack a required placeholder.
    """
    templates = _builtin_templates()
    if path is None:
        return templates
    path = Path(path)
    if not path.exists():
        return templates
    files = sorted(path.glob("*.txt")) if path.is_dir() else [path]
    seen: dict[str, Path] = {}
    for file in files:
        name = file.stem.lower()
        if name in seen:
            raise TemplateError(f"duplicate template name {name!r}: {seen[name]} and {file}")
        seen[name] = file
        if name not in REQUIRED_PLACEHOLDERS:
            raise TemplateError(f"{file}: unknown template name {name!r}")
        try:
            text = file.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise TemplateError(f"{file}: not valid UTF-8 ({exc})") from None
        template = PromptTemplate(name, text)
        template.validate()
        templates[name] = template
    return templates


def save_templates(templates: Iterable[PromptTemplate], directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t in templates:
        (directory / f"{t.name}.txt").write_text(t.text, encoding="utf-8")


def format_categories() -> str:
    return "\n".join(f"- {c.value}: {desc}" for c, desc in CATEGORY_DESCRIPTIONS.items())


def format_verdict(judgment: Judgment) -> str:
    return f"{judgment.verdict} ({'vulnerable' if judgment.verdict else 'non-vulnerable'})"


def _values(role: Role, segment: CodeSegment, peer: Judgment | None, own: Judgment | None) -> dict[str, str]:
    values = {
        "code": segment.source_text,
        "categories": format_categories(),
        "role_description": ROLE_DESCRIPTIONS[role],
    }
    if peer is not None:
        values["peer_judgment"] = format_verdict(peer)
        values["peer_reasoning"] = peer.reasoning or "(none given)"
    if own is not None:
        values["own_judgment"] = format_verdict(own)
    return values


def render_initial(
    role: Role,
    segment: CodeSegment,
    style: PromptStyle,
    peer: Judgment | None = None,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> RenderedPrompt:
    """First prompt for ``role``. The developer's version carries the tester's initial judgment as ``peer``."""
    templates = templates or _default_templates()
    if role is Role.DEVELOPER and peer is None:
        raise TemplateError("the developer's initial prompt needs the tester's judgment")
    template = templates[template_name(role, "initial", style)]
    user = template.render(_values(role, segment, peer, None))
    return RenderedPrompt(ROLE_DESCRIPTIONS[role], user)


def render_discussion(
    role: Role,
    segment: CodeSegment,
    peer: Judgment,
    own_last: Judgment | None,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> RenderedPrompt:
    templates = templates or _default_templates()
    template = templates[template_name(role, "discussion")]
    values = _values(role, segment, peer, own_last)
    values.setdefault("own_judgment", "(none yet)")
    return RenderedPrompt(ROLE_DESCRIPTIONS[role], template.render(values))


_cache: dict[str, PromptTemplate] | None = None


def _default_templates() -> dict[str, PromptTemplate]:
    global _cache
    if _cache is None:
        _cache = _builtin_templates()
    return _cache
