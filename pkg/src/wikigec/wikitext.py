"""Regex-based wikitext to plain text conversion.

Not a full MediaWiki parser.  Nested templates, tables and links are
removed innermost-first, so unbalanced markup is dropped rather than
leaking into the output.
"""
from __future__ import annotations

import html
import re

_COMMENT = re.compile(r"<!--.*?(?:-->|\Z)", re.S)
_DROP_BLOCKS = re.compile(
    r"<(ref|math|gallery|timeline|score|syntaxhighlight|source|chem|graph|imagemap|mapframe)\b[^>]*?"
    r"(?:/>|>.*?</\1\s*>)",
    re.S | re.I,
)
_SELF_CLOSING_REF = re.compile(r"<ref\b[^>]*/>", re.I)
_TAG = re.compile(r"</?[A-Za-z][^<>]*?/?>")
_TEMPLATE = re.compile(r"\{\{(?:(?!\{\{|\}\})[\s\S])*\}\}")
_TABLE = re.compile(r"\{\|(?:(?!\{\||\|\})[\s\S])*\|\}")
_INNER_LINK = re.compile(r"\[\[([^\[\]]*)\]\]")
_EXTERNAL_LINK = re.compile(r"\[(?:https?:|ftp:)?//[^\s\]]+(?:\s+([^\]]*))?\]")
_BARE_URL = re.compile(r"(?<![\w/])https?://\S+")
_QUOTES = re.compile(r"'{2,}")
_HEADING = re.compile(r"^(=+)\s*(.*?)\s*\1\s*$", re.M)
_LIST_MARK = re.compile(r"^[*#:;]+\s*", re.M)
_RULE = re.compile(r"^-{4,}\s*$", re.M)
_MAGIC = re.compile(r"__[A-Z]+__")
_SPACES = re.compile(r"[ \t\u00a0\u200b]+")

_DROPPED_NAMESPACES = ("file", "image", "media", "category")


def _repeat(pattern: re.Pattern, repl, text: str) -> str:
    while True:
        text, n = pattern.subn(repl, text)
        if n == 0:
            return text


def _link(match: re.Match) -> str:
    inner = match.group(1)
    target, _, label = inner.partition("|")
    target = target.strip()
    prefix = target.split(":", 1)[0].strip().lower() if ":" in target else ""
    if prefix in _DROPPED_NAMESPACES:
        return ""
    if len(prefix) in (2, 3) and prefix.isalpha() and not target.startswith(":"):
        # interlanguage link such as [[de:Foo]]
        return ""
    if label:
        # [[a|b|c]] shows the last segment
        return label.rsplit("|", 1)[-1]
    return target.lstrip(":").split("#", 1)[0] if not target.startswith("#") else target[1:]


def extract_text(wikitext: str) -> str:
    """Strip markup from ``wikitext`` and return plain text, one paragraph or heading per line."""
    text = _COMMENT.sub("", wikitext)
    text = _DROP_BLOCKS.sub("", text)
    text = _SELF_CLOSING_REF.sub("", text)
    text = _repeat(_TEMPLATE, "", text)
    text = _repeat(_TABLE, "", text)
    # leftover halves of unbalanced templates/tables
    text = re.sub(r"\{\{|\}\}|\{\||\|\}", "", text)
    text = _repeat(_INNER_LINK, _link, text)
    text = _EXTERNAL_LINK.sub(lambda m: m.group(1) or "", text)
    text = _BARE_URL.sub("", text)
    text = text.replace("[[", "").replace("]]", "")
    text = _TAG.sub("", text)
    text = _QUOTES.sub("", text)
    text = _HEADING.sub(lambda m: m.group(2), text)
    text = _RULE.sub("", text)
    text = _LIST_MARK.sub("", text)
    text = _MAGIC.sub("", text)
    text = html.unescape(text)
    lines = (_SPACES.sub(" ", line).strip() for line in text.splitlines())
    return "\n".join(line for line in lines if line)


def tokenize(text: str) -> list:
    return text.split()
