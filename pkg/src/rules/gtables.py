"""
The gtables rule language.

    gtables -A [-m KIND OPTIONS...]... -j DROP|ACCEPT

Match kinds and options:

    -m src|dst   --addr HEX  --pan HEX  [--hamming N]
    -m type      --control|--ctrl|--data|--beacon|--ack
    -m rss       --above DBM | --below DBM
    -m nw_ctrl   HEX | --value HEX  [--hamming N]
    -m asl_cmd   HEX | --value HEX  [--hamming N]
    -m raw_byte  --offset N --value HEX  [--hamming N]

Match kinds are case-insensitive (``-m RSS``). A rules file holds one rule per
line; ``#`` starts a comment.
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .chain import Match, MatchKind, Rule, RuleChain, RssDirection, Verdict
from ..utils.errors import RuleSyntaxError

logger = logging.getLogger(__name__)

TYPE_FLAGS = {
    "--control": "control",
    "--ctrl": "control",
    "--data": "data",
    "--beacon": "beacon",
    "--ack": "ack",
}

Token = Tuple[int, str]


def _tokenize(text: str) -> List[Token]:
    return [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", text)]


def _int_literal(token: Token, what: str) -> int:
    column, text = token
    try:
        if text.lower().startswith("0x"):
            return int(text[2:], 16)
        return int(text, 10)
    except ValueError:
        raise RuleSyntaxError(column, f"malformed {what} literal {text!r}")


def _float_literal(token: Token, what: str) -> float:
    column, text = token
    try:
        return float(text)
    except ValueError:
        raise RuleSyntaxError(column, f"malformed {what} value {text!r}")


class _Cursor:
    def __init__(self, tokens: List[Token], line_length: int):
        self.tokens = tokens
        self.pos = 0
        self.end_column = line_length + 1

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, what: str) -> Token:
        token = self.peek()
        if token is None:
            raise RuleSyntaxError(self.end_column, f"expected {what}, got end of line")
        self.pos += 1
        return token

    def at_option(self) -> bool:
        token = self.peek()
        return token is not None and token[1].startswith("--")


def _parse_match(cursor: _Cursor, kind_token: Token) -> Match:
    column, kind_text = kind_token
    try:
        kind = MatchKind(kind_text.lower())
    except ValueError:
        raise RuleSyntaxError(column, f"unknown match kind {kind_text!r}")

    params: Dict[str, object] = {}

    if kind in (MatchKind.NW_CTRL, MatchKind.ASL_CMD):
        token = cursor.peek()
        if token is not None and not token[1].startswith("-"):
            params["value"] = _int_literal(cursor.take("value"), kind.value)

    while cursor.at_option():
        opt_column, option = cursor.take("option")
        if kind in (MatchKind.SRC, MatchKind.DST) and option in ("--addr", "--pan"):
            params[option[2:]] = _int_literal(cursor.take(f"{option} value"), "hex")
        elif kind == MatchKind.TYPE and option in TYPE_FLAGS:
            if "frame_type" in params:
                raise RuleSyntaxError(opt_column, "-m type takes exactly one frame type")
            params["frame_type"] = TYPE_FLAGS[option]
        elif kind == MatchKind.RSS and option in ("--above", "--below"):
            params["rss_direction"] = RssDirection(option[2:])
            params["rss_threshold"] = _float_literal(cursor.take(f"{option} threshold"), "dBm")
        elif kind in (MatchKind.NW_CTRL, MatchKind.ASL_CMD, MatchKind.RAW_BYTE) and option == "--value":
            params["value"] = _int_literal(cursor.take("--value value"), "hex")
        elif kind == MatchKind.RAW_BYTE and option == "--offset":
            params["offset"] = _int_literal(cursor.take("--offset value"), "offset")
        elif kind not in (MatchKind.TYPE, MatchKind.RSS) and option == "--hamming":
            params["hamming_tolerance"] = _int_literal(cursor.take("--hamming value"), "hamming tolerance")
        else:
            raise RuleSyntaxError(opt_column, f"option {option!r} not valid for -m {kind.value}")

    try:
        return Match(kind=kind, **params)
    except RuleSyntaxError as e:
        raise RuleSyntaxError(column, e.reason)


def parse_rule_line(text: str) -> Rule:
    """Parse one ``gtables -A ...`` line into a Rule."""
    tokens = _tokenize(text)
    cursor = _Cursor(tokens, len(text.rstrip()))

    head = cursor.take("'gtables'")
    if head[1] != "gtables":
        raise RuleSyntaxError(head[0], f"rule must start with 'gtables -A', got {head[1]!r}")
    append = cursor.take("'-A'")
    if append[1] != "-A":
        raise RuleSyntaxError(append[0], f"expected '-A', got {append[1]!r}")

    matches: List[Match] = []
    verdict: Optional[Verdict] = None
    while cursor.peek() is not None:
        column, word = cursor.take("-m or -j")
        if word == "-m":
            matches.append(_parse_match(cursor, cursor.take("match kind")))
        elif word == "-j":
            target_column, target = cursor.take("verdict")
            try:
                verdict = Verdict(target.upper())
            except ValueError:
                raise RuleSyntaxError(target_column, f"unknown verdict {target!r}")
            extra = cursor.peek()
            if extra is not None:
                raise RuleSyntaxError(extra[0], f"unexpected {extra[1]!r} after the verdict")
        else:
            raise RuleSyntaxError(column, f"expected -m or -j, got {word!r}")

    if verdict is None:
        raise RuleSyntaxError(cursor.end_column, "missing -j verdict")
    return Rule(matches=tuple(matches), verdict=verdict)


def _format_dbm(value: float) -> str:
    text = f"{value:g}"
    # short form when it parses back to the same threshold
    return text if float(text) == value else repr(value)


def _render_match(match: Match) -> str:
    parts = ["-m", match.kind.value]
    if match.kind in (MatchKind.SRC, MatchKind.DST):
        if match.addr is not None:
            parts += ["--addr", f"0x{match.addr:04X}"]
        if match.pan is not None:
            parts += ["--pan", f"0x{match.pan:04X}"]
    elif match.kind == MatchKind.TYPE:
        parts.append(f"--{match.frame_type}")
    elif match.kind == MatchKind.RSS:
        parts += [f"--{match.rss_direction.value}", _format_dbm(match.rss_threshold)]
    elif match.kind == MatchKind.NW_CTRL:
        parts.append(f"0x{match.value:04X}")
    elif match.kind == MatchKind.ASL_CMD:
        parts.append(f"0x{match.value:02X}")
    elif match.kind == MatchKind.RAW_BYTE:
        parts += ["--offset", str(match.offset), "--value", f"0x{match.value:02X}"]
    if match.hamming_tolerance:
        parts += ["--hamming", str(match.hamming_tolerance)]
    return " ".join(parts)


def render_rule(rule: Rule) -> str:
    """Canonical gtables text for a rule; parses back to an equal Rule."""
    return " ".join(["gtables", "-A", *(_render_match(m) for m in rule.matches), "-j", rule.verdict.value])


def parse_rules(text: str) -> RuleChain:
    """Parse a rules file body into a chain, one rule per non-comment line."""
    rules: List[Rule] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        try:
            rules.append(parse_rule_line(line))
        except RuleSyntaxError as e:
            raise RuleSyntaxError(e.column, f"line {number}: {e.reason}", line=line)
    logger.debug(f"Parsed {len(rules)} rules")
    return RuleChain(rules=tuple(rules))


def load_rules_file(path: Union[str, Path]) -> RuleChain:
    path = Path(path)
    logger.info(f"Loading rules from {path}")
    return parse_rules(path.read_text())


def chain_from_sources(sources: List[str], base_dir: Optional[Path] = None) -> RuleChain:
    """Build a chain from a mix of inline gtables lines and rules-file paths."""
    rules: List[Rule] = []
    for source in sources:
        if source.lstrip().startswith("gtables"):
            rules.extend(parse_rules(source).rules)
        else:
            path = Path(source)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            rules.extend(load_rules_file(path).rules)
    return RuleChain(rules=tuple(rules))


def describe_rule(rule: Rule) -> str:
    """One-line summary used by ``rules check``."""
    kinds = ",".join(m.kind.value for m in rule.matches) or "-"
    return f"verdict={rule.verdict.value} matches={len(rule.matches)} kinds={kinds}"
