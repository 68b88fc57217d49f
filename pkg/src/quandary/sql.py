"""Parser for the single-table SQL fragment used by the seed corpora.

Grammar::

    SELECT [AGG(]column[)] FROM table [WHERE column OP value (AND column OP value)*]

Column names may be back-quoted or bracketed; string literals may be
single-quoted (with '' escaping a quote). Keywords are case-insensitive,
identifiers and literals case-preserving. Anything richer (OR, JOIN,
nesting, GROUP BY, ...) is rejected with an error naming the construct.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .core import Concept, ConceptKind


class SqlParseError(ValueError):
    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = expected
        suffix = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"at offset {position}: {message}{suffix}")


class Aggregation(str, Enum):
    NONE = "none"
    COUNT = "count"
    SUM = "sum"
    AVG = "avg"
    MIN = "min"
    MAX = "max"


@dataclass(frozen=True)
class SqlQuery:
    select_column: str
    aggregation: Aggregation = Aggregation.NONE
    conditions: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(tuple(c) for c in self.conditions))
        if not self.select_column:
            raise ValueError("select column must be non-empty")
        for col, op, _ in self.conditions:
            if not col:
                raise ValueError("condition column must be non-empty")
            if op not in OPERATORS:
                raise ValueError(f"unknown operator {op!r}")


OPERATORS = (">=", "<=", "!=", "=", ">", "<")
_AGGS = {a.name: a for a in Aggregation if a is not Aggregation.NONE}
_UNSUPPORTED = {
    "OR": "OR conditions",
    "JOIN": "JOIN",
    "INNER": "JOIN",
    "LEFT": "JOIN",
    "GROUP": "GROUP BY",
    "ORDER": "ORDER BY",
    "LIMIT": "LIMIT",
    "HAVING": "HAVING",
    "UNION": "UNION",
}

_BARE = re.compile(r"[^\s()'`\[\]=<>!]+")


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'word' | 'quoted' | 'op' | 'lparen' | 'rparen' | 'eof'
    value: str
    pos: int


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "(":
            toks.append(_Tok("lparen", "(", i))
            i += 1
        elif ch == ")":
            toks.append(_Tok("rparen", ")", i))
            i += 1
        elif ch == "'":
            j = i + 1
            out = []
            while True:
                if j >= n:
                    raise SqlParseError("unterminated string literal", i)
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        out.append("'")
                        j += 2
                        continue
                    break
                out.append(text[j])
                j += 1
            toks.append(_Tok("quoted", "".join(out), i))
            i = j + 1
        elif ch == "`":
            j = text.find("`", i + 1)
            if j < 0:
                raise SqlParseError("unterminated back-quoted name", i)
            toks.append(_Tok("name", text[i + 1:j], i))
            i = j + 1
        elif ch == "[":
            j = text.find("]", i + 1)
            if j < 0:
                raise SqlParseError("unterminated bracketed name", i)
            toks.append(_Tok("name", text[i + 1:j], i))
            i = j + 1
        else:
            op = next((o for o in OPERATORS if text.startswith(o, i)), None)
            if op is not None:
                toks.append(_Tok("op", op, i))
                i += len(op)
                continue
            m = _BARE.match(text, i)
            if not m:
                raise SqlParseError(f"unexpected character {ch!r}", i)
            toks.append(_Tok("word", m.group(0), i))
            i = m.end()
    toks.append(_Tok("eof", "", n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _lex(text)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def _advance(self) -> _Tok:
        tok = self.cur
        self.i += 1
        return tok

    def _is_keyword(self, word: str) -> bool:
        return self.cur.kind == "word" and self.cur.value.upper() == word

    def _expect_keyword(self, word: str) -> None:
        if not self._is_keyword(word):
            raise SqlParseError(
                f"got {self.cur.value!r}" if self.cur.kind != "eof" else "unexpected end of input",
                self.cur.pos,
                expected=(word,),
            )
        self._advance()

    def _check_unsupported(self) -> None:
        if self.cur.kind == "word":
            construct = _UNSUPPORTED.get(self.cur.value.upper())
            if construct is not None:
                raise SqlParseError(f"{construct} is not supported", self.cur.pos)

    def _column(self) -> str:
        self._check_unsupported()
        tok = self.cur
        if tok.kind == "name":
            self._advance()
            return tok.value
        if tok.kind == "word" and tok.value.upper() not in ("FROM", "WHERE", "AND", "SELECT"):
            self._advance()
            return tok.value
        raise SqlParseError(
            f"got {tok.value!r}" if tok.kind != "eof" else "unexpected end of input",
            tok.pos,
            expected=("column name",),
        )

    def _value(self) -> str:
        self._check_unsupported()
        tok = self.cur
        if tok.kind in ("quoted", "word", "name"):
            self._advance()
            return tok.value
        if tok.kind == "lparen":
            raise SqlParseError("nested expressions are not supported", tok.pos)
        raise SqlParseError(
            f"got {tok.value!r}" if tok.kind != "eof" else "unexpected end of input",
            tok.pos,
            expected=("value",),
        )

    def parse(self) -> SqlQuery:
        self._expect_keyword("SELECT")
        agg = Aggregation.NONE
        if (
            self.cur.kind == "word"
            and self.cur.value.upper() in _AGGS
            and self.toks[self.i + 1].kind == "lparen"
        ):
            agg = _AGGS[self._advance().value.upper()]
            self._advance()  # (
            column = self._column()
            if self.cur.kind != "rparen":
                raise SqlParseError("got end of aggregate", self.cur.pos, expected=(")",))
            self._advance()
        else:
            column = self._column()
        self._expect_keyword("FROM")
        if self.cur.kind not in ("word", "name"):
            raise SqlParseError("missing table name", self.cur.pos, expected=("table name",))
        self._advance()

        conditions: list[tuple[str, str, str]] = []
        if self._is_keyword("WHERE"):
            self._advance()
            while True:
                col = self._column()
                if self.cur.kind != "op":
                    raise SqlParseError(
                        f"got {self.cur.value!r}", self.cur.pos, expected=OPERATORS
                    )
                op = self._advance().value
                val = self._value()
                conditions.append((col, op, val))
                if self._is_keyword("AND"):
                    self._advance()
                    continue
                break
        self._check_unsupported()
        if self.cur.kind != "eof":
            raise SqlParseError(f"trailing input {self.cur.value!r}", self.cur.pos)
        return SqlQuery(select_column=column, aggregation=agg, conditions=tuple(conditions))


def parse_sql(text: str) -> SqlQuery:
    return _Parser(text).parse()


def _quote_name(name: str) -> str:
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) and name.upper() not in (
        "SELECT", "FROM", "WHERE", "AND", *_AGGS,
    ):
        return name
    return f"`{name}`"


def _quote_value(value: str) -> str:
    escaped = value.replace("'", "''")
    return f"'{escaped}'"


def format_sql(query: SqlQuery) -> str:
    """Render a query in the accepted grammar; re-parsing yields an equal AST."""
    col = _quote_name(query.select_column)
    select = col if query.aggregation is Aggregation.NONE else f"{query.aggregation.name}({col})"
    parts = [f"SELECT {select} FROM t"]
    if query.conditions:
        conds = " AND ".join(
            f"{_quote_name(c)} {op} {_quote_value(v)}" for c, op, v in query.conditions
        )
        parts.append(f"WHERE {conds}")
    return " ".join(parts)


def extract_concepts(query: SqlQuery) -> list[Concept]:
    """Columns and literal values referenced by the query, deduplicated.

    Order is deterministic: select column, then condition columns and
    values in clause order.
    """
    out: list[Concept] = []
    seen: set[Concept] = set()

    def add(concept: Concept) -> None:
        if concept not in seen:
            seen.add(concept)
            out.append(concept)

    add(Concept.for_column(query.select_column))
    for col, _, value in query.conditions:
        add(Concept.for_column(col))
        add(Concept(ConceptKind.VALUE, value, col))
    return out
