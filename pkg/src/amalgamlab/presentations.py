"""Finite presentations and the text DSL for them.

Grammar:

    presentation := "<" namelist "|" relatorlist ">"
    namelist     := identifier ("," identifier)*
    relatorlist  := empty | relator ("," relator)*
    relator      := factor+          (juxtaposition is product)
    factor       := atom ("^" signed-integer)?
    atom         := identifier | "(" relator ")"

Subgroup generator lists use the same relator syntax inside brackets:
"[ w1, w2 ]", with "[ ]" for the empty list.  Exponents expand eagerly;
a relator that would expand past EXPONENT_LETTER_CAP letters is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

from .errors import DuplicateGeneratorError, ExponentOverflowError, ParseError
from .words import Letter, Word

EXPONENT_LETTER_CAP = 10**6

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")
_PUNCT = {"<", ">", "|", ",", "^", "(", ")", "[", "]", "-"}


class _Token(NamedTuple):
    kind: str  # 'ident', 'int', or the punctuation character itself
    value: str
    line: int
    col: int


def _tokenize(text: str) -> Iterator[_Token]:
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch in _PUNCT:
            yield _Token(ch, ch, line, col)
            i += 1
            col += 1
            continue
        if ch in _IDENT_START:
            j = i
            while j < n and text[j] in _IDENT_CONT:
                j += 1
            yield _Token("ident", text[i:j], line, col)
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            yield _Token("int", text[i:j], line, col)
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    yield _Token("end", "", line, col)


class _Parser:
    def __init__(self, text: str, names: Sequence[str] | None = None):
        self.tokens = list(_tokenize(text))
        self.pos = 0
        self.gen_index = {name: i for i, name in enumerate(names)} if names else {}

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.value!r}", tok.line, tok.col)
        return tok

    def parse_presentation(self) -> "Presentation":
        self.expect("<")
        names = [self.expect("ident")]
        while self.peek().kind == ",":
            self.next()
            names.append(self.expect("ident"))
        for tok in names:
            if tok.value in self.gen_index:
                raise DuplicateGeneratorError(
                    f"duplicate generator {tok.value!r}", tok.line, tok.col
                )
            self.gen_index[tok.value] = len(self.gen_index)
        self.expect("|")
        relators = []
        if self.peek().kind != ">":
            relators.append(self.parse_relator())
            while self.peek().kind == ",":
                self.next()
                relators.append(self.parse_relator())
        self.expect(">")
        self.expect("end")
        return Presentation(tuple(t.value for t in names), tuple(relators))

    def parse_subgroup_list(self) -> tuple[Word, ...]:
        self.expect("[")
        words = []
        if self.peek().kind != "]":
            words.append(self.parse_relator())
            while self.peek().kind == ",":
                self.next()
                words.append(self.parse_relator())
        self.expect("]")
        self.expect("end")
        return tuple(words)

    def parse_bare_word(self) -> Word:
        w = self.parse_relator()
        self.expect("end")
        return w

    def parse_relator(self) -> Word:
        letters = list(self.parse_factor())
        while self.peek().kind in ("ident", "("):
            letters.extend(self.parse_factor())
        return Word(letters)

    def parse_factor(self) -> tuple[Letter, ...]:
        tok = self.peek()
        if tok.kind == "ident":
            self.next()
            if tok.value not in self.gen_index:
                raise ParseError(f"unknown generator {tok.value!r}", tok.line, tok.col)
            base = (Letter(self.gen_index[tok.value], 1),)
        elif tok.kind == "(":
            self.next()
            base = self.parse_relator().letters
            self.expect(")")
        else:
            raise ParseError(f"expected generator or '(', found {tok.value!r}", tok.line, tok.col)
        if self.peek().kind != "^":
            return base
        self.next()
        sign = 1
        if self.peek().kind == "-":
            self.next()
            sign = -1
        itok = self.expect("int")
        exp = sign * int(itok.value)
        if len(base) * abs(exp) > EXPONENT_LETTER_CAP:
            raise ExponentOverflowError(
                f"exponent expansion exceeds {EXPONENT_LETTER_CAP} letters", itok.line, itok.col
            )
        if exp >= 0:
            return base * exp
        inv = tuple(le.inverse() for le in reversed(base))
        return inv * (-exp)


@dataclass(frozen=True)
class Presentation:
    """Generator names plus freely reduced relator words."""

    generator_names: tuple[str, ...]
    relators: tuple[Word, ...]

    def __post_init__(self):
        seen = set()
        for name in self.generator_names:
            if name in seen:
                raise DuplicateGeneratorError(f"duplicate generator {name!r}", 0, 0)
            seen.add(name)
        reduced = []
        for r in self.relators:
            if r.max_gen() >= len(self.generator_names):
                raise ValueError(f"relator {r!r} uses a generator outside the alphabet")
            r = r.free_reduce()
            if r.letters:
                reduced.append(r)
        object.__setattr__(self, "relators", tuple(reduced))

    @property
    def rank(self) -> int:
        return len(self.generator_names)

    def check_word(self, w: Word) -> Word:
        if w.max_gen() >= self.rank:
            raise ValueError(f"word {w!r} uses a generator outside the alphabet")
        return w

    def gen_word(self, name: str, sign: int = 1) -> Word:
        return Word.gen(self.generator_names.index(name), sign)

    def __str__(self) -> str:
        return presentation_to_text(self)


def parse_presentation(text: str) -> Presentation:
    return _Parser(text).parse_presentation()


def parse_subgroup_words(text: str, names: Sequence[str]) -> tuple[Word, ...]:
    return _Parser(text, names).parse_subgroup_list()


def parse_word(text: str, names: Sequence[str]) -> Word:
    return _Parser(text, names).parse_bare_word()


def word_to_text(w: Word, names: Sequence[str]) -> str:
    """Run-length form: 'a^3 b^-1 a'.  The empty word prints as ''."""
    parts = []
    letters = w.letters
    i = 0
    while i < len(letters):
        j = i
        while j < len(letters) and letters[j] == letters[i]:
            j += 1
        gen, sign = letters[i]
        if gen >= len(names):
            raise ValueError(f"word uses generator index {gen} outside the alphabet")
        exp = sign * (j - i)
        parts.append(names[gen] if exp == 1 else f"{names[gen]}^{exp}")
        i = j
    return " ".join(parts)


def presentation_to_text(p: Presentation) -> str:
    names = ", ".join(p.generator_names)
    rels = ", ".join(word_to_text(r, p.generator_names) for r in p.relators)
    return f"<{names} | {rels}>" if rels else f"<{names} | >"


def subgroup_words_to_text(words: Sequence[Word], names: Sequence[str]) -> str:
    if not words:
        return "[ ]"
    return "[ " + ", ".join(word_to_text(w, names) for w in words) + " ]"
