"""Free-group words over an indexed alphabet.

A Letter is a (generator index, sign) pair and a Word is an immutable
sequence of letters.  Generators are referred to by index everywhere in
the rewriting machinery; names only matter when parsing or printing.
"""

from __future__ import annotations

from typing import Iterable, Iterator, NamedTuple


class Letter(NamedTuple):
    gen: int   # 0-based generator index, non-negative
    sign: int  # +1 or -1

    def inverse(self) -> "Letter":
        return Letter(self.gen, -self.sign)


def _reduce(letters: Iterable[Letter]) -> tuple[Letter, ...]:
    out: list[Letter] = []
    for le in letters:
        if out and out[-1].gen == le.gen and out[-1].sign == -le.sign:
            out.pop()
        else:
            out.append(le)
    return tuple(out)


class Word:
    """Immutable word.  Letters are stored exactly as given; `reduced`
    reports whether adjacent cancelling pairs are absent."""

    __slots__ = ("letters", "reduced")

    def __init__(self, letters: Iterable[Letter] = ()):
        letters = tuple(Letter(g, s) for g, s in letters)
        for le in letters:
            if le.gen < 0 or le.sign not in (1, -1):
                raise ValueError(f"bad letter {le!r}")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "reduced", _reduce(letters) == letters)

    def __setattr__(self, name, value):
        raise AttributeError("Word is immutable")

    @classmethod
    def identity(cls) -> "Word":
        return _IDENTITY

    @classmethod
    def gen(cls, index: int, sign: int = 1) -> "Word":
        return cls((Letter(index, sign),))

    @classmethod
    def from_signed(cls, signed: Iterable[int]) -> "Word":
        """Build from 1-based signed integers: +k is generator k-1, -k its inverse."""
        return cls(Letter(abs(v) - 1, 1 if v > 0 else -1) for v in signed)

    def to_signed(self) -> tuple[int, ...]:
        return tuple(le.sign * (le.gen + 1) for le in self.letters)

    def free_reduce(self) -> "Word":
        if self.reduced:
            return self
        return Word(_reduce(self.letters))

    def inverse(self) -> "Word":
        return Word(le.inverse() for le in reversed(self.letters))

    def concat(self, other: "Word") -> "Word":
        """Plain concatenation, no reduction."""
        return Word(self.letters + other.letters)

    def __mul__(self, other: "Word") -> "Word":
        return word_product(self, other)

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __eq__(self, other) -> bool:
        return isinstance(other, Word) and self.letters == other.letters

    def __hash__(self) -> int:
        return hash(self.letters)

    def __repr__(self) -> str:
        return f"Word({list(self.to_signed())})"

    @property
    def is_identity(self) -> bool:
        return not self.free_reduce().letters

    def max_gen(self) -> int:
        """Largest generator index used, or -1 for the empty word."""
        return max((le.gen for le in self.letters), default=-1)


_IDENTITY = Word(())


def free_reduce(w: Word) -> Word:
    return w.free_reduce()


def word_product(w1: Word, w2: Word) -> Word:
    """Freely reduced concatenation.

    Alphabet compatibility is the caller's responsibility; boundaries that
    know the alphabet (presentations, tables) validate generator indices.
    """
    return w1.concat(w2).free_reduce()


def word_inverse(w: Word) -> Word:
    return w.inverse()


def cyclic_reduce(w: Word) -> Word:
    """Freely reduce, then strip cancelling first/last letters."""
    letters = list(w.free_reduce().letters)
    while len(letters) >= 2 and letters[0] == letters[-1].inverse():
        letters = letters[1:-1]
    return Word(letters)


class GroupPolynomial:
    """Finite formal sum of reduced words with complex coefficients.

    Zero coefficients are dropped; keys are freely reduced on entry, with
    coefficients of words that collide after reduction merged.
    """

    __slots__ = ("terms",)

    def __init__(self, terms):
        merged: dict[Word, complex] = {}
        items = terms.items() if isinstance(terms, dict) else terms
        for w, c in items:
            w = w.free_reduce()
            c = complex(c)
            if w in merged:
                merged[w] += c
            else:
                merged[w] = c
        object.__setattr__(self, "terms", {w: c for w, c in merged.items() if c != 0})

    def __setattr__(self, name, value):
        raise AttributeError("GroupPolynomial is immutable")

    @classmethod
    def from_word(cls, w: Word, coeff: complex = 1.0) -> "GroupPolynomial":
        return cls([(w, coeff)])

    def support(self) -> tuple[Word, ...]:
        return tuple(self.terms)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def max_support_length(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def adjoint(self) -> "GroupPolynomial":
        return GroupPolynomial([(w.inverse(), c.conjugate()) for w, c in self.terms.items()])

    def __add__(self, other: "GroupPolynomial") -> "GroupPolynomial":
        items = list(self.terms.items()) + list(other.terms.items())
        return GroupPolynomial(items)

    def scale(self, c: complex) -> "GroupPolynomial":
        return GroupPolynomial([(w, c * v) for w, v in self.terms.items()])

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupPolynomial) and self.terms == other.terms

    def __repr__(self) -> str:
        return f"GroupPolynomial({self.terms!r})"
