"""American Soundex with a configurable code length."""

from __future__ import annotations

import re
import unicodedata
from typing import Iterable

__all__ = ["DEFAULT_LENGTH", "SOUNDEX_CODES", "encode_terms", "soundex"]

DEFAULT_LENGTH = 6

SOUNDEX_CODES = {
    **dict.fromkeys("bfpv", "1"),
    **dict.fromkeys("cgjkqsxz", "2"),
    **dict.fromkeys("dt", "3"),
    "l": "4",
    **dict.fromkeys("mn", "5"),
    "r": "6",
}

_DIGIT = re.compile(r"\d")


def _fold(word: str) -> str:
    decomposed = unicodedata.normalize("NFKD", word)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return "".join(ch for ch in stripped.casefold() if "a" <= ch <= "z")


def soundex(word: str, length: int = DEFAULT_LENGTH) -> str:
    """Soundex code of ``word``: one uppercase letter then ``length - 1`` digits.

    >>> soundex("Hello", 4)
    'H400'
    >>> soundex("Hallo", 6)
    'H40000'
    """
    if length < 4:
        raise ValueError(f"soundex length must be >= 4, got {length}")
    letters = _fold(word)
    if not letters:
        raise ValueError(f"no letters to encode in {word!r}")

    first = letters[0]
    digits = []
    last = SOUNDEX_CODES.get(first, "")
    for ch in letters[1:]:
        code = SOUNDEX_CODES.get(ch)
        if code is None:
            # vowels break a run of equal codes; h and w do not
            if ch not in "hw":
                last = ""
            continue
        if code != last:
            digits.append(code)
        last = code
        if len(digits) == length - 1:
            break
    return (first.upper() + "".join(digits)).ljust(length, "0")


def encode_terms(terms: Iterable[str], length: int = DEFAULT_LENGTH) -> list[str]:
    """Soundex every purely alphabetic term; anything carrying a digit or no letters passes through."""
    out = []
    for term in terms:
        if _DIGIT.search(term) or not _fold(term):
            out.append(term)
        else:
            out.append(soundex(term, length))
    return out
