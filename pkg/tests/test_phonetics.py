import pytest
from hypothesis import given
from hypothesis import strategies as st

from paraqa.phonetics import encode_terms, soundex


@pytest.mark.parametrize(
    "word, length, code",
    [
        ("Hello", 4, "H400"),
        ("Hello", 6, "H40000"),
        ("Hallo", 6, "H40000"),
        ("Robert", 4, "R163"),
        ("Rupert", 4, "R163"),
        ("Ashcraft", 4, "A261"),
        ("Tymczak", 4, "T522"),
        ("Pfister", 4, "P236"),
        ("Honeyman", 4, "H555"),
    ],
)
def test_known_codes(word, length, code):
    assert soundex(word, length) == code


def test_misspellings_collide():
    assert soundex("suspicous") == soundex("suspicious")
    assert soundex("activty") == soundex("activity")


def test_terms():
    codes = encode_terms(["suspicious", "activity"])
    assert [len(c) for c in codes] == [6, 6]
    assert [c[0] for c in codes] == ["S", "A"]
    assert encode_terms(["1985"]) == ["1985"]
    assert encode_terms([]) == []


def test_token_symbols_pass_through():
    assert encode_terms(["x1x1", "y1y22"]) == ["x1x1", "y1y22"]


def test_bad_arguments():
    with pytest.raises(ValueError):
        soundex("Hello", 3)
    with pytest.raises(ValueError):
        soundex("123")


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyzAEIOU", min_size=1, max_size=20),
       st.integers(4, 10))
def test_shape(word, length):
    code = soundex(word, length)
    assert len(code) == length
    assert code[0] == word[0].upper()
    assert code[1:].isdigit()
    assert soundex(word.upper(), length) == code
