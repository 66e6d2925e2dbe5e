import pytest

from chc_ta import sexpr


def test_read_nested():
    node = sexpr.read_one("(a (b 1 2.5) :kw |quoted sym| \"str\")")
    assert isinstance(node, sexpr.SList)
    assert node[0].text == "a"
    inner = node[1]
    assert [i.kind for i in inner] == ["symbol", "numeral", "decimal"]
    assert node[2].kind == "keyword"
    assert node[3].text == "quoted sym"
    assert node[4].kind == "string"


def test_comments_and_positions():
    nodes = sexpr.read_all("; header\n(a\n  b)")
    assert len(nodes) == 1
    assert nodes[0].line == 2
    assert nodes[0][1].line == 3


def test_hex_and_binary_literals():
    nodes = sexpr.read_all("#x1F #b101")
    assert [n.text for n in nodes] == ["31", "5"]


def test_unbalanced():
    with pytest.raises(sexpr.SexprError):
        sexpr.read_all("(a (b)")
    with pytest.raises(sexpr.SexprError):
        sexpr.read_all("a))")


def test_unterminated_string():
    with pytest.raises(sexpr.SexprError):
        sexpr.read_all('(a "oops)')


def test_first_complete_incremental():
    assert sexpr.first_complete("") == -1
    assert sexpr.first_complete("(a b") == -1
    text = "(a b) (c"
    end = sexpr.first_complete(text)
    assert text[:end] == "(a b)"
    # bare atom needs a trailing delimiter before it counts as complete
    assert sexpr.first_complete("sat") == -1
    assert sexpr.first_complete("sat\n") == 3
    assert sexpr.first_complete('  "multi line\nstring" rest') > 0


def test_first_complete_skips_comments():
    text = "; note\n(ok)"
    end = sexpr.first_complete(text)
    assert text[:end].endswith("(ok)")


def test_roundtrip_write():
    text = "(assert (! (> x 0) :named a0))"
    assert sexpr.write_node(sexpr.read_one(text)) == text
