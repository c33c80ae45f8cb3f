import pytest

from domino.atoms import catalog
from domino.codegen import DOESNT_MAP
from domino.corpus import entry, load_corpus

EXPECTED = {
    "Bloom filter": ("Write", (4, 3)),
    "Heavy Hitters": ("RAW", (10, 9)),
    "Flowlets": ("PRAW", (6, 2)),
    "RCP": ("PRAW", (3, 3)),
    "Sampled NetFlow": ("IfElseRAW", (4, 2)),
    "HULL": ("Sub", (7, 1)),
    "Adaptive Virtual Queue": ("Nested", (7, 3)),
    "WFQ priorities": ("Nested", (4, 2)),
    "DNS TTL change tracking": ("Nested", (6, 3)),
    "CONGA": ("Pairs", (4, 2)),
    "CoDel": (DOESNT_MAP, (15, 3)),
}

CONGA_SNIPPET = """\
if (p.util < best_path_util[p.src]) {
  best_path_util[p.src] = p.util;
  best_path[p.src] = p.path_id;
} else if (p.path_id == best_path[p.src]) {
  best_path_util[p.src] = p.util;
}"""


def test_eleven_entries_with_published_expectations():
    got = {e.name: (e.expected, e.published_counts) for e in load_corpus()}
    assert got == EXPECTED


def test_expected_atoms_are_catalog_names():
    names = set(catalog().names()) | {DOESNT_MAP}
    assert {e.expected for e in load_corpus()} <= names


def test_lookup_by_name_or_file():
    assert entry("Flowlets").expected == "PRAW"
    assert entry("flowlet").published_counts == (6, 2)
    assert entry("codel.domino").expected == DOESNT_MAP
    assert not entry("CoDel").mappable
    with pytest.raises(KeyError):
        entry("nope")


def test_every_source_validates_and_is_short(corpus):
    for e in corpus:
        assert e.program().body
        assert len(e.source.splitlines()) <= 60, e.name


def test_codel_needs_a_square_root():
    assert "sqrt(" in entry("CoDel").source


def test_conga_contains_the_published_update():
    def norm(text):
        return [ln.strip() for ln in text.splitlines() if ln.strip()]

    src = norm(entry("CONGA").source)
    want = norm(CONGA_SNIPPET)
    assert any(src[i : i + len(want)] == want for i in range(len(src)))


def test_trace_ranges_name_real_fields(corpus):
    for e in corpus:
        fields = set(e.program().packet_fields)
        assert set(e.trace) <= fields, e.name
        assert all(lo <= hi for lo, hi in e.trace.values())
