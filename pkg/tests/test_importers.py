import json
from collections import Counter

import pytest

from kgfuse import importers, vocab
from kgfuse.edge_model import MAY_HAVE_PROPERTY
from kgfuse.importers import SourceFormatError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_conceptnet(tmp_path):
    meta = json.dumps({"surfaceText": "[[A cat]] is [[an animal]]"})
    p = write(tmp_path, "cn.tsv", f"/a/x\t/r/IsA\t/c/en/cat/n/wn/animal\t/c/en/animal\t{meta}\n/a/y\t/r/IsA\t/c/en/cat/n/wn/animal\t/c/en/animal\t{{}}\n")
    t = importers.import_conceptnet(p)
    assert len(t) == 2
    e = t[0]
    assert e.node1_label == ("cat",) and e.sentence == "A cat is an animal"
    assert t[1].id.endswith("-1")
    assert e.source == ("CN",)


@pytest.mark.parametrize(
    "row, msg",
    [
        ("/a/x\t/r/Nonsense\t/c/en/a\t/c/en/b\t{}", "relation"),
        ("/a/x\t/r/IsA\tcat\t/c/en/b\t{}", "URI"),
        ("/a/x\t/r/IsA\t/c/en/a\t/c/en/b", "columns"),
        ("/a/x\t/r/IsA\t/c/en/a\t/c/en/b\t{bad", "JSON"),
    ],
)
def test_conceptnet_errors(tmp_path, row, msg):
    p = write(tmp_path, "cn.tsv", "# c\n" + row + "\n")
    with pytest.raises(SourceFormatError, match=msg) as exc:
        importers.import_conceptnet(p)
    assert exc.value.line == 2


def test_conceptnet_allow_list_size():
    rels = vocab.conceptnet_relations()
    assert len(rels) == 47 and "/r/IsA" in rels and "/r/ExternalURL" not in rels
    assert len(vocab.allowed_relations()) == 59


def test_atomic(tmp_path):
    p = write(tmp_path, "at.tsv", "event\trelation\ttarget\nPersonX accepts PersonY's invitation\txIntent\tto be social\n")
    (e,) = importers.import_atomic(p)
    assert e.node1 == "at:personx_accepts_persony's_invitation"
    assert e.relation == "at:xIntent"
    assert e.node1_label == ("PersonX accepts PersonY's invitation", "accepts invitation")
    assert e.node2_label == ("to be social",)


def test_atomic_normalization():
    assert importers.normalize_atomic_label("PersonX plays ___ piano") == "plays piano"
    assert importers.normalize_atomic_label("PersonZ's dog") == "dog"


def test_atomic_bad_relation(tmp_path):
    p = write(tmp_path, "at.tsv", "a\tisCool\tb\n")
    with pytest.raises(SourceFormatError, match="line 1"):
        importers.import_atomic(p)


def test_framenet_reverse_and_labels(tmp_path):
    p = write(tmp_path, "fn.tsv", "node1\tedge_type\tnode2\tnode1_label\tnode2_label\nfn:Performing_arts\tis_inherited_by\tfn:Performance\t\t\n")
    (e,) = importers.import_framenet(p)
    assert (e.node1, e.relation, e.node2) == ("fn:Performance", "/r/IsA", "fn:Performing_arts")
    assert e.node1_label == ("Performance",) and e.node2_label == ("Performing arts",)


def test_framenet_mapping_covers_19_types():
    m = vocab.framenet_relation_map()
    assert len(m) == 19
    assert len({rel for rel, _ in m.values()}) == 9


def test_framenet_errors(tmp_path):
    p = write(tmp_path, "fn.tsv", "fn:a\tmystery\tfn:b\n")
    with pytest.raises(SourceFormatError, match="unmapped"):
        importers.import_framenet(p)
    p = write(tmp_path, "fn.tsv", "a\tuses\tfn:b\n")
    with pytest.raises(SourceFormatError, match="prefix"):
        importers.import_framenet(p)


def test_roget(tmp_path):
    p = write(tmp_path, "rg.tsv", "happy\tsynonym\tglad\nHappy\tantonym\tsad\n")
    t = importers.import_roget(p)
    assert [e.relation for e in t] == ["/r/Synonym", "/r/Antonym"]
    assert t[1].node1 == "rg:happy"


def test_visualgenome(tmp_path):
    dump = write(
        tmp_path, "vg.tsv",
        "object\t1\twater.n.01\twater\nobject\t2\t\tthing\nobject\t3\tcat.n.01\tcat\n"
        "relationship\t3\tnear\t1\nrelationship\t2\tnear\t1\n"
        "attribute\t1\ttropical\nattribute\t3\tsleeping\tVERB\nattribute\t3\tfluffy\n",
    )
    lex = write(tmp_path, "pos.tsv", "attribute\tpos\ntropical\tADJ\n")
    counts = Counter()
    t = importers.import_visualgenome(dump, lex, counts)
    rels = {(e.node1, e.relation, e.node2) for e in t}
    assert rels == {
        ("wn:cat.n.01", "/r/LocatedNear", "wn:water.n.01"),
        ("wn:water.n.01", MAY_HAVE_PROPERTY, "/c/en/tropical"),
        ("wn:cat.n.01", "/r/CapableOf", "/c/en/sleeping"),
    }
    assert counts == Counter(object_without_synset=1, attribute_unknown_pos=1)
    near = next(e for e in t if e.relation == "/r/LocatedNear")
    assert near.sentence == "cat near water"


def test_visualgenome_undeclared_object(tmp_path):
    p = write(tmp_path, "vg.tsv", "relationship\t1\ton\t2\n")
    with pytest.raises(SourceFormatError, match="undeclared"):
        importers.import_visualgenome(p)


def test_wikidata(tmp_path):
    dump = write(tmp_path, "wd.tsv", "Q146\tP279\tQ729\thouse cat\tanimal\nQ1\tP18\tQ2\n")
    props = write(tmp_path, "p.tsv", "property\trelation\nP279\t/r/IsA\n")
    counts = Counter()
    (e,) = importers.import_wikidata_cs(dump, props, counts)
    assert (e.node1, e.relation, e.node2) == ("wd:Q146", "/r/IsA", "wd:Q729")
    assert counts["unmapped_property"] == 1


def test_wikidata_property_must_map_to_conceptnet(tmp_path):
    props = write(tmp_path, "p.tsv", "P1\tat:xWant\n")
    with pytest.raises(SourceFormatError, match="non-ConceptNet"):
        importers.read_property_map(props)


def test_wordnet(tmp_path):
    p = write(tmp_path, "wn.tsv", "wheel.n.01\tpart_holonym\tcar.n.01\n")
    (e,) = importers.import_wordnet(p)
    assert (e.node1, e.relation, e.node2) == ("wn:wheel.n.01", "/r/PartOf", "wn:car.n.01")
    assert e.node1_label == ("wheel",)


def test_import_source_dispatch(bundle):
    for name in importers.IMPORTERS:
        aux = {"wikidata": bundle / "wd_props.tsv", "visualgenome": bundle / "vg_pos.tsv"}.get(name)
        t = importers.import_source(name, bundle / f"{name}.tsv", aux)
        assert len(t) > 0
        assert {s for e in t for s in e.source} == {importers.SOURCE_OF_IMPORTER[name]}
        t.check_relations(vocab.allowed_relations())
    with pytest.raises(ValueError):
        importers.import_source("webchild", bundle / "roget.tsv")
    with pytest.raises(ValueError, match="aux"):
        importers.import_source("wikidata", bundle / "wikidata.tsv")
