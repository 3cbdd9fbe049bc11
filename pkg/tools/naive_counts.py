#!/usr/bin/env python3
"""Independent node/edge counts for the fixture bundle.

Reads the raw source files directly and uses plain set operations: no
package code is imported. Writes fixtures/bundle/expected_report.json.

    python3 tools/naive_counts.py [bundle_dir]
"""
import hashlib
import json
import sys
from pathlib import Path

# only the mappings the fixture uses; anything else is a hard error
FN_REL = {
    "has_semantic_type": ("/r/IsA", False),
    "has_frame_element": ("/r/HasA", False),
    "has_lexical_unit": ("fn:HasLexicalUnit", False),
    "is_inherited_by": ("/r/IsA", True),
    "precedes": ("/r/HasPrerequisite", True),
}
WN_REL = {"hypernym": "/r/IsA"}
RG_REL = {"synonym": "/r/Synonym", "antonym": "/r/Antonym"}
ORDER = ["CN", "WN", "WD", "FN", "RG", "VG", "AT"]


def rows(path):
    out = []
    for line in Path(path).read_text(encoding="utf-8").split("\n"):
        if line.strip() and not line.startswith("#"):
            out.append(line.split("\t"))
    return out


def words(text):
    return "_".join(text.lower().split())


def atomic_norm(text):
    keep = []
    for tok in text.lower().split():
        if tok.endswith("'s"):
            tok = tok[:-2]
        if tok in ("personx", "persony", "personz") or tok.strip("_") == "":
            continue
        keep.append(tok)
    return " ".join(keep)


def source_of(node):
    if node.startswith("/c/"):
        return "CN"
    return node.split(":")[0].upper()


def main(bundle):
    b = Path(bundle)
    triples = {}   # source -> set of (n1, rel, n2)
    labels = {}    # node -> set of labels

    def add(src, n1, rel, n2, l1=(), l2=()):
        triples.setdefault(src, set()).add((n1, rel, n2))
        labels.setdefault(n1, set()).update(x for x in l1 if x)
        labels.setdefault(n2, set()).update(x for x in l2 if x)

    for _, rel, s, e, _meta in rows(b / "conceptnet.tsv"):
        add("CN", s, rel, e, [s.split("/")[3].replace("_", " ")], [e.split("/")[3].replace("_", " ")])

    for ev, rel, tg in rows(b / "atomic.tsv")[1:]:
        add("AT", "at:" + words(ev), "at:" + rel, "at:" + words(tg), [ev, atomic_norm(ev)], [tg, atomic_norm(tg)])

    for r in rows(b / "framenet.tsv")[1:]:
        r = r + [""] * (5 - len(r))
        n1, et, n2, l1, l2 = r
        l1 = l1 or n1.split(":")[-1].replace("_", " ")
        l2 = l2 or n2.split(":")[-1].replace("_", " ")
        rel, rev = FN_REL[et]
        if rev:
            n1, n2, l1, l2 = n2, n1, l2, l1
        add("FN", n1, rel, n2, [l1], [l2])

    for w1, kind, w2 in rows(b / "roget.tsv"):
        add("RG", "rg:" + words(w1), RG_REL[kind], "rg:" + words(w2), [w1], [w2])

    pos = {a.lower(): p for a, p in rows(b / "vg_pos.tsv")[1:]}
    objs = {r[1]: r[2] for r in rows(b / "visualgenome.tsv") if r[0] == "object"}
    for r in rows(b / "visualgenome.tsv"):
        if r[0] == "relationship":
            s, o = objs[r[1]], objs[r[3]]
            if s and o:
                add("VG", "wn:" + s, "/r/LocatedNear", "wn:" + o, [s.split(".")[0]], [o.split(".")[0]])
        elif r[0] == "attribute":
            s = objs[r[1]]
            p = r[3] if len(r) > 3 else pos.get(r[2].lower())
            if not s or p not in ("ADJ", "VERB"):
                continue
            rel = "mw:MayHaveProperty" if p == "ADJ" else "/r/CapableOf"
            add("VG", "wn:" + s, rel, "/c/en/" + words(r[2]), [s.split(".")[0]], [r[2].lower()])

    props = {p: rel for p, rel in rows(b / "wd_props.tsv")[1:]}
    for n1, p, n2, l1, l2 in rows(b / "wikidata.tsv")[1:]:
        if p in props:
            add("WD", "wd:" + n1, props[p], "wd:" + n2, [l1], [l2])

    for s1, kind, s2 in rows(b / "wordnet.tsv"):
        add("WN", "wn:" + s1, WN_REL[kind], "wn:" + s2, [s1.split(".")[0]], [s2.split(".")[0]])

    all_triples = set().union(*triples.values())
    nodes = {n for t in all_triples for n in (t[0], t[2])}

    # lexical links: AT/CN/RG surface nodes sharing a case-folded label, different sources
    def lexical(n):
        if n.startswith("/c/"):
            return n.count("/") == 3
        return n.startswith(("at:", "rg:"))

    same = set()
    cand = sorted(n for n in nodes if lexical(n))
    for i, a in enumerate(cand):
        la = {" ".join(x.split()).casefold() for x in labels[a]}
        for c in cand[i + 1:]:
            lc = {" ".join(x.split()).casefold() for x in labels[c]}
            if source_of(a) != source_of(c) and la & lc:
                same.add(tuple(sorted((a, c))))
    lexical_links = len(same)

    for a, c in rows(b / "cn_wn.tsv"):
        if a in nodes and c in nodes:
            same.add(tuple(sorted((a, c))))
    for a, c in rows(b / "wd_wn.tsv"):
        a, c = "wd:" + a, "wn:" + c
        if a in nodes and c in nodes:
            same.add(tuple(sorted((a, c))))

    lex = {w: n for w, n in rows(b / "fn_lexicon.tsv")}
    hlu = set()
    for _frame, fe, word in rows(b / "fn_corpus.tsv"):
        if word in lex:
            hlu.add(("fn:fe:" + words(fe), "fn:HasLexicalUnit", lex[word]))

    star = all_triples | {(a, "mw:SameAs", c) for a, c in same} | hlu
    star_nodes = {n for t in star for n in (t[0], t[2])}

    # explicit transitive closure: grow each node's class until nothing changes
    cls = {n: {n} for n in star_nodes}
    changed = True
    while changed:
        changed = False
        for a, c in same:
            merged = cls[a] | cls[c]
            for n in merged:
                if cls[n] != merged:
                    cls[n] = merged
                    changed = True
    canon = {n: min(cls[n], key=lambda x: (ORDER.index(source_of(x)), x)) for n in star_nodes}
    final = set()
    for n1, rel, n2 in star:
        c1, c2 = canon[n1], canon[n2]
        if rel == "mw:SameAs" and c1 == c2:
            continue
        final.add((c1, rel, c2))
    final_nodes = {n for t in final for n in (t[0], t[2])}

    digest = hashlib.sha256()
    for p in sorted(b.glob("*.tsv")):
        if p.name != "expected_report.json":
            digest.update(p.name.encode() + b"\0" + p.read_bytes())
    report = {
        "provenance": {
            "generator": "tools/naive_counts.py",
            "method": "raw-file parsing, Python set union, fixed-point transitive closure",
            "inputs_sha256": digest.hexdigest(),
        },
        "links": {"sameAs": len(same), "sameAs_lexical": lexical_links, "hasLexicalUnit": len(hlu)},
        "source_edges": {k: len(v) for k, v in sorted(triples.items())},
        "cskg_star": {"nodes": len(star_nodes), "edges": len(star)},
        "cskg": {"nodes": len(final_nodes), "edges": len(final)},
        "avg_degree": {"cskg_star": 2 * len(star) / len(star_nodes), "cskg": 2 * len(final) / len(final_nodes)},
    }
    out = b / "expected_report.json"
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(report, indent=2, sort_keys=True))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures" / "bundle")
