"""Source tags, node namespaces, and the shipped relation vocabularies."""
from __future__ import annotations

import csv
from functools import lru_cache
from importlib import resources
from typing import Callable, Sequence

from .edge_model import HAS_LEXICAL_UNIT, MAY_HAVE_PROPERTY, SAME_AS

SOURCE_TAGS = ("AT", "CN", "FN", "RG", "VG", "WD", "WN")

# canonical-node priority when merging identical nodes (lower wins)
SOURCE_PRIORITY = {"CN": 0, "WN": 1, "WD": 2, "FN": 3, "RG": 4, "VG": 5, "AT": 6}

_PREFIX_SOURCE = {"at": "AT", "fn": "FN", "rg": "RG", "vg": "VG", "wd": "WD", "wn": "WN"}


def node_source(node: str) -> str | None:
    """Source vocabulary a node id belongs to, judged by its namespace."""
    if node.startswith("/c/"):
        return "CN"
    prefix, sep, _ = node.partition(":")
    if not sep:
        return None
    if prefix in _PREFIX_SOURCE:
        return _PREFIX_SOURCE[prefix]
    if prefix.startswith("wn") and prefix[2:].isdigit():  # wn30:, wn31: alignment ids
        return "WN"
    return None


def node_priority(node: str) -> tuple[int, str]:
    src = node_source(node)
    return (SOURCE_PRIORITY.get(src, len(SOURCE_PRIORITY)), node)


def priority_key(order: Sequence[str]) -> Callable[[str], tuple[int, str]]:
    """Sort key like :func:`node_priority` for a custom source order."""
    unknown = set(order) - set(SOURCE_TAGS)
    if unknown or len(set(order)) != len(order):
        raise ValueError(f"priority must list distinct source tags from {SOURCE_TAGS}, got {list(order)}")
    rank = {tag: i for i, tag in enumerate(order)}

    def key(node: str) -> tuple[int, str]:
        return (rank.get(node_source(node), len(rank)), node)

    return key


def source_priority(tag: str) -> int:
    return SOURCE_PRIORITY.get(tag, len(SOURCE_PRIORITY))


def _data_text(name: str) -> str:
    return resources.files("kgfuse").joinpath("data", name).read_text(encoding="utf-8")


def _read_list(name: str) -> list[str]:
    out = []
    for line in _data_text(name).splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def _read_tsv(name: str) -> list[dict[str, str]]:
    return list(csv.DictReader(_data_text(name).splitlines(), delimiter="\t"))


@lru_cache(maxsize=None)
def conceptnet_relations() -> frozenset[str]:
    return frozenset(_read_list("conceptnet_relations.txt"))


@lru_cache(maxsize=None)
def atomic_relations() -> dict[str, str]:
    """ATOMIC relation name -> relation label."""
    return {row["relation"]: row["label"] for row in _read_tsv("atomic_relations.tsv")}


@lru_cache(maxsize=None)
def framenet_relation_map() -> dict[str, tuple[str, bool]]:
    """FrameNet edge type -> (relation, reverse direction?)."""
    return {
        row["edge_type"]: (row["relation"], row["reverse"] == "1")
        for row in _read_tsv("framenet_relations.tsv")
    }


@lru_cache(maxsize=None)
def wordnet_relation_map() -> dict[str, str]:
    return {row["wordnet_relation"]: row["relation"] for row in _read_tsv("wordnet_relations.tsv")}


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    return frozenset(_read_list("stopwords.txt"))


def atomic_relation_id(name: str) -> str:
    return f"at:{name}"


def allowed_relations() -> frozenset[str]:
    """Consolidated vocabulary, including ``mw:SameAs`` (present only before merging)."""
    rels = set(conceptnet_relations())
    rels.update(atomic_relation_id(r) for r in atomic_relations())
    rels.update({SAME_AS, MAY_HAVE_PROPERTY, HAS_LEXICAL_UNIT})
    return frozenset(rels)
