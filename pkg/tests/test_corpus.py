"""Distant-supervision corpus construction from KB and page dumps."""

from __future__ import annotations

import json

import pytest

from sdnet.corpus import (
    ABBREVIATIONS,
    Anchor,
    BuildConfig,
    KbItem,
    WikiPage,
    build_corpus,
    build_type_dictionary,
    entity_types,
    harvest_mentions,
    read_kb_jsonl,
    read_pages_jsonl,
    split_sentences,
    truncate_type_name,
)
from sdnet.data import OTHER_TYPE, TypeDictionary, annotated_to_record, validate_annotated_sentence
from helpers import FIXTURES

CFG = BuildConfig()


# ---- type name truncation ----

def test_truncation_clips_at_first_preposition():
    assert truncate_type_name("state award of the Republic of Moldova", CFG) == "state award"
    assert truncate_type_name("mountain range in Europe", CFG) == "mountain range"


def test_truncation_clips_to_token_budget_without_preposition():
    assert truncate_type_name("first second third fourth", CFG) == "first second third"


def test_truncation_keeps_short_names_unchanged():
    assert truncate_type_name("association football player", CFG) == "association football player"
    assert truncate_type_name("city", CFG) == "city"


def test_truncation_lowercases():
    assert truncate_type_name("Book Series", CFG) == "book series"


def test_truncation_of_name_starting_with_preposition_keeps_token_prefix():
    # an empty pre-preposition prefix would erase the name; fall back to the budget
    assert truncate_type_name("of mice and men and more", CFG) == "of mice and"


# ---- sentence splitting ----

def _texts(text: str) -> list[str]:
    return [text[a:b] for a, b in split_sentences(text)]


def test_split_on_terminator_followed_by_uppercase():
    assert _texts("Dr. Kohl came to Beijing. He left.") == [
        "Dr. Kohl came to Beijing.", "He left."]


def test_split_abbreviations_do_not_break_sentences():
    assert _texts("J.K. Rowling wrote books. Mr. Smith read them.") == [
        "J.K. Rowling wrote books.", "Mr. Smith read them."]
    assert _texts("The U.S. Navy sailed. It returned.") == [
        "The U.S. Navy sailed.", "It returned."]


def test_split_on_question_and_exclamation():
    assert _texts("Really? Yes! Fine.") == ["Really?", "Yes!", "Fine."]


def test_split_before_digit():
    assert _texts("It sold well. 1990 was better.") == ["It sold well.", "1990 was better."]


def test_no_split_before_lowercase():
    assert _texts("It was cheap. really cheap.") == ["It was cheap. really cheap."]


def test_split_spans_index_into_original_text():
    text = "  Alice met Bob.   Bob waved. "
    spans = split_sentences(text)
    assert [text[a:b] for a, b in spans] == ["Alice met Bob.", "Bob waved."]


# ---- type dictionary ----

def _item(i, label, instance_of=(), occupation=(), subclass_of=(), aliases=()):
    return KbItem(item_id=i, label=label, aliases=tuple(aliases),
                  instance_of=tuple(instance_of), subclass_of=tuple(subclass_of),
                  occupation=tuple(occupation))


def test_dictionary_counts_distinct_items_and_drops_rare_types():
    items = {}
    items["T1"] = _item("T1", "city")
    items["T2"] = _item("T2", "asteroid family")
    for i in range(5):
        items[f"Q{i}"] = _item(f"Q{i}", f"c{i}", instance_of=("T1",))
    for i in range(4):
        items[f"A{i}"] = _item(f"A{i}", f"a{i}", instance_of=("T2",))
    label_of = {k: v.label for k, v in items.items()}
    d = build_type_dictionary(items.values(), CFG, label_of)
    assert d.entries.get("city") == 5
    assert "asteroid family" not in d
    assert OTHER_TYPE in d


def test_dictionary_merges_truncated_names():
    items = [_item("T1", "state award of the Republic of Moldova")]
    items += [_item(f"Q{i}", f"m{i}", instance_of=("T1",)) for i in range(6)]
    label_of = {it.item_id: it.label for it in items}
    d = build_type_dictionary(items, CFG, label_of)
    assert d.entries.get("state award") == 6
    assert "state award of the republic of moldova" not in d


def test_entity_types_resolved_in_claim_order_with_other_fallback():
    label_of = {"T1": "human", "T4": "writer", "T5": "novelist"}
    d = TypeDictionary(entries={"human": 9, "writer": 9, "novelist": 9})
    item = _item("Q1", "X", instance_of=("T1",), occupation=("T4", "T5"))
    assert entity_types(item, d, CFG, label_of) == ("human", "writer", "novelist")
    unknown = _item("Q2", "Y", instance_of=("T9",))
    assert entity_types(unknown, d, CFG, label_of) == (OTHER_TYPE,)
    assert entity_types(None, d, CFG, label_of) == (OTHER_TYPE,)


# ---- harvesting ----

def _page(title: str, text: str, anchors: list[tuple[str, str]]) -> WikiPage:
    cursor: dict[str, int] = {}
    rows = []
    for surface, target in anchors:
        at = text.find(surface, cursor.get(surface, 0))
        assert at >= 0
        cursor[surface] = at + len(surface)
        rows.append(Anchor(surface=surface, target=target, offset=at))
    return WikiPage(title=title, text=text, anchors=tuple(rows))


def _mini_world():
    items = {
        "T1": _item("T1", "human"),
        "T2": _item("T2", "city"),
        "Q1": _item("Q1", "Ada Byron", instance_of=("T1",), aliases=("Countess",)),
        "Q2": _item("Q2", "Velgrad", instance_of=("T2",)),
    }
    for i in range(5):
        items[f"H{i}"] = _item(f"H{i}", f"h{i}", instance_of=("T1",))
        items[f"C{i}"] = _item(f"C{i}", f"c{i}", instance_of=("T2",))
    label_of = {k: v.label for k, v in items.items()}
    d = build_type_dictionary(items.values(), CFG, label_of)
    return items, label_of, d


def test_harvest_anchors_and_self_label_occurrences():
    items, label_of, d = _mini_world()
    page = _page("Ada Byron", "Ada Byron lived in Velgrad. Ada Byron wrote programs.",
                 [("Velgrad", "Q2")])
    sents = harvest_mentions(page, d, items, CFG, label_of, page_item=items["Q1"])
    assert [s.id for s in sents] == ["Ada Byron#0", "Ada Byron#1"]
    assert [(m.surface, m.types) for m in sents[0].mentions] == [
        ("Ada Byron", ("human",)), ("Velgrad", ("city",))]
    assert [(m.surface, m.types) for m in sents[1].mentions] == [("Ada Byron", ("human",))]
    for s in sents:
        assert validate_annotated_sentence(s)


def test_harvest_skips_self_label_occurrence_overlapping_anchor():
    items, label_of, d = _mini_world()
    page = _page("Ada Byron", "Ada Byron met Ada Byron.", [("Ada Byron", "Q1")])
    sents = harvest_mentions(page, d, items, CFG, label_of, page_item=items["Q1"])
    # the anchored occurrence is kept once; the free occurrence comes from harvesting
    assert len(sents) == 1
    assert [(m.surface,) for m in sents[0].mentions] == [("Ada Byron",), ("Ada Byron",)]


def test_harvest_drops_entity_free_sentences_and_unsafe_surfaces():
    items, label_of, d = _mini_world()
    items = dict(items)
    items["Q3"] = _item("Q3", "Velgrad, Northern Side", instance_of=("T2",))
    label_of = {k: v.label for k, v in items.items()}
    from collections import Counter
    tally = Counter()
    page = _page("Ada Byron",
                 "Velgrad, Northern Side is cold. Nothing here at all. Ada Byron naps.",
                 [("Velgrad, Northern Side", "Q3")])
    sents = harvest_mentions(page, d, items, CFG, label_of, page_item=items["Q1"], tally=tally)
    assert [s.id for s in sents] == ["Ada Byron#2"]
    assert tally["unsafe_surface_dropped"] == 1
    assert tally["entity_free_sentence_dropped"] >= 1


# ---- file-level builds ----

def test_read_kb_and_pages_tally_malformed_lines(tmp_path):
    kb_path = tmp_path / "kb.jsonl"
    kb_path.write_text(
        json.dumps({"id": "T1", "label": "city"}) + "\n"
        + "{not json}\n"
        + json.dumps({"label": "missing id"}) + "\n",
        encoding="utf-8")
    from collections import Counter
    tally = Counter()
    items = read_kb_jsonl(kb_path, tally)
    assert list(items) == ["T1"]
    assert tally["malformed_kb_record"] == 2

    pages_path = tmp_path / "pages.jsonl"
    pages_path.write_text(
        json.dumps({"title": "A", "text": "A rests.", "anchors": []}) + "\n"
        + json.dumps({"title": "B", "text": "B.", "anchors": [
            {"surface": "zzz", "target": "Q1", "offset": 0}]}) + "\n",
        encoding="utf-8")
    tally = Counter()
    pages = read_pages_jsonl(pages_path, tally)
    assert [p.title for p in pages] == ["A"]
    assert tally["malformed_page_record"] == 1


def test_fixture_build_matches_golden_corpus():
    build = build_corpus(FIXTURES / "kb_items.jsonl", FIXTURES / "pages.jsonl", CFG, jobs=1)
    got = "".join(json.dumps(annotated_to_record(s), ensure_ascii=False) + "\n"
                  for s in build.sentences)
    assert got == (FIXTURES / "golden_corpus.jsonl").read_text(encoding="utf-8")
    assert build.dictionary.to_json() + "\n" == (FIXTURES / "golden_dict.json").read_text(
        encoding="utf-8")


def test_fixture_build_dictionary_cases():
    build = build_corpus(FIXTURES / "kb_items.jsonl", FIXTURES / "pages.jsonl", CFG, jobs=1)
    d = build.dictionary
    assert "state award" in d
    assert "state award of the republic of moldova" not in d
    assert "asteroid family" not in d


def test_fixture_rowling_page_shape():
    build = build_corpus(FIXTURES / "kb_items.jsonl", FIXTURES / "pages.jsonl", CFG, jobs=1)
    rows = [s for s in build.sentences if s.id.startswith("J.K. Rowling#")]
    assert len(rows) == 3
    assert sum(len(s.mentions) for s in rows) == 5
    assert rows[0].mentions[0].surface == "J.K. Rowling"


def test_abbreviation_stoplist_is_usable():
    assert "Dr." in ABBREVIATIONS
    assert "J.K." in ABBREVIATIONS
