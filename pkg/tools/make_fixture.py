#!/usr/bin/env python3
"""Generate the checked-in tagged fixture corpora.

Emits E2E-style (meaning representation, reference) pairs in the tagged
interchange format: slot/value MRs over the restaurant schema, references as
lowercase lemma + UPOS token lists (punctuation already trimmed, auxiliaries
folded into VERB).

Realization uses a canonical clause order (intro, price, rating, area, near,
family friendliness) so the content-noun skeleton of every reference is a
deterministic function of the MR, while surface variance lives in verb and
adjective synonym choice and in function-word patterns. Seeded for
byte-stable output.

Usage: python3 tools/make_fixture.py --out-dir data
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

NAMES = [
    "Bibimbap House", "The Golden Palace", "Blue Spice", "The Rice Boat",
    "The Wrestlers", "The Punter", "The Mill", "Loch Fyne", "The Vaults",
    "The Cambridge Blue", "The Eagle", "Green Man", "The Phoenix", "Zizzi",
    "The Dumpling Tree", "Midsummer House", "The Olive Grove", "Travellers Rest",
    "The Plough", "Cotto", "Strada", "Clowns", "The Cricketers", "Aromi",
    "The Twenty Two", "Giraffe", "The Waterman", "Browns Cambridge",
    "Taste of Cambridge", "Fitzbillies", "Wildwood", "The Oak Tree",
]

LANDMARKS = [
    "Clare Hall", "Burger King", "Crowne Plaza Hotel", "The Sorrento",
    "Café Sicilia", "Express by Holiday Inn", "The Bakers", "Raja Indian Cuisine",
    "Rainbow Vegetarian Café", "All Bar One", "Café Rouge", "Yippee Noodle Bar",
    "The Portland Arms", "Ranch", "The Six Bells", "Avalon",
]

FOODS = ["English", "French", "Italian", "Japanese", "Chinese", "Indian", "Fast food"]
PRICES = ["cheap", "moderate", "high", "less than £20", "£20-25", "more than £30"]
RATINGS = ["low", "average", "high", "1 out of 5", "3 out of 5", "5 out of 5"]
AREAS = ["riverside", "city centre"]
EAT_TYPES = ["restaurant", "pub", "coffee shop"]

PRICE_ADJS = {
    "cheap": ["cheap", "inexpensive"],
    "moderate": ["moderate", "reasonable"],
    "high": ["expensive", "pricey"],
}

DET_A = ("a", "DET")
DET_THE = ("the", "DET")
BE = ("be", "VERB")
IT = ("it", "PRON")


def proper(value: str) -> list[tuple[str, str]]:
    return [(tok, "PROPN") for tok in value.lower().split()]


def pick(rng, options):
    return options[rng.integers(0, len(options))]


def coin(rng, p: float) -> bool:
    return bool(rng.random() < p)


def eat_type_np(mr) -> list[tuple[str, str]]:
    et = mr.get("eatType")
    if et == "coffee shop":
        return [("coffee", "NOUN"), ("shop", "NOUN")]
    if et in ("restaurant", "pub"):
        return [(et, "NOUN")]
    return [("place", "NOUN")]


def food_tokens(mr) -> list[tuple[str, str]]:
    food = mr["food"]
    if food == "Fast food":
        return [("fast", "ADJ"), ("food", "NOUN")]
    return [(food.lower(), "ADJ"), ("food", "NOUN")]


def intro_clause(rng, mr) -> list[tuple[str, str]]:
    """'<name> be a <eatType> that serve <food> food' and variants."""
    toks = proper(mr["name"]) + [BE, DET_A]
    if "food" in mr:
        toks += eat_type_np(mr)
        rel = (pick(rng, ["that", "which"]), "SCONJ")
        verb = (pick(rng, ["serve", "offer", "provide"]), "VERB")
        toks += [rel, verb] + food_tokens(mr)
    else:
        if coin(rng, 0.5):
            toks += [(pick(rng, ["nice", "lovely", "great"]), "ADJ")]
        toks += eat_type_np(mr)
    return toks


def price_tokens(rng, p: str) -> list[tuple[str, str]]:
    if p in PRICE_ADJS:
        return [(pick(rng, PRICE_ADJS[p]), "ADJ")]
    if p == "less than £20":
        return [("less", "ADV"), ("than", "ADP"), ("£20", "NUM")]
    if p == "£20-25":
        return [("£20-25", "NUM")]
    return [("more", "ADV"), ("than", "ADP"), ("£30", "NUM")]


def price_clause(rng, mr) -> list[tuple[str, str]]:
    p = mr["priceRange"]
    value = price_tokens(rng, p)
    if coin(rng, 0.5):
        return [DET_THE, ("price", "NOUN"), ("range", "NOUN"), BE] + value
    if p in PRICE_ADJS:
        return [("with", "ADP"), DET_A] + value + [("price", "NOUN"), ("range", "NOUN")]
    return [("with", "ADP"), DET_A, ("price", "NOUN"), ("range", "NOUN"), ("of", "ADP")] + value


def rating_clause(rng, mr) -> list[tuple[str, str]]:
    r = mr["customerRating"]
    verb = (pick(rng, ["have", "get"]), "VERB")
    head = [IT, verb, DET_A]
    if r in ("low", "average", "high"):
        return head + [(r, "ADJ"), ("customer", "NOUN"), ("rating", "NOUN")]
    num = r.split()[0]
    return head + [("customer", "NOUN"), ("rating", "NOUN"), ("of", "ADP"),
                   (num, "NUM"), ("out", "ADP"), ("of", "ADP"), ("5", "NUM")]


def area_clause(rng, mr) -> list[tuple[str, str]]:
    verb = (pick(rng, ["locate", "situate"]), "VERB")
    toks = [IT, BE, verb, ("in", "ADP"), DET_THE]
    if mr["area"] == "riverside":
        return toks + [("riverside", "NOUN"), ("area", "NOUN")]
    return toks + [("city", "NOUN"), ("centre", "NOUN")]


def near_clause(rng, mr) -> list[tuple[str, str]]:
    lm = proper(mr["near"])
    if coin(rng, 0.5):
        return [("near", "ADP")] + lm
    return [("close", "ADJ"), ("to", "ADP")] + lm


def family_clause(rng, mr) -> list[tuple[str, str]]:
    yes = mr["familyFriendly"] == "yes"
    if coin(rng, 0.5):
        toks = [IT, BE]
        if not yes:
            toks += [("not", "PART")]
        return toks + [("family", "NOUN"), ("friendly", "ADJ")]
    if yes:
        return [IT, ("welcome", "VERB"), ("family", "NOUN")]
    return [IT, ("do", "VERB"), ("not", "PART"), ("welcome", "VERB"), ("family", "NOUN")]


def realize(rng, mr) -> list[tuple[str, str]]:
    """Canonical clause order; per-clause synonym and pattern sampling keeps
    the content-noun skeleton a deterministic function of the MR."""
    toks = intro_clause(rng, mr)
    if "priceRange" in mr:
        toks += price_clause(rng, mr)
    if "customerRating" in mr:
        toks += rating_clause(rng, mr)
    if "area" in mr:
        toks += area_clause(rng, mr)
    if "near" in mr:
        toks += near_clause(rng, mr)
    if "familyFriendly" in mr:
        toks += family_clause(rng, mr)
    return toks


def sample_mr(rng) -> dict[str, str]:
    mr = {"name": pick(rng, NAMES)}
    if coin(rng, 0.7):
        mr["eatType"] = pick(rng, EAT_TYPES)
    if coin(rng, 0.85):
        mr["food"] = pick(rng, FOODS)
    if coin(rng, 0.65):
        mr["priceRange"] = pick(rng, PRICES)
    if coin(rng, 0.6):
        mr["customerRating"] = pick(rng, RATINGS)
    if coin(rng, 0.6):
        mr["area"] = pick(rng, AREAS)
    if coin(rng, 0.5):
        mr["familyFriendly"] = pick(rng, ["yes", "no"])
    if coin(rng, 0.5):
        mr["near"] = pick(rng, LANDMARKS)
    return mr


SLOT_ORDER = ("name", "eatType", "food", "priceRange", "customerRating", "area", "familyFriendly", "near")


def generate(seed: int, n_records: int) -> list[str]:
    rng = np.random.default_rng(seed)
    lines = [json.dumps({"meta": {"generator": "make_fixture", "seed": seed, "records": n_records}})]
    count = 0
    while count < n_records:
        mr = sample_mr(rng)
        mr_pairs = [[s, mr[s]] for s in SLOT_ORDER if s in mr]
        for _ in range(int(rng.integers(2, 5))):
            if count >= n_records:
                break
            ref = realize(rng, mr)
            lines.append(json.dumps({"mr": mr_pairs, "ref": ref}, ensure_ascii=False))
            count += 1
    return lines


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="data")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fname, seed, n in [
        ("fixture_train.jsonl", 20240601, 2000),
        ("fixture_test.jsonl", 20240602, 400),
    ]:
        path = out / fname
        path.write_text("\n".join(generate(seed, n)) + "\n", encoding="utf-8")
        print(f"wrote {path} ({n} records)")


if __name__ == "__main__":
    main()
