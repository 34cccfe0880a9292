"""Corpus pipeline: tagged E2E-style records in, per-layer decoding targets out.

The interchange format is JSON lines, one record per (meaning representation,
reference) pair: ``{"mr": [[slot, value], ...], "ref": [[lemma, upos], ...]}``.
A leading record carrying a ``meta`` key (and no ``mr``) is treated as a file
header and skipped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

E2E_SLOTS = (
    "name",
    "eatType",
    "food",
    "priceRange",
    "customerRating",
    "area",
    "familyFriendly",
    "near",
)

UPOS_TAGS = frozenset(
    {
        "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
        "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
    }
)

# Tag carried by delexicalization placeholder tokens; grouped with PROPN.
PLACEHOLDER_TAG = "PLH"

# Slots whose values are sparse open-class strings and get delexicalized.
DELEX_SLOTS = ("name", "near")
PLACEHOLDER_TOKENS = {"name": "<name>", "near": "<near>"}

NOUN_GROUP = frozenset({"NOUN", "PROPN", "PRON"})
VERB_GROUP = frozenset({"VERB"})
ADJ_GROUP = frozenset({"ADJ", "ADV"})
OTHERS_GROUP = UPOS_TAGS - NOUN_GROUP - VERB_GROUP - ADJ_GROUP

_GROUP_NAMES = {
    NOUN_GROUP: "NOUN+PROPN+PRON",
    VERB_GROUP: "VERB",
    ADJ_GROUP: "ADJ+ADV",
    OTHERS_GROUP: "OTHERS",
}


class CorpusError(ValueError):
    """Malformed corpus input (reported with line numbers where possible)."""


@dataclass(frozen=True)
class GeneratingOrder:
    """Ordered partition of the UPOS tags into the four decoding groups."""

    groups: tuple[frozenset[str], ...]

    def __post_init__(self):
        if len(self.groups) != 4:
            raise CorpusError(f"generating order needs 4 groups, got {len(self.groups)}")
        union = frozenset().union(*self.groups)
        if union != UPOS_TAGS:
            raise CorpusError("generating order groups must partition the UPOS set")
        total = sum(len(g) for g in self.groups)
        if total != len(UPOS_TAGS):
            raise CorpusError("generating order groups must be pairwise disjoint")

    def group_of(self, tag: str) -> int:
        """1-based index of the group a tag belongs to (placeholders act as PROPN)."""
        if tag == PLACEHOLDER_TAG:
            tag = "PROPN"
        for i, g in enumerate(self.groups, start=1):
            if tag in g:
                return i
        raise CorpusError(f"unknown POS tag {tag!r}")

    def label(self) -> str:
        return " > ".join(_GROUP_NAMES.get(g, "+".join(sorted(g))) for g in self.groups)

    def spec(self) -> str:
        """Comma-separated group lists, parseable by ``parse_order``."""
        return ", ".join(
            "OTHERS" if g == OTHERS_GROUP else " ".join(sorted(g)) for g in self.groups
        )


def parse_order(text: str) -> GeneratingOrder:
    """Parse 'NOUN PROPN PRON, VERB, ADJ ADV, OTHERS' into a GeneratingOrder."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise CorpusError(f"order needs 4 comma-separated groups, got {len(parts)}")
    groups = []
    for part in parts:
        if part.upper() == "OTHERS":
            groups.append(OTHERS_GROUP)
        else:
            tags = frozenset(part.split())
            bad = tags - UPOS_TAGS
            if bad:
                raise CorpusError(f"unknown POS tag {sorted(bad)[0]!r} in order")
            groups.append(tags)
    return GeneratingOrder(tuple(groups))


def _order(*groups) -> GeneratingOrder:
    return GeneratingOrder(tuple(groups))


# The six generating orders of the experiment grid.
SIX_ORDERS: tuple[GeneratingOrder, ...] = (
    _order(NOUN_GROUP, VERB_GROUP, ADJ_GROUP, OTHERS_GROUP),
    _order(NOUN_GROUP, ADJ_GROUP, VERB_GROUP, OTHERS_GROUP),
    _order(VERB_GROUP, NOUN_GROUP, ADJ_GROUP, OTHERS_GROUP),
    _order(VERB_GROUP, ADJ_GROUP, NOUN_GROUP, OTHERS_GROUP),
    _order(NOUN_GROUP, OTHERS_GROUP, VERB_GROUP, ADJ_GROUP),
    _order(NOUN_GROUP, OTHERS_GROUP, ADJ_GROUP, VERB_GROUP),
)

DEFAULT_ORDER = SIX_ORDERS[0]


@dataclass(frozen=True)
class TaggedSentence:
    """Lemmatized, lowercased, punctuation-free token sequence with UPOS tags."""

    tokens: tuple[tuple[str, str], ...]

    def lemmas(self) -> tuple[str, ...]:
        return tuple(lemma for lemma, _ in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class SemanticFrame:
    """Ordered slot/value pairs plus the placeholder -> original-value map."""

    slots: tuple[tuple[str, str], ...]
    delex_map: dict[str, str] = field(default_factory=dict)

    def get(self, slot: str) -> str | None:
        for name, value in self.slots:
            if name == slot:
                return value
        return None


@dataclass(frozen=True)
class LayerTargetSet:
    """The four nested target subsequences of one sentence under one order."""

    layers: tuple[tuple[str, ...], ...]
    source: TaggedSentence


def _validate_token(lemma: str, tag: str, line_no: int) -> None:
    if tag not in UPOS_TAGS and tag != PLACEHOLDER_TAG:
        raise CorpusError(f"line {line_no}: unknown POS tag {tag!r}")
    if not lemma:
        raise CorpusError(f"line {line_no}: empty lemma")
    if lemma != lemma.lower():
        raise CorpusError(f"line {line_no}: lemma {lemma!r} is not lowercase")
    if not any(ch.isalnum() for ch in lemma) and not lemma.startswith("<"):
        raise CorpusError(f"line {line_no}: pure punctuation token {lemma!r}")


def load_tagged_corpus(path) -> list[tuple[SemanticFrame, list[TaggedSentence]]]:
    """Parse an interchange file, grouping references by identical MR.

    Groups preserve first-appearance order; the grouping key is the exact
    slot/value pair list, so multi-reference evaluation sees every reference
    written for the same meaning representation.
    """
    grouped: dict[tuple, tuple[SemanticFrame, list[TaggedSentence]]] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            if "mr" not in rec:
                if "meta" in rec:
                    continue
                raise CorpusError(f"line {line_no}: record has no 'mr' field")
            if "ref" not in rec:
                raise CorpusError(f"line {line_no}: record has no 'ref' field")
            slots = []
            for pair in rec["mr"]:
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise CorpusError(f"line {line_no}: malformed mr pair {pair!r}")
                slot, value = pair
                if slot not in E2E_SLOTS:
                    raise CorpusError(f"line {line_no}: unknown slot {slot!r}")
                slots.append((slot, str(value)))
            tokens = []
            for pair in rec["ref"]:
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise CorpusError(f"line {line_no}: malformed ref token {pair!r}")
                lemma, tag = str(pair[0]), str(pair[1])
                _validate_token(lemma, tag, line_no)
                tokens.append((lemma, tag))
            if not tokens:
                raise CorpusError(f"line {line_no}: empty reference")
            key = tuple(slots)
            sent = TaggedSentence(tuple(tokens))
            if key in grouped:
                grouped[key][1].append(sent)
            else:
                grouped[key] = (SemanticFrame(key), [sent])
    return list(grouped.values())


def delexicalize(frame: SemanticFrame, sent: TaggedSentence) -> tuple[SemanticFrame, TaggedSentence]:
    """Replace sparse slot values (name, near) with placeholder tokens.

    Matching is left-to-right, longest value first, against the lowercased
    value token sequence. Placeholders carry PLACEHOLDER_TAG and the original
    value string is recorded in the frame's delex_map.
    """
    patterns = []
    delex_map = dict(frame.delex_map)
    for slot in DELEX_SLOTS:
        value = frame.get(slot)
        if value and value not in PLACEHOLDER_TOKENS.values():
            patterns.append((PLACEHOLDER_TOKENS[slot], tuple(value.lower().split())))
            delex_map[PLACEHOLDER_TOKENS[slot]] = value
    patterns.sort(key=lambda p: -len(p[1]))

    lemmas = sent.lemmas()
    out: list[tuple[str, str]] = []
    i = 0
    while i < len(lemmas):
        for placeholder, toks in patterns:
            if toks and lemmas[i : i + len(toks)] == toks:
                out.append((placeholder, PLACEHOLDER_TAG))
                i += len(toks)
                break
        else:
            out.append(sent.tokens[i])
            i += 1

    new_slots = tuple(
        (slot, PLACEHOLDER_TOKENS[slot] if slot in DELEX_SLOTS and frame.get(slot) else value)
        for slot, value in frame.slots
    )
    return SemanticFrame(new_slots, delex_map), TaggedSentence(tuple(out))


def relexicalize(tokens, delex_map: dict[str, str]) -> list[str]:
    """Expand placeholder tokens back into the original (lowercased) span."""
    out: list[str] = []
    for tok in tokens:
        if tok in delex_map:
            out.extend(delex_map[tok].lower().split())
        else:
            out.append(tok)
    return out


def build_layer_targets(sent: TaggedSentence, order: GeneratingOrder) -> LayerTargetSet:
    """Nested per-layer subsequences: layer i keeps tokens of groups 1..i."""
    group_idx = [order.group_of(tag) for _, tag in sent.tokens]
    layers = tuple(
        tuple(lemma for (lemma, _), g in zip(sent.tokens, group_idx) if g <= i)
        for i in range(1, 5)
    )
    return LayerTargetSet(layers, sent)


def length_stats(target_sets) -> tuple[float, float, float, float]:
    """Mean token count per layer, rounded to 2 decimals."""
    target_sets = list(target_sets)
    if not target_sets:
        raise CorpusError("length_stats: empty corpus")
    sums = [0, 0, 0, 0]
    for ts in target_sets:
        for i, layer in enumerate(ts.layers):
            sums[i] += len(layer)
    n = len(target_sets)
    return tuple(round(s / n, 2) for s in sums)


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>", PLACEHOLDER_TOKENS["name"], PLACEHOLDER_TOKENS["near"])


class Vocabulary:
    """Token <-> id bijection with stable reserved ids.

    Ids 0..5 are PAD, BOS, EOS, UNK and the two delexicalization placeholders;
    the rest is the sorted training-split token inventory (no frequency cut).
    """

    def __init__(self, tokens):
        extra = sorted(set(tokens) - set(RESERVED))
        self.id_to_token: list[str] = list(RESERVED) + extra
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def decode(self, idx: int) -> str:
        return self.id_to_token[idx]

    @classmethod
    def build(cls, corpus: list[tuple[SemanticFrame, list[TaggedSentence]]]) -> "Vocabulary":
        """Collect every frame token and reference lemma from a (delexicalized)
        training corpus."""
        tokens: set[str] = set()
        for frame, refs in corpus:
            for slot, value in frame.slots:
                tokens.add(slot.lower())
                tokens.update(value.lower().split())
            for sent in refs:
                tokens.update(sent.lemmas())
        return cls(tokens)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for i, tok in enumerate(self.id_to_token):
                f.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        vocab = cls(())
        vocab.id_to_token = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                tok, _, idx = line.rstrip("\n").partition("\t")
                assert int(idx) == len(vocab.id_to_token), "vocab file ids out of order"
                vocab.id_to_token.append(tok)
        vocab.token_to_id = {t: i for i, t in enumerate(vocab.id_to_token)}
        return vocab


def encode_frame(frame: SemanticFrame, vocab: Vocabulary) -> tuple[list[int], np.ndarray]:
    """Flatten a frame to (token ids, multi-hot vector) in canonical slot order."""
    seq: list[int] = []
    for slot in E2E_SLOTS:
        value = frame.get(slot)
        if value is None:
            continue
        seq.append(vocab.encode(slot.lower()))
        seq.extend(vocab.encode(tok) for tok in value.lower().split())
    multi_hot = np.zeros(len(vocab), dtype=np.float64)
    multi_hot[seq] = 1.0
    return seq, multi_hot


def delexicalize_corpus(
    corpus: list[tuple[SemanticFrame, list[TaggedSentence]]],
) -> list[tuple[SemanticFrame, list[TaggedSentence]]]:
    """Delexicalize every (frame, reference) group of a loaded corpus."""
    out = []
    for frame, refs in corpus:
        new_frame = frame
        new_refs = []
        for sent in refs:
            new_frame, s2 = delexicalize(frame, sent)
            new_refs.append(s2)
        out.append((new_frame, new_refs))
    return out
