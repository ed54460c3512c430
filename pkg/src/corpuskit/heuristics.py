"""Line punctuation, repetition, Wikipedia length, and Reddit quality rules."""

from __future__ import annotations

from corpuskit.documents import (
    AttributeSpan,
    Document,
    char_spans_to_byte_spans,
    count_words,
)
from corpuskit.gopher import split_lines, _word_char_spans

TERMINAL_PUNCTUATION = frozenset('.?!"')

MAX_TOKEN_REPETITIONS = 100
REPETITION_MAX_PERIOD = 5

WIKI_MAX_SHORT_WORDS = 25

REDDIT_MIN_COMMENT_CHARS = 500
REDDIT_MIN_SUBMISSION_CHARS = 400
REDDIT_MAX_CHARS = 40_000
REDDIT_MIN_COMMENT_VOTES = 3


def tag_c4_nopunc(doc: Document) -> dict[str, list[AttributeSpan]]:
    """Flag lines whose last non-whitespace character is not terminal
    punctuation (``.``, ``?``, ``!``, ``"``).

    Emits a span per failing line plus the failing-line fraction as a
    document-level attribute. Blank lines are neither flagged nor counted.
    The mixer decides what to do with the signal: remove the flagged spans,
    or drop documents whose fraction exceeds one half.
    """
    text = doc.text
    failing: list[tuple[int, int, float]] = []
    countable = 0
    pos = 0
    for line in split_lines(text):
        stripped = line.rstrip()
        if stripped:
            countable += 1
            if stripped[-1] not in TERMINAL_PUNCTUATION:
                failing.append((pos, pos + len(line), 1.0))
        pos += len(line) + 1
    fraction = len(failing) / countable if countable else 0.0
    attrs = {
        "c4__no_punc_fraction": [AttributeSpan(0, len(doc.text_bytes), fraction)],
    }
    if failing:
        attrs["c4__no_punc_line"] = char_spans_to_byte_spans(text, failing)
    return attrs


def find_repetition_runs(text: str) -> list[tuple[int, int, int]]:
    """Find maximal runs where a 1..5-token sequence repeats consecutively
    more than 100 times; returns (char_start, char_end, repeat_count).

    Each run is reported once, at the smallest period that detects it.
    """
    spans = _word_char_spans(text)
    intern: dict[str, int] = {}
    tokens = [intern.setdefault(text[s:e], len(intern)) for s, e in spans]
    n = len(tokens)
    runs: list[tuple[int, int, int]] = []  # token index ranges + count
    covered: list[tuple[int, int]] = []
    for period in range(1, REPETITION_MAX_PERIOD + 1):
        i = 0
        while i + period <= n:
            inside = next((c for c in covered if c[0] <= i < c[1]), None)
            if inside:
                i = inside[1]
                continue
            repeats = 1
            while (
                i + (repeats + 1) * period <= n
                and tokens[i + repeats * period : i + (repeats + 1) * period]
                == tokens[i : i + period]
            ):
                repeats += 1
            if repeats > MAX_TOKEN_REPETITIONS:
                runs.append((i, i + repeats * period, repeats))
                covered.append((i, i + repeats * period))
                i += repeats * period
            else:
                i += max(1, (repeats - 1) * period)
    runs.sort()
    return [(spans[a][0], spans[b - 1][1], count) for a, b, count in runs]


def tag_repetition(doc: Document) -> dict[str, list[AttributeSpan]]:
    runs = find_repetition_runs(doc.text)
    if not runs:
        return {}
    # runs found at different periods can overlap by a few tokens at their
    # edges; clip so emitted spans stay disjoint
    clipped: list[tuple[int, int, float]] = []
    prev_end = 0
    for s, e, count in sorted(runs):
        s = max(s, prev_end)
        if e <= s:
            continue
        clipped.append((s, e, float(count)))
        prev_end = e
    byte_spans = char_spans_to_byte_spans(doc.text, clipped)
    return {"repetition__run": byte_spans}


def tag_wiki_min_words(doc: Document) -> dict[str, list[AttributeSpan]]:
    """Flag pages with 25 or fewer unicode-segmented words."""
    if count_words(doc.text, mode="unicode") <= WIKI_MAX_SHORT_WORDS:
        return {"wiki__short": [AttributeSpan(0, len(doc.text_bytes), 1.0)]}
    return {}


def load_subreddit_blocklist(path) -> frozenset[str]:
    """One lowercase subreddit name per line; blank lines ignored."""
    with open(path, "r", encoding="utf-8") as f:
        return frozenset(line.strip().lower() for line in f if line.strip())


def tag_banned_subreddit(
    doc: Document, blocklist: frozenset[str]
) -> dict[str, list[AttributeSpan]]:
    """Case-insensitive blocklist membership for the document's subreddit."""
    subreddit = doc.metadata.get("subreddit")
    if subreddit is None:
        raise ValueError(f"doc {doc.id!r} has no 'subreddit' metadata")
    if str(subreddit).lower() in blocklist:
        return {"reddit__banned_subreddit": [AttributeSpan(0, len(doc.text_bytes), 1.0)]}
    return {}


def _truthy(value) -> bool:
    if isinstance(value, str):
        return value.lower() in ("true", "1", "yes")
    return bool(value)


def tag_reddit_quality(
    doc: Document, blocklist: frozenset[str] | None = None
) -> dict[str, list[AttributeSpan]]:
    """Length, vote, and moderation flags for submissions and comments.

    Comments shorter than 500 characters and submissions shorter than 400
    are too short; documents over 40,000 characters are too long; comments
    with fewer than 3 votes are low-vote. Deleted/removed/over-18 content
    and blocklisted subreddits are flagged for removal.
    """
    kind = doc.metadata.get("kind")
    if kind not in ("submission", "comment"):
        raise ValueError(f"doc {doc.id!r} has no valid 'kind' metadata (got {kind!r})")
    flags: dict[str, bool] = {}
    length = len(doc.text)
    min_chars = REDDIT_MIN_COMMENT_CHARS if kind == "comment" else REDDIT_MIN_SUBMISSION_CHARS
    flags["reddit__too_short"] = length < min_chars
    flags["reddit__too_long"] = length > REDDIT_MAX_CHARS
    if kind == "comment" and "votes" in doc.metadata:
        flags["reddit__low_votes"] = int(doc.metadata["votes"]) < REDDIT_MIN_COMMENT_VOTES
    flags["reddit__author_deleted"] = _truthy(doc.metadata.get("author_deleted"))
    flags["reddit__moderator_removed"] = _truthy(doc.metadata.get("moderator_removed"))
    flags["reddit__over_18"] = _truthy(doc.metadata.get("over_18"))
    if blocklist is not None and "subreddit" in doc.metadata:
        flags["reddit__banned_subreddit"] = str(doc.metadata["subreddit"]).lower() in blocklist

    end = len(doc.text_bytes)
    return {name: [AttributeSpan(0, end, 1.0)] for name, value in flags.items() if value}
