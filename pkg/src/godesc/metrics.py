"""Corpus generation metrics: BLEU-4, ROUGE-L and a METEOR variant.

All three take equal-length lists of tokenized hypotheses and references
and return scores on a 0-100 scale.

* BLEU is corpus-level BLEU-4 with uniform weights, modified (clipped)
  n-gram precision and the standard brevity penalty. Smoothing: for n >= 2,
  when the corpus match count for that order is zero, 1 is added to that
  order's numerator and denominator; other orders are exact.
* ROUGE-L is the mean over examples of the LCS F-measure with recall
  weighting beta^2 = 1.2.
* METEOR here is restricted to exact + Porter-stem matching (no synonym
  lexicon); harmonic mean with recall weight 9 and fragmentation penalty
  0.5*(chunks/matches)^3. A single contiguous in-order alignment counts as
  unfragmented (no penalty), so identical corpora score exactly 100.
  Reports must name this variant ("meteor-exact-stem").
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

import numpy as np
from scipy import stats

METEOR_VARIANT = "meteor-exact-stem"

Sentence = Sequence[str]


def _check_corpus(hypotheses: Sequence[Sentence], references: Sequence[Sentence]) -> None:
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if len(hypotheses) == 0:
        raise ValueError("empty corpus")


def _ngrams(tokens: Sentence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses: Sequence[Sentence], references: Sequence[Sentence], max_order: int = 4) -> float:
    _check_corpus(hypotheses, references)
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            hyp_counts = _ngrams(hyp, n)
            ref_counts = _ngrams(ref, n)
            totals[n - 1] += max(len(hyp) - n + 1, 0)
            matches[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
    if hyp_len == 0 or matches[0] == 0:
        return 0.0
    log_precision = 0.0
    for n in range(1, max_order + 1):
        m, t = matches[n - 1], totals[n - 1]
        if n >= 2 and m == 0:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_precision += math.log(m / t)
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_precision / max_order)


def _lcs_length(a: Sentence, b: Sentence) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


ROUGE_BETA_SQ = 1.2


def rouge_l_sentence(hyp: Sentence, ref: Sentence) -> float:
    lcs = _lcs_length(hyp, ref)
    if lcs == 0 or not hyp or not ref:
        return 0.0
    p = lcs / len(hyp)
    r = lcs / len(ref)
    return (1.0 + ROUGE_BETA_SQ) * p * r / (r + ROUGE_BETA_SQ * p)


def rouge_l(hypotheses: Sequence[Sentence], references: Sequence[Sentence]) -> float:
    _check_corpus(hypotheses, references)
    return 100.0 * float(np.mean([rouge_l_sentence(h, r) for h, r in zip(hypotheses, references)]))


# ---------------------------------------------------------------------------
# METEOR (exact + stem stages)
# ---------------------------------------------------------------------------


def _stage_matches(hyp: Sentence, ref: Sentence, hyp_free: list[bool], ref_free: list[bool], key) -> list[tuple[int, int]]:
    pairs = []
    for i, h in enumerate(hyp):
        if not hyp_free[i]:
            continue
        hk = key(h)
        for j, r in enumerate(ref):
            if ref_free[j] and key(r) == hk:
                pairs.append((i, j))
                hyp_free[i] = False
                ref_free[j] = False
                break
    return pairs


def meteor_alignment(hyp: Sentence, ref: Sentence) -> list[tuple[int, int]]:
    """Leftmost greedy alignment: exact surface stage, then stem stage."""
    hyp_free = [True] * len(hyp)
    ref_free = [True] * len(ref)
    pairs = _stage_matches(hyp, ref, hyp_free, ref_free, lambda t: t)
    pairs += _stage_matches(hyp, ref, hyp_free, ref_free, porter_stem)
    return sorted(pairs)


def _count_chunks(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for h, r in pairs:
        if prev is None or h != prev[0] + 1 or r != prev[1] + 1:
            chunks += 1
        prev = (h, r)
    return chunks


def meteor_sentence(hyp: Sentence, ref: Sentence) -> float:
    if not hyp or not ref:
        return 0.0
    pairs = meteor_alignment(hyp, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    p = m / len(hyp)
    r = m / len(ref)
    f_mean = 10.0 * p * r / (r + 9.0 * p)
    chunks = _count_chunks(pairs)
    penalty = 0.0 if chunks <= 1 else 0.5 * (chunks / m) ** 3
    return f_mean * (1.0 - penalty)


def meteor_em(hypotheses: Sequence[Sentence], references: Sequence[Sentence]) -> float:
    _check_corpus(hypotheses, references)
    return 100.0 * float(np.mean([meteor_sentence(h, r) for h, r in zip(hypotheses, references)]))


# ---------------------------------------------------------------------------
# Porter stemmer (classic rule tables)
# ---------------------------------------------------------------------------

_STEP2 = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]

_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]

_STEP4 = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in "aeiou":
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        vowel = not _is_consonant(stem, i)
        if not vowel and prev_vowel:
            m += 1
        prev_vowel = vowel
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_consonant(word, len(word) - 1)


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def porter_stem(word: str) -> str:
    """Classic Porter suffix stripping; input assumed lowercase."""
    if len(word) <= 2:
        return word
    w = word

    # step 1a
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif not w.endswith("ss") and w.endswith("s"):
        w = w[:-1]

    # step 1b
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    else:
        fired = False
        if w.endswith("ed") and _has_vowel(w[:-2]):
            w = w[:-2]
            fired = True
        elif w.endswith("ing") and _has_vowel(w[:-3]):
            w = w[:-3]
            fired = True
        if fired:
            if w.endswith(("at", "bl", "iz")):
                w += "e"
            elif _ends_double_consonant(w) and w[-1] not in "lsz":
                w = w[:-1]
            elif _measure(w) == 1 and _ends_cvc(w):
                w += "e"

    # step 1c
    if w.endswith("y") and _has_vowel(w[:-1]):
        w = w[:-1] + "i"

    # step 2
    for suffix, repl in _STEP2:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    # step 3
    for suffix, repl in _STEP3:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    # step 4
    for suffix in _STEP4:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 1:
                if suffix == "ion" and (not stem or stem[-1] not in "st"):
                    break
                w = stem
            break

    # step 5a
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem

    # step 5b
    if _measure(w) > 1 and _ends_double_consonant(w) and w.endswith("l"):
        w = w[:-1]

    return w


# ---------------------------------------------------------------------------
# paired t-test (for multi-seed comparisons)
# ---------------------------------------------------------------------------


def paired_t_test(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test; returns (t statistic, p value)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise ValueError("paired t-test needs two equal samples of size >= 2")
    diffs = xs - ys
    mean = diffs.mean()
    sd = diffs.std(ddof=1)
    n = diffs.size
    if sd == 0.0:
        return (0.0, 1.0) if mean == 0.0 else (math.copysign(math.inf, mean), 0.0)
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), df=n - 1))
    return float(t), p
