#!/usr/bin/env python3
"""SQuAD 2.0-style reference scorer used to produce the EM/F1 golden file.

Follows the official evaluation script, except that punctuation is replaced
by a space instead of being deleted ("Flaps-3" scores as "flaps 3").
A prediction of None is the no-answer prediction.
"""

import collections
import json
import re
import string
import sys


def normalize_answer(s):
    s = s.lower()
    s = "".join(" " if ch in set(string.punctuation) else ch for ch in s)
    s = re.sub(r"\b(a|an|the)\b", " ", s, flags=re.UNICODE)
    return " ".join(s.split())


def get_tokens(s):
    if not s:
        return []
    return normalize_answer(s).split()


def compute_exact(a_gold, a_pred):
    return int(normalize_answer(a_gold) == normalize_answer(a_pred))


def compute_f1(a_gold, a_pred):
    gold_toks = get_tokens(a_gold)
    pred_toks = get_tokens(a_pred)
    common = collections.Counter(gold_toks) & collections.Counter(pred_toks)
    num_same = sum(common.values())
    if len(gold_toks) == 0 or len(pred_toks) == 0:
        return int(gold_toks == pred_toks)
    if num_same == 0:
        return 0
    precision = 1.0 * num_same / len(pred_toks)
    recall = 1.0 * num_same / len(gold_toks)
    return (2 * precision * recall) / (precision + recall)


def score(pred, golds):
    golds = [g for g in golds if normalize_answer(g)] or [""]
    pred = "" if pred is None else pred
    return max(compute_exact(g, pred) for g in golds), max(compute_f1(g, pred) for g in golds)


CASES = [
    ("gear down", ["landing gear down"]),
    (None, []),
    ("The 38 kt", ["38 kt"]),
    ("The Flaps-3", ["flaps 3"]),
    ("38 kt", ["38 kt", "thirty eight knots"]),
    ("max 38 kt gust included", ["38 kt"]),
    ("38", ["38 kt"]),
    (None, ["38 kt"]),
    ("38 kt", []),
    ("An APU start", ["APU start is available"]),
    ("set the parking brake ON", ["Parking brake ON"]),
    ("kt kt 38", ["38 kt"]),
    ("engine anti-ice", ["ENG anti ice"]),
    ("EGT limit for engine start is 725 °C", ["725 °C"]),
    ("725°C", ["725 °C"]),
    ("9.5 qt", ["9.5 qt"]),
    ("9.5 qt", ["9 5 qt"]),
    ("  Max   crosswind  ", ["max crosswind"]),
    ("CONF 3 — VFE: 185 kt", ["CONF 3 — VFE: 185 kt"]),
    ("185 kt", ["CONF 3 — VFE: 185 kt"]),
    ("yellow system", ["green system", "blue system"]),
    ("the yellow electric pump", ["yellow electric pump", "electric pump"]),
    ("all protections", ["All protections are lost in direct law"]),
    ("nothing relevant here", ["38 kt", "gust included"]),
    (None, []),
    ("Approximately 10 minutes.", ["approximately 10 minutes"]),
    ("about 30 minutes", ["about 30 min"]),
    ("a a a", ["a lot"]),
    ("two bottles", ["two", "two fire extinguisher bottles per engine"]),
    ("1000 PSI", ["1,000 psi", "1000 psi"]),
]


def main():
    out = sys.stdout
    for pred, golds in CASES:
        em, f1 = score(pred, golds)
        out.write(json.dumps({"pred": pred, "golds": golds, "em": float(em), "f1": float(f1)}, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
