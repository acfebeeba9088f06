"""Brute-force reference implementations used only by the tests."""

from fractions import Fraction
from itertools import product


def pairwise_auc(scores, labels):
    """Fraction of (abnormal, normal) pairs ranked correctly, ties counting one half."""
    pos = [s for s, y in zip(scores, labels) if y == "abnormal"]
    neg = [s for s, y in zip(scores, labels) if y == "normal"]
    wins = sum(Fraction(1) if p > n else Fraction(1, 2) if p == n else Fraction(0)
               for p, n in product(pos, neg))
    return wins / (len(pos) * len(neg))


def confusion(scores, labels, tau):
    tp = sum(1 for s, y in zip(scores, labels) if s >= tau and y == "abnormal")
    fp = sum(1 for s, y in zip(scores, labels) if s >= tau and y == "normal")
    return tp, fp


def exhaustive_eer(scores, labels):
    """Smallest |fpr - fnr| over all candidate thresholds; ties -> smaller fpr, then smaller threshold.

    Returns ``(threshold, fpr)`` with exact rational rates.
    """
    P = sum(y == "abnormal" for y in labels)
    N = len(labels) - P
    best = None
    for tau in [float("inf")] + sorted(set(scores)):
        tp, fp = confusion(scores, labels, tau)
        fpr, fnr = Fraction(fp, N), Fraction(P - tp, P)
        key = (abs(fpr - fnr), fpr, tau)
        if best is None or key < best:
            best = key
    return best[2], best[1]
