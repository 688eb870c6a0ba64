from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ted_erc.dialogue import LabelSet
from ted_erc.errors import DataError
from ted_erc.metrics import confusion_matrix, evaluate_predictions, macro_f1, micro_f1, weighted_f1


def labels(n, neutral=None):
    return LabelSet(tuple(f"c{i}" for i in range(n)), neutral)


def frac_per_class(preds, golds, n):
    """Per-class F1 as exact fractions, counted example by example."""
    out = []
    for c in range(n):
        tp = sum(1 for p, g in zip(preds, golds) if p == c and g == c)
        fp = sum(1 for p, g in zip(preds, golds) if p == c and g != c)
        fn = sum(1 for p, g in zip(preds, golds) if p != c and g == c)
        den = 2 * tp + fp + fn
        out.append((Fraction(2 * tp, den) if den else Fraction(0), tp + fn))
    return out


def frac_weighted(preds, golds, n):
    rows = frac_per_class(preds, golds, n)
    return sum(f * s for f, s in rows) / len(golds)


def frac_macro(preds, golds, n):
    rows = frac_per_class(preds, golds, n)
    return sum(f for f, _ in rows) / n


def frac_micro(preds, golds, neutral=None):
    tp = fp = fn = 0
    for p, g in zip(preds, golds):
        if g == neutral:
            continue
        if p == g:
            tp += 1
        else:
            fn += 1
            if p != neutral:
                fp += 1
    return Fraction(2 * tp, 2 * tp + fp + fn)


GOLDS10 = [0, 0, 0, 1, 1, 1, 1, 2, 2, 2]
PREDS10 = [0, 1, 0, 1, 1, 2, 1, 2, 0, 2]


def test_trivial_cases():
    ls = labels(3)
    assert weighted_f1([0, 1, 2], [0, 1, 2], ls) == 1.0
    assert weighted_f1([1, 2, 0], [0, 1, 2], ls) == 0.0
    assert macro_f1([0, 1, 2], [0, 1, 2], ls) == 1.0
    assert macro_f1([0, 0, 0], [0, 0, 1], labels(2)) == pytest.approx(0.4)
    assert macro_f1([0, 0, 2, 2], [0, 0, 1, 1], labels(3)) == pytest.approx(1 / 3)


def test_macro_averages_over_every_label():
    # b has F1 0, so the mean over both labels is one half
    assert macro_f1([0, 0], [0, 0], LabelSet(("a", "b"))) == 0.5


def test_fixed_ten_example_case():
    # hand count: F1 = (2/3, 3/4, 2/3), supports (3, 4, 3)
    ls = labels(3)
    assert weighted_f1(PREDS10, GOLDS10, ls) == 0.7
    assert macro_f1(PREDS10, GOLDS10, ls) == 25 / 36
    assert micro_f1(PREDS10, GOLDS10, ls) == 0.7
    assert frac_weighted(PREDS10, GOLDS10, 3) == Fraction(7, 10)


def test_neutral_exclusion_twelve_examples():
    ls = LabelSet(("neu", "a", "b"), 0)
    golds = [0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 0]
    preds = [0, 1, 2, 1, 0, 1, 2, 2, 2, 0, 1, 0]
    # after dropping gold-neutral rows: tp 4, fn 4, fp 2 (two of the misses predicted neutral)
    assert micro_f1(preds, golds, ls, exclude_neutral=True) == 4 / 7
    assert frac_micro(preds, golds, 0) == Fraction(4, 7)


def test_micro_errors():
    with pytest.raises(DataError, match="neutral"):
        micro_f1([0], [0], labels(2), exclude_neutral=True)
    with pytest.raises(DataError, match="empty"):
        micro_f1([0, 1], [0, 0], labels(2, 0), exclude_neutral=True)
    with pytest.raises(DataError, match="empty"):
        weighted_f1([], [], labels(2))
    with pytest.raises(DataError, match="empty"):
        macro_f1([], [], labels(2))


def test_random_cases_match_fraction_oracle():
    rng = np.random.default_rng(77)
    for _ in range(100):
        n = int(rng.integers(2, 6))
        size = int(rng.integers(1, 40))
        golds = rng.integers(0, n, size).tolist()
        preds = rng.integers(0, n, size).tolist()
        ls = labels(n, 0)
        assert weighted_f1(preds, golds, ls) == float(frac_weighted(preds, golds, n))
        assert macro_f1(preds, golds, ls) == float(frac_macro(preds, golds, n))
        assert micro_f1(preds, golds, ls) == float(frac_micro(preds, golds))
        if any(g != 0 for g in golds):
            assert micro_f1(preds, golds, ls, True) == float(frac_micro(preds, golds, 0))


@st.composite
def pairs(draw):
    n = draw(st.integers(2, 6))
    size = draw(st.integers(1, 50))
    golds = draw(st.lists(st.integers(0, n - 1), min_size=size, max_size=size))
    preds = draw(st.lists(st.integers(0, n - 1), min_size=size, max_size=size))
    return n, preds, golds


@given(pairs(), st.randoms())
def test_metric_properties(case, pyrng):
    n, preds, golds = case
    ls = labels(n)
    res = evaluate_predictions(preds, golds, ls)
    for v in (res.weighted_f1, res.micro_f1, res.macro_f1):
        assert 0.0 <= v <= 1.0
    cm = confusion_matrix(preds, golds, n)
    assert cm.sum() == len(golds) and cm.min() >= 0
    assert res.micro_f1 == np.trace(cm) / cm.sum()
    idx = list(range(len(golds)))
    pyrng.shuffle(idx)
    shuffled = evaluate_predictions([preds[i] for i in idx], [golds[i] for i in idx], ls)
    assert (shuffled.weighted_f1, shuffled.macro_f1, shuffled.micro_f1) == (
        res.weighted_f1, res.macro_f1, res.micro_f1)


def test_report_dict():
    res = evaluate_predictions(PREDS10, GOLDS10, labels(3))
    d = res.as_dict(labels(3))
    assert d["per_class"]["c1"]["support"] == 4
    assert d["confusion"][0] == [2, 1, 0]
