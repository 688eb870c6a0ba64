import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_dialogue
from ted_erc.cust import SEP, TURN, cust_encode, is_marker, vocabulary, window
from ted_erc.errors import DataError


def three_turns():
    return make_dialogue(["A", "B", "A"], [["a0", "b0"], ["a1"], ["a2", "b2", "c2"]])


def test_current_turn_in_the_middle():
    seq = cust_encode(three_turns(), 1, "past_and_future", max_turns=3)
    assert seq.tokens == ("a0", "b0", TURN, SEP, "a1", SEP, TURN, "a2", "b2", "c2", TURN)
    assert seq.spans == ((0, 2), (4, 5), (7, 10))
    assert seq.included_turns == (0, 1, 2)
    assert seq.current_pos == 1


def test_single_turn():
    seq = cust_encode(make_dialogue(["A"], [["hi"]]), 0, "past")
    assert seq.tokens == (SEP, "hi", SEP, TURN)
    assert seq.spans == ((1, 2),)


def test_past_window_drops_oldest():
    d = make_dialogue(list("ABABABA"))
    assert cust_encode(d, 5, "past", max_turns=4).included_turns == (2, 3, 4, 5)


@pytest.mark.parametrize(
    "m, c, max_turns, expected",
    [
        (7, 3, 5, [2, 3, 4, 5, 6]),   # past trimmed first
        (7, 3, 3, [3, 4, 5]),         # then the future, farthest first
        (7, 3, 1, [3]),
        (7, 0, 2, [0, 1]),
        (4, 2, None, [0, 1, 2, 3]),
    ],
)
def test_window_past_and_future(m, c, max_turns, expected):
    assert window(m, c, "past_and_future", max_turns) == expected


def test_speaker_tokens_outside_spans():
    seq = cust_encode(three_turns(), 2, "past", insert_speaker_tokens=True)
    assert seq.tokens == ("[SPK0]", "a0", "b0", TURN, "[SPK1]", "a1", TURN,
                          SEP, "[SPK0]", "a2", "b2", "c2", SEP, TURN)
    assert [seq.utterance(i) for i in range(3)] == [("a0", "b0"), ("a1",), ("a2", "b2", "c2")]


def test_out_of_range():
    with pytest.raises(DataError):
        cust_encode(three_turns(), 3)
    with pytest.raises(DataError):
        cust_encode(three_turns(), -1)


@st.composite
def dialogue_and_turn(draw):
    m = draw(st.integers(1, 12))
    speakers = draw(st.lists(st.sampled_from("ABC"), min_size=m, max_size=m))
    utts = [[f"w{t}_{i}" for i in range(draw(st.integers(1, 4)))] for t in range(m)]
    return make_dialogue(speakers, utts), draw(st.integers(0, m - 1))


@given(
    dialogue_and_turn(),
    st.sampled_from(["past", "past_and_future"]),
    st.one_of(st.none(), st.integers(1, 6)),
    st.booleans(),
)
def test_span_invariants(dc, context, max_turns, spk):
    d, c = dc
    seq = cust_encode(d, c, context, max_turns, spk)
    assert c in seq.included_turns
    assert seq.current_turn == c
    if max_turns is not None:
        assert len(seq.included_turns) <= max_turns
    if context == "past":
        assert max(seq.included_turns) == c
    elif max_turns is None:
        assert seq.included_turns == tuple(range(len(d)))
    flat = [tok for lo, hi in seq.spans for tok in seq.tokens[lo:hi]]
    assert flat == [tok for t in seq.included_turns for tok in d.turns[t].tokens]
    assert not any(is_marker(seq.tokens[i]) for lo, hi in seq.spans for i in range(lo, hi))
    ends = [hi for _, hi in seq.spans]
    starts = [lo for lo, _ in seq.spans]
    assert all(e <= s for e, s in zip(ends, starts[1:]))


def test_vocabulary():
    empty = vocabulary([])
    assert set(empty) == {TURN, SEP} | {f"[SPK{k}]" for k in range(8)}
    assert empty[TURN] == 0 and empty[SEP] == 1

    words = [f"tok{i}" for i in range(100)]
    utts = [words[i : i + 10] for i in range(0, 100, 10)] + [words[:5]]
    d = make_dialogue(["A", "B"] * 5 + ["A"], utts)
    seqs = [cust_encode(d, c, "past_and_future", insert_speaker_tokens=True) for c in range(len(d))]
    distinct = {tok for s in seqs for tok in s.tokens if not tok.startswith("[")}
    vocab = vocabulary(seqs)
    assert len(vocab) == len(distinct) + len(empty)
    assert len(distinct) == 100
    assert vocabulary(seqs) == vocab
    assert sorted(vocab.values()) == list(range(len(vocab)))
