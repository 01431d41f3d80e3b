import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaxed_eo.data import (
    LabeledPredictions,
    LossSpec,
    dump_predictions,
    load_predictions,
    load_scores,
    prevalences,
    read_predictions_file,
)
from relaxed_eo.exceptions import DegenerateLabelError, DomainError, ParseError, SchemaError


def test_minimal_csv():
    data = load_predictions(b"score,label,group\n0.9,1,A\n0.2,0,A", "csv")
    assert len(data) == 2
    assert data.groups == ("A",)
    assert data.labels.tolist() == [1, 0]


def test_out_of_range_score_reports_line():
    with pytest.raises(DomainError) as err:
        load_predictions(b"score,label,group\n0.9,1,A\n1.3,0,A\n", "csv")
    assert err.value.line == 3


@pytest.mark.parametrize(
    "body, exc",
    [
        ("score,label\n0.1,1\n", SchemaError),
        ("score,label,group\nabc,1,A\n", ParseError),
        ("score,label,group\n0.1,2,A\n", DomainError),
        ("score,label,group\n0.1,x,A\n", ParseError),
        ("score,label,group\n0.1,1\n", ParseError),
        ("score,label,group\nnan,1,A\n", DomainError),
        ("score,label,group\n", SchemaError),
        ("", SchemaError),
    ],
)
def test_csv_rejections(body, exc):
    with pytest.raises(exc):
        load_predictions(body, "csv")


def test_fixture_counts(fixtures_dir):
    data = read_predictions_file(fixtures_dir / "two_groups.csv")
    assert data.groups == ("A", "B")
    # hand count: A has 3 pos / 3 neg, B has 2 pos / 4 neg
    assert data.counts().tolist() == [[3, 3], [4, 2]]
    assert len(data) == 12


def test_json_input():
    text = json.dumps([{"score": 0.4, "label": 0, "group": "x"}, {"score": 1, "label": 1, "group": 7}])
    data = load_predictions(text, "json")
    assert data.groups == ("x", "7")
    assert data.scores.tolist() == [0.4, 1.0]
    with pytest.raises(SchemaError):
        load_predictions('[{"score": 0.4, "label": 0}]', "json")
    with pytest.raises(DomainError):
        load_predictions('[{"score": 0.4, "label": 3, "group": "a"}]', "json")
    with pytest.raises(ParseError):
        load_predictions("[{", "json")


def test_load_scores_without_labels():
    scores, groups = load_scores("score,group\n0.3,A\n0.7,B\n")
    assert scores.tolist() == [0.3, 0.7]
    assert groups == ["A", "B"]


def test_group_order_is_first_appearance():
    data = LabeledPredictions.from_arrays([0.1, 0.2, 0.3], [0, 1, 0], ["z", "a", "z"])
    assert data.groups == ("z", "a")
    assert data.group_codes.tolist() == [0, 1, 0]


def test_immutable():
    data = LabeledPredictions.from_arrays([0.1, 0.2], [0, 1], ["a", "a"])
    with pytest.raises(ValueError):
        data.scores[0] = 0.5


def test_prevalences_single_group():
    data = LabeledPredictions.from_arrays([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1], ["A"] * 4)
    prev = prevalences(data)
    assert prev.p_y.tolist() == [0.5, 0.5]
    assert prev.p_s_given_y.tolist() == [[1.0, 1.0]]


def test_prevalences_two_groups():
    # A: 3 pos, 1 neg; B: 1 pos, 3 neg
    labels = [1, 1, 1, 0, 1, 0, 0, 0]
    data = LabeledPredictions.from_arrays(np.linspace(0, 1, 8), labels, list("AAAABBBB"))
    prev = prevalences(data)
    assert prev.p1 == 0.5
    assert prev.p_s_given_y[0, 1] == 0.75
    assert prev.p_s_given_y[0, 0] == 0.25


def test_prevalences_missing_label():
    data = LabeledPredictions.from_arrays([0.1, 0.2], [1, 1], ["A", "A"])
    with pytest.raises(DegenerateLabelError):
        prevalences(data)


def test_loss_spec():
    assert LossSpec(3, 1).calibrated_threshold == 0.75
    for bad in [(-1, 1), (0, 0), (float("nan"), 1)]:
        with pytest.raises(ValueError):
            LossSpec(*bad)


rows = st.lists(
    st.tuples(
        st.floats(0, 1, allow_nan=False),
        st.integers(0, 1),
        st.sampled_from(["A", "B", "grp c", "7"]),
    ),
    min_size=1,
    max_size=40,
)


@settings(max_examples=60, deadline=None)
@given(rows, st.sampled_from(["csv", "json"]))
def test_round_trip(rows, fmt):
    data = LabeledPredictions.from_arrays(*zip(*rows))
    buf = io.StringIO()
    dump_predictions(data, buf, fmt)
    assert load_predictions(buf.getvalue(), fmt) == data


@settings(max_examples=60, deadline=None)
@given(rows, st.randoms(use_true_random=False))
def test_prevalences_properties(rows, rnd):
    data = LabeledPredictions.from_arrays(*zip(*rows))
    if len(set(data.labels.tolist())) < 2:
        return
    prev = prevalences(data)
    assert np.allclose(prev.p_s_given_y.sum(axis=0), 1.0, atol=1e-12)
    assert ((prev.p_s_given_y >= 0) & (prev.p_s_given_y <= 1)).all()
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    prev2 = prevalences(LabeledPredictions.from_arrays(*zip(*shuffled)))
    assert np.allclose(prev.p_y, prev2.p_y)
    for g in data.groups:
        assert np.allclose(
            prev.p_s_given_y[data.groups.index(g)],
            prev2.p_s_given_y[prev2.groups.index(g)],
        )
