import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oasw.gbdt import fit_arrays
from oasw.stream import (
    EmptyStreamError,
    RowError,
    SchemaError,
    SpecError,
    StreamSource,
    SyntheticDriftSpec,
    decimate,
    generate_synthetic,
    holdout_split,
    load_csv,
    load_csv_concat,
)

from conftest import SMALL_PARAMS


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_binary_labels(tmp_path):
    p = write(tmp_path, "a.csv", "f1,f2,cls\n1,2,normal\n3,4,attack\n5,6,attack\n7,8,normal\n9,0,attack\n")
    src = load_csv(p, "cls", ["attack"])
    assert src.y.tolist() == [0, 1, 1, 0, 1]
    assert src.feature_names == ["f1", "f2"]
    assert [s.index for s in src] == [0, 1, 2, 3, 4]


def test_negative_labels_alternative(tmp_path):
    p = write(tmp_path, "a.csv", "f,cls\n1,normal\n2,dos\n3,probe\n")
    assert load_csv(p, "cls", negative_labels=["normal"]).y.tolist() == [0, 1, 1]


def test_categorical_first_seen_codes(tmp_path):
    p = write(tmp_path, "a.csv", "proto,n,cls\ntcp,1,a\nudp,2,n\ntcp,3,a\nicmp,4,n\n")
    src = load_csv(p, "cls", ["a"])
    assert src.X[:, 0].tolist() == [0, 1, 0, 2]


def test_comment_lines_skipped(tmp_path):
    p = write(tmp_path, "a.csv", "# generated\n# more\nx,cls\n1,a\n\n2,b\n")
    assert len(load_csv(p, "cls", ["a"])) == 2


def test_missing_label_column(tmp_path):
    p = write(tmp_path, "a.csv", "x,y\n1,2\n")
    with pytest.raises(SchemaError, match="cls"):
        load_csv(p, "cls", ["a"])


def test_bad_row_reports_line(tmp_path):
    p = write(tmp_path, "a.csv", "x,cls\n1,a\n2,a\nbad,a\n")
    with pytest.raises(RowError) as info:
        load_csv(p, "cls", ["a"])
    assert info.value.line == 4


def test_empty_file(tmp_path):
    with pytest.raises(EmptyStreamError):
        load_csv(write(tmp_path, "a.csv", ""), "cls", ["a"])
    with pytest.raises(EmptyStreamError):
        load_csv(write(tmp_path, "b.csv", "x,cls\n"), "cls", ["a"])


def test_concat_tail_then_second(tmp_path):
    first = write(tmp_path, "train.csv", "x,cls\n" + "".join(f"{i},a\n" for i in range(20)))
    second = write(tmp_path, "test.csv", "x,cls\n100,n\n101,a\n")
    src = load_csv_concat(first, second, "cls", ["a"], first_tail_fraction=0.1)
    assert src.X[:, 0].tolist() == [18, 19, 100, 101]
    assert src.y.tolist() == [1, 1, 0, 1]


def test_concat_header_mismatch(tmp_path):
    first = write(tmp_path, "a.csv", "x,cls\n1,a\n")
    second = write(tmp_path, "b.csv", "z,cls\n1,a\n")
    with pytest.raises(SchemaError):
        load_csv_concat(first, second, "cls", ["a"])


def test_replay_is_identical():
    src = generate_synthetic(SyntheticDriftSpec("sudden", [50], seed=3), 100)
    a = [(s.index, s.label, tuple(s.features)) for s in src]
    b = [(s.index, s.label, tuple(s.features)) for s in src]
    assert a == b


def _stream(n):
    return StreamSource(np.arange(n, dtype=float)[:, None], np.arange(n) % 2)


def test_decimate_examples():
    out = decimate(_stream(100), 10, seed=0)
    assert len(out) == 10
    picks = out.X[:, 0].astype(int)
    assert all(10 * k <= p < 10 * (k + 1) for k, p in enumerate(picks))
    assert out.indices.tolist() == list(range(10))
    same = decimate(_stream(100), 1)
    assert np.array_equal(same.X, _stream(100).X)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 300), k=st.integers(1, 40), seed=st.integers(0, 1000))
def test_decimate_properties(n, k, seed):
    out = decimate(_stream(n), k, seed)
    assert len(out) == -(-n // k)
    picks = out.X[:, 0].astype(int)
    assert np.all(picks // k == np.arange(len(out)))
    assert np.array_equal(decimate(_stream(n), k, seed).X, out.X)


def test_holdout_examples():
    split = holdout_split(_stream(100), 0.1)
    assert (len(split.offline), len(split.online)) == (10, 90)
    split = holdout_split(_stream(35140), 0.1)
    assert len(split.offline) == 3514
    assert split.online.indices[0] == 3514
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            holdout_split(_stream(100), bad)
    with pytest.raises(ValueError):
        holdout_split(_stream(1), 0.1)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 500), frac=st.floats(0.01, 0.99))
def test_holdout_partition(n, frac):
    split = holdout_split(_stream(n), frac)
    joined = np.concatenate([split.offline.X[:, 0], split.online.X[:, 0]])
    assert np.array_equal(joined, np.arange(n))
    assert len(split.offline) >= 1 and len(split.online) >= 1


def test_synthetic_label_swap_against_bayes_rule():
    src = generate_synthetic(SyntheticDriftSpec("sudden", [5000], noise_rate=0.0, seed=2), 10000)
    rule = (src.X.sum(axis=1) > 0).astype(int)
    before = np.mean(rule[:5000] == src.y[:5000])
    after = np.mean(rule[5000:] == src.y[5000:])
    # Bayes accuracy for unit-variance blobs at +-1.5 in two dims is Phi(1.5 * sqrt 2) ~= 0.983
    assert before > 0.97
    assert after <= 1 - before + 0.01


def test_synthetic_model_fails_after_change():
    src = generate_synthetic(SyntheticDriftSpec("sudden", [500], noise_rate=0.0, seed=4), 1000)
    model = fit_arrays(src.X[:400], src.y[:400], SMALL_PARAMS)
    assert np.mean(model.predict(src.X[500:]) == src.y[500:]) < 0.6


def test_synthetic_noise_rate():
    clean = generate_synthetic(SyntheticDriftSpec("sudden", [1], noise_rate=0.0, seed=5), 20000)
    noisy = generate_synthetic(SyntheticDriftSpec("sudden", [1], noise_rate=0.2, seed=5), 20000)
    assert np.array_equal(clean.X, noisy.X)
    assert abs(np.mean(clean.y != noisy.y) - 0.2) < 0.015


def test_gradual_ramp_and_recurring():
    spec = SyntheticDriftSpec("gradual", [1000], transition_width=1000, seed=0)
    src = generate_synthetic(spec, 3000)
    rule = (src.X.sum(axis=1) > 0).astype(int)
    agree = [np.mean(rule[a:a + 250] == src.y[a:a + 250]) for a in range(1000, 2000, 250)]
    assert all(x > y for x, y in zip(agree, agree[1:]))
    rec = generate_synthetic(SyntheticDriftSpec("recurring", [100], period=100, seed=0), 500)
    rule = (rec.X.sum(axis=1) > 0).astype(int)
    blocks = [np.mean(rule[a:a + 100] == rec.y[a:a + 100]) > 0.5 for a in range(0, 500, 100)]
    assert blocks == [True, False, True, False, True]


@pytest.mark.parametrize("spec, length", [
    (SyntheticDriftSpec("sudden", [10], noise_rate=0.5), 100),
    (SyntheticDriftSpec("sudden", [10], transition_width=5), 100),
    (SyntheticDriftSpec("sudden", [20, 10]), 100),
    (SyntheticDriftSpec("sudden", [10]), 0),
    (SyntheticDriftSpec("sudden", [100]), 100),
    (SyntheticDriftSpec("gradual", [10]), 100),
    (SyntheticDriftSpec("recurring", [10]), 100),
    (SyntheticDriftSpec("wobbly", [10]), 100),
])
def test_synthetic_spec_rejects(spec, length):
    with pytest.raises(SpecError):
        generate_synthetic(spec, length)


def test_synthetic_seed_determinism():
    spec = SyntheticDriftSpec("sudden", [50], noise_rate=0.1, seed=11)
    a, b = generate_synthetic(spec, 200), generate_synthetic(spec, 200)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_headerless_file_and_dropped_columns(tmp_path):
    p = write(tmp_path, "a.txt", "0,tcp,5,normal,21\n1,udp,6,neptune,18\n")
    src = load_csv(p, "cls", negative_labels=["normal"], column_names=["dur", "proto", "n", "cls", "level"],
                   drop_columns=["level"])
    assert src.feature_names == ["dur", "proto", "n"]
    assert src.X.tolist() == [[0, 0, 5], [1, 1, 6]]
    assert src.y.tolist() == [0, 1]
    with pytest.raises(SchemaError, match="drop"):
        load_csv(p, "cls", ["x"], column_names=["dur", "proto", "n", "cls", "level"], drop_columns=["zzz"])


def test_nsl_shaped_headerless_concat(tmp_path):
    from test_acceptance import NSL_COLUMNS

    def row(i, label):
        vals = [str(i), "tcp" if i % 2 else "udp", "http", "SF"] + [str(i % 7)] * 37 + [label, "20"]
        return ",".join(vals) + "\n"

    train = write(tmp_path, "KDDTrain+.txt", "".join(row(i, "normal" if i % 3 else "neptune") for i in range(50)))
    test = write(tmp_path, "KDDTest+.txt", "".join(row(i, "smurf") for i in range(8)))
    src = load_csv_concat(train, test, "label", negative_labels=["normal"], first_tail_fraction=0.1,
                          column_names=NSL_COLUMNS, drop_columns=["difficulty"],
                          categorical=["protocol_type", "service", "flag"])
    assert len(src) == 5 + 8
    assert src.width == 41
    assert src.y[-8:].tolist() == [1] * 8
