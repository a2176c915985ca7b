import gzip
import logging

import numpy as np
import pytest

from qdiana.exceptions import EmptyDatasetError, InsufficientDataError, ParseError
from qdiana.services.dataio import load_libsvm, parse_libsvm, partition, serialize_libsvm, synth_problem
from qdiana.utils.enums import ProblemKind


def numbered_rows(count):
    return "".join(f"{row % 2} 1:{row + 1}\n" for row in range(count))


def test_parse_single_row():
    dataset = parse_libsvm("1 1:0.5 3:-2\n")

    assert dataset.size == 1
    assert dataset.dim == 3
    assert dataset.rows == [(1.0, [(0, 0.5), (2, -2.0)])]


def test_zero_label_maps_to_minus_one():
    assert parse_libsvm("0 2:1\n").rows == [(-1.0, [(1, 1.0)])]
    assert parse_libsvm("+1 1:1\n-1 1:2\n").labels.tolist() == [1.0, -1.0]


@pytest.mark.parametrize("text", ["", "\n\n   \n"])
def test_empty_input_is_an_error(text):
    with pytest.raises(EmptyDatasetError):
        parse_libsvm(text)


@pytest.mark.parametrize(
    "text, line",
    [
        ("1 1:0.5\n1 3:x\n", 2),
        ("1 2:1 1:1\n", 1),
        ("1 2:1 2:3\n", 1),
        ("1 1:1\n\n2 1:1\n", 3),
        ("1 0:1\n", 1),
        ("1 1-2\n", 1),
        ("1 a:2\n", 1),
        ("yes 1:2\n", 1),
        ("1 1:nan\n", 1),
    ],
)
def test_parse_errors_carry_line_number(text, line):
    with pytest.raises(ParseError) as caught:
        parse_libsvm(text)

    assert caught.value.line == line
    assert caught.value.detail.startswith(f"line {line}:")


def test_gzip_input_is_detected():
    plain = parse_libsvm("1 1:0.5 3:-2\n0 2:1\n")

    assert parse_libsvm(gzip.compress(b"1 1:0.5 3:-2\n0 2:1\n")).same_as(plain)


def test_undecodable_line_is_a_parse_error():
    with pytest.raises(ParseError) as caught:
        parse_libsvm(b"1 1:0.5\n\xff\xfe 2:1\n")

    assert caught.value.line == 2


@pytest.mark.parametrize(
    "payload",
    [b"\x1f\x8b" + b"garbage", gzip.compress(b"1 1:0.5\n-1 2:1\n")[:-6]],
    ids=["bad-header", "truncated"],
)
def test_corrupt_gzip_is_a_parse_error(payload):
    with pytest.raises(ParseError) as caught:
        parse_libsvm(payload)

    assert caught.value.line is None
    assert "corrupt gzip stream" in caught.value.detail


def test_serialize_then_parse_gives_same_dataset():
    dataset = parse_libsvm("1 1:0.1 4:-2.5e-3\n-1 2:7\n0 1:1 2:2 3:3 4:4\n")

    assert parse_libsvm(serialize_libsvm(dataset)).same_as(dataset)


def test_load_from_file(tmp_path):
    path = tmp_path / "data.svm"
    path.write_bytes(gzip.compress(numbered_rows(4).encode()))

    assert load_libsvm(path).size == 4


def test_partition_keeps_file_order_without_seed():
    problem = partition(parse_libsvm(numbered_rows(8)), 2, lambda2=0.0, normalize_rows=False)

    assert (problem.n, problem.m, problem.d) == (2, 4, 1)
    np.testing.assert_array_equal(problem.features[0, :, 0], [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(problem.features[1, :, 0], [5.0, 6.0, 7.0, 8.0])
    np.testing.assert_array_equal(problem.labels[0], [-1.0, 1.0, -1.0, 1.0])


def test_partition_drops_trailing_rows(caplog):
    with caplog.at_level(logging.WARNING, logger="DataIO"):
        problem = partition(parse_libsvm(numbered_rows(7)), 2)

    assert problem.m == 3
    assert "Dropping 1 trailing rows" in caplog.text


def test_partition_normalizes_rows_and_sets_default_ridge():
    problem = partition(parse_libsvm("1 1:3 2:4\n0 2:2\n1 1:1\n0 1:1 2:1\n"), 2)

    np.testing.assert_allclose(np.linalg.norm(problem.features, axis=2), 1.0)
    assert problem.lambda2 == pytest.approx(0.25)
    assert problem.mu == pytest.approx(0.25)


def test_seeded_partition_is_a_permutation_of_rows():
    dataset = parse_libsvm(numbered_rows(8))
    first = partition(dataset, 2, seed=5, normalize_rows=False)
    again = partition(dataset, 2, seed=5, normalize_rows=False)

    assert first.fingerprint() == again.fingerprint()
    assert sorted(first.features.ravel().tolist()) == [float(value) for value in range(1, 9)]


def test_partition_needs_a_row_per_worker():
    with pytest.raises(InsufficientDataError):
        partition(parse_libsvm(numbered_rows(3)), 4)


def test_synthetic_problems_are_seeded():
    first = synth_problem(ProblemKind.LOGISTIC, 6, 3, 4, seed=7)
    again = synth_problem(ProblemKind.LOGISTIC, 6, 3, 4, seed=7)
    other = synth_problem(ProblemKind.LOGISTIC, 6, 3, 4, seed=8)

    assert first.fingerprint() == again.fingerprint()
    assert first.fingerprint() != other.fingerprint()
    np.testing.assert_allclose(np.linalg.norm(first.features, axis=2), 1.0)


def test_synthetic_default_ridge():
    problem = synth_problem(ProblemKind.QUADRATIC, 3, 2, 5, seed=1)

    assert problem.lambda2 == pytest.approx(0.1)
    assert problem.mu >= 0.1
