import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from assortmatch.errors import (
    DegenerateCharacteristic,
    DegenerateColumn,
    EmptyBinSpec,
    EmptySample,
    MissingColumn,
    UnknownCategory,
    ValidationError,
)
from assortmatch.market_data import (
    AttributeSchema,
    CoupleSample,
    OccupationTable,
    correlation_matrix,
    flexibility_index,
    joint_proportion,
    likelihood_ratio,
    load_couples,
    normalize_stage,
    standardize,
    summary_statistics,
)

SCHEMA = AttributeSchema.from_dict(
    {"attributes": [{"name": "education", "kind": "ordinal", "encoding": "table3"}, {"name": "age"}]}
)


def write(tmp_path, text, name="couples.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_valid_file(tmp_path):
    path = write(
        tmp_path,
        "male_education,male_age,female_education,female_age\n"
        "Undergraduate,35,Undergraduate,33\n"
        "HighSchool,40,Vocational,38\n"
        "(5)Graduate,29,4,30\n",
    )
    s = load_couples(path, SCHEMA)
    assert s.n == 3 and s.dropped == 0
    np.testing.assert_array_equal(s.X[:, 0], [4, 2, 5])
    np.testing.assert_array_equal(s.Y[:, 0], [4, 3, 4])
    np.testing.assert_allclose(s.weights, 1 / 3)


def test_missing_value_row_dropped(tmp_path):
    path = write(
        tmp_path,
        "male_education,male_age,female_education,female_age\n"
        "Undergraduate,35,Undergraduate,33\n"
        "HighSchool,40,Vocational,\n"
        "Graduate,29,Graduate,30\n",
    )
    s = load_couples(path, SCHEMA)
    assert s.n == 2 and s.dropped == 1


def test_vocational_code():
    assert SCHEMA.encode("education", "Vocational", 1) == 3
    assert SCHEMA.encode("education", "(3)Vocational", 1) == 3


def test_unknown_category(tmp_path):
    path = write(
        tmp_path,
        "male_education,male_age,female_education,female_age\nPhD,35,Graduate,33\nGraduate,35,Graduate,33\n",
    )
    with pytest.raises(UnknownCategory, match="PhD"):
        load_couples(path, SCHEMA)


def test_missing_column_named(tmp_path):
    path = write(tmp_path, "male_education,male_age,female_education\n1,2,3\n")
    with pytest.raises(MissingColumn, match="female_age"):
        load_couples(path, SCHEMA)


def test_single_row_rejected(tmp_path):
    path = write(tmp_path, "male_education,male_age,female_education,female_age\n1,2,3,4\n")
    with pytest.raises(EmptySample):
        load_couples(path, SCHEMA)


def test_optional_columns(tmp_path):
    path = write(
        tmp_path,
        "male_education,male_age,female_education,female_age,year,stage,weight\n"
        "1,30,2,31,2023,Proposal,1\n2,31,3,32,2024,serious,3\n3,32,4,33,2024,Proposal,1\n",
    )
    s = load_couples(path, SCHEMA)
    np.testing.assert_allclose(s.weights, [0.2, 0.6, 0.2])
    assert list(s.stage) == ["Proposal", "Serious", "Proposal"]
    assert s.for_year(2024).n == 2
    assert s.for_stage("proposal").n == 2


def test_schema_validation():
    with pytest.raises(ValidationError):
        AttributeSchema.from_dict({"attributes": [{"name": "a"}, {"name": "a"}]})
    with pytest.raises(ValidationError):
        AttributeSchema.from_dict({"attributes": [{"name": "a", "kind": "ordinal"}]})
    with pytest.raises(ValidationError):
        AttributeSchema.from_dict({"attributes": [{"name": "a"}], "bogus": 1})


def test_schema_roundtrip(tmp_path):
    SCHEMA.write(tmp_path / "s.json")
    again = AttributeSchema.from_file(tmp_path / "s.json")
    assert again == SCHEMA


def test_unknown_stage():
    with pytest.raises(ValidationError):
        normalize_stage("Wedding")


def test_sample_invariants(rng):
    with pytest.raises(ValidationError):
        CoupleSample(np.ones((3, 2)), np.ones((3, 3)), ("a", "b"))
    with pytest.raises(ValidationError):
        CoupleSample(np.array([[np.nan], [1.0]]), np.ones((2, 1)), ("a",))
    with pytest.raises(EmptySample):
        CoupleSample(np.ones((1, 1)), np.ones((1, 1)), ("a",))
    s = CoupleSample(rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), ("a", "b"))
    assert not s.X.flags.writeable
    assert s.weights.sum() == pytest.approx(1.0)


def test_standardize_simple():
    s = CoupleSample(np.array([[1.0], [2.0], [3.0]]), np.array([[0.0], [1.0], [5.0]]), ("a",))
    z, moments = standardize(s)
    assert z.X.mean() == pytest.approx(0.0, abs=1e-15)
    assert z.X.var() == pytest.approx(1.0)
    np.testing.assert_allclose(moments.invert(z).X, s.X)


def test_standardize_constant():
    s = CoupleSample(np.array([[5.0], [5.0], [5.0]]), np.array([[0.0], [1.0], [5.0]]), ("a",))
    with pytest.raises(DegenerateColumn, match="male_a"):
        standardize(s)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, (12, 3), elements=st.floats(-1e3, 1e3)))
def test_standardize_idempotent(M):
    if np.any(M.std(axis=0) < 1e-3):
        return
    s = CoupleSample(M, M[::-1], ("a", "b", "c"))
    once, _ = standardize(s)
    twice, _ = standardize(once)
    np.testing.assert_allclose(twice.X, once.X, atol=1e-12)
    np.testing.assert_allclose(twice.Y, once.Y, atol=1e-12)


def test_correlation_examples():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    y = np.array([1.0, 3.0, 2.0, 4.0])
    s = CoupleSample(np.stack([x, -x, y], axis=1), np.ones((4, 3)) + np.eye(4, 3), ("a", "b", "c"))
    C = correlation_matrix(s, "male")
    np.testing.assert_allclose(np.diag(C), 1.0)
    assert C[0, 1] == pytest.approx(-1.0)
    assert C[0, 2] == pytest.approx(0.8)
    with pytest.raises(ValidationError):
        correlation_matrix(s, "other")


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100), st.floats(-100, 100))
def test_correlation_affine_invariance(scale, shift):
    rng = np.random.default_rng(3)
    M = rng.normal(size=(30, 3))
    s = CoupleSample(M, M, ("a", "b", "c"))
    M2 = M.copy()
    M2[:, 1] = scale * M2[:, 1] + shift
    s2 = CoupleSample(M2, M, ("a", "b", "c"))
    np.testing.assert_allclose(correlation_matrix(s2, "male"), correlation_matrix(s, "male"), atol=1e-10)


def test_summary_statistics(small_sample):
    stats = summary_statistics(small_sample)
    assert set(stats) == {"male", "female"}
    assert stats["male"]["x1"]["N"] == small_sample.n
    assert stats["male"]["x1"]["mean"] == pytest.approx(small_sample.X[:, 0].mean())


def test_joint_proportion_examples():
    one = CoupleSample(np.array([[0.5], [0.6]]), np.array([[0.5], [0.7]]), ("a",))
    P = joint_proportion(one, "a", [0, 1, 2])
    np.testing.assert_array_equal(P, [[1, 0], [0, 0]])
    diag = CoupleSample(np.array([[0.5], [0.5], [1.5], [1.5]]), np.array([[0.5], [0.5], [1.5], [1.5]]), ("a",))
    P = joint_proportion(diag, "a", [0, 1, 2])
    np.testing.assert_array_equal(P, [[0.5, 0], [0, 0.5]])
    lr = likelihood_ratio(P)
    np.testing.assert_array_equal(lr, [[2, 0], [0, 2]])


def test_joint_proportion_sums_to_one(rng):
    s = CoupleSample(rng.uniform(0, 10, size=(100, 1)), rng.uniform(0, 10, size=(100, 1)), ("a",))
    P = joint_proportion(s, "a", [0, 2.5, 5, 7.5, 10])
    assert P.sum() == pytest.approx(1.0, abs=1e-12)


def test_joint_proportion_bad_bins(small_sample):
    with pytest.raises(EmptyBinSpec):
        joint_proportion(small_sample, "x1", [1.0])
    with pytest.raises(EmptyBinSpec):
        joint_proportion(small_sample, "x1", [1.0, 0.0])
    with pytest.raises(ValidationError):
        joint_proportion(small_sample, "x1", [0.0, 0.1])


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, 3, elements=st.floats(0.01, 1)), hnp.arrays(np.float64, 4, elements=st.floats(0.01, 1)))
def test_likelihood_ratio_independence(a, b):
    P = np.outer(a / a.sum(), b / b.sum())
    np.testing.assert_allclose(likelihood_ratio(P), 1.0, rtol=1e-12)


def test_likelihood_ratio_zero_row():
    P = np.array([[0.0, 0.0], [0.3, 0.7]])
    lr = likelihood_ratio(P)
    assert np.all(np.isnan(lr[0]))
    assert np.all(np.isfinite(lr[1]))


def _table(C, signs, cats):
    occ = tuple(f"o{k}" for k in range(len(C)))
    return OccupationTable(occ, np.asarray(C, float), dict(zip(occ, cats)), np.asarray(signs, float))


def test_flexibility_two_occupations():
    idx = flexibility_index(_table([[3.0], [1.0]], [1], ["A", "B"]))
    assert idx == {"A": pytest.approx(1.0), "B": pytest.approx(-1.0)}


def test_flexibility_hand_computed():
    C = np.array([[1.0, 10.0], [2.0, 30.0], [3.0, 20.0]])
    signs = [1, -1]
    Z = (C - C.mean(axis=0)) / C.std(axis=0) * signs
    idx = flexibility_index(_table(C, signs, ["A", "A", "B"]))
    assert idx["A"] == pytest.approx(Z[:2].mean())
    assert idx["B"] == pytest.approx(Z[2].mean())


def test_flexibility_degenerate():
    with pytest.raises(DegenerateCharacteristic):
        flexibility_index(_table([[1.0, 2.0], [1.0, 3.0]], [1, 1], ["A", "B"]))


@settings(max_examples=40, deadline=None)
@given(st.floats(-1e3, 1e3), st.integers(0, 2))
def test_flexibility_shift_invariance(c, col):
    rng = np.random.default_rng(8)
    C = rng.normal(size=(6, 3))
    base = flexibility_index(_table(C, [1, -1, 1], list("AABBCC")))
    C2 = C.copy()
    C2[:, col] += c
    shifted = flexibility_index(_table(C2, [1, -1, 1], list("AABBCC")))
    for k in base:
        assert shifted[k] == pytest.approx(base[k], abs=1e-9)
