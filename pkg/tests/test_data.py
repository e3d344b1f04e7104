import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsynth.data import (
    AssociationMatrix,
    ColumnSpec,
    DataError,
    Dataset,
    Schema,
    SchemaError,
    association_matrix,
    bin_midpoints,
    bin_values,
    cramers_v,
    discretize,
    group_variables,
    load_dataset,
    load_schema,
    serialize_dataset,
)

CODEBOOK = """\
# toy
sex | categorical | F,M
status | categorical | A,B,NA | missing=NA
age | continuous | 0 | 100 | 20
"""


def test_minimal_codebook():
    s = load_schema("x | categorical | A,B\n")
    assert len(s) == 1 and s["x"].levels == ("A", "B")


def test_codebook_full_grammar():
    s = load_schema(CODEBOOK)
    assert s.names == ["sex", "status", "age"]
    assert s["status"].missing_code == "NA"
    assert s["age"].bin_count == 20 and s.cardinalities == (2, 3, 20)


@pytest.mark.parametrize("text, needle", [
    ("w | continuous | 10 | 10 | 4\n", "degenerate range"),
    ("age | categorical | A\nage | categorical | B\n", "duplicate column"),
    ("x | categorical | ,\n", "empty level list"),
    ("x | continuous | 0 | 1 | 2.5\n", "bin_count"),
    ("x | intervals | 0\n", "unknown kind"),
])
def test_codebook_errors(text, needle):
    with pytest.raises(SchemaError, match=needle) as exc:
        load_schema(text)
    assert "line" in str(exc.value)


def test_duplicate_reports_both_lines():
    with pytest.raises(SchemaError, match="line 2.*line 1"):
        load_schema("age | categorical | A\nage | categorical | B\n")


def test_missing_code_must_be_level():
    with pytest.raises(SchemaError):
        ColumnSpec("s", "categorical", levels=("A",), missing_code="Z")


def _schema():
    return load_schema(CODEBOOK)


def test_load_three_rows():
    d = load_dataset(_schema(), "age,sex,status\n1,F,A\n50,M,B\n100,F,\n")
    assert d.n == 3
    assert d.values[2, 1] == 2  # empty cell maps to the missing level
    assert d.values[:, 2].tolist() == [1, 50, 100]


def test_clamp_policy():
    d = load_dataset(_schema(), "sex,status,age\nF,A,200\n", policy="clamp")
    assert d.values[0, 2] == 100 and d.clamp_count == 1


def test_strict_unknown_code():
    with pytest.raises(DataError, match=r"row 2, column 'sex'.*'Z'"):
        load_dataset(_schema(), "sex,status,age\nF,A,1\nZ,A,1\n")


def test_strict_out_of_range():
    with pytest.raises(DataError, match="outside"):
        load_dataset(_schema(), "sex,status,age\nF,A,101\n")


def test_missing_header():
    with pytest.raises(DataError, match="header"):
        load_dataset(_schema(), "")
    with pytest.raises(DataError, match="header"):
        load_dataset(_schema(), "sex,age\nF,1\n")


@pytest.mark.parametrize("v, want", [(0.0, 0), (10.0, 4), (7.3, 3)])
def test_binning_examples(v, want):
    col = ColumnSpec("v", "continuous", min=0.0, max=10.0, bin_count=5)
    assert bin_values(col, np.array([v]))[0] == want


def test_binning_matches_floor_formula():
    col = ColumnSpec("v", "continuous", min=-3.0, max=7.0, bin_count=13)
    v = np.random.default_rng(0).uniform(-3, 7, 1000)
    want = [min(math.floor((x + 3) / 10 * 13), 12) for x in v]
    assert bin_values(col, v).tolist() == want


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.floats(-1e3, 1e3), st.floats(1e-2, 1e3), st.integers(0, 2**32 - 1))
def test_midpoints_rebin_to_same_bins(bins, lo, width, seed):
    col = ColumnSpec("v", "continuous", min=lo, max=lo + width, bin_count=bins)
    v = np.random.default_rng(seed).uniform(col.min, col.max, 50)
    b = bin_values(col, v)
    assert np.array_equal(bin_values(col, bin_midpoints(col, b)), b)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_serialize_roundtrip(n, seed):
    gen = np.random.default_rng(seed)
    s = _schema()
    d = Dataset.from_columns(s, [gen.integers(0, 2, n), gen.integers(0, 3, n), gen.uniform(0, 100, n)])
    assert load_dataset(s, serialize_dataset(d)) == d


def test_dataset_invariants():
    s = _schema()
    with pytest.raises(DataError):
        Dataset.from_columns(s, [[2], [0], [1.0]])
    with pytest.raises(DataError):
        Dataset.from_columns(s, [[0], [0], [-1.0]])


def test_discretize_passes_categoricals():
    s = _schema()
    d = Dataset.from_columns(s, [[1, 0], [2, 1], [100.0, 4.99]])
    assert discretize(d).rows.tolist() == [[1, 2, 19], [0, 1, 0]]


# association


def test_copy_has_unit_v():
    a = np.random.default_rng(1).integers(0, 4, 500)
    assert cramers_v(a, a) == pytest.approx(1.0)


def test_constant_column_scores_zero():
    a = np.random.default_rng(1).integers(0, 4, 500)
    assert cramers_v(np.zeros(500), a) == 0.0


def test_independent_columns_small_v():
    vals = []
    for seed in range(10):
        gen = np.random.default_rng(seed)
        vals.append(cramers_v(gen.integers(0, 3, 10000), gen.integers(0, 4, 10000)))
    assert max(vals) <= 0.05


def test_v_matches_chi2_formula():
    from scipy.stats import chi2_contingency

    gen = np.random.default_rng(5)
    a = gen.integers(0, 3, 400)
    b = (a + gen.integers(0, 2, 400)) % 4
    table = np.zeros((3, 4))
    np.add.at(table, (a, b), 1)
    chi2 = chi2_contingency(table, correction=False)[0]
    assert cramers_v(a, b) == pytest.approx(math.sqrt(chi2 / (400 * 2)))


def _binned(n=300, seed=0):
    gen = np.random.default_rng(seed)
    s = Schema(tuple(ColumnSpec(f"c{i}", "categorical", levels=tuple("abc")) for i in range(4)))
    a = gen.integers(0, 3, n)
    rows = np.column_stack([a, (a + gen.integers(0, 2, n)) % 3, gen.integers(0, 3, n), a])
    return discretize(Dataset(s, rows.astype(float)))


def test_association_symmetric_unit_diagonal():
    m = association_matrix(_binned()).scores
    assert np.allclose(m, m.T) and np.all(np.diag(m) == 1)
    assert np.all((m >= 0) & (m <= 1))


def test_association_row_permutation_invariant():
    v = _binned()
    perm = np.random.default_rng(9).permutation(v.n)
    shuffled = type(v)(v.schema, v.rows[perm])
    assert np.allclose(association_matrix(v).scores, association_matrix(shuffled).scores)


def test_association_needs_two_rows():
    v = _binned()
    with pytest.raises(DataError):
        association_matrix(type(v)(v.schema, v.rows[:1]))


# grouping


def _assoc(scores, cards):
    return AssociationMatrix(np.array(scores, dtype=float), tuple(cards))


def test_threshold_one_gives_singletons():
    m = association_matrix(_binned())
    scores = np.where(np.eye(4) == 1, 1.0, np.minimum(m.scores, 0.99))
    assert group_variables(_assoc(scores, m.cardinalities), threshold=1.0).groups == ((0,), (1,), (2,), (3,))


def test_perfect_pair_merges():
    s = np.eye(4)
    s[0, 3] = s[3, 0] = 1.0
    s[1, 2] = s[2, 1] = 0.2
    plan = group_variables(_assoc(s, (3, 3, 3, 3)), threshold=0.5)
    assert plan.groups == ((0, 3), (1,), (2,))


def _greedy_oracle(scores, cards, threshold, max_size, max_cells):
    groups = [[j] for j in range(len(cards))]
    while True:
        cands = []
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                merged = sorted(groups[a] + groups[b])
                cells = 1
                for j in merged:
                    cells *= cards[j]
                if len(merged) > max_size or cells > max_cells:
                    continue
                total = sum(scores[i][j] for i in groups[a] for j in groups[b])
                mean = total / (len(groups[a]) * len(groups[b]))
                if mean >= threshold:
                    cands.append((-mean, groups[a], groups[b]))
        if not cands:
            return sorted(tuple(g) for g in groups)
        _, ga, gb = min(cands)
        groups = [g for g in groups if g not in (ga, gb)] + [sorted(ga + gb)]
        groups.sort()


def test_grouping_matches_greedy_trace():
    scores = [[1, 0.6, 0.7, 0.1], [0.6, 1, 0.65, 0.5], [0.7, 0.65, 1, 0.2], [0.1, 0.5, 0.2, 1]]
    plan = group_variables(_assoc(scores, (2, 2, 2, 2)), threshold=0.3, max_group_size=2)
    assert plan.groups == ((0, 2), (1, 3))
    assert list(plan.groups) == _greedy_oracle(scores, (2, 2, 2, 2), 0.3, 2, 10**6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.integers(1, 4), st.integers(1, 200))
def test_grouping_is_partition_and_matches_oracle(seed, threshold, max_size, max_cells):
    gen = np.random.default_rng(seed)
    q = 6
    u = gen.random((q, q))
    scores = np.triu(u, 1) + np.triu(u, 1).T + np.eye(q)
    cards = gen.integers(2, 6, q)
    plan = group_variables(_assoc(scores, cards), threshold, max_size, max_cells)
    flat = sorted(j for g in plan.groups for j in g)
    assert flat == list(range(q))
    for g in plan.groups:
        assert len(g) <= max_size
        assert len(g) == 1 or math.prod(int(cards[j]) for j in g) <= max_cells
    assert list(plan.groups) == _greedy_oracle(scores.tolist(), cards.tolist(), threshold, max_size, max_cells)
