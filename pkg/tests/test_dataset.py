import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pdvol.dataset import (
    AUGMENT_REFLECT,
    LABEL_HC,
    LABEL_PD,
    LabeledDataset,
    apply_standardizer,
    augment_negatives,
    dataset_from_csv,
    dataset_to_csv,
    fit_standardizer,
    invert_standardizer,
    stratified_kfold,
)
from pdvol.errors import ClassTooSmall, NoNegatives


def make_ds(features, labels, names=None, ids=None):
    features = np.atleast_2d(np.asarray(features, dtype=float))
    n = features.shape[1]
    return LabeledDataset(
        features=features,
        labels=np.asarray(labels),
        feature_names=tuple(names) if names else tuple(f"v{i}" for i in range(n)),
        subject_ids=tuple(ids) if ids else tuple(f"s{i}" for i in range(features.shape[0])),
    )


class TestLabeledDataset:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            make_ds([[1.0, np.nan]], [LABEL_PD])

    def test_rejects_duplicate_feature_names(self):
        with pytest.raises(ValueError):
            make_ds([[1.0, 2.0]], [LABEL_PD], names=("a", "a"))

    def test_rejects_label_length_mismatch(self):
        with pytest.raises(ValueError):
            make_ds([[1.0], [2.0]], [LABEL_PD])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            LabeledDataset(
                features=np.empty((0, 2)),
                labels=np.empty(0, dtype=np.int8),
                feature_names=("a", "b"),
                subject_ids=(),
            )

    def test_features_read_only(self):
        ds = make_ds([[1.0]], [LABEL_PD])
        with pytest.raises(ValueError):
            ds.features[0, 0] = 2.0

    def test_take_preserves_order(self):
        ds = make_ds([[1.0], [2.0], [3.0]], [1, 0, 1])
        sub = ds.take([2, 0])
        assert sub.subject_ids == ("s2", "s0")
        assert sub.features[:, 0].tolist() == [3.0, 1.0]


class TestAugmentNegatives:
    def test_single_hc_row_appends_zeros(self):
        # One HC row equals its own mean, so x - mu is the zero vector.
        ds = make_ds([[4.0, -2.0], [1.0, 1.0]], [LABEL_HC, LABEL_PD])
        out = augment_negatives(ds)
        assert out.n_rows == 3
        assert out.features[2].tolist() == [0.0, 0.0]
        assert out.labels[2] == LABEL_HC
        assert out.subject_ids[2] == "s0+aug"

    def test_two_rows_hand_computed(self):
        # HC values 2 and 4: mu = 3, appended rows are -1 and 1.
        ds = make_ds([[2.0], [4.0], [9.0]], [LABEL_HC, LABEL_HC, LABEL_PD])
        out = augment_negatives(ds)
        assert out.features[:, 0].tolist() == [2.0, 4.0, 9.0, -1.0, 1.0]
        assert out.labels.tolist() == [0, 0, 1, 0, 0]

    def test_reflect_mode(self):
        ds = make_ds([[2.0], [4.0]], [LABEL_HC, LABEL_HC])
        out = augment_negatives(ds, AUGMENT_REFLECT)
        # 2*mu - x with mu = 3: 4 and 2.
        assert out.features[2:, 0].tolist() == [4.0, 2.0]

    def test_paper_scale_counts(self):
        # 340 PD + 167 HC doubles the negatives: 340 PD + 334 HC = 674 rows.
        rng = np.random.default_rng(7)
        labels = np.array([LABEL_PD] * 340 + [LABEL_HC] * 167)
        ds = make_ds(rng.normal(size=(507, 3)), labels)
        out = augment_negatives(ds)
        n_hc, n_pd = out.class_counts()
        assert (n_pd, n_hc) == (340, 334)
        assert out.n_rows == 674

    def test_positive_rows_bit_exact(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 2, size=20)
        labels[0] = LABEL_HC
        ds = make_ds(rng.normal(size=(20, 4)), labels)
        out = augment_negatives(ds)
        assert np.array_equal(out.features[:20], ds.features)
        assert np.array_equal(out.labels[:20], ds.labels)

    def test_no_negatives(self):
        ds = make_ds([[1.0]], [LABEL_PD])
        with pytest.raises(NoNegatives):
            augment_negatives(ds)

    @given(
        feats=hnp.arrays(
            np.float64,
            st.tuples(st.integers(2, 12), st.integers(1, 4)),
            elements=st.floats(-1e6, 1e6),
        ),
        data=st.data(),
    )
    @settings(max_examples=50, deadline=None)
    def test_formula_matches_bruteforce(self, feats, data):
        s = feats.shape[0]
        labels = data.draw(
            st.lists(st.sampled_from([0, 1]), min_size=s, max_size=s).filter(
                lambda ls: 0 in ls
            )
        )
        ds = make_ds(feats, labels)
        out = augment_negatives(ds)
        neg = [i for i in range(s) if labels[i] == LABEL_HC]
        assert out.n_rows == s + len(neg)
        # Independent recomputation with plain Python sums, row by row.
        mu = [sum(feats[i][j] for i in neg) / len(neg) for j in range(feats.shape[1])]
        for k, i in enumerate(neg):
            expect = np.array([feats[i][j] - mu[j] for j in range(feats.shape[1])])
            assert np.array_equal(out.features[s + k], expect)

    def test_double_augment_uses_combined_mean(self):
        ds = make_ds([[2.0], [4.0], [9.0]], [LABEL_HC, LABEL_HC, LABEL_PD])
        once = augment_negatives(ds)
        twice = augment_negatives(once)
        # Negatives double again: 2 -> 4 -> 8.
        assert twice.class_counts() == (8, 1)
        mu2 = once.features[once.labels == LABEL_HC].mean(axis=0)
        for k, i in enumerate(np.flatnonzero(once.labels == LABEL_HC)):
            assert np.array_equal(twice.features[once.n_rows + k], once.features[i] - mu2)


class TestStratifiedKfold:
    def test_exact_divisibility(self):
        labels = [LABEL_PD] * 10 + [LABEL_HC] * 10
        ds = make_ds(np.zeros((20, 1)), labels)
        fa = stratified_kfold(ds, 10, seed=3)
        for f in range(10):
            rows = fa.test_rows(f)
            assert rows.size == 2
            assert ds.labels[rows].sum() == 1  # exactly one PD

    def test_paper_fold_balance(self):
        # 341 PD / 332 HC over 10 folds: sizes 67-68, 34-35 PD, 33-34 HC.
        labels = [LABEL_PD] * 341 + [LABEL_HC] * 332
        ds = make_ds(np.zeros((673, 1)), labels)
        fa = stratified_kfold(ds, 10, seed=0)
        sizes, pds, hcs = [], [], []
        for f in range(10):
            rows = fa.test_rows(f)
            sizes.append(rows.size)
            pds.append(int((ds.labels[rows] == LABEL_PD).sum()))
            hcs.append(int((ds.labels[rows] == LABEL_HC).sum()))
        assert set(sizes) <= {67, 68}
        assert set(pds) <= {34, 35}
        assert set(hcs) <= {33, 34}
        assert sum(sizes) == 673

    def test_class_too_small(self):
        labels = [LABEL_PD] * 5 + [LABEL_HC] * 3
        ds = make_ds(np.zeros((8, 1)), labels)
        with pytest.raises(ClassTooSmall) as err:
            stratified_kfold(ds, 4, seed=0)
        assert err.value.class_name == "HC"
        assert err.value.count == 3
        assert err.value.k == 4

    def test_reproducible_and_seed_sensitive(self):
        rng = np.random.default_rng(5)
        labels = rng.integers(0, 2, size=40)
        labels[:4] = [0, 0, 1, 1]
        ds = make_ds(rng.normal(size=(40, 2)), labels)
        a = stratified_kfold(ds, 4, seed=11)
        b = stratified_kfold(ds, 4, seed=11)
        c = stratified_kfold(ds, 4, seed=12)
        assert np.array_equal(a.fold_index_per_row, b.fold_index_per_row)
        assert not np.array_equal(a.fold_index_per_row, c.fold_index_per_row)

    @given(
        n_pd=st.integers(4, 40),
        n_hc=st.integers(4, 40),
        k=st.integers(2, 4),
        seed=st.integers(0, 1000),
    )
    @settings(max_examples=60, deadline=None)
    def test_stratification_property(self, n_pd, n_hc, k, seed):
        labels = [LABEL_PD] * n_pd + [LABEL_HC] * n_hc
        ds = make_ds(np.zeros((n_pd + n_hc, 1)), labels)
        fa = stratified_kfold(ds, k, seed)
        assert np.all(fa.fold_index_per_row >= 0)
        per_class = {cls: [] for cls in (LABEL_HC, LABEL_PD)}
        totals = []
        for f in range(k):
            rows = fa.test_rows(f)
            assert rows.size > 0
            totals.append(rows.size)
            for cls in per_class:
                per_class[cls].append(int((ds.labels[rows] == cls).sum()))
        for counts in per_class.values():
            assert max(counts) - min(counts) <= 1
        assert max(totals) - min(totals) <= 1


class TestStandardizer:
    def test_two_point_column(self):
        ds = make_ds([[1.0], [3.0]], [LABEL_HC, LABEL_PD])
        std = fit_standardizer(ds)
        out = apply_standardizer(std, ds)
        assert out.features[:, 0].tolist() == [-1.0, 1.0]

    def test_constant_column_maps_to_zero(self):
        ds = make_ds([[5.0], [5.0], [5.0]], [0, 0, 1])
        out = apply_standardizer(fit_standardizer(ds), ds)
        assert out.features[:, 0].tolist() == [0.0, 0.0, 0.0]

    def test_train_columns_centered(self):
        rng = np.random.default_rng(2)
        ds = make_ds(rng.normal(3.0, 5.0, size=(50, 6)), rng.integers(0, 2, 50))
        out = apply_standardizer(fit_standardizer(ds), ds)
        assert np.all(np.abs(out.features.mean(axis=0)) < 1e-10)
        assert np.allclose(out.features.std(axis=0), 1.0)

    @given(
        feats=hnp.arrays(
            np.float64,
            st.tuples(st.integers(2, 20), st.integers(1, 5)),
            elements=st.floats(-1e8, 1e8),
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, feats):
        ds = make_ds(feats, np.zeros(feats.shape[0], dtype=int))
        std = fit_standardizer(ds)
        back = invert_standardizer(std, apply_standardizer(std, ds))
        nonconst = ds.features.std(axis=0) > 0
        orig = ds.features[:, nonconst]
        rec = back.features[:, nonconst]
        # Relative to each column's magnitude: subtracting the mean and
        # adding it back cannot resolve below the column scale in float64.
        scale = np.maximum(np.abs(orig).max(axis=0), 1.0)
        assert np.all(np.abs(rec - orig) / scale < 1e-12)


class TestCsvInterchange:
    def test_round_trip_bit_exact(self):
        rng = np.random.default_rng(9)
        ds = make_ds(
            rng.normal(size=(8, 3)) * np.array([1e-7, 1.0, 1e9]),
            rng.integers(0, 2, 8),
            names=("Left-Lateral-Ventricle", "CSF", "eTIV"),
        )
        back = dataset_from_csv(dataset_to_csv(ds))
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels, ds.labels)
        assert back.feature_names == ds.feature_names
        assert back.subject_ids == ds.subject_ids

    @given(
        feats=hnp.arrays(
            np.float64,
            st.tuples(st.integers(1, 10), st.integers(1, 4)),
            elements=st.floats(allow_nan=False, allow_infinity=False, width=64),
        ),
        data=st.data(),
    )
    @settings(max_examples=80, deadline=None)
    def test_round_trip_property(self, feats, data):
        labels = data.draw(
            st.lists(st.sampled_from([0, 1]), min_size=feats.shape[0], max_size=feats.shape[0])
        )
        ds = make_ds(feats, labels)
        back = dataset_from_csv(dataset_to_csv(ds))
        assert np.array_equal(back.features, ds.features)

    def test_rejects_comma_in_name(self):
        ds = make_ds([[1.0]], [LABEL_PD], names=("a,b",))
        with pytest.raises(ValueError):
            dataset_to_csv(ds)

    def test_header_and_label_text(self):
        ds = make_ds([[1.5]], [LABEL_PD], names=("vol",), ids=("3102",))
        text = dataset_to_csv(ds)
        lines = text.splitlines()
        assert lines[0] == "subject_id,label,vol"
        assert lines[1].startswith("3102,PD,")
