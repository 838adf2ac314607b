"""Feature extractors, checked against independent oracles where derived.

The LTP oracle below recounts boost levels with literal loops, and the
spectral-energy oracle evaluates the DFT directly from its definition, so
neither shares code with the production implementations.
"""

import numpy as np
import pytest

from falldetect import features, ingest
from falldetect.errors import DimensionError, LengthError
from falldetect.features import FeatureKind, LtpParams
from tests.conftest import random_window


def ltp_oracle(window, params):
    """Triple-loop recount of local temporal patterns."""
    m = np.sqrt(window.x ** 2 + window.y ** 2 + window.z ** 2)
    L = len(m)
    step = params.step
    if params.m_max is not None:
        K = int(round(params.m_max / step))
    else:
        K = 0
        top = float(max(m))
        while K * step < top:
            K += 1
    before = params.num_neighbours // 2
    offsets = [-d for d in range(before, 0, -1)]
    offsets += list(range(1, params.num_neighbours - before + 1))
    out = []
    for s in range(L):
        for off in offsets:
            i = min(max(s + off, 0), L - 1)
            count = 0
            for j in range(K + 1):
                if m[s] > m[i] + j * step:
                    count += 1
            out.append(count)
    return np.array(out, dtype=float)


def dft_energy_oracle(a):
    """Root-mean spectral power straight from the DFT definition."""
    n = len(a)
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    spectrum = basis @ a
    return float(np.sqrt(np.sum(np.abs(spectrum) ** 2) / n))


class TestRawAndMagnitude:
    def test_raw_concatenates_axes_in_order(self):
        w = ingest.TriaxialWindow([1.0, 2.0], [3.0, 4.0], [5.0, 6.0])
        fv = features.raw_features(w)
        assert fv.values.tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        assert fv.kind is FeatureKind.RAW

    def test_magnitude_values(self):
        w = ingest.TriaxialWindow([3.0, 0.0], [4.0, 0.0], [0.0, 0.0])
        fv = features.magnitude(w)
        assert fv.values.tolist() == [5.0, 0.0]

    def test_unit_diagonal(self):
        w = ingest.TriaxialWindow([1.0], [1.0], [1.0])
        assert features.magnitude(w).values[0] == pytest.approx(np.sqrt(3.0), abs=1e-12)


class TestAccelFeatures:
    def test_layout_and_dimension(self, rng):
        fv = features.accel_features(random_window(rng, 51))
        assert len(fv) == 12
        assert fv.kind is FeatureKind.ACCEL_FEATURES

    def test_means_and_population_std(self):
        w = ingest.TriaxialWindow([0.0, 2.0], [1.0, 1.0], [-1.0, 3.0])
        v = features.accel_features(w).values
        assert v[0] == 1.0 and v[1] == 1.0 and v[2] == 1.0
        # population std of [0, 2] is 1; the sample version would be sqrt(2)
        assert v[3] == 1.0
        assert v[4] == 0.0
        assert v[5] == 2.0

    def test_constant_axis_energy_is_value_times_sqrt_length(self):
        for L in (51, 128):
            w = ingest.TriaxialWindow(
                np.full(L, 0.7), np.full(L, -0.3), np.zeros(L)
            )
            v = features.accel_features(w).values
            assert v[6] == pytest.approx(0.7 * np.sqrt(L), rel=1e-9)
            assert v[7] == pytest.approx(0.3 * np.sqrt(L), rel=1e-9)
            assert v[8] == 0.0

    def test_exact_bin_sine_energy(self):
        # A sine on an exact DFT bin has squared sum A^2 L / 2.
        L, amp = 128, 1.7
        x = amp * np.sin(2 * np.pi * 7 * np.arange(L) / L)
        w = ingest.TriaxialWindow(x, np.zeros(L), np.zeros(L))
        v = features.accel_features(w).values
        assert v[6] == pytest.approx(amp * np.sqrt(L / 2), rel=1e-9)

    def test_energy_matches_direct_dft(self, rng):
        for L in (51, 128):
            for _ in range(10):
                a = rng.normal(0.0, 1.0, L)
                assert features._energy(a) == pytest.approx(
                    dft_energy_oracle(a), rel=1e-9
                )

    def test_energy_equals_time_domain_norm(self, rng):
        for L in (51, 128):
            for _ in range(25):
                a = rng.normal(0.0, 1.0, L)
                expected = float(np.sqrt(np.sum(a * a)))
                assert features._energy(a) == pytest.approx(expected, rel=1e-9)

    def test_perfect_and_inverse_correlation(self):
        x = np.array([0.1, 0.5, -0.2, 0.9])
        w = ingest.TriaxialWindow(x, 2.0 * x + 1.0, -x)
        v = features.accel_features(w).values
        assert v[9] == pytest.approx(1.0, abs=1e-12)
        assert v[10] == pytest.approx(-1.0, abs=1e-12)
        assert v[11] == pytest.approx(-1.0, abs=1e-12)

    def test_half_correlation_by_hand(self):
        w = ingest.TriaxialWindow([1.0, 2.0, 3.0], [1.0, 3.0, 2.0], [0.0, 0.0, 0.0])
        v = features.accel_features(w).values
        assert v[9] == 0.5

    def test_flat_axis_has_zero_correlation(self):
        w = ingest.TriaxialWindow([1.0, 2.0, 3.0], [0.5, 0.5, 0.5], [0.0, 1.0, 0.0])
        v = features.accel_features(w).values
        assert v[9] == 0.0 and v[10] == 0.0 and v[11] == 0.0

    def test_correlation_stays_in_range(self, rng):
        for _ in range(50):
            v = features.accel_features(random_window(rng, 51)).values
            assert np.all(v[9:12] >= -1.0) and np.all(v[9:12] <= 1.0)

    def test_single_sample_rejected(self):
        w = ingest.TriaxialWindow([1.0], [1.0], [1.0])
        with pytest.raises(LengthError):
            features.accel_features(w)


class TestLtpFeatures:
    def test_two_sample_window_by_hand(self):
        # magnitudes 0.4 and 2.5: levels = 3, so the later sample beats the
        # earlier one at boosts 0, 1, 2 but not 3.
        w = ingest.TriaxialWindow([0.0, 0.0], [0.0, 0.0], [0.4, 2.5])
        fv = features.ltp_features(w)
        assert fv.values.tolist() == [0, 0, 0, 0, 0, 0, 3, 3, 3, 0, 0, 0]

    def test_constant_magnitude_gives_zero_vector(self):
        w = ingest.TriaxialWindow(np.full(51, 0.6), np.zeros(51), np.zeros(51))
        assert not features.ltp_features(w).values.any()

    def test_all_zero_window(self):
        w = ingest.TriaxialWindow(np.zeros(10), np.zeros(10), np.zeros(10))
        assert not features.ltp_features(w).values.any()

    def test_count_saturates_at_pinned_ceiling(self):
        # difference of 7.2 with m_max pinned at 2: every level passes,
        # giving the cap of levels + 1 = 3.
        w = ingest.TriaxialWindow([0.0, 0.0], [0.0, 0.0], [0.1, 7.3])
        fv = features.ltp_features(w, LtpParams(step=1.0, m_max=2.0))
        assert fv.values.max() == 3.0

    def test_matches_loop_oracle(self, rng):
        for L in (17, 51, 128):
            for _ in range(12):
                w = random_window(rng, L, scale=2.0)
                got = features.ltp_features(w).values
                assert np.array_equal(got, ltp_oracle(w, LtpParams()))

    def test_matches_loop_oracle_other_params(self, rng):
        for params in (
            LtpParams(num_neighbours=4, step=0.5),
            LtpParams(num_neighbours=7, step=0.25),
            LtpParams(num_neighbours=6, step=1.0, m_max=4.0),
        ):
            for _ in range(8):
                w = random_window(rng, 51, scale=2.0)
                got = features.ltp_features(w, params).values
                assert np.array_equal(got, ltp_oracle(w, params))

    def test_entries_are_bounded_integer_counts(self, rng):
        w = random_window(rng, 51, scale=2.0)
        v = features.ltp_features(w).values
        levels = int(np.ceil(w.magnitude().max()))
        assert np.array_equal(v, np.floor(v))
        assert v.min() >= 0 and v.max() <= levels + 1

    def test_dimension_is_neighbours_times_length(self, rng):
        for L, n in ((51, 6), (128, 6), (51, 4)):
            fv = features.ltp_features(random_window(rng, L), LtpParams(num_neighbours=n))
            assert len(fv) == n * L

    def test_param_validation(self):
        with pytest.raises(ValueError):
            LtpParams(num_neighbours=0)
        with pytest.raises(ValueError):
            LtpParams(step=0.0)
        with pytest.raises(ValueError):
            LtpParams(step=1.0, m_max=2.5)
        LtpParams(step=0.5, m_max=2.5)  # exact multiple is fine


class TestFeatureVector:
    def test_dimension_contract_enforced(self):
        with pytest.raises(DimensionError):
            features.FeatureVector(np.zeros(7), FeatureKind.RAW, 51)
        with pytest.raises(DimensionError):
            features.FeatureVector(np.zeros(11), FeatureKind.ACCEL_FEATURES, 51)
        with pytest.raises(DimensionError):
            features.FeatureVector(np.zeros(53), FeatureKind.LTP, 51)

    def test_non_finite_rejected(self):
        bad = np.zeros(51)
        bad[3] = np.nan
        with pytest.raises(DimensionError):
            features.FeatureVector(bad, FeatureKind.MAGNITUDE, 51)

    def test_expected_dimensions_per_kind(self, rng):
        expect = {
            FeatureKind.RAW: {51: 153, 128: 384},
            FeatureKind.MAGNITUDE: {51: 51, 128: 128},
            FeatureKind.ACCEL_FEATURES: {51: 12, 128: 12},
            FeatureKind.LTP: {51: 306, 128: 768},
        }
        for kind, by_len in expect.items():
            for L, dim in by_len.items():
                fv = features.extract(random_window(rng, L), kind)
                assert len(fv) == dim


class TestMatrixAndExport:
    def test_extract_matrix_shape(self, rng):
        windows = [random_window(rng, 51) for _ in range(5)]
        m = features.extract_matrix(windows, FeatureKind.ACCEL_FEATURES)
        assert m.shape == (5, 12)

    def test_ragged_windows_rejected(self, rng):
        windows = [random_window(rng, 51), random_window(rng, 128)]
        with pytest.raises(DimensionError):
            features.extract_matrix(windows, FeatureKind.MAGNITUDE)

    def test_column_counts_match_dimensions(self):
        assert len(features.csv_columns(FeatureKind.RAW, 51)) == 153
        assert len(features.csv_columns(FeatureKind.MAGNITUDE, 128)) == 128
        assert len(features.csv_columns(FeatureKind.ACCEL_FEATURES, 51)) == 12
        assert len(features.csv_columns(FeatureKind.LTP, 128)) == 768
        assert len(features.csv_columns(FeatureKind.LTP, 51, num_neighbours=4)) == 204

    def test_export_roundtrips_exact_values(self, rng, tmp_path):
        windows = [random_window(rng, 51) for _ in range(4)]
        m = features.extract_matrix(windows, FeatureKind.ACCEL_FEATURES)
        labels = ["ADL", "FALL", "ADL", "FALL"]
        out = tmp_path / "feat.csv"
        features.export_features_csv(out, m, labels, FeatureKind.ACCEL_FEATURES, 51)
        lines = out.read_text().splitlines()
        assert lines[0].split(",")[-1] == "label"
        assert len(lines) == 5
        for row, line, label in zip(m, lines[1:], labels):
            parts = line.split(",")
            assert parts[-1] == label
            # repr round-trips float64 exactly
            assert [float(p) for p in parts[:-1]] == row.tolist()

    def test_export_rejects_mismatched_labels(self, rng, tmp_path):
        windows = [random_window(rng, 51) for _ in range(3)]
        m = features.extract_matrix(windows, FeatureKind.MAGNITUDE)
        with pytest.raises(DimensionError):
            features.export_features_csv(
                tmp_path / "x.csv", m, ["ADL"], FeatureKind.MAGNITUDE, 51
            )
