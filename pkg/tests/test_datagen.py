import numpy as np
import pytest

from frictionlab.datagen import (
    COLUMNS,
    DatagenConfig,
    Dataset,
    DatasetFormatError,
    GenerationQualityError,
    add_noise,
    generate_dataset,
    generate_swing_trial,
    generate_translation_trial,
    read_csv,
    write_csv,
)
from frictionlab.systems import PoBParams

P = PoBParams()

# one small shared dataset keeps these tests quick
FAST_CFG = DatagenConfig(
    swing_amplitudes_deg=(35.0, 50.0),
    swing_duration=1.0,
    translation_duration=2.4,
    rate=400.0,
)


@pytest.fixture(scope="module")
def clean():
    return generate_dataset(FAST_CFG)


@pytest.fixture(scope="module")
def noisy(clean):
    return add_noise(clean, 0.05, seed=42)


def eom_residual(ds):
    theta = ds["theta"]
    return (
        (P.m_b + P.m_l) * ds["xddot_b"]
        + P.m_l * P.d * (ds["thetaddot"] * np.cos(theta) - ds["thetadot"] ** 2 * np.sin(theta))
        + ds["f_fric_true"]
    )


class TestTrials:
    def test_swing_sample_count(self):
        cols = generate_swing_trial(35.0, 0.85, 2.0)
        assert len(cols["t"]) == 801

    def test_full_dataset_counts(self):
        ds = generate_dataset()
        assert len(ds) == 5806  # about 5800 samples over 14.5 s
        counts = [int((ds["trial_id"] == i).sum()) for i in range(6)]
        assert counts == [801] * 5 + [1801]
        # trial time grids are uniform at the sample rate
        for tid in range(6):
            t = ds["t"][ds.trial_mask(tid)]
            np.testing.assert_allclose(np.diff(t), 1 / 400, atol=1e-12)

    def test_torque_consistent_with_link_equation(self, clean):
        # recorded tau closes the link equation of motion on clean data
        th, thd, thdd = clean["theta"], clean["thetadot"], clean["thetaddot"]
        resid = (
            (P.j_l + P.m_l * P.d**2) * thdd
            + P.m_l * P.d * np.cos(th) * clean["xddot_b"]
            - P.m_l * P.d * P.g * np.sin(th)
            - clean["tau"]
        )
        assert np.abs(resid).max() < 1e-6

    def test_box_equation_closes_on_clean_data(self, clean):
        assert np.abs(eom_residual(clean)).max() < 1e-6

    def test_zero_amplitude_is_flat(self):
        cols = generate_swing_trial(0.0, 0.85, 0.5)
        np.testing.assert_allclose(cols["f_fric_true"], 0.0, atol=1e-12)
        np.testing.assert_allclose(cols["theta"], 0.0, atol=1e-12)

    def test_amplitude_range_validated(self):
        with pytest.raises(ValueError):
            generate_swing_trial(95.0, 0.85, 1.0)

    def test_translation_moves_forward_with_stick_phases(self):
        cols = generate_translation_trial(2.4)
        assert cols["x_b"][-1] - cols["x_b"][0] > 0.01
        stuck_loaded = (np.abs(cols["xdot_b"]) < 1e-4) & (np.abs(cols["f_fric_true"]) > 1.0)
        assert stuck_loaded.mean() > 0.05

    def test_translation_minimum_duration(self):
        with pytest.raises(ValueError):
            generate_translation_trial(1.0)

    def test_dataset_duration(self):
        cfg = DatagenConfig()
        total = len(cfg.swing_amplitudes_deg) * cfg.swing_duration + cfg.translation_duration
        assert total == 14.5

    def test_normal_force_column_non_negative(self, clean, noisy):
        assert clean["f_n_est"].min() >= 0
        assert noisy["f_n_est"].min() >= 0


class TestNoise:
    def test_zero_fraction_unchanged(self, clean):
        out = add_noise(clean, 0.0, seed=1)
        for c in COLUMNS:
            np.testing.assert_array_equal(out[c], clean[c])

    def test_constant_channel_unchanged(self):
        n = 100
        cols = {c: np.linspace(0, 1, n) for c in COLUMNS}
        cols["tau"] = np.zeros(n)  # constant channel: zero std
        cols["trial_id"] = np.zeros(n, dtype=int)
        ds = Dataset(columns=cols)
        out = add_noise(ds, 0.05, seed=3)
        np.testing.assert_array_equal(out["tau"], 0.0)

    def test_noise_magnitude(self, clean, noisy):
        delta = noisy["xdot_b"] - clean["xdot_b"]
        target = 0.05 * np.std(clean["xdot_b"])
        assert np.std(delta) == pytest.approx(target, rel=0.05)

    def test_ground_truth_channels_stay_clean(self, clean, noisy):
        np.testing.assert_array_equal(noisy["f_fric_true"], clean["f_fric_true"])
        np.testing.assert_array_equal(noisy["z_true"], clean["z_true"])

    def test_derived_channels_recomputed_from_noisy_states(self, clean, noisy):
        from frictionlab.systems import normal_force_estimate, would_be_acceleration

        expect_fn = np.abs(normal_force_estimate(noisy["theta"], noisy["thetadot"], P))
        np.testing.assert_array_equal(noisy["f_n_est"], expect_fn)
        expect_star = would_be_acceleration(
            noisy["theta"], noisy["thetadot"], noisy["thetaddot"], P
        )
        np.testing.assert_array_equal(noisy["xddot_star"], expect_star)

    def test_determinism(self, clean):
        a = add_noise(clean, 0.05, seed=7)
        b = add_noise(clean, 0.05, seed=7)
        c = add_noise(clean, 0.05, seed=8)
        for col in COLUMNS:
            np.testing.assert_array_equal(a[col], b[col])
        assert not np.array_equal(a["xdot_b"], c["xdot_b"])

    def test_negative_fraction_rejected(self, clean):
        with pytest.raises(ValueError):
            add_noise(clean, -0.1)


class TestCsv:
    def test_round_trip_bit_identical(self, noisy, tmp_path):
        path = tmp_path / "ds.csv"
        write_csv(noisy, path)
        back = read_csv(path)
        for c in COLUMNS:
            np.testing.assert_array_equal(back[c], noisy[c])
        assert back.noise_fraction == noisy.noise_fraction
        assert back.seed == noisy.seed
        assert back.rate == noisy.rate

    def test_missing_column_named(self, noisy, tmp_path):
        path = tmp_path / "ds.csv"
        write_csv(noisy, path)
        lines = path.read_text().splitlines()
        lines[1] = lines[1].replace("xddot_star,", "")
        lines = [lines[0], lines[1]] + [
            ",".join(ln.split(",")[:10] + ln.split(",")[11:]) for ln in lines[2:]
        ]
        path.write_text("\n".join(lines))
        with pytest.raises(DatasetFormatError, match="xddot_star"):
            read_csv(path)

    def test_malformed_line_reports_number(self, noisy, tmp_path):
        path = tmp_path / "ds.csv"
        write_csv(noisy, path)
        lines = path.read_text().splitlines()
        lines[5] = lines[5].replace(",", ",garbage", 1)
        path.write_text("\n".join(lines))
        with pytest.raises(DatasetFormatError, match="line 6"):
            read_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DatasetFormatError):
            read_csv(path)

    def test_row_count_preserved(self, clean, tmp_path):
        path = tmp_path / "ds.csv"
        write_csv(clean, path)
        assert len(read_csv(path)) == len(clean)


class TestDeterminism:
    def test_regeneration_identical(self):
        a = generate_dataset(FAST_CFG)
        b = generate_dataset(FAST_CFG)
        for c in COLUMNS:
            np.testing.assert_array_equal(a[c], b[c])
