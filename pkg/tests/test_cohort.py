import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaest.cohort import (
    Biometry, Cohort, MediaRef, Patient, SynthConfig, Visit, dumps_manifest, ground_truth_ga,
    loads_manifest, save_manifest, split_patients, split_sizes, synthesize_cohort, trimester,
)
from gaest.cohort.manifest import load_manifest, read_manifest_header
from gaest.cohort.splits import read_split_csv, write_split_csv
from gaest.cohort.types import GA_MAX_DAYS, GA_MIN_DAYS
from gaest.errors import (
    ConfigError, EmptyCohortError, InvalidVisitError, ManifestParseError, ValidationError,
)
from gaest.provenance import make_header


def visit(vid="V", days=0, baseline=70, **kw):
    return Visit(vid, days, baseline, **kw)


def three_patient_cohort():
    media = (MediaRef("image", "head", "media/a.pgm", 0.3, 1, 5),
             MediaRef("video", "abdomen", "media/v", 0.36, 48, 6))
    return Cohort((
        Patient("A", "US", "GE", (visit("A0", 0, 70, biometry=Biometry(crl=3.1)),
                                  visit("A1", 40, 70, biometry=Biometry(bpd=3.3, ac=11.0), media=media))),
        Patient("B", "Zambia", "Sonosite", (visit("B0", 0, 200, formula_ga_estimates={"hadlock": 195.5},
                                                  size_factor=0.93, size_class="sga"),)),
        Patient("C", "Zambia", "GE", (visit("C0", 0, 150, biometry=Biometry(hc=14.0, fl=2.9)),)),
    ))


class TestGroundTruth:
    @pytest.mark.parametrize("baseline,days,expected", [(70, 0, 70), (70, 30, 100)])
    def test_addition(self, baseline, days, expected):
        assert ground_truth_ga(visit(days=days, baseline=baseline)) == expected

    def test_negative_days_rejected(self):
        with pytest.raises(InvalidVisitError):
            visit(days=-1)

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidVisitError):
            visit(days=0, baseline=GA_MAX_DAYS + 1)

    @given(st.integers(GA_MIN_DAYS, 200), st.integers(0, 100))
    def test_strictly_increasing(self, baseline, days):
        assert ground_truth_ga(visit(days=days + 1, baseline=baseline)) > ground_truth_ga(
            visit(days=days, baseline=baseline))

    @pytest.mark.parametrize("ga,tri", [(97, 1), (98, 2), (195, 2), (196, 3)])
    def test_trimester_boundaries(self, ga, tri):
        assert trimester(ga) == tri


class TestInvariants:
    def test_crl_only_in_first_trimester(self):
        with pytest.raises(ValidationError):
            visit(baseline=120, biometry=Biometry(crl=5.0))

    def test_sonosite_only_in_zambia(self):
        with pytest.raises(ValidationError):
            Patient("P", "US", "Sonosite", (visit(),))

    def test_single_baseline_visit(self):
        with pytest.raises(ValidationError):
            Patient("P", "US", "GE", (visit("a", 5),))

    def test_visits_ordered(self):
        with pytest.raises(ValidationError):
            Patient("P", "US", "GE", (visit("a", 0), visit("b", 20), visit("c", 10)))

    def test_duplicate_patient(self):
        p = Patient("P", "US", "GE", (visit(),))
        with pytest.raises(ValidationError):
            Cohort((p, p))

    def test_nonpositive_biometry(self):
        with pytest.raises(ValidationError):
            Biometry(ac=0.0)


class TestManifest:
    def test_round_trip(self, tmp_path):
        cohort = three_patient_cohort()
        path = tmp_path / "m.jsonl"
        save_manifest(cohort, path, make_header("synth", 3))
        assert load_manifest(path) == cohort
        assert read_manifest_header(path)["seed"] == 3

    def test_round_trip_synthetic(self, small_cohort):
        assert loads_manifest(dumps_manifest(small_cohort)) == small_cohort

    def test_empty_file(self):
        assert len(loads_manifest("")) == 0

    def test_duplicate_patient_id(self):
        line = dumps_manifest(three_patient_cohort()).splitlines()[0]
        with pytest.raises(ValidationError, match="duplicate"):
            loads_manifest(line + "\n" + line + "\n")

    def test_malformed_names_line(self):
        text = dumps_manifest(three_patient_cohort()) + "{not json\n"
        with pytest.raises(ManifestParseError) as info:
            loads_manifest(text)
        assert info.value.line_no == 4

    def test_missing_field_names_line(self):
        rec = json.loads(dumps_manifest(three_patient_cohort()).splitlines()[0])
        del rec["country"]
        with pytest.raises(ManifestParseError, match="line 1"):
            loads_manifest(json.dumps(rec))

    def test_unknown_enum(self):
        rec = json.loads(dumps_manifest(three_patient_cohort()).splitlines()[0])
        rec["device"] = "Philips"
        with pytest.raises(ValidationError, match="Philips"):
            loads_manifest(json.dumps(rec))


class TestSplits:
    @pytest.mark.parametrize("n,sizes", [(10, (6, 2, 2)), (404, (243, 81, 80)), (1, (1, 0, 0)), (2, (2, 0, 0)), (9, (6, 2, 1))])
    def test_sizes(self, n, sizes):
        assert split_sizes(n) == sizes

    def test_bad_ratios(self):
        with pytest.raises(ConfigError):
            split_sizes(10, (0.5, 0.2, 0.2))

    @given(st.integers(1, 3000), st.floats(0.05, 0.9), st.floats(0.0, 1.0))
    def test_within_one_of_ratio(self, n, a, frac):
        b = (1 - a) * frac
        ratios = (a, b, 1 - a - b)
        sizes = split_sizes(n, ratios)
        assert sum(sizes) == n
        assert all(abs(s - n * r) <= 1 + 1e-9 for s, r in zip(sizes, ratios))

    def test_partition_and_determinism(self, small_cohort, tmp_path):
        a = split_patients(small_cohort, seed=4)
        assert a == split_patients(small_cohort, seed=4)
        assert set(a) == {p.patient_id for p in small_cohort}
        counts = [sum(1 for v in a.values() if v == s) for s in ("train", "tune", "test")]
        assert tuple(counts) == split_sizes(len(small_cohort))
        write_split_csv(a, tmp_path / "s.csv", "# header\n")
        assert read_split_csv(tmp_path / "s.csv") == a

    def test_empty(self):
        with pytest.raises(EmptyCohortError):
            split_patients(Cohort(()))


@pytest.fixture(scope="module")
def big():
    return synthesize_cohort(SynthConfig(n_patients=5000, rng_seed=2, visits_per_patient=(1, 1)))


class TestSynth:
    def test_deterministic(self):
        cfg = SynthConfig(n_patients=25, rng_seed=5)
        assert dumps_manifest(synthesize_cohort(cfg)) == dumps_manifest(synthesize_cohort(cfg))

    def test_empty(self):
        with pytest.raises(EmptyCohortError):
            synthesize_cohort(SynthConfig(n_patients=0))

    def test_bad_weights(self):
        with pytest.raises(ConfigError):
            SynthConfig(trimester_visit_weights=(0.5, 0.5, 0.5))

    def test_sga_fraction(self, big):
        classes = [v.size_class for _, v in big.visits()]
        assert 0.08 <= classes.count("sga") / len(classes) <= 0.12
        assert 0.08 <= classes.count("lga") / len(classes) <= 0.12

    def test_trimester_shares(self, big):
        gas = np.array([v.ga for _, v in big.visits()])
        shares = [np.mean(gas < 98), np.mean((gas >= 98) & (gas < 196)), np.mean(gas >= 196)]
        assert np.allclose(shares, (0.093, 0.347, 0.560), atol=0.02)

    def test_baseline_biased_low_for_sga(self, big):
        errs = {"sga": [], "normal": []}
        for _, v in big.visits():
            if v.ga >= 98 and v.size_class in errs:
                errs[v.size_class].append(v.formula_ga_estimates["hadlock"] - v.ga)
        assert np.mean(errs["sga"]) < -6 and abs(np.mean(errs["normal"])) < 2

    def test_biometry_per_trimester(self, small_cohort):
        for _, v in small_cohort.visits():
            if v.ga < 98:
                assert set(v.biometry.available()) == {"crl"}
            else:
                assert set(v.biometry.available()) == {"bpd", "hc", "ac", "fl"}
