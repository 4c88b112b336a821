import math
from collections import Counter
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaest.errors import ConfigError, ValidationError
from gaest.evalstats import (
    StatsConfig, VisitRecord, binned_series_csv, build_block, build_table, ci_from_summary, mae_me, paired_diff_ci,
    select_one_visit_per_patient, sign_test_median, size_table, subgroup_filter, table_to_csv,
    table_to_text, window_bin,
)

# unrounded oracle intervals for reference summary rows (mean, sd, n)
CI_ORACLES = [
    ((-1.51, 3.96, 404), (-1.896154, -1.123846), (-1.9, -1.1)),
    ((-1.13, 4.18, 404), (-1.537607, -0.722393), (-1.5, -0.7)),
]


@pytest.mark.parametrize("summary,unrounded,rounded", CI_ORACLES)
def test_ci_reproduces_reference_rows(summary, unrounded, rounded):
    lo, hi = ci_from_summary(*summary)
    assert (lo, hi) == pytest.approx(unrounded, abs=1e-6)
    assert (round(lo, 1), round(hi, 1)) == rounded


def test_student_t_wider():
    z = ci_from_summary(0.0, 1.0, 20)
    t = ci_from_summary(0.0, 1.0, 20, StatsConfig(ci_method="student_t"))
    assert t[0] < z[0] and t[1] > z[1]


@pytest.mark.parametrize("n", [100, 400, 1600])
def test_ci_width_scales(n):
    lo, hi = ci_from_summary(0.0, 4.0, n)
    assert (hi - lo) * math.sqrt(n) == pytest.approx(2 * 1.96 * 4.0)


@pytest.mark.parametrize("errors,mae,me", [([2, -2], 2.0, 0.0), ([3, -1, 4], 8 / 3, 2.0)])
def test_mae_me(errors, mae, me):
    s = mae_me(errors)
    assert s.mae == pytest.approx(mae) and s.me == pytest.approx(me)


def test_mae_me_single():
    s = mae_me([5])
    assert (s.mae, s.me, s.sd, s.sd_defined) == (5, 5, 0.0, False)


def test_mae_me_empty():
    with pytest.raises(ValidationError):
        mae_me([])


def test_paired_identical():
    d = paired_diff_ci([1, -2, 3], [1, -2, 3])
    assert (d.mean, d.ci_lo, d.ci_hi) == (0, 0, 0)


def test_paired_mismatch():
    with pytest.raises(ValidationError):
        paired_diff_ci([1, 2], [1, 2, 3])


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=2, max_size=30))
def test_paired_mean_is_mae_difference(pairs):
    a, b = zip(*pairs)
    d = paired_diff_ci(a, b)
    assert d.mean == pytest.approx(mae_me(a).mae - mae_me(b).mae, abs=1e-9)


@pytest.mark.parametrize("diffs,p", [([-1] * 5, 0.03125), ([-1, 1], 0.75), ([-2, 0, 3, -1], 0.5)])
def test_sign_test_examples(diffs, p):
    assert sign_test_median(diffs) == pytest.approx(p, abs=1e-15)


def test_sign_test_all_zero():
    with pytest.raises(ValidationError):
        sign_test_median([0, 0])


@given(st.integers(1, 12), st.data())
def test_sign_test_enumeration(n, data):
    k = data.draw(st.integers(0, n))
    diffs = [1.0] * k + [-1.0] * (n - k)
    count = sum(1 for signs in product((0, 1), repeat=n) if sum(signs) <= k)
    assert sign_test_median(diffs) == pytest.approx(count / 2 ** n, abs=1e-15)


def _rec(pid, vid, ga, country="US", device="GE", size="normal", **est):
    return VisitRecord(pid, vid, ga, country, device, size, est)


def test_select_forced_choice():
    recs = [_rec("P1", "a", 100), _rec("P2", "b", 150), _rec("P2", "c", 250)]
    chosen = select_one_visit_per_patient(recs, lambda r: r.ga < 200, seed=1)
    assert [r.visit_id for r in chosen] == ["a", "b"]


def test_select_deterministic_and_one_per_patient():
    recs = [_rec(f"P{i % 7}", f"v{i}", 100 + i) for i in range(30)]
    a = select_one_visit_per_patient(recs, lambda r: True, 5)
    b = select_one_visit_per_patient(recs, lambda r: True, 5)
    assert a == b and len({r.patient_id for r in a}) == len(a) == 7


def test_select_uniform():
    recs = [_rec("P", v, ga) for v, ga in (("a", 100), ("b", 150), ("c", 200))]
    counts = Counter(select_one_visit_per_patient(recs, lambda r: True, s)[0].visit_id for s in range(10_000))
    assert all(abs(counts[v] / 10_000 - 1 / 3) <= 0.02 for v in "abc")


def test_select_empty():
    assert select_one_visit_per_patient([_rec("P", "a", 100)], lambda r: False, 0) == []


@pytest.mark.parametrize("ga,tri", [(97, 1), (98, 2), (195, 2), (196, 3)])
def test_trimester_boundaries(ga, tri):
    assert subgroup_filter([_rec("P", "a", ga)], ("trimester", tri))


def test_subgroup_size_and_unknown():
    recs = [_rec("P1", "a", 150, size="severe_sga"), _rec("P2", "b", 150, size="sga"),
            _rec("P3", "c", 150, size="lga"), _rec("P4", "d", 150)]
    assert [r.visit_id for r in subgroup_filter(recs, ("size", "sga"))] == ["a", "b"]
    assert [r.visit_id for r in subgroup_filter(recs, ("size", "sga_or_lga"))] == ["a", "b", "c"]
    with pytest.raises(ConfigError):
        subgroup_filter(recs, ("parity", 1))


def test_subgroup_device():
    recs = [_rec("P1", "a", 150, "Zambia", "Sonosite"), _rec("P2", "b", 150, "US", "GE")]
    assert [r.country for r in subgroup_filter(recs, ("device", "Sonosite"))] == ["Zambia"]


def test_window_bin():
    recs = [_rec("P1", "a", 100, m=103), _rec("P2", "b", 0 + 84, m=80), _rec("P3", "c", 111, m=110)]
    out = window_bin(recs, ["m"], 28)
    assert [(b, n) for b, n, _ in out] == [(3, 3)]
    assert out[0][2]["m"] == pytest.approx(mae_me([3, -4, -1]).mae)
    assert window_bin([_rec("P", "a", 42, m=42)], ["m"], 28)[0][0] == 1


def _records(n=60, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        for j in range(2):
            ga = int(rng.integers(60, 290))
            out.append(_rec(f"P{i}", f"P{i}-{j}", ga, size=["sga", "normal", "lga"][i % 3],
                            model=ga + rng.normal(0, 3), base=ga + rng.normal(0, 5)))
    return out


def test_method_vs_itself():
    table = build_table("t", "t", _records(), [("Overall", None)], ["base"], "base", StatsConfig())
    row = table.blocks[0].rows[0]
    assert row.diff is None


def test_table_blocks_and_determinism():
    groups = [("Overall", None), ("T2", ("trimester", 2)), ("T3", ("trimester", 3))]
    t1 = build_table("t", "t", _records(), groups, ["model", "base"], "base", StatsConfig(seed=3))
    t2 = build_table("t", "t", _records(), groups, ["model", "base"], "base", StatsConfig(seed=3))
    assert table_to_csv(t1) == table_to_csv(t2)
    assert t1.blocks[0].n == 60
    for b in t1.blocks:
        model = b.rows[0]
        assert model.diff.mean == pytest.approx(model.errors.mae - b.rows[1].errors.mae)
    assert "Reference" in table_to_text(t1)


def test_missing_estimate_named():
    recs = _records(4) + [VisitRecord("PX", "PX-0", 150, "US", "GE", "normal", {"model": 150})]
    with pytest.raises(ValidationError, match="PX-0"):
        build_block("Overall", recs, ["model", "base"], "base", StatsConfig())


def test_size_table_groups():
    table = size_table(_records(), "model", "base", StatsConfig())
    assert [b.group for b in table.blocks] == ["Overall", "SGA", "LGA", "Normal", "SGA or LGA"]


def test_binned_series_sign_test_column():
    text = binned_series_csv(_records(), ["model", "base"], 28, "# h\n", ("model", "base"))
    lines = text.splitlines()
    assert lines[1].endswith("sign_test_p")
    assert all(0 <= float(l.split(",")[-1]) <= 1 for l in lines[2:])
