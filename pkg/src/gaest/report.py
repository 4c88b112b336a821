"""Assemble the evaluation report suite from case predictions and baseline estimates."""

from __future__ import annotations

from gaest.errors import ValidationError
from gaest.evalstats import (
    SIZE_GROUPS, StatsConfig, VisitRecord, binned_series_csv, build_table, matches,
    select_one_visit_per_patient, size_table, size_table_to_csv, table_to_csv, table_to_text,
)
from gaest.formulae import baseline_estimates
from gaest.growth import build_percentile_table, classify_size

MODEL_COLUMNS = ("ensemble", "video", "image")
TRIMESTER_GROUPS = (("First trimester", ("trimester", 1)), ("Second trimester", ("trimester", 2)),
                    ("Third trimester", ("trimester", 3)))
SITE_GROUPS = (("US - GE", ("site", ("US", "GE"))), ("Zambia - GE", ("site", ("Zambia", "GE"))),
               ("Zambia - Sonosite", ("site", ("Zambia", "Sonosite"))))


def build_records(cohort, case_rows, library=None, formula_names=(), growth_table=None):
    """VisitRecords for every visit with at least one case prediction.

    ``case_rows`` are ``(patient_id, visit_id, CaseEstimate)``; baseline
    estimates come from the manifest first and the formula engine second.
    """
    by_visit: dict[str, dict[str, float]] = {}
    for _, vid, case in case_rows:
        by_visit.setdefault(vid, {})[case.model_id] = case.mean
    if growth_table is None:
        growth_table = build_percentile_table(cohort)
    records = []
    for patient, visit in cohort.visits():
        if visit.visit_id not in by_visit:
            continue
        estimates = dict(by_visit[visit.visit_id])
        found, _ = baseline_estimates(visit, library or {}, formula_names)
        recorded = dict(visit.formula_ga_estimates or {})
        for name, value in {**found, **recorded}.items():
            if name in estimates:
                raise ValidationError(f"visit {visit.visit_id}: baseline {name!r} collides with a model id")
            estimates[name] = value
        ac = visit.biometry.ac
        size = classify_size(ac, visit.ga, patient.country, growth_table) if ac else "unclassifiable"
        records.append(VisitRecord(patient.patient_id, visit.visit_id, visit.ga, patient.country,
                                   patient.device, size, estimates))
    if not records:
        raise ValidationError("no manifest visit has a prediction")
    return records


def _gnuplot(csv_name: str, title: str, series: list[str], out_png: str, header_text: str) -> str:
    plots = ", \\\n     ".join(
        f"'{csv_name}' using (($2+$3)/2):{5 + i} with linespoints title '{name}'"
        for i, name in enumerate(series)
    )
    return (f"{header_text}set datafile separator ','\nset datafile commentschars '#'\n"
            f"set key autotitle columnhead\nset terminal pngcairo size 800,500\n"
            f"set output '{out_png}'\nset title '{title}'\nset xlabel 'ground-truth GA (days)'\n"
            f"set ylabel 'MAE (days)'\nplot {plots}\n")


def build_report(records, config: StatsConfig, baseline: str = "hadlock", models=MODEL_COLUMNS,
                 extra_formulas=(), header_text: str = "") -> dict[str, str]:
    """File name -> content for every table, binned series and plot script."""
    models = tuple(m for m in models if any(m in r.estimates for r in records))
    if not models:
        raise ValidationError("predictions contain none of the model columns")
    lead = "ensemble" if "ensemble" in models else models[0]
    methods = (baseline,) + models
    tables = [
        build_table("table1", "Overall performance", records, (("Overall", None),), methods, baseline, config),
        build_table("table2", "Performance by trimester", records, TRIMESTER_GROUPS, methods, baseline, config),
        build_table("table3", "Performance by country and device", records, SITE_GROUPS, methods, baseline,
                    config),
    ]
    formulas = (baseline,) + tuple(f for f in extra_formulas if f != baseline)
    tables.append(build_table("table4", "Comparison against biometry formulae (second and third trimester)",
                              records, (("Second+Third trimester", ("trimester", (2, 3))),),
                              formulas + (lead,), lead, config, reference_first=True))
    t5 = size_table(records, lead, baseline, config)
    files: dict[str, str] = {}
    text = [header_text]
    for t in tables:
        files[f"{t.name}.csv"] = table_to_csv(t, header_text)
        text.append(f"== {t.name} ==\n{table_to_text(t)}\n")
    files["table5.csv"] = size_table_to_csv(t5, header_text)
    text.append(f"== table5 ==\n{table_to_text(t5)}\n")
    files["report.txt"] = "".join(text)

    def eligible(r):
        return all(m in r.estimates for m in methods)
    overall = select_one_visit_per_patient(records, eligible, config.seed, "table1/Overall")
    files["figure1.csv"] = binned_series_csv(overall, methods, config.bin_width_days, header_text)
    files["figure1.gp"] = _gnuplot("figure1.csv", "MAE by four-week GA window", list(methods), "figure1.png",
                                   header_text)
    for group, criterion in SIZE_GROUPS:
        if group not in ("SGA", "severe SGA"):
            continue
        slug = group.lower().replace(" ", "_")
        chosen = select_one_visit_per_patient(
            [r for r in records if r.size != "unclassifiable"],
            lambda r, c=criterion: matches(r, c) and all(m in r.estimates for m in (lead, baseline)),
            config.seed, f"table5/{group}")
        files[f"figure2_{slug}.csv"] = binned_series_csv(chosen, (lead, baseline), config.bin_width_days,
                                                         header_text, sign_test_pair=(lead, baseline))
        files[f"figure2_{slug}.gp"] = _gnuplot(f"figure2_{slug}.csv", f"MAE by GA window, {group}",
                                               [lead, baseline], f"figure2_{slug}.png", header_text)
    return files
