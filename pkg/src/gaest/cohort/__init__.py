"""Cohort data model, manifests, patient-level splits and the synthetic generator."""

from gaest.cohort.types import (
    Biometry, Cohort, MediaRef, Patient, Visit, ground_truth_ga, trimester,
)
from gaest.cohort.manifest import load_manifest, save_manifest, loads_manifest, dumps_manifest
from gaest.cohort.splits import split_patients, split_sizes
from gaest.cohort.synth import (
    BiometryNoiseModel, DiskMediaStore, RenderedMediaStore, SynthConfig, render_media,
    synthesize_cohort, write_media,
)

__all__ = [
    "Biometry", "BiometryNoiseModel", "Cohort", "DiskMediaStore", "MediaRef", "Patient",
    "RenderedMediaStore", "SynthConfig", "Visit", "dumps_manifest", "ground_truth_ga",
    "load_manifest", "loads_manifest", "render_media", "save_manifest", "split_patients",
    "split_sizes", "synthesize_cohort", "trimester", "write_media",
]
