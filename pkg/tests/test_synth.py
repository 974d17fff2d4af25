import json
import os
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pydantic
from ddt import data, ddt, unpack

from timbre_latent_eval.core import LabelSchema
from timbre_latent_eval.synth import SynthConfig, generate, load_config, save_config
from timbre_latent_eval.timbre_metrics import (
    compactness,
    cross_pitch_consistency,
    evaluate_all,
    global_descriptor_silhouette,
    step_consistency,
    trajectory_linearity,
    within_pitch_silhouette,
)

SWEEP_SCHEMA = LabelSchema(descriptors=("bright", "warm", "dirty", "thin"), pitches=("E4", "G4", "B4", "D5", "F5"))


def sweep(knob: str, values, metric, **fixed) -> list[float]:
    aggregates = []
    for value in values:
        config = SynthConfig(dims=32, label_schema=SWEEP_SCHEMA, seed=11, **{knob: value}, **fixed)
        aggregates.append(metric(generate(config)).aggregate)
    return aggregates


@ddt
class TestGenerate(unittest.TestCase):
    """Tests for the synthetic generator."""

    def test_shape_and_labels(self):
        ds = generate(SynthConfig(dims=8, label_schema=SWEEP_SCHEMA, samples_per_cell=3))
        self.assertEqual((ds.n, ds.dims), (4 * 4 * 5 * 3, 8))
        self.assertEqual(ds.model_name, "synthetic")
        self.assertEqual(ds.labels[:4].tolist(), [[0, 0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 1]])
        cells, counts = np.unique(ds.labels, axis=0, return_counts=True)
        self.assertEqual(len(cells), 4 * 4 * 5)
        self.assertEqual(set(counts.tolist()), {3})

    def test_default_config(self):
        config = SynthConfig()
        self.assertEqual(config.dims, 128)
        self.assertEqual(config.label_schema, LabelSchema())
        self.assertEqual(config.samples_per_cell, 2)

    def test_deterministic(self):
        config = SynthConfig(dims=16, seed=42)
        self.assertEqual(generate(config).embeddings.tobytes(), generate(config).embeddings.tobytes())
        self.assertNotEqual(generate(config).embeddings.tobytes(),
                            generate(config.model_copy(update={"seed": 43})).embeddings.tobytes())

    def test_straight_trajectories(self):
        ds = generate(SynthConfig(dims=16, label_schema=SWEEP_SCHEMA, noise_sigma=0.0, seed=3))
        linearity = trajectory_linearity(ds)
        steps = step_consistency(ds)
        self.assertEqual(len(linearity.breakdown), 4 * 5)
        for value in linearity.breakdown.values():
            self.assertAlmostEqual(value, 1.0, delta=1e-12)
        for value in steps.breakdown.values():
            self.assertAlmostEqual(value, 1.0, delta=1e-12)

    def test_uncoupled_pitches_are_consistent(self):
        ds = generate(SynthConfig(dims=32, label_schema=SWEEP_SCHEMA, noise_sigma=0.0, curvature=2.0,
                                  step_jitter=0.0, seed=5))
        self.assertAlmostEqual(cross_pitch_consistency(ds).aggregate, 1.0, delta=1e-9)

    def test_knob_does_not_shift_other_draws(self):
        base = generate(SynthConfig(dims=8, label_schema=SWEEP_SCHEMA, seed=9))
        jittered = generate(SynthConfig(dims=8, label_schema=SWEEP_SCHEMA, seed=9, step_jitter=0.3))
        # The jitter moves the centres; two samples of one cell keep the same noise difference.
        self.assertFalse(np.array_equal(base.embeddings, jittered.embeddings))
        noise_base = base.embeddings[0] - base.embeddings[1]
        noise_jittered = jittered.embeddings[0] - jittered.embeddings[1]
        self.assertTrue(np.allclose(noise_base, noise_jittered, atol=1e-12))

    @data({"dims": 1}, {"samples_per_cell": 0}, {"pitch_coupling": 1.5}, {"noise_sigma": -1.0},
          {"noise_sigma": float("nan")}, {"unknown_knob": 1})
    def test_invalid_config(self, fields):
        with self.assertRaises(pydantic.ValidationError):
            SynthConfig(**fields)

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as root:
            path = Path(root) / "synth.json"
            with open(path, "w", encoding="utf-8") as fp:
                json.dump({"dims": 12, "noise_sigma": 0.5, "schema": {"descriptors": ["a", "b"]}}, fp)
            config = load_config(path)
            self.assertEqual(config.dims, 12)
            self.assertEqual(config.label_schema.descriptors, ("a", "b"))
            self.assertEqual(config.label_schema.pitches, LabelSchema().pitches)
            self.assertEqual(config.pitch_spread, SynthConfig().pitch_spread)
            save_config(config, Path(root) / "copy.json")
            self.assertEqual(load_config(Path(root) / "copy.json"), config)
            with open(Path(root) / "copy.json", encoding="utf-8") as fp:
                self.assertIn("schema", json.load(fp))

    @unittest.skipUnless(os.getenv("TLE_RUN_SLOW_TESTS"), "Only for slow tests.")
    def test_full_scale_evaluation_is_deterministic(self):
        config = SynthConfig(samples_per_cell=1, noise_sigma=0.5, seed=2024)
        first = evaluate_all(generate(config)).model_dump_json()
        second = evaluate_all(generate(config)).model_dump_json()
        self.assertEqual(first, second)


@ddt
class TestKnobMonotonicity(unittest.TestCase):
    """Each structure knob moves its metric in the designed direction."""

    def assert_strictly_decreasing(self, values):
        for before, after in zip(values, values[1:]):
            self.assertGreater(before, after, values)

    def test_noise_lowers_compactness(self):
        self.assert_strictly_decreasing(sweep("noise_sigma", [0.0, 0.25, 0.5, 1.0, 2.0], compactness))

    def test_coupling_lowers_cross_pitch_consistency(self):
        values = sweep("pitch_coupling", [0.0, 0.2, 0.4, 0.6, 0.8], cross_pitch_consistency, noise_sigma=0.0)
        self.assertAlmostEqual(values[0], 1.0, delta=1e-9)
        self.assert_strictly_decreasing(values)

    def test_curvature_lowers_linearity(self):
        values = sweep("curvature", [0.0, 0.5, 1.0, 2.0, 4.0], trajectory_linearity, noise_sigma=0.0)
        self.assertAlmostEqual(values[0], 1.0, delta=1e-12)
        self.assert_strictly_decreasing(values)

    def test_jitter_lowers_step_consistency(self):
        values = sweep("step_jitter", [0.0, 0.05, 0.1, 0.15, 0.2], step_consistency, noise_sigma=0.0)
        self.assertAlmostEqual(values[0], 1.0, delta=1e-12)
        self.assert_strictly_decreasing(values)

    def test_offset_raises_within_pitch_silhouette(self):
        values = sweep("descriptor_offset", [0.5, 1.0, 2.0, 4.0, 8.0], within_pitch_silhouette, noise_sigma=0.25)
        for before, after in zip(values, values[1:]):
            self.assertLess(before, after, values)

    @data((20.0, 1.0, 0.05), (10.0, 1.0, 0.1))
    @unpack
    def test_pitch_dominant_space(self, spread, offset, noise):
        ds = generate(SynthConfig(dims=32, label_schema=SWEEP_SCHEMA, pitch_spread=spread,
                                  descriptor_offset=offset, noise_sigma=noise, seed=1))
        global_value = global_descriptor_silhouette(ds).aggregate
        within_value = within_pitch_silhouette(ds).aggregate
        self.assertLess(global_value, 0.0)
        self.assertGreater(within_value, 0.0)
        self.assertGreater(within_value, global_value)
