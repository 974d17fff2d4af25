"""
Synthetic latent datasets with known structure, for checking that each metric moves the intended way.

Generative model, for descriptor d, magnitude fraction m and pitch p::

    centre(d, m, p) = P_p
                      + descriptor_offset * (m + step_jitter * j[d, m, p]) * dir[d, p]
                      + curvature * m * (1 - m) * w_d
    sample          = centre + noise_sigma * N(0, I)

P_p are pitch centres, mutually equidistant at pitch_spread * sqrt(2) when there are no more pitches
than dimensions. dir[d, p] is the normalised blend (1 - c) * u_d + c * v[d, p] of a descriptor
direction and an independent per-pitch direction, c = pitch_coupling. w_d is a unit vector orthogonal
to u_d and j[d, m, p] is uniform on [-0.5, 0.5].

Draws come from one PCG64 stream in a fixed order: pitch centres, descriptor directions (u then w),
per-pitch directions, step jitter, sample noise. Every draw is made whatever the knob values, so
changing a knob never shifts the random numbers used elsewhere.
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np
import pydantic
from pydantic import ConfigDict, Field

from .clustering import MAX_SEED, make_rng
from .core import LabelSchema, LatentDataset

logger = logging.getLogger(__name__)


class SynthConfig(pydantic.BaseModel):
    """Knobs of the synthetic generator; every field has a default."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid",
                              allow_inf_nan=False, protected_namespaces=())

    dims: int = Field(default=128, ge=2)
    label_schema: LabelSchema = Field(default_factory=LabelSchema, alias="schema")
    samples_per_cell: int = Field(default=2, ge=1)
    pitch_spread: float = Field(default=4.0, ge=0)
    descriptor_offset: float = Field(default=2.0, ge=0)
    curvature: float = Field(default=0.0, ge=0)
    step_jitter: float = Field(default=0.0, ge=0)
    pitch_coupling: float = Field(default=0.0, ge=0, le=1)
    noise_sigma: float = Field(default=0.05, ge=0)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    model_name: str = "synthetic"


def load_config(path: Union[str, Path]) -> SynthConfig:
    """Read a SynthConfig JSON file; absent fields take their defaults."""
    with open(path, encoding="utf-8") as fp:
        return SynthConfig.model_validate_json(fp.read())


def save_config(config: SynthConfig, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(config.model_dump_json(indent=2, by_alias=True))
        fp.write("\n")


def _unit(vectors: np.ndarray) -> np.ndarray:
    return vectors / np.linalg.norm(vectors, axis=-1, keepdims=True)


def _pitch_frame(rng: np.random.Generator, n_pitches: int, dims: int) -> np.ndarray:
    """Unit pitch directions, orthonormal when dims allow it."""
    draws = rng.standard_normal((dims, n_pitches))
    if n_pitches <= dims:
        q, r = np.linalg.qr(draws)
        # Fix the sign convention of the factorisation.
        q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
        return q.T
    logger.debug("%d pitches in %d dimensions: pitch centres are not equidistant.", n_pitches, dims)
    return _unit(draws.T)


def _orthogonal_to(draws: np.ndarray, base: np.ndarray) -> np.ndarray:
    projected = draws - np.sum(draws * base, axis=-1, keepdims=True) * base
    return _unit(projected)


def generate(config: SynthConfig) -> LatentDataset:
    """
    Draw a dataset with exactly samples_per_cell rows per (descriptor, magnitude, pitch) cell.

    Rows are ordered by descriptor, then magnitude, then pitch, then sample.

    :param config: The generator knobs.
    :return: The dataset, deterministic for a fixed config.
    """
    schema = config.label_schema
    n_d, n_m, n_p = len(schema.descriptors), len(schema.magnitudes), len(schema.pitches)
    dims = config.dims
    rng = make_rng(config.seed)

    pitch_centres = config.pitch_spread * _pitch_frame(rng, n_p, dims)
    base = _unit(rng.standard_normal((n_d, dims)))
    bend = _orthogonal_to(rng.standard_normal((n_d, dims)), base)
    per_pitch = _unit(rng.standard_normal((n_d, n_p, dims)))
    jitter = rng.uniform(-0.5, 0.5, size=(n_d, n_m, n_p))
    noise = rng.standard_normal((n_d * n_m * n_p * config.samples_per_cell, dims))

    blend = (1.0 - config.pitch_coupling) * base[:, None, :] + config.pitch_coupling * per_pitch
    norms = np.linalg.norm(blend, axis=-1, keepdims=True)
    directions = np.where(norms > 0, blend / np.where(norms > 0, norms, 1.0), base[:, None, :])

    fractions = np.asarray(schema.magnitudes, dtype=np.float64)
    along = config.descriptor_offset * (fractions[None, :, None] + config.step_jitter * jitter)
    bump = config.curvature * fractions * (1.0 - fractions)
    centres = (pitch_centres[None, None, :, :]
               + along[..., None] * directions[:, None, :, :]
               + bump[None, :, None, None] * bend[:, None, None, :])

    embeddings = np.repeat(centres.reshape(-1, dims), config.samples_per_cell, axis=0)
    embeddings = embeddings + config.noise_sigma * noise
    labels = np.repeat(np.indices((n_d, n_m, n_p)).reshape(3, -1).T, config.samples_per_cell, axis=0)
    logger.info("Generated %d synthetic rows in %d dimensions (seed %d).", len(labels), dims, config.seed)
    return LatentDataset(embeddings=embeddings, labels=labels, label_schema=schema, model_name=config.model_name)
