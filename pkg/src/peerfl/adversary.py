"""Malicious participant behaviours: label flipping, update poisoning, FGSM evaluation.

Each attack acts at exactly one phase of the device lifecycle so its effect
can be measured in isolation: LabelFlip transforms the shard once at data
load, SignFlip/NoiseInjection poison outgoing updates while the local copy
stays clean, and FgsmEval perturbs the held-out features at evaluation time.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .learning import Dataset, EvalMetrics, ModelParams, evaluate, input_gradient


class AdversaryKind(Enum):
    HONEST = "honest"
    HONEST_BUT_CURIOUS = "honest_but_curious"
    LABEL_FLIP = "label_flip"
    SIGN_FLIP = "sign_flip"
    NOISE_INJECTION = "noise_injection"
    FGSM_EVAL = "fgsm_eval"


class Phase(Enum):
    DATA_LOAD = "data_load"
    PRE_SEND = "pre_send"
    EVAL = "eval"


@dataclass(frozen=True)
class AdversarySpec:
    kind: AdversaryKind = AdversaryKind.HONEST
    sigma: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind is AdversaryKind.NOISE_INJECTION and not (self.sigma and self.sigma > 0):
            raise ValueError("noise_injection needs sigma > 0")
        if self.kind is AdversaryKind.FGSM_EVAL and not (self.epsilon and self.epsilon > 0):
            raise ValueError("fgsm_eval needs epsilon > 0")


HONEST = AdversarySpec()


def flip_labels(data: Dataset) -> Dataset:
    """Deterministic targeted flip y -> classes-1-y; features untouched."""
    if data.classes < 2:
        raise ValueError("label flipping needs at least 2 classes")
    return Dataset(data.features, data.classes - 1 - data.labels, data.classes)


def poison_update(params: ModelParams, spec: AdversarySpec,
                  rng: np.random.Generator) -> ModelParams:
    """SignFlip negates every weight; NoiseInjection adds Gaussian(0, sigma^2)."""
    if spec.kind is AdversaryKind.SIGN_FLIP:
        return ModelParams(params.shape, -params.weights)
    if spec.kind is AdversaryKind.NOISE_INJECTION:
        noise = rng.normal(0.0, spec.sigma, size=params.weights.size)
        return ModelParams(params.shape, params.weights + noise)
    raise ValueError(f"{spec.kind.value} is not an update-poisoning attack")


def fgsm_perturb(params: ModelParams, features: np.ndarray, labels: np.ndarray,
                 epsilon: float) -> np.ndarray:
    """x' = x + epsilon * sign(dloss/dx); sign(0) is 0, leaving zero-gradient
    coordinates unperturbed."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    grad = input_gradient(params, features, labels)
    return np.asarray(features, dtype=np.float64) + epsilon * np.sign(grad)


def apply_adversary(spec: AdversarySpec, phase: Phase, *,
                    shard: Dataset | None = None,
                    params: ModelParams | None = None,
                    rng: np.random.Generator | None = None,
                    eval_data: Dataset | None = None):
    """Phase dispatch.  Returns the (possibly transformed) shard at DATA_LOAD,
    the update to transmit at PRE_SEND, and the adversarial accuracy (or None)
    at EVAL.  Honest and honest-but-curious devices are behavioural no-ops."""
    if phase is Phase.DATA_LOAD:
        if spec.kind is AdversaryKind.LABEL_FLIP:
            return flip_labels(shard)
        return shard
    if phase is Phase.PRE_SEND:
        if spec.kind in (AdversaryKind.SIGN_FLIP, AdversaryKind.NOISE_INJECTION):
            return poison_update(params, spec, rng)
        return params
    if phase is Phase.EVAL:
        if spec.kind is AdversaryKind.FGSM_EVAL and eval_data is not None:
            perturbed = fgsm_perturb(params, eval_data.features, eval_data.labels, spec.epsilon)
            metrics: EvalMetrics = evaluate(
                params, Dataset(perturbed, eval_data.labels, eval_data.classes))
            return metrics.accuracy
        return None
    raise ValueError(f"unknown phase {phase!r}")


def observes_traffic(spec: AdversarySpec) -> bool:
    """Honest-but-curious devices log received-model metadata to the metrics log."""
    return spec.kind is AdversaryKind.HONEST_BUT_CURIOUS
