"""Python access to the grounding reward and GRPO kernels."""

import json

from . import _core
from ._core import ConfigError, giou, iou, sample_iou_score

__all__ = [
    "ConfigError",
    "bbox_reward",
    "giou",
    "grpo_objective",
    "iou",
    "parse_completion",
    "sample_iou_score",
    "serialize_completion",
]


def _config_text(config):
    return "" if config is None else json.dumps(config)


def bbox_reward(pred, gt, config=None):
    """Matched box reward breakdown for XYXY boxes; config uses the [reward] keys."""
    return json.loads(_core.bbox_reward_json(pred, gt, _config_text(config)))


def parse_completion(text):
    return json.loads(_core.parse_completion_json(text))


def serialize_completion(text):
    """Canonical JSON array for the predictions found in text."""
    return _core.serialize_completion(text)


def grpo_objective(rollout, config=None):
    """rollout: dict with id, new_lp, old_lp, optional ref_lp and masks, rewards."""
    return json.loads(_core.grpo_objective_json(json.dumps(rollout), _config_text(config)))
