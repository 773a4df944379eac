"""Python bindings for the causerl library.

Configs are flat dicts with the same keys as the CLI's JSON config files.
"""

import json

from . import _causerl
from ._causerl import CauserlError, contrastive_loss, convert_statement, normalized_mse, prf1

__all__ = [
    "CauserlError",
    "ablate",
    "contrastive_loss",
    "convert_statement",
    "default_config",
    "desk_config",
    "evaluate",
    "gradcheck",
    "normalized_mse",
    "prf1",
    "synthetic_corpus",
    "train_selfrl",
]


def _text(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_causerl.default_config_json())


def desk_config():
    return json.loads(_causerl.desk_config_json())


def gradcheck(seeds=20, mutation=False):
    return json.loads(_causerl.gradcheck_json(seeds, mutation))


def synthetic_corpus(config=None):
    """External statements, ECI examples and the fold plan."""
    return json.loads(_causerl.synthetic_corpus_json(_text(config)))


def train_selfrl(config=None):
    """Per-step SelfRL statistics for the first configured seed."""
    return json.loads(_causerl.train_selfrl_json(_text(config)))


def evaluate(config=None, variant=""):
    """Cross-validation report (rows, summaries, manifest) for one variant."""
    return json.loads(_causerl.evaluate_json(_text(config), variant))


def ablate(config=None):
    return json.loads(_causerl.ablate_json(_text(config)))
