"""Group-fairness measurement and training-time mitigation for bounded scores.

Thin wrapper over the compiled core: configs are flat ``key = value`` text,
reports come back as plain dicts (the JSON the CLI writes), and ``render``
turns either kind of document back into the terminal format.
"""

import json as _json

from ._core import Dataset, FairregError, describe, generate, pearson

__all__ = [
    "Dataset",
    "FairregError",
    "describe",
    "evaluate",
    "generate",
    "pearson",
    "render",
    "study",
    "train",
]

from . import _core


def _as_text(doc):
    return doc if isinstance(doc, str) else _json.dumps(doc)


def train(config, train_set, eval_set):
    """Run the configured experiment; returns (report, params) dicts."""
    report, params = _core.train(config, train_set, eval_set)
    return _json.loads(report), _json.loads(params)


def evaluate(params, eval_set, settings=""):
    """Evaluate saved parameters (dict or JSON text) against a dataset."""
    return _json.loads(_core.evaluate(_as_text(params), eval_set, settings))


def study(protocol, train_set, eval_set):
    """Run a multi-config comparison; returns the study document as a dict."""
    return _json.loads(_core.study(protocol, train_set, eval_set))


def render(doc):
    """Render a report or study document (dict or JSON text) as text."""
    return _core.render(_as_text(doc))
