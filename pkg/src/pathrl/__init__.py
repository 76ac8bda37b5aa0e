"""Sequential diagnostic pathway learning over synthetic health records."""

from . import baselines, drl, dtree, env, metrics, pathways, qnet, replay, schema, synth

__all__ = [
    "baselines",
    "drl",
    "dtree",
    "env",
    "metrics",
    "pathways",
    "qnet",
    "replay",
    "schema",
    "synth",
]

__version__ = "0.1.0"
