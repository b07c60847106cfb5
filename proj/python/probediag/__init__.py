"""Active probe selection over noisy-OR fault models.

Structured arguments are plain dicts (the same JSON formats the CLI reads);
results come back as dicts.
"""

import json as _json

from . import _core
from ._core import ContradictionError, InvalidArgument, SizeGuardError

__all__ = [
    "ContradictionError",
    "InvalidArgument",
    "SizeGuardError",
    "design_probes",
    "equivalence_check",
    "exact_terms",
    "generate_topology",
    "markov_truncation",
    "optimal_tree_cost",
    "ratio_scan",
    "run_bp",
    "run_experiment",
    "run_session",
    "sample_world",
    "score_tests",
    "split_tree",
]


def _dump(obj):
    return _json.dumps(obj if obj is not None else {})


def _evidence(ev):
    return _dump({str(k): int(v) for k, v in (ev or {}).items()})


def run_bp(graph, evidence=None, config=None):
    """Loopy BP on a factor graph dict; evidence maps variable id -> state."""
    return _json.loads(_core.run_bp(_dump(graph), _evidence(evidence), _dump(config)))


def score_tests(model, evidence=None, config=None):
    """Approximate (A, H(T), score) per test; evidence maps test id -> outcome."""
    return _json.loads(_core.score_tests(_dump(model), _evidence(evidence), _dump(config)))


def exact_terms(model, evidence=None):
    """Exact fault posterior summary and per-test terms."""
    return _json.loads(_core.exact_terms(_dump(model), _evidence(evidence)))


def sample_world(model, seed):
    return _json.loads(_core.sample_world(_dump(model), int(seed)))


def run_session(model, world, config=None):
    """One select-observe session; returns the summary plus the trace CSV text."""
    return _json.loads(_core.run_session(_dump(model), _dump(world), _dump(config)))


def generate_topology(nodes, attachment=2, seed=1):
    return _json.loads(_core.generate_topology(int(nodes), int(attachment), int(seed)))


def design_probes(topology, stations, mode="designed+singles"):
    return _json.loads(_core.design_probes(_dump(topology), list(stations), mode))


def split_tree(instance, criterion="entropy"):
    return _json.loads(_core.split_tree(_dump(instance), criterion))


def optimal_tree_cost(instance):
    return _core.optimal_tree_cost(_dump(instance))


def run_experiment(config, out_dir):
    """Full sweep into out_dir (traces, report.csv); returns the session count."""
    return _core.run_experiment(_dump(config), str(out_dir))


equivalence_check = _core.equivalence_check
ratio_scan = _core.ratio_scan
markov_truncation = _core.markov_truncation
