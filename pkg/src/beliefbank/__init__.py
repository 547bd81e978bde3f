"""Belief maintenance on top of a fixed yes/no question-answering model.

Answers are stored in a :class:`BeliefBank`, checked against weighted constraints, and
repaired with a weighted MaxSAT solver or improved by re-asking with earlier beliefs as
context.
"""

from .beliefs import Belief, BeliefBank, FormatError, Provenance, SentenceKey, TemplateRegistry
from .constraints import ConstraintKind, ConstraintTemplate, consistency, ground_all
from .maxsat import MaxSatInstance, SolverConfig, encode, solve, solve_exact, solve_local

__version__ = "0.1.0"

__all__ = [
    "Belief", "BeliefBank", "ConstraintKind", "ConstraintTemplate", "FormatError",
    "MaxSatInstance", "Provenance", "SentenceKey", "SolverConfig", "TemplateRegistry",
    "consistency", "encode", "ground_all", "solve", "solve_exact", "solve_local",
    "__version__",
]
