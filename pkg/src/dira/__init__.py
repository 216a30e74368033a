"""Distributed iterative relaxation abstraction (d-IRA) for linear hybrid automata."""

from .automata import FiniteAbstraction, intersect, is_empty, sigma_star
from .ce import Counterexample, analyze, encode_path, select_ce
from .lha import LinearHybridAutomaton, generate_acc, parse_lha, relax, write_lha
from .polyhedra import LinearSystem, find_iis, fm_eliminate, is_feasible, var_basis
from .reach import EngineLimits, build_abstraction
from .runtime import FaultPlan, RunConfig, run_dira, run_ira

__all__ = [
    "Counterexample", "EngineLimits", "FaultPlan", "FiniteAbstraction", "LinearHybridAutomaton",
    "LinearSystem", "RunConfig", "analyze", "build_abstraction", "encode_path", "find_iis",
    "fm_eliminate", "generate_acc", "intersect", "is_empty", "is_feasible", "parse_lha", "relax",
    "run_dira", "run_ira", "select_ce", "sigma_star", "var_basis", "write_lha",
]
__version__ = "0.1.0"
