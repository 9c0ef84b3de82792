"""AIG node classification with graph partitioning, SpMM aggregation and algebraic verification."""

from .aig import Aig, Literal, parse_aiger, simulate, write_aiger
from .circuitgen import gen_csa_multiplier, mutate
from .encode import EdaGraph
from .verify import backward_rewrite, truth_table_equiv

__version__ = "0.1.0"

__all__ = ["Aig", "EdaGraph", "Literal", "backward_rewrite", "gen_csa_multiplier",
           "mutate", "parse_aiger", "simulate", "truth_table_equiv", "write_aiger"]
