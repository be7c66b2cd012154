"""Nondistortion interrogation of quantum objects: feasibility, projectors, simulation."""

from .conditions import (KernelDecomposition, NiqsWitness, SearchConfig, SearchResult,
                         decompose_action, find_witness, kernel_decomposition,
                         theorem2_check, witness_residual)
from .model import (ContractionOperator, DirectD, HamiltonianSchedule, InteractionModel,
                    ProbeSpec, Segment, SpaceLayout, UnitaryPair, assemble_D, block_view,
                    free_evolution)

__version__ = "0.1.0"
