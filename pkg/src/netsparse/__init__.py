"""Networked state estimation with online-learned sparse bases and in-network
random-projection aggregation."""

from .bounds import BoundReport, corollary2_recursion, lemma3_bound, theorem1_bounds
from .comm_graph import CommGraph, SeededMatrixGen, centralized_measure, distributed_measure, validate
from .dictionary import Dictionary, TrainingWindow, build_window, dictionary_update, learn
from .errors import (
    ConfigError,
    CyclicGraph,
    DimensionMismatch,
    GraphError,
    InsufficientHistory,
    InvariantViolation,
    MissingTrace,
    MultiplePaths,
    NetsparseError,
    NonFiniteInput,
    SeedMismatch,
    Unreachable,
)
from .harness import PRESETS, ScenarioConfig, emit_plot_data, run_scenario
from .plant import InputProcess, SystemModel, build_consensus_model, simulate
from .protocol import EncodeOutput, LinkParams, Mode, frame, unframe
from .receiver import ReceiverState
from .sparse_coding import SparseCode, omp, support_least_squares
from .transmitter import TransmitterState

__all__ = [name for name in dir() if not name.startswith("_")]
