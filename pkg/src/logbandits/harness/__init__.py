"""Experiment harness: generators, configs, orchestration and the CLI."""

from ..env import RewardEnv
from .config import ExperimentConfig, ExperimentKind
from .generators import (gen_coverage_instance, gen_example1, gen_example2, gen_fig1_benchmark,
                         gen_gaussian_burnin, gen_pairwise)
from .runner import run_experiment

__all__ = [
    "RewardEnv", "ExperimentConfig", "ExperimentKind", "gen_coverage_instance", "gen_example1",
    "gen_example2", "gen_fig1_benchmark", "gen_gaussian_burnin", "gen_pairwise", "run_experiment",
]
