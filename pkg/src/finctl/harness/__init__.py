"""Episode runner, metrics, benchmarks, Monte Carlo campaigns and tuning."""
from .bench import BenchResult, alloc_bench, bench_method
from .episode import EpisodeConfig, EpisodeRecord, episode_rng, run_episode
from .io import ConfigFileError, load_config, read_episode_csv, write_episode_csv, write_json
from .metrics import METRIC_NAMES, MetricsReport, compute_metrics
from .montecarlo import CampaignResult, ParameterRanges, run_montecarlo, summarize
from .tuning import GaParams, GaResult, ga_minimize, ga_tune

__all__ = [
    "BenchResult", "alloc_bench", "bench_method",
    "EpisodeConfig", "EpisodeRecord", "episode_rng", "run_episode",
    "ConfigFileError", "load_config", "read_episode_csv", "write_episode_csv", "write_json",
    "METRIC_NAMES", "MetricsReport", "compute_metrics",
    "CampaignResult", "ParameterRanges", "run_montecarlo", "summarize",
    "GaParams", "GaResult", "ga_minimize", "ga_tune",
]
