"""Python bindings for the multi-source DASH streaming simulator."""

import json as _json

from ._core import (
    BandwidthTrace,
    ConfigError,
    ContractViolation,
    ParseError,
    QualityLadder,
    RewardConfig,
    StreamingEnv,
    UsageError,
    bola_rule,
    compute_mask,
    default_bitrates_kbps,
    default_config_json,
    filter_by_mean,
    greedy_next_index,
    load_traces,
    random_walk_pool,
    run_cli,
    run_policy,
    scenario_names,
    single_source_rebuffer,
    single_source_reward,
    split_ids,
    step_reward,
    throughput_rule,
    utility_of,
)


def make_env(config=None, scenario=None):
    """Builds a StreamingEnv from a config dict (or JSON string) and an optional scenario preset."""
    if isinstance(config, dict):
        config = _json.dumps(config)
    return StreamingEnv(config, scenario)


def default_config():
    return _json.loads(default_config_json())
