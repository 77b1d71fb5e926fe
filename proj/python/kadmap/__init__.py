"""Python bindings for the kadmap DHT toolkit."""

from ._kadmap import (
    ChurnModel,
    CrawlSnapshot,
    DegreeStats,
    PreimageTable,
    Scenario,
    SimConfig,
    Summary,
    World,
    bucket_coverage,
    build_session_table,
    common_prefix_length,
    degree_stats,
    derive_seed,
    expected_bucket_entries,
    inverse_cumulative_sessions,
    mean_bucket_entries,
    required_prefix_bits,
    run_crawl,
    sha256_hex,
)

__all__ = [name for name in dir() if not name.startswith("_")]
