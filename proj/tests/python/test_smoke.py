import hashlib

import pytest

import kadmap


def test_sha256_matches_hashlib():
    assert kadmap.sha256_hex(b"abc") == hashlib.sha256(b"abc").hexdigest()


def test_seed_derivation_matches_hashlib():
    digest = hashlib.sha256(b"kadmap/crawler/42").digest()
    assert kadmap.derive_seed(42, "crawler") == int.from_bytes(digest[:8], "little")


def test_expected_bucket_entries():
    assert kadmap.expected_bucket_entries(0) == 0
    assert 232 <= kadmap.expected_bucket_entries(44474) <= 247


def test_preimage_table_hits_prefixes():
    table = kadmap.PreimageTable.build(8)
    assert len(table) == 256
    for pattern in (0, 1, 128, 255):
        digest = hashlib.sha256(table.preimage(pattern)).digest()
        assert digest[0] == pattern
    node = "ab" * 32
    target = hashlib.sha256(table.target_for_cpl(node, 3)).hexdigest()
    assert kadmap.common_prefix_length(target, node) == 3


def test_simulate_and_crawl_small_world(tmp_path):
    cfg = kadmap.SimConfig()
    cfg.n_servers = 200
    cfg.seed = 3
    world = kadmap.World(cfg)
    world.populate()
    world.run(200 * cfg.join_interval + 60)
    assert world.check_invariants() is None
    table = kadmap.PreimageTable.build(12)
    snaps = kadmap.run_crawl(world, table, count=2)
    assert len(snaps) == 2
    assert len(snaps[0].nodes) == 200
    assert sorted(snaps[0].edges) == sorted(world.bucket_edges())
    assert snaps[0].same_graph(snaps[1])
    stats = kadmap.degree_stats(snaps[0])
    assert stats.indegree.min <= stats.indegree.median <= stats.indegree.max
    path = tmp_path / "c.snap"
    snaps[0].write(path)
    assert kadmap.CrawlSnapshot.read(path).same_graph(snaps[0])
    assert 0 < kadmap.bucket_coverage(world) <= 1


def test_sessions():
    rows = kadmap.inverse_cumulative_sessions([180, 420, 720], [300, 600])
    assert [r[1] for r in rows] == [2, 1]


def test_scenario_errors():
    s = kadmap.Scenario.parse("[world]\nservers = 10, 20\n")
    assert s.server_sweep == [10, 20]
    with pytest.raises(ValueError, match="t.cfg:2"):
        kadmap.Scenario.parse("[world]\nbogus = 1\n", "t.cfg")
