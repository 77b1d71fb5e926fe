#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "helpers.hpp"
#include "kadmap/routing_table.hpp"

using namespace kadmap;

namespace {

Id with_cpl(const Id& base, int cpl, std::mt19937_64& rng) {
  Id r = testutil::random_id(rng);
  // Copy the first cpl bits of base, then force a difference at bit cpl.
  for (int i = 0; i <= cpl; ++i) {
    const bool want = i < cpl ? base.bit(i) : !base.bit(i);
    if (r.bit(i) != want) r = r.with_bit_flipped(i);
  }
  return r;
}

}  // namespace

TEST_SUITE("routing") {
  TEST_CASE("insert into empty table") {
    std::mt19937_64 rng(1);
    RoutingTable t(testutil::random_id(rng));
    const Id p = testutil::random_id(rng);
    CHECK(t.insert(p) == InsertOutcome::kAccepted);
    CHECK(t.size() == 1);
    CHECK(t.bucket(t.bucket_index(p))->size() == 1);
    CHECK(t.insert(p) == InsertOutcome::kAlreadyPresent);
  }

  TEST_CASE("self insert is a caller bug") {
    std::mt19937_64 rng(2);
    const Id self = testutil::random_id(rng);
    RoutingTable t(self);
    CHECK_THROWS_AS(t.insert(self), std::invalid_argument);
  }

  TEST_CASE("21st peer of one CPL is rejected without touching the bucket") {
    std::mt19937_64 rng(3);
    const Id self = testutil::random_id(rng);
    RoutingTable t(self);
    for (int i = 0; i < 20; ++i) {
      REQUIRE(t.insert(with_cpl(self, 2, rng)) == InsertOutcome::kAccepted);
    }
    const auto before = t.bucket(2)->entries();
    CHECK(t.insert(with_cpl(self, 2, rng)) == InsertOutcome::kRejected);
    CHECK(t.bucket(2)->entries() == before);
    CHECK(t.size() == 20);
    // Other buckets still accept.
    CHECK(t.insert(with_cpl(self, 3, rng)) == InsertOutcome::kAccepted);
  }

  TEST_CASE("remove restores capacity and hides the peer") {
    std::mt19937_64 rng(4);
    const Id self = testutil::random_id(rng);
    RoutingTable t(self);
    std::vector<Id> peers;
    for (int i = 0; i < 20; ++i) {
      peers.push_back(with_cpl(self, 0, rng));
      t.insert(peers.back());
    }
    const Id extra = with_cpl(self, 0, rng);
    CHECK(t.insert(extra) == InsertOutcome::kRejected);
    CHECK(t.remove(peers[5]) == RemoveOutcome::kRemoved);
    CHECK(t.remove(peers[5]) == RemoveOutcome::kAbsent);
    CHECK(t.remove(testutil::random_id(rng)) == RemoveOutcome::kAbsent);
    CHECK(t.insert(extra) == InsertOutcome::kAccepted);
    for (int i = 0; i < 50; ++i) {
      const auto c = t.closest(testutil::random_id(rng), 20);
      CHECK(std::find(c.begin(), c.end(), peers[5]) == c.end());
    }
  }

  TEST_CASE("buckets unfold lazily and entries keep insertion order") {
    std::mt19937_64 rng(5);
    const Id self = testutil::random_id(rng);
    RoutingTable t(self);
    CHECK(t.buckets().empty());
    CHECK(t.bucket(7) == nullptr);
    const Id a = with_cpl(self, 7, rng), b = with_cpl(self, 7, rng);
    t.insert(a);
    t.insert(b);
    CHECK(t.buckets().size() == 1);
    CHECK(t.bucket(7)->entries() == std::vector<Id>{a, b});
  }

  TEST_CASE("closest: trivial cases") {
    std::mt19937_64 rng(6);
    RoutingTable t(testutil::random_id(rng));
    CHECK(t.closest(testutil::random_id(rng)).empty());
    CHECK_THROWS_AS(t.closest(testutil::random_id(rng), 0), std::invalid_argument);
    const Id p = testutil::random_id(rng);
    t.insert(p);
    CHECK(t.closest(testutil::random_id(rng)) == std::vector<Id>{p});
    for (int i = 0; i < 4; ++i) t.insert(testutil::random_id(rng));
    CHECK(t.closest(testutil::random_id(rng), 20).size() == 5);
  }

  TEST_CASE("closest equals a brute-force sort over 100 random tables") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
      const Id self = testutil::random_id(rng);
      RoutingTable t(self);
      std::vector<Id> accepted;
      const int n = 1 + int(rng() % 400);
      for (int i = 0; i < n; ++i) {
        const Id p = rng() % 2 ? testutil::random_id(rng) : with_cpl(self, int(rng() % 12), rng);
        if (t.insert(p) == InsertOutcome::kAccepted) accepted.push_back(p);
      }
      const Id target = testutil::random_id(rng);
      const std::size_t count = 1 + rng() % 30;
      std::vector<Id> expect = accepted;
      std::sort(expect.begin(), expect.end(), [&](const Id& a, const Id& b) {
        // Compare XOR distances through their hex form.
        return xor_distance(a, target).hex() < xor_distance(b, target).hex();
      });
      if (expect.size() > count) expect.resize(count);
      CHECK(t.closest(target, count) == expect);
    }
  }

  TEST_CASE("properties under random insert/remove sequences") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const Id self = testutil::random_id(rng);
      RoutingTable t(self);
      std::set<Id> model;
      std::vector<Id> pool;
      for (int i = 0; i < 200; ++i) pool.push_back(with_cpl(self, int(rng() % 6), rng));
      for (int step = 0; step < 2000; ++step) {
        const Id& p = pool[rng() % pool.size()];
        if (rng() % 3) {
          const auto before = t.all_entries();
          const auto r = t.insert(p);
          if (r == InsertOutcome::kRejected) {
            CHECK(t.all_entries() == before);
            CHECK(t.bucket(t.bucket_index(p))->full());
          }
          if (r == InsertOutcome::kAccepted) model.insert(p);
        } else {
          t.remove(p);
          model.erase(p);
        }
      }
      const auto entries = t.all_entries();
      CHECK(std::set<Id>(entries.begin(), entries.end()) == model);
      CHECK(entries.size() == model.size());  // no duplicates across buckets
      for (const auto& [index, bucket] : t.buckets()) {
        CHECK(bucket.size() <= 20);
        for (const Id& e : bucket.entries()) {
          CHECK(common_prefix_length(self, e) == index);
          CHECK(e != self);
        }
      }
      // Insert/remove round trip restores the entry set.
      const Id fresh = with_cpl(self, 100, rng);
      t.insert(fresh);
      t.remove(fresh);
      CHECK(t.all_entries() == entries);
    }
  }
}
