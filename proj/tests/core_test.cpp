// Copyright 2026 PronScore contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pronscore/errors.hpp"
#include "pronscore/matrix.hpp"
#include "pronscore/rng.hpp"
#include "pronscore/types.hpp"

using namespace pronscore;

TEST_CASE("rng is deterministic per seed") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42);
  Rng d(43);
  bool all_equal = true;
  for (int i = 0; i < 10; ++i) {
    if (c.next_u64() != d.next_u64()) all_equal = false;
  }
  CHECK_FALSE(all_equal);
}

TEST_CASE("rng uniform stays in [0, 1) and normal has sane moments") {
  Rng rng(7);
  double sum = 0.0;
  double sum_sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("rng below is bounded and covers its range") {
  Rng rng(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.below(5);
    CHECK(v < 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("rng shuffle permutes and is seed-stable") {
  std::vector<std::size_t> v1 = {0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<std::size_t> v2 = v1;
  Rng a(3);
  Rng b(3);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<std::size_t> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("rng derive separates streams by tag and index") {
  const auto base = Rng::derive(9, "alpha");
  CHECK(base == Rng::derive(9, "alpha"));
  CHECK(base != Rng::derive(9, "beta"));
  CHECK(Rng::derive(9, "alpha", 1) != Rng::derive(9, "alpha", 2));
  CHECK(Rng::derive(9, "alpha", 1, 0) != Rng::derive(9, "alpha", 0, 1));
  CHECK(Rng::derive(8, "alpha") != Rng::derive(9, "alpha"));
}

TEST_CASE("matrix indexing is row-major with equality") {
  Matrix m(2, 3);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.size() == 6);
  m(1, 2) = 5.0;
  CHECK(m.data()[5] == 5.0);
  CHECK(m.row(1)[2] == 5.0);
  Matrix n(2, 3);
  n(1, 2) = 5.0;
  CHECK(m == n);
  n(0, 0) = 1.0;
  CHECK_FALSE(m == n);
  CHECK(Matrix().empty());
}

TEST_CASE("phone set validates and finds symbols") {
  PhoneSet phones({"AA", "AE", "AH"});
  CHECK(phones.size() == 3);
  CHECK(phones.symbol(1) == "AE");
  CHECK(phones.find("AH") == 2);
  CHECK_FALSE(phones.find("ZZ").has_value());
  CHECK_THROWS_AS(PhoneSet({"AA", "AA"}), ValidationError);
  CHECK_THROWS_AS(PhoneSet({"AA", ""}), ValidationError);
}
