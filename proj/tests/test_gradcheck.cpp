#include <set>

#include "doctest.h"
#include "ganda/gradcheck.hpp"

using namespace ganda;

TEST_CASE("relative error normalisation") {
  CHECK(relative_error(1e-8, 1.0) == 1e-8);
  CHECK(relative_error(1e-8, 1e-9) == doctest::Approx(1e-2));
  CHECK(relative_error(0.0, 0.0) == 0.0);
}

TEST_CASE("every network and term is checked and passes") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const GradCheckReport r = grad_check(seed);
    CHECK(r.configs == 10);
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : r.entries) {
      INFO(e.network, " ", e.term);
      CHECK(e.checked > 0);
      CHECK(e.max_rel_error < 1e-5);
      seen.insert({e.network, e.term});
    }
    // CE touches generator+classifier, alignment the generator, adversarial all three
    CHECK(seen.size() == 6);
    CHECK(seen.count({"discriminator", "adversarial"}) == 1);
    CHECK(seen.count({"generator", "alignment"}) == 1);
    CHECK(r.passed());
  }
}

TEST_CASE("report rejects an unchecked entry") {
  GradCheckReport r;
  CHECK_FALSE(r.passed());
  r.entries.push_back({"generator", "cross_entropy", 0.0, 0, 0});
  CHECK_FALSE(r.passed());
  r.entries[0].checked = 5;
  CHECK(r.passed());
  r.entries[0].max_rel_error = 2e-5;
  CHECK_FALSE(r.passed());
}
