#include <gtest/gtest.h>

#include "vsegan/gradient_suite.hpp"

namespace vsegan {

TEST(GradientSuite, PassesAtTinyWidth) {
  const auto rep = run_gradient_suite(8, 1);
  EXPECT_LT(rep.seconds, 60.0);
  std::size_t op_entries = 0;
  for (const auto& e : rep.entries) {
    EXPECT_TRUE(e.passed()) << e.name << " err=" << e.max_rel_error << " checked=" << e.checked;
    if (e.name.rfind("op ", 0) == 0) ++op_entries;
  }
  EXPECT_GE(op_entries, 10u);
  // five parameter groups at two precisions
  EXPECT_EQ(rep.entries.size() - op_entries, 10u);
}

TEST(GradientSuite, PassesAtWiderSetting) {
  const auto rep = run_gradient_suite(6, 7, 8);
  for (const auto& e : rep.entries) EXPECT_TRUE(e.passed()) << e.name << " err=" << e.max_rel_error;
}

}  // namespace vsegan
