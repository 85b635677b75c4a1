#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vsegan {

struct SuiteEntry {
  std::string name;
  double max_rel_error = 0;
  double tolerance = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // sampled points straddling a kink
  bool passed() const { return checked > 0 && max_rel_error < tolerance; }
};

struct SuiteReport {
  std::vector<SuiteEntry> entries;
  double seconds = 0;
  bool passed() const {
    for (const auto& e : entries)
      if (!e.passed()) return false;
    return !entries.empty();
  }
};

// Every tensor op in 64-bit (tolerance 1e-6), then the generator loss
// g_total = g_adv + lambda * g_l1 at the given width shift: 64-bit against
// tolerance 1e-4 and 32-bit reverse mode against 1e-3. The end-to-end checks
// sample `per_group` entries from each parameter group, skipping points where
// the forward and backward one-sided slopes disagree (a kink inside the
// difference stencil). Relative errors are floored at 1e-4 of the largest
// gradient in the model.
SuiteReport run_gradient_suite(unsigned width_shift, std::uint64_t seed, std::size_t per_group = 20);

}  // namespace vsegan
