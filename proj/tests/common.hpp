#pragma once

#include <memory>

#include "bahop/oracle.hpp"

namespace bahop::testing {

// Seed 1, 32 slides; generated once per test binary.
inline std::shared_ptr<const SyntheticCohort> frozen_cohort() {
  static const auto c = std::make_shared<const SyntheticCohort>(generate_cohort(CohortSettings{}));
  return c;
}

inline const Evaluator& frozen_evaluator(CohortVariant v) {
  static const Evaluator a(frozen_cohort(), CohortVariant::A);
  static const Evaluator b(frozen_cohort(), CohortVariant::B);
  return v == CohortVariant::A ? a : b;
}

}  // namespace bahop::testing
