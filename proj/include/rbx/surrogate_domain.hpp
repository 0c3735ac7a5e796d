#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rbx {

enum class Method { classical, smm, cdm };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::classical: return "classical";
    case Method::smm: return "smm";
    case Method::cdm: return "cdm";
  }
  return "unknown";
}

/// Ordered subset of training-set indices used by the inner greedy sweeps.
struct SurrogateDomain {
  std::vector<std::size_t> indices;
  Method method = Method::smm;
  int outer_loop = 0;
  std::size_t budget = 0;
};

}  // namespace rbx
