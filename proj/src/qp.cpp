#include "dcngan/qp.hpp"

#include <algorithm>
#include <string>

#include "dcngan/errors.hpp"

namespace dcngan {

namespace {

std::string list_str(const std::vector<int>& values) {
  std::string s = "{";
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? ", " : "") + std::to_string(values[i]);
  return s + "}";
}

}  // namespace

QPCode::QPCode(int qp, int index, std::size_t length) : qp_(qp), index_(index), onehot_(length, 0.0f) {
  onehot_[static_cast<std::size_t>(index)] = 1.0f;
}

void validate_qp_set(const std::vector<int>& qp_set) {
  if (qp_set.empty()) throw ConfigError("QP set is empty");
  for (std::size_t i = 0; i < qp_set.size(); ++i) {
    if (qp_set[i] < 0 || qp_set[i] > 51) throw ConfigError("QP " + std::to_string(qp_set[i]) + " outside [0, 51]");
    if (i && qp_set[i] <= qp_set[i - 1]) throw ConfigError("QP set must be strictly ascending: " + list_str(qp_set));
  }
}

QPCode encode_qp(int qp, const std::vector<int>& qp_set) {
  validate_qp_set(qp_set);
  const auto it = std::find(qp_set.begin(), qp_set.end(), qp);
  if (it == qp_set.end()) {
    throw UnsupportedQpError("unsupported QP " + std::to_string(qp) + "; valid QPs are " + list_str(qp_set));
  }
  return QPCode(qp, static_cast<int>(it - qp_set.begin()), qp_set.size());
}

}  // namespace dcngan
