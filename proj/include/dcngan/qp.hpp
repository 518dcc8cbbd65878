#pragma once

#include <vector>

namespace dcngan {

// QP values the one-hot code ranges over, ascending.
inline const std::vector<int> kDefaultQpSet{22, 27, 32, 37};

// One-hot encoding of a quantization parameter over a sorted QP set.
class QPCode {
 public:
  int qp_value() const { return qp_; }
  int hot_index() const { return index_; }
  const std::vector<float>& onehot() const { return onehot_; }
  std::size_t length() const { return onehot_.size(); }

  bool operator==(const QPCode&) const = default;

 private:
  friend QPCode encode_qp(int qp, const std::vector<int>& qp_set);
  QPCode(int qp, int index, std::size_t length);

  int qp_ = 0;
  int index_ = 0;
  std::vector<float> onehot_;
};

// Throws UnsupportedQpError (listing the valid set) if qp is not in qp_set.
QPCode encode_qp(int qp, const std::vector<int>& qp_set = kDefaultQpSet);

// Throws ConfigError unless the set is non-empty, strictly ascending and within [0, 51].
void validate_qp_set(const std::vector<int>& qp_set);

}  // namespace dcngan
