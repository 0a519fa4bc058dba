#include "ad/array.hpp"

#include <sstream>
#include <stdexcept>

namespace covbench::ad {

std::string shape_to_string(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

std::string Array::shape_str() const { return shape_to_string(shape_); }

void Array::check_sizes() const {
  size_t n = 1;
  for (int64_t d : shape_) {
    if (d < 0) throw std::invalid_argument("array dimension must be non-negative, got shape " + shape_to_string(shape_));
    n *= static_cast<size_t>(d);
  }
  if (n != data_.size())
    throw std::invalid_argument("array data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_to_string(shape_));
}

}  // namespace covbench::ad
