#pragma once

#include <map>
#include <string>

#include "partgait/tensor.hpp"

namespace partgait::model {

// Named-tensor archive with a JSON metadata record. The binary layout is
// fixed little-endian and round-trips bit-exactly, which the resume
// determinism guarantee depends on.
struct tensor_archive {
  std::string meta_json = "{}";
  std::map<std::string, tensorf> tensors;

  void put(const std::string& name, const tensorf& t);
  const tensorf& get(const std::string& name) const;  // checkpoint_mismatch
  bool has(const std::string& name) const;

  void save(const std::string& path) const;  // io_error
  static tensor_archive load(const std::string& path);
};

}  // namespace partgait::model
