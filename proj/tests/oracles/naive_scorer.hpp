#pragma once

// Reference reward scorer used only by tests. It reads schema documents and
// values with nlohmann::json and re-derives every reward component from the
// written rules, sharing no code with the library.

#include <json.hpp>
#include <string>

namespace oracle {

struct NaiveWeights {
  double w_valid = 1.0, w_struct = 1.0, w_format = 0.5, w_correct = 0.5, w_length = 0.1;
  std::size_t l_min = 20, l_max = 512;
  double md = 0.5, tag = 0.3, penalty = -0.1;
};

struct NaiveScore {
  double valid = 0, structure = 0, format = 0, correct = 0, length = 0, total = 0;
};

// `schema_doc` is a whole schema file ({"name", "version", "root"}).
NaiveScore naive_score(const std::string& completion, const nlohmann::json& schema_doc,
                       const nlohmann::json* truth, const NaiveWeights& w = {});

}  // namespace oracle
