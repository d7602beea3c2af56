#pragma once

#include <json.hpp>

#include "spectr/decode.hpp"

namespace spectr {

inline nlohmann::ordered_json trace_to_json(const DecodeTrace& t) {
  nlohmann::ordered_json j;
  j["algorithm"] = t.algorithm;
  j["prompt"] = t.prompt;
  j["tokens"] = t.tokens;
  j["serial_big_calls"] = t.serial_big_calls;
  auto& iters = j["per_iteration"] = nlohmann::ordered_json::array();
  for (const auto& it : t.per_iteration) {
    iters.push_back({{"drafts", it.drafts},
                     {"draft_length", it.draft_length},
                     {"accepted", it.accepted},
                     {"extra_token", it.extra_token}});
  }
  j["simulated_time"] = t.simulated_time;
  return j;
}

inline DecodeTrace trace_from_json(const nlohmann::ordered_json& j) {
  DecodeTrace t;
  try {
    t.algorithm = j.at("algorithm").get<std::string>();
    t.prompt = j.at("prompt").get<TokenSeq>();
    t.tokens = j.at("tokens").get<TokenSeq>();
    t.serial_big_calls = j.at("serial_big_calls").get<std::size_t>();
    for (const auto& it : j.at("per_iteration")) {
      t.per_iteration.push_back({it.at("drafts").get<std::size_t>(),
                                 it.at("draft_length").get<std::size_t>(),
                                 it.at("accepted").get<std::size_t>(),
                                 it.at("extra_token").get<bool>()});
    }
    t.simulated_time = j.at("simulated_time").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::validation, std::string("malformed trace: ") + e.what());
  }
  return t;
}

}  // namespace spectr
