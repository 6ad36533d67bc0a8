#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "classifier_impls.hpp"

namespace retypelab::ml {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string hash_to_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out = "0x";
  for (int shift = 60; shift >= 0; shift -= 4) out += digits[(h >> shift) & 0xf];
  return out;
}

std::uint64_t hex_to_hash(const std::string& s) {
  if (s.rfind("0x", 0) != 0) throw ModelIoError("bad fingerprint hash: " + s);
  std::uint64_t h = 0;
  for (std::size_t i = 2; i < s.size(); ++i) {
    char c = s[i];
    h <<= 4;
    if (c >= '0' && c <= '9') {
      h |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      h |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw ModelIoError("bad fingerprint hash: " + s);
    }
  }
  return h;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
  std::string state;
  model.impl->state_to_json(state);
  json doc = {
      {"format", "retypelab-model"},
      {"version", kFormatVersion},
      {"algorithm", model.spec.algorithm},
      {"params", model.spec.params},
      {"seed", model.spec.rng_seed},
      {"classes", model.classes},
      {"vocabulary", model.vocabulary},
      {"fingerprint",
       {{"hash", hash_to_hex(model.vocab_fingerprint)}, {"size", model.vocabulary.size()}}},
      {"state", json::parse(state)},
  };
  std::ofstream out(path);
  if (!out) throw ModelIoError("cannot open for writing: " + path);
  out << doc.dump(1) << "\n";
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelIoError("cannot open: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ModelIoError(path + ": not a valid model file: " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "retypelab-model") {
      throw ModelIoError(path + ": not a retypelab model file");
    }
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw ModelIoError(path + ": unsupported model format version " +
                         std::to_string(doc.at("version").get<int>()));
    }
    TrainedModel model;
    model.spec.algorithm = doc.at("algorithm").get<std::string>();
    model.spec.params = doc.at("params").get<std::map<std::string, std::string>>();
    model.spec.rng_seed = doc.at("seed").get<std::uint64_t>();
    model.classes = doc.at("classes").get<std::vector<std::string>>();
    model.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
    const auto& fp = doc.at("fingerprint");
    model.vocab_fingerprint = hex_to_hash(fp.at("hash").get<std::string>());
    if (fp.at("size").get<std::size_t>() != model.vocabulary.size()) {
      throw ModelIoError(path + ": fingerprint size does not match the stored vocabulary");
    }
    if (data::fingerprint_names(model.vocabulary) != model.vocab_fingerprint) {
      throw ModelIoError(path + ": fingerprint hash does not match the stored vocabulary");
    }
    model.impl = make_classifier(model.spec.algorithm);
    model.impl->state_from_json(doc.at("state").dump());
    return model;
  } catch (const json::exception& e) {
    throw ModelIoError(path + ": malformed model document: " + e.what());
  }
}

}  // namespace retypelab::ml
