#include "retypelab/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "retypelab/parallel.hpp"

namespace retypelab::data {

std::string_view scheme_name(Scheme s) {
  return s == Scheme::HighLevel ? "high_level" : "size_rep";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  if (name == "high_level") return Scheme::HighLevel;
  if (name == "size_rep") return Scheme::SizeRep;
  return std::nullopt;
}

const std::vector<std::string>& scheme_classes(Scheme s) {
  return s == Scheme::HighLevel ? asmx::type_label_names() : asmx::size_rep_names();
}

int FeatureVocabulary::add(const std::string& name) {
  auto it = index.find(name);
  if (it != index.end()) return it->second;
  int column = static_cast<int>(names.size());
  names.push_back(name);
  index.emplace(name, column);
  return column;
}

std::optional<int> FeatureVocabulary::find(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

std::uint64_t fingerprint_names(const std::vector<std::string>& names) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ull;
  };
  for (const auto& name : names) {
    for (unsigned char c : name) mix(c);
    mix('\n');
  }
  return h;
}

std::uint64_t FeatureVocabulary::fingerprint() const { return fingerprint_names(names); }

std::vector<int> Dataset::class_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(n_classes()), 0);
  for (int label : labels) counts[static_cast<std::size_t>(label)]++;
  return counts;
}

// ---------------------------------------------------------------------------
// Building
// ---------------------------------------------------------------------------

std::vector<std::string> function_feature_names(
    const asmx::FunctionListing& fn, const std::vector<extract::PostCallChunk>& post_chunks,
    const BuildOptions& opts, int* truncated_chunks) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto push = [&](const gen::GeneralizedPattern& p) {
    std::string name = gen::canonical_name(p);
    if (seen.insert(name).second) out.push_back(std::move(name));
  };
  auto note_truncation = [&](bool truncated) {
    if (truncated && truncated_chunks) ++*truncated_chunks;
  };

  if (opts.use_ret) {
    for (const auto& chunk : extract::extract_ret_chunks(fn, opts.extract.max_len, opts.extract.mode)) {
      gen::PatternSet set = gen::generalize_ret_chunk(chunk, opts.generalize);
      note_truncation(set.truncated);
      for (const auto& p : set.patterns) push(p);
      if (opts.use_advanced) {
        for (const auto& p : gen::advanced_ret_features(chunk)) push(p);
      }
    }
  }
  if (opts.use_post) {
    for (const auto& chunk : post_chunks) {
      gen::PatternSet set = gen::generalize_post_chunk(chunk, opts.generalize);
      note_truncation(set.truncated);
      for (const auto& p : set.patterns) push(p);
      if (opts.use_advanced) {
        for (const auto& p : gen::advanced_post_features(chunk)) push(p);
      }
    }
  }
  return out;
}

Dataset build_dataset(const std::vector<asmx::FunctionListing>& functions, Scheme scheme,
                      const BuildOptions& opts, BuildDiagnostics* diag) {
  extract::ChunkBundle bundle = extract::extract_all(functions, opts.extract);

  Dataset d;
  d.scheme = scheme;

  // per-function feature names, computed in parallel, merged in document order
  std::vector<std::vector<std::string>> feature_lists(functions.size());
  std::vector<int> truncated(functions.size(), 0);
  par::parallel_for(static_cast<std::int64_t>(functions.size()), [&](std::int64_t i) {
    const auto& fn = functions[static_cast<std::size_t>(i)];
    if (!fn.true_return_type) return;
    static const std::vector<extract::PostCallChunk> kNone;
    auto it = bundle.post_chunks.find(fn.name);
    const auto& posts = it == bundle.post_chunks.end() ? kNone : it->second;
    feature_lists[static_cast<std::size_t>(i)] =
        function_feature_names(fn, posts, opts, &truncated[static_cast<std::size_t>(i)]);
  });

  for (std::size_t i = 0; i < functions.size(); ++i) {
    const auto& fn = functions[i];
    if (!fn.true_return_type) {
      if (diag) diag->unlabeled_functions.push_back(fn.name);
      continue;
    }
    for (const auto& name : feature_lists[i]) d.vocab.add(name);
  }
  for (std::size_t i = 0; i < functions.size(); ++i) {
    const auto& fn = functions[i];
    if (!fn.true_return_type) continue;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(d.vocab.size()), 0);
    for (const auto& name : feature_lists[i]) {
      row[static_cast<std::size_t>(*d.vocab.find(name))] = 1;
    }
    int label = scheme == Scheme::HighLevel
                    ? static_cast<int>(*fn.true_return_type)
                    : static_cast<int>(asmx::map_to_sizerep(*fn.true_return_type));
    d.row_names.push_back(fn.name);
    d.rows.push_back(std::move(row));
    d.labels.push_back(label);
  }

  if (diag) {
    auto counts = d.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] > 0 && counts[c] < 2) {
        diag->notes.push_back("class '" + scheme_classes(scheme)[c] +
                              "' has fewer than 2 rows; stratified splits will reject it");
      }
    }
    int total_truncated = 0;
    for (int t : truncated) total_truncated += t;
    if (total_truncated > 0) {
      diag->notes.push_back(std::to_string(total_truncated) +
                            " chunk(s) hit the per-chunk pattern budget; shortest patterns kept");
    }
    for (const auto& note : bundle.diagnostics) diag->notes.push_back(note);
  }
  return d;
}

Dataset merge_datasets(const Dataset& a, const Dataset& b) {
  if (a.scheme != b.scheme) throw std::invalid_argument("merge_datasets: scheme mismatch");
  Dataset out;
  out.scheme = a.scheme;
  for (const auto& name : a.vocab.names) out.vocab.add(name);
  for (const auto& name : b.vocab.names) out.vocab.add(name);

  auto project = [&out](const Dataset& src) {
    for (int r = 0; r < src.n_rows(); ++r) {
      std::vector<std::uint8_t> row(static_cast<std::size_t>(out.vocab.size()), 0);
      for (int c = 0; c < src.n_features(); ++c) {
        if (src.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) {
          row[static_cast<std::size_t>(*out.vocab.find(src.vocab.names[static_cast<std::size_t>(c)]))] = 1;
        }
      }
      out.rows.push_back(std::move(row));
      out.row_names.push_back(src.row_names[static_cast<std::size_t>(r)]);
      out.labels.push_back(src.labels[static_cast<std::size_t>(r)]);
    }
  };
  project(a);
  project(b);
  return out;
}

Dataset select_columns(const Dataset& d, const std::vector<int>& columns) {
  Dataset out;
  out.scheme = d.scheme;
  for (int c : columns) {
    if (c < 0 || c >= d.n_features()) throw std::out_of_range("select_columns: bad column index");
    out.vocab.add(d.vocab.names[static_cast<std::size_t>(c)]);
  }
  out.row_names = d.row_names;
  out.labels = d.labels;
  out.rows.reserve(d.rows.size());
  for (const auto& row : d.rows) {
    std::vector<std::uint8_t> slim;
    slim.reserve(columns.size());
    for (int c : columns) slim.push_back(row[static_cast<std::size_t>(c)]);
    out.rows.push_back(std::move(slim));
  }
  return out;
}

Dataset prune_rare_features(const Dataset& d, int min_rows, std::vector<std::string>* dropped) {
  std::vector<int> keep;
  for (int c = 0; c < d.n_features(); ++c) {
    int support = 0;
    for (const auto& row : d.rows) support += row[static_cast<std::size_t>(c)];
    if (support >= min_rows) {
      keep.push_back(c);
    } else if (dropped) {
      dropped->push_back(d.vocab.names[static_cast<std::size_t>(c)]);
    }
  }
  return select_columns(d, keep);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string quote_csv(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void write_csv(const Dataset& d, const std::string& path, bool with_timestamp) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open for writing: " + path);
  out << "#scheme=" << scheme_name(d.scheme) << "\n";
  if (with_timestamp) {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    out << "#generated=" << now << "\n";
  }
  for (const auto& name : d.vocab.names) out << quote_csv(name) << ",";
  out << "\"return_type\"\n";
  const auto& classes = scheme_classes(d.scheme);
  for (int r = 0; r < d.n_rows(); ++r) {
    for (const auto cell : d.rows[static_cast<std::size_t>(r)]) {
      out << static_cast<int>(cell) << ",";
    }
    out << classes[static_cast<std::size_t>(d.labels[static_cast<std::size_t>(r)])] << "\n";
  }
  std::ofstream names(path + ".names");
  if (!names) throw CsvError("cannot open for writing: " + path + ".names");
  for (const auto& sym : d.row_names) names << sym << "\n";
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open: " + path);
  Dataset d;
  std::string line;
  bool scheme_seen = false;
  // pragma rows
  while (std::getline(in, line)) {
    if (line.rfind("#scheme=", 0) == 0) {
      auto scheme = parse_scheme(std::string_view(line).substr(8));
      if (!scheme) throw CsvError(path + ": unknown scheme in pragma row");
      d.scheme = *scheme;
      scheme_seen = true;
      continue;
    }
    if (!line.empty() && line[0] == '#') continue;
    break;
  }
  if (!scheme_seen) throw CsvError(path + ": missing #scheme= pragma row");
  if (line.empty() && in.eof()) throw CsvError(path + ": missing header row");

  auto header = split_csv_row(line);
  if (header.empty() || header.back() != "return_type") {
    throw CsvError(path + ": last header column must be \"return_type\"");
  }
  for (std::size_t i = 0; i + 1 < header.size(); ++i) {
    if (d.vocab.find(header[i])) throw CsvError(path + ": duplicate feature name " + header[i]);
    d.vocab.add(header[i]);
  }

  const auto& classes = scheme_classes(d.scheme);
  int row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row_no;
    auto fields = split_csv_row(line);
    if (static_cast<int>(fields.size()) != d.n_features() + 1) {
      throw CsvError(path + ": row " + std::to_string(row_no) + " has " +
                     std::to_string(fields.size()) + " fields, expected " +
                     std::to_string(d.n_features() + 1));
    }
    std::vector<std::uint8_t> row(static_cast<std::size_t>(d.n_features()), 0);
    for (int c = 0; c < d.n_features(); ++c) {
      const std::string& cell = fields[static_cast<std::size_t>(c)];
      if (cell == "0") continue;
      if (cell == "1") {
        row[static_cast<std::size_t>(c)] = 1;
        continue;
      }
      throw CsvError(path + ": row " + std::to_string(row_no) + ", column \"" +
                     d.vocab.names[static_cast<std::size_t>(c)] + "\": cell must be 0 or 1, got '" +
                     cell + "'");
    }
    auto label = std::find(classes.begin(), classes.end(), fields.back());
    if (label == classes.end()) {
      throw CsvError(path + ": row " + std::to_string(row_no) + ": unknown label '" +
                     fields.back() + "' for scheme " + std::string(scheme_name(d.scheme)));
    }
    d.rows.push_back(std::move(row));
    d.labels.push_back(static_cast<int>(label - classes.begin()));
  }

  std::ifstream names(path + ".names");
  if (names) {
    std::string sym;
    while (std::getline(names, sym)) {
      if (!sym.empty()) d.row_names.push_back(sym);
    }
  }
  if (static_cast<int>(d.row_names.size()) != d.n_rows()) {
    d.row_names.resize(static_cast<std::size_t>(d.n_rows()));
    for (int r = 0; r < d.n_rows(); ++r) {
      if (d.row_names[static_cast<std::size_t>(r)].empty()) {
        d.row_names[static_cast<std::size_t>(r)] = "row" + std::to_string(r);
      }
    }
  }
  return d;
}

}  // namespace retypelab::data
