#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "retypelab/dataset.hpp"

using namespace retypelab;
using namespace retypelab::asmx;
using namespace retypelab::data;

namespace {

std::vector<FunctionListing> two_function_corpus() {
  // func1 returns an int literal; func2 is a short whose callers widen with
  // cwde; the caller is unlabeled
  return parse_listing(
      ".func _func1 ret=int\n"
      "    mov eax, 42\n"
      "    mov esp, ebp\n"
      "    pop ebp\n"
      "    retn\n"
      ".endfunc\n"
      ".func _func2 ret=short\n"
      "    mov ax, 7\n"
      "    pop ebp\n"
      "    retn\n"
      ".endfunc\n"
      ".func _caller\n"
      "    call _func2\n"
      "    add esp, 4\n"
      "    cwde\n"
      "    call _func1\n"
      "    add esp, 8\n"
      "    mov [ebp+var_4], eax\n"
      "    retn\n"
      ".endfunc\n");
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Dataset tiny_dataset() {
  Dataset d;
  d.scheme = Scheme::HighLevel;
  d.vocab.add("RET: a");
  d.vocab.add("RET: b");
  d.vocab.add("POST: c");
  d.row_names = {"_r0", "_r1", "_r2"};
  d.rows = {{1, 0, 1}, {0, 1, 0}, {1, 1, 0}};
  d.labels = {static_cast<int>(TypeLabel::Int), static_cast<int>(TypeLabel::Short),
              static_cast<int>(TypeLabel::Int)};
  return d;
}

}  // namespace

TEST_CASE("table-style occurrence matrix with callee attribution") {
  BuildDiagnostics diag;
  Dataset d = build_dataset(two_function_corpus(), Scheme::HighLevel, {}, &diag);
  REQUIRE(d.n_rows() == 2);  // the unlabeled caller contributes no row
  REQUIRE(diag.unlabeled_functions == std::vector<std::string>{"_caller"});

  auto ret_col = d.vocab.find("RET: mov eax, <lit> | callee_epilogue");
  auto ax_col = d.vocab.find("RET: mov ax, <lit> | callee_epilogue");
  auto post_col = d.vocab.find("POST: caller_epilogue | cwde");
  REQUIRE(ret_col.has_value());
  REQUIRE(ax_col.has_value());
  REQUIRE(post_col.has_value());

  int func1 = 0, func2 = 1;
  CHECK(d.row_names[0] == "_func1");
  CHECK(d.rows[func1][static_cast<std::size_t>(*ret_col)] == 1);
  CHECK(d.rows[func1][static_cast<std::size_t>(*post_col)] == 0);
  // the cwde pattern belongs to _func2 (the callee), not the caller
  CHECK(d.rows[func2][static_cast<std::size_t>(*post_col)] == 1);
  // width-specific column stays exclusive; the family-widened `mov eax`
  // column is shared by design
  CHECK(d.rows[func2][static_cast<std::size_t>(*ax_col)] == 1);
  CHECK(d.rows[func1][static_cast<std::size_t>(*ax_col)] == 0);
  CHECK(d.labels[func1] == static_cast<int>(TypeLabel::Int));
  CHECK(d.labels[func2] == static_cast<int>(TypeLabel::Short));
}

TEST_CASE("size_rep scheme maps labels through the grouping") {
  Dataset d = build_dataset(two_function_corpus(), Scheme::SizeRep);
  REQUIRE(d.n_rows() == 2);
  CHECK(d.labels[0] == static_cast<int>(SizeRepLabel::Int4));
  CHECK(d.labels[1] == static_cast<int>(SizeRepLabel::Int2));
}

TEST_CASE("two returns producing the same pattern still set the cell to 1") {
  auto fns = parse_listing(
      ".func _f ret=int\n"
      "    mov eax, 1\n"
      "    retn\n"
      "L2: mov eax, 2\n"
      "    retn\n"
      ".endfunc\n");
  Dataset d = build_dataset(fns, Scheme::HighLevel);
  auto col = d.vocab.find("RET: mov eax, <lit> | callee_epilogue");
  REQUIRE(col.has_value());
  CHECK(d.rows[0][static_cast<std::size_t>(*col)] == 1);
}

TEST_CASE("feature toggles drop RET / POST / advanced columns") {
  BuildOptions no_post;
  no_post.use_post = false;
  Dataset d = build_dataset(two_function_corpus(), Scheme::HighLevel, no_post);
  for (const auto& name : d.vocab.names) CHECK(name.rfind("POST: ", 0) != 0);

  BuildOptions no_advanced;
  no_advanced.use_advanced = false;
  Dataset d2 = build_dataset(two_function_corpus(), Scheme::HighLevel, no_advanced);
  for (const auto& name : d2.vocab.names) {
    CHECK(name.find("result_use") == std::string::npos);
    CHECK(name.find("literal_class") == std::string::npos);
  }
}

TEST_CASE("merge: identity, disjoint vocabularies, shared columns") {
  Dataset d = tiny_dataset();
  Dataset empty;
  empty.scheme = Scheme::HighLevel;
  Dataset same = merge_datasets(d, empty);
  CHECK(same.vocab.names == d.vocab.names);
  CHECK(same.rows == d.rows);
  CHECK(same.labels == d.labels);

  Dataset other;
  other.scheme = Scheme::HighLevel;
  other.vocab.add("RET: x");
  other.vocab.add("RET: b");  // shared with tiny_dataset
  other.row_names = {"_r3"};
  other.rows = {{1, 1}};
  other.labels = {static_cast<int>(TypeLabel::Void)};

  Dataset merged = merge_datasets(d, other);
  CHECK(merged.n_features() == 4);  // a, b, c + new x
  CHECK(merged.n_rows() == 4);
  auto shared = merged.vocab.find("RET: b");
  auto fresh = merged.vocab.find("RET: x");
  REQUIRE(shared.has_value());
  REQUIRE(fresh.has_value());
  // both row groups populate the shared column
  CHECK(merged.rows[1][static_cast<std::size_t>(*shared)] == 1);
  CHECK(merged.rows[3][static_cast<std::size_t>(*shared)] == 1);
  CHECK(merged.rows[3][static_cast<std::size_t>(*fresh)] == 1);
  CHECK(merged.rows[0][static_cast<std::size_t>(*fresh)] == 0);

  Dataset wrong_scheme = tiny_dataset();
  wrong_scheme.scheme = Scheme::SizeRep;
  CHECK_THROWS_AS(merge_datasets(d, wrong_scheme), std::invalid_argument);

  // fully disjoint vocabularies of sizes 3 and 2 merge to size 5
  Dataset disjoint;
  disjoint.scheme = Scheme::HighLevel;
  disjoint.vocab.add("RET: y");
  disjoint.vocab.add("RET: z");
  disjoint.rows = {{1, 0}};
  disjoint.labels = {static_cast<int>(TypeLabel::Bool)};
  disjoint.row_names = {"_r9"};
  CHECK(merge_datasets(d, disjoint).n_features() == 5);
}

TEST_CASE("csv round-trip is lossless including vocabulary order and scheme") {
  Dataset d = tiny_dataset();
  std::string path = temp_path("retypelab_roundtrip.csv");
  write_csv(d, path);
  Dataset back = read_csv(path);
  CHECK(back.scheme == d.scheme);
  CHECK(back.vocab.names == d.vocab.names);
  CHECK(back.rows == d.rows);
  CHECK(back.labels == d.labels);
  CHECK(back.row_names == d.row_names);
  CHECK(back.vocab.fingerprint() == d.vocab.fingerprint());
  std::remove(path.c_str());
  std::remove((path + ".names").c_str());
}

TEST_CASE("csv errors name the offending row and column") {
  std::string path = temp_path("retypelab_badcell.csv");
  {
    std::ofstream out(path);
    out << "#scheme=high_level\n\"RET: a\",\"return_type\"\n2,int\n";
  }
  CHECK_THROWS_WITH_AS(read_csv(path), doctest::Contains("RET: a"), CsvError);
  {
    std::ofstream out(path);
    out << "#scheme=high_level\n\"RET: a\",\"return_type\"\n1,banana\n";
  }
  CHECK_THROWS_WITH_AS(read_csv(path), doctest::Contains("banana"), CsvError);
  {
    std::ofstream out(path);
    out << "#scheme=high_level\n\"RET: a\",\"klass\"\n1,int\n";
  }
  CHECK_THROWS_AS(read_csv(path), CsvError);
  {
    std::ofstream out(path);
    out << "\"RET: a\",\"return_type\"\n1,int\n";
  }
  CHECK_THROWS_AS(read_csv(path), CsvError);  // missing scheme pragma
  std::remove(path.c_str());
}

TEST_CASE("planted exclusive pattern support equals its class count") {
  // three int functions share a planted div payload; nobody else has it
  std::string doc;
  for (int i = 0; i < 3; ++i) {
    doc += ".func _i" + std::to_string(i) + " ret=int\nmov ecx, 9\ncdq\nidiv ecx\nretn\n.endfunc\n";
  }
  for (int i = 0; i < 4; ++i) {
    doc += ".func _v" + std::to_string(i) + " ret=void\nmov esi, 1\nretn\n.endfunc\n";
  }
  Dataset d = build_dataset(parse_listing(doc), Scheme::HighLevel);
  auto col = d.vocab.find("RET: div_present");
  REQUIRE(col.has_value());
  int support = 0;
  for (const auto& row : d.rows) support += row[static_cast<std::size_t>(*col)];
  CHECK(support == 3);
}

TEST_CASE("rare-feature pruning keeps columns at or above the row floor") {
  Dataset d = tiny_dataset();
  std::vector<std::string> dropped;
  Dataset pruned = prune_rare_features(d, 2, &dropped);
  // columns a (2 rows) and b (2 rows) survive; c (1 row) is dropped
  CHECK(pruned.n_features() == 2);
  CHECK(dropped == std::vector<std::string>{"POST: c"});
  // cells follow their columns
  CHECK(pruned.rows[0] == std::vector<std::uint8_t>{1, 0});
  CHECK(pruned.rows[2] == std::vector<std::uint8_t>{1, 1});
}

TEST_CASE("per-class counts flag classes too small to stratify") {
  BuildDiagnostics diag;
  build_dataset(two_function_corpus(), Scheme::HighLevel, {}, &diag);
  // both classes have a single row here
  int flagged = 0;
  for (const auto& note : diag.notes) flagged += note.find("fewer than 2 rows") != std::string::npos;
  CHECK(flagged == 2);
}
