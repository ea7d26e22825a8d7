#include "doctest.h"

#include <cstring>

#include "errc.hpp"
#include "testutil.hpp"
#include "zeroleaf/promptbank.hpp"

using namespace zeroleaf;

namespace {

const std::filesystem::path kPotato = std::filesystem::path(ZEROLEAF_SOURCE_DIR) / "data" / "potato_prompts.txt";

}  // namespace

TEST_CASE("potato prompt fixture") {
  const auto sets = load_prompt_sets(kPotato);
  REQUIRE(sets.size() == 3);
  std::size_t total = 0;
  for (std::size_t c = 0; c < sets.size(); ++c) {
    CHECK(sets[c].class_id == static_cast<int>(c));
    CHECK(sets[c].descriptions.size() == 6);
    total += sets[c].descriptions.size();
  }
  CHECK(total == 18);
  CHECK(sets[0].class_name == "Potato Early Blight");
  CHECK(sets[1].class_name == "Potato Late Blight");
  CHECK(sets[2].class_name == "Potato Healthy");
  CHECK(sets[0].descriptions[2] == "This image shows early blight symptoms: brown circular lesions on aging potato foliage.");
  CHECK(sets[2].descriptions[1] == "A vibrant, intact potato plant with fresh green leaves and no signs of infection.");
}

TEST_CASE("prompt document parsing") {
  SUBCASE("minimal") {
    const auto sets = parse_prompt_sets("zeroleaf-prompts v1\n[Only]\n  one description \n");
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].descriptions == std::vector<std::string>{"one description"});
  }
  SUBCASE("duplicate class") {
    CHECK(code_of([] { parse_prompt_sets("zeroleaf-prompts v1\n[Healthy]\na\n[Healthy]\nb\n"); }) ==
          Errc::DuplicateClassName);
  }
  SUBCASE("empty class") {
    CHECK(code_of([] { parse_prompt_sets("zeroleaf-prompts v1\n[A]\na\n[B]\n# nothing\n"); }) == Errc::EmptyClass);
  }
  SUBCASE("malformed") {
    CHECK(code_of([] { parse_prompt_sets("[A]\na\n"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_prompt_sets("zeroleaf-prompts v1\na\n"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_prompt_sets("zeroleaf-prompts v1\n[A\na\n"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_prompt_sets("zeroleaf-prompts v1\n"); }) == Errc::ParseError);
    CHECK(code_of([] { parse_prompt_sets("zeroleaf-prompts v2\n[A]\na\n"); }) == Errc::ParseError);
  }
  SUBCASE("format round trip") {
    const auto sets = load_prompt_sets(kPotato);
    const auto again = parse_prompt_sets(format_prompt_sets(sets));
    REQUIRE(again.size() == sets.size());
    for (std::size_t c = 0; c < sets.size(); ++c) {
      CHECK(again[c].class_name == sets[c].class_name);
      CHECK(again[c].descriptions == sets[c].descriptions);
    }
  }
}

TEST_CASE("build_text_bank") {
  testutil::Rng rng(3);
  const auto sets = load_prompt_sets(kPotato);

  SUBCASE("18 rows at dim 512") {
    const auto rows = testutil::gaussian_rows(rng, 18, 512);
    const auto bank = build_text_bank(sets, EmbeddingMatrix(rows), "stub");
    CHECK(bank.num_classes() == 3);
    CHECK(bank.dim() == 512);
    CHECK(bank.provenance() == "stub");
    CHECK(bank.total_descriptions() == 18);
    for (const auto& k : bank.classes()) {
      CHECK(k.embeddings.rows() == 6);
      CHECK(k.embeddings.normalized());
      for (Eigen::Index j = 0; j < 6; ++j) {
        // independent loop norm
        double s = 0;
        for (Eigen::Index d = 0; d < 512; ++d) s += double(k.embeddings.row(j)(d)) * k.embeddings.row(j)(d);
        CHECK(std::abs(std::sqrt(s) - 1.0) <= 1e-6);
        // row j of class c is the direction of input row 6c + j
        const auto src = rows.row(6 * k.class_id + j).cast<double>();
        const double cos = src.dot(k.embeddings.row(j).cast<double>()) / src.norm();
        CHECK(cos == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
    const auto diag = validate_bank(bank);
    CHECK(diag.duplicates.empty());
    for (const auto& c : diag.classes) {
      CHECK(c.min_norm >= 1 - 1e-6);
      CHECK(c.max_norm <= 1 + 1e-6);
      CHECK(c.descriptions == 6);
    }
  }

  SUBCASE("pre-normalized rows stay bit-identical") {
    std::vector<ClassPromptSet> two{{0, "a", {"x"}}, {1, "b", {"y"}}};
    const auto rows = normalize_rows(EmbeddingMatrix(testutil::gaussian_rows(rng, 2, 37))).data();
    const auto bank = build_text_bank(two, EmbeddingMatrix(rows), "p");
    CHECK(std::memcmp(bank.at(0).embeddings.data().data(), rows.row(0).data(), 37 * sizeof(float)) == 0);
    CHECK(std::memcmp(bank.at(1).embeddings.data().data(), rows.row(1).data(), 37 * sizeof(float)) == 0);
  }

  SUBCASE("row count mismatch") {
    CHECK(code_of([&] { build_text_bank(sets, EmbeddingMatrix(testutil::gaussian_rows(rng, 17, 8)), ""); }) ==
          Errc::RowCountMismatch);
  }

  SUBCASE("zero row propagates") {
    auto rows = testutil::gaussian_rows(rng, 18, 8);
    rows.row(7).setZero();
    CHECK(code_of([&] { build_text_bank(sets, EmbeddingMatrix(rows), ""); }) == Errc::ZeroVector);
  }
}

TEST_CASE("validate_bank diagnostics") {
  SUBCASE("duplicate rows") {
    EmbeddingMatrix::Storage rows(4, 2);
    rows << 1, 0, 0, 1, 1, 0, 0.6f, 0.8f;
    const auto bank = build_text_bank({{0, "A", {"a0", "a1", "a2"}}, {1, "B", {"b0"}}}, EmbeddingMatrix(rows), "");
    const auto diag = validate_bank(bank);
    REQUIRE(diag.duplicates.size() == 1);
    CHECK(diag.duplicates[0].class_id == 0);
    CHECK(diag.duplicates[0].first_index == 0);
    CHECK(diag.duplicates[0].second_index == 2);
    CHECK(diag.classes[0].mean_intra_cosine.value() == doctest::Approx(1.0 / 3.0));
    CHECK_FALSE(diag.classes[1].mean_intra_cosine.has_value());
  }
  SUBCASE("minimal bank") {
    EmbeddingMatrix::Storage rows(1, 3);
    rows << 0, 0, 2;
    const auto bank = build_text_bank({{0, "Only", {"d"}}}, EmbeddingMatrix(rows), "");
    const auto diag = validate_bank(bank);
    REQUIRE(diag.classes.size() == 1);
    CHECK(diag.classes[0].descriptions == 1);
    CHECK(diag.dim == 3);
  }
}

TEST_CASE("sidecar agreement with prompts") {
  const auto sets = load_prompt_sets(kPotato);
  auto sidecar = sidecar_for_prompts(sets, "enc");
  CHECK(sidecar.text_rows.size() == 18);
  CHECK(sidecar.text_rows[7].class_id == 1);
  CHECK(sidecar.text_rows[7].description_index == 1);
  CHECK_NOTHROW(check_sidecar_matches(sidecar, sets));

  const auto back = prompt_sets_from_sidecar(sidecar);
  REQUIRE(back.size() == 3);
  CHECK(back[1].descriptions == sets[1].descriptions);

  auto edited = sidecar;
  edited.text_rows[4].description_text += " ";
  CHECK(code_of([&] { check_sidecar_matches(edited, sets); }) == Errc::PromptMismatch);
  edited = sidecar;
  edited.text_rows.pop_back();
  CHECK(code_of([&] { check_sidecar_matches(edited, sets); }) == Errc::RowCountMismatch);
}

TEST_CASE("bank file round trip") {
  testutil::TempDir dir;
  testutil::Rng rng(5);
  const auto sets = load_prompt_sets(kPotato);
  const auto bank = build_text_bank(sets, EmbeddingMatrix(testutil::gaussian_rows(rng, 18, 16)), "stub-16");
  write_bank_file(bank, dir / "bank.zseb");
  const auto again = read_bank_file(dir / "bank.zseb");
  CHECK(again.provenance() == "stub-16");
  REQUIRE(again.num_classes() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(again.at(c).class_name == bank.at(c).class_name);
    CHECK(again.at(c).descriptions == bank.at(c).descriptions);
    CHECK(again.at(c).embeddings.data() == bank.at(c).embeddings.data());
  }
}
