#include "zeroleaf/cli.hpp"

#include <cstdlib>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "fileio.hpp"
#include "zeroleaf/exchange.hpp"
#include "zeroleaf/harness.hpp"
#include "zeroleaf/promptbank.hpp"
#include "zeroleaf/report.hpp"
#include "zeroleaf/zeroshot.hpp"

namespace zeroleaf::cli {

namespace {

/// Raised for option combinations CLI11 cannot express; exits 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool verbose() {
  const char* v = std::getenv("ZEROLEAF_LOG");
  return v && (std::string_view(v) == "info" || std::string_view(v) == "debug");
}

struct BankArgs {
  std::string prompts, embeddings, out, provenance;
};

struct ClassifyArgs {
  std::string bank, images, out, aggregation = "sum";
  double tie_tol = 0.0;
  unsigned threads = 1;
};

struct FoldsArgs {
  std::string manifest, out;
  int k = 5;
  std::uint64_t seed = 42;
};

struct EvaluateArgs {
  std::string mode, manifest, bank, scores, folds, out, run_id = "run", model, group, aggregation = "sum";
  double tie_tol = 0.0;
  unsigned threads = 1;
  bool ovr_mcc = false;
};

struct ReportArgs {
  std::vector<std::string> results;
  std::vector<std::string> formats{"json", "tsv", "txt"};
  std::string out;
};

int run_bank(const BankArgs& a, std::ostream& out, std::ostream& err) {
  const auto prompts = load_prompt_sets(a.prompts);
  const auto file = read_embedding_file(a.embeddings);
  if (file.sidecar.kind != RowKind::text) throw Error(Errc::PromptMismatch, a.embeddings + " is not a text file");
  check_sidecar_matches(file.sidecar, prompts);
  const auto bank =
      build_text_bank(prompts, file.matrix, a.provenance.empty() ? file.sidecar.provenance : a.provenance);
  const auto diag = validate_bank(bank);
  for (const auto& d : diag.duplicates)
    err << fmt::format("warning: DuplicateRow in class '{}': descriptions {} and {}\n",
                       bank.at(static_cast<std::size_t>(d.class_id)).class_name, d.first_index, d.second_index);
  if (verbose())
    for (const auto& c : diag.classes)
      err << fmt::format("info: class {} '{}': {} prompts, norms [{:.9f}, {:.9f}]\n", c.class_id, c.class_name,
                         c.descriptions, c.min_norm, c.max_norm);
  write_bank_file(bank, a.out);
  out << fmt::format("bank: {} classes, {} descriptions, dim {}, {} warnings -> {}\n", bank.num_classes(),
                     bank.total_descriptions(), bank.dim(), diag.duplicates.size(), a.out);
  return kExitOk;
}

int run_classify(const ClassifyArgs& a, std::ostream& out, std::ostream&) {
  const auto bank = read_bank_file(a.bank);
  const auto file = read_embedding_file(a.images);
  if (file.sidecar.kind != RowKind::image) throw Error(Errc::ParseError, a.images + " is not an image file");
  ImageBatch batch{normalize_rows(file.matrix), {}, {}};
  for (const auto& r : file.sidecar.image_rows) {
    batch.item_ids.push_back(r.item_id);
    batch.true_labels.push_back(r.true_label);
  }
  const ClassifyOptions opts{parse_aggregation(a.aggregation), a.tie_tol, a.threads};
  const auto records = classify_batch(batch, bank, opts);
  io::write_atomic(a.out, predictions_to_json(records, bank.class_names()));
  std::size_t ties = 0;
  for (const auto& r : records) ties += r.tie ? 1 : 0;
  out << fmt::format("classify: {} items, {} classes, aggregation {}, {} ties -> {}\n", records.size(),
                     bank.num_classes(), a.aggregation, ties, a.out);
  return kExitOk;
}

int run_folds(const FoldsArgs& a, std::ostream& out, std::ostream& err) {
  const auto manifest = load_manifest(a.manifest);
  const auto plan = stratified_kfold(manifest, a.k, a.seed);
  for (const auto& w : plan.warnings) err << "warning: " << w << "\n";
  io::write_atomic(a.out, format_fold_plan(plan));
  out << fmt::format("folds: {} items, k = {}, seed {} -> {}\n", manifest.size(), plan.k, plan.seed, a.out);
  return kExitOk;
}

int run_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream&) {
  const auto mode = parse_run_mode(a.mode);
  if (mode == RunMode::zero_shot_single) {
    if (!a.folds.empty()) throw UsageError("ModeMismatch: zero-shot evaluation is single-run; --folds not allowed");
    if (!a.scores.empty()) throw UsageError("ModeMismatch: zero-shot evaluation takes --bank, not --scores");
    if (a.bank.empty()) throw UsageError("zero-shot evaluation needs --bank");
  } else {
    if (!a.bank.empty()) throw UsageError("ModeMismatch: external evaluation takes --scores, not --bank");
    if (a.scores.empty() || a.folds.empty()) throw UsageError("external evaluation needs --scores and --folds");
  }

  const auto manifest = load_manifest(a.manifest);
  RunOptions opts;
  opts.run_id = a.run_id;
  opts.model = a.model;
  opts.group = a.group;
  opts.classify = {parse_aggregation(a.aggregation), a.tie_tol, a.threads};
  opts.one_vs_rest_mcc = a.ovr_mcc;

  RunResult result;
  if (mode == RunMode::zero_shot_single) {
    const auto bank = read_bank_file(a.bank);
    result = run_evaluation(manifest, ZeroShotSource{&bank, load_manifest_embeddings(manifest)}, std::nullopt, opts);
  } else {
    const auto plan = parse_fold_plan(io::read_text(a.folds), manifest);
    result = run_evaluation(manifest, ExternalSource{ingest_external_scores(a.scores, manifest)}, plan, opts);
  }
  save_run_result(result, a.out);
  out << fmt::format("evaluate: {} ({}), {} items, {} folds, macro F1 {}, MCC {:.4f} -> {}\n",
                     result.model.empty() ? result.run_id : result.model, to_string(result.mode), manifest.size(),
                     result.folds.size(), format_percent(result.fold_mean.macro_f1), result.fold_mean.mcc, a.out);
  return kExitOk;
}

int run_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  for (const auto& f : a.formats)
    if (f != "json" && f != "tsv" && f != "txt") throw UsageError("UnknownFormat: " + f);
  std::vector<RunResult> results;
  for (const auto& p : a.results) results.push_back(load_run_result(p));
  const auto written = emit_report(results, a.formats, a.out);
  out << fmt::format("report: {} runs, {} files -> {}\n", results.size(), written.size(), a.out);
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot prompt-ensemble classification and evaluation over embedding files", "zeroleaf"};
  app.require_subcommand(1);

  BankArgs bank_args;
  auto* bank = app.add_subcommand("bank", "Build a normalized text bank from prompts and text embeddings");
  bank->add_option("--prompts", bank_args.prompts, "Prompt-definition document")->required()->check(CLI::ExistingFile);
  bank->add_option("--text-embeddings", bank_args.embeddings, "Text-kind ZSEB file, rows in prompt order")
      ->required()
      ->check(CLI::ExistingFile);
  bank->add_option("--out", bank_args.out, "Bank file to write")->required();
  bank->add_option("--provenance", bank_args.provenance, "Encoder identifier (default: from the embedding file)");

  ClassifyArgs classify_args;
  auto* classify = app.add_subcommand("classify", "Classify image embeddings against a bank");
  classify->add_option("--bank", classify_args.bank, "Bank file")->required()->check(CLI::ExistingFile);
  classify->add_option("--images", classify_args.images, "Image-kind ZSEB file")->required()->check(CLI::ExistingFile);
  classify->add_option("--out", classify_args.out, "Prediction document to write")->required();
  classify->add_option("--aggregation", classify_args.aggregation, "sum or mean")
      ->check(CLI::IsMember({"sum", "mean"}))
      ->capture_default_str();
  classify->add_option("--tie-tol", classify_args.tie_tol, "Tie tolerance on class scores")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  classify->add_option("--threads", classify_args.threads, "Worker threads (0 = all cores)")->capture_default_str();

  FoldsArgs folds_args;
  auto* folds = app.add_subcommand("folds", "Write a stratified k-fold plan for a manifest");
  folds->add_option("--manifest", folds_args.manifest, "Manifest document")->required()->check(CLI::ExistingFile);
  folds->add_option("--k", folds_args.k, "Number of folds")->capture_default_str();
  folds->add_option("--seed", folds_args.seed, "Shuffle seed")->capture_default_str();
  folds->add_option("--out", folds_args.out, "Fold plan to write")->required();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Score a manifest zero-shot or from external score files");
  evaluate->add_option("--mode", eval_args.mode, "zero-shot or external")
      ->required()
      ->check(CLI::IsMember({"zero-shot", "external"}));
  evaluate->add_option("--manifest", eval_args.manifest, "Manifest document")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--bank", eval_args.bank, "Bank file (zero-shot)")->check(CLI::ExistingFile);
  evaluate->add_option("--scores", eval_args.scores, "External score file (external)")->check(CLI::ExistingFile);
  evaluate->add_option("--folds", eval_args.folds, "Fold plan (external)");
  evaluate->add_option("--out", eval_args.out, "Run result document to write")->required();
  evaluate->add_option("--run-id", eval_args.run_id, "Run identifier")->capture_default_str();
  evaluate->add_option("--model", eval_args.model, "Model name for reports");
  evaluate->add_option("--group", eval_args.group, "Model group for reports");
  evaluate->add_option("--aggregation", eval_args.aggregation, "sum or mean")
      ->check(CLI::IsMember({"sum", "mean"}))
      ->capture_default_str();
  evaluate->add_option("--tie-tol", eval_args.tie_tol, "Tie tolerance on class scores")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  evaluate->add_option("--threads", eval_args.threads, "Worker threads (0 = all cores)")->capture_default_str();
  evaluate->add_flag("--ovr-mcc", eval_args.ovr_mcc, "Also report macro one-vs-rest binary MCC");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Render run results as tables and documents");
  report->add_option("--result", report_args.results, "Run result document (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--formats", report_args.formats, "Comma-separated subset of json,tsv,txt")
      ->delimiter(',')
      ->capture_default_str();
  report->add_option("--out", report_args.out, "Output path prefix")->required();

  std::vector<const char*> argv{"zeroleaf"};
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == bank) return run_bank(bank_args, out, err);
    if (active == classify) return run_classify(classify_args, out, err);
    if (active == folds) return run_folds(folds_args, out, err);
    if (active == evaluate) return run_evaluate(eval_args, out, err);
    return run_report(report_args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace zeroleaf::cli
