#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

namespace {

using miarn::cli::UsageError;

int run(int argc, char** argv) {
  CLI::App app{"Intra-attention recurrent networks for binary text classification"};
  app.require_subcommand(1);

  miarn::cli::PrepareOptions prep;
  auto* prepare = app.add_subcommand("prepare", "Clean, build the vocabulary and encode splits");
  prepare->add_option("--train", prep.train, "Training TSV (label<TAB>text)")->required();
  prepare->add_option("--dev", prep.dev, "Development TSV")->required();
  prepare->add_option("--test", prep.test, "Test TSV")->required();
  prepare->add_option("--out-dir", prep.out_dir, "Output directory")->required();
  prepare->add_option("--max-len", prep.max_len, "Truncation length L")->capture_default_str();

  miarn::cli::TrainOptions tr;
  std::string model_name;
  std::string history;
  std::string embeddings;
  std::size_t k = 0;
  auto* train = app.add_subcommand("train", "Train a model on prepared data");
  train->add_option("--model", model_name, "siarn | miarn | nbow | lstm | attlstm")
      ->required()
      ->check(CLI::IsMember({"siarn", "miarn", "nbow", "lstm", "attlstm"}));
  auto* k_opt = train->add_option("--k", k, "Affinity projection size (miarn)");
  train->add_option("--n", tr.config.embed_dim, "Embedding size")->capture_default_str();
  train->add_option("--d", tr.config.hidden_dim, "LSTM hidden size")->capture_default_str();
  train->add_option("--lambda", tr.config.lambda, "L2 weight")->capture_default_str();
  train->add_option("--lr", tr.config.learning_rate, "RMSProp learning rate")->capture_default_str();
  train->add_option("--epochs", tr.config.epochs, "Training epochs")->capture_default_str();
  train->add_option("--batch-size", tr.config.batch_size, "Mini-batch size")->capture_default_str();
  train->add_option("--seed", tr.config.seed, "RNG seed")->capture_default_str();
  train->add_option("--embeddings", embeddings, "Pretrained embeddings (token v1 ... vn)");
  train->add_option("--data-dir", tr.data_dir, "Output directory of `prepare`")->required();
  train->add_option("--out", tr.out, "Checkpoint path")->required();
  train->add_option("--history", history, "History file (default <out>.history.tsv)");

  miarn::cli::EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint: P R F1 Acc");
  eval->add_option("--checkpoint", ev.checkpoint)->required();
  eval->add_option("--data", ev.data, "Encoded split or label<TAB>text file")->required();

  miarn::cli::AttendOptions at;
  std::string format = "html";
  std::string attend_out;
  auto* attend = app.add_subcommand("attend", "Render attention maps for each input line");
  attend->add_option("--checkpoint", at.checkpoint)->required();
  attend->add_option("--input", at.input, "One document per line")->required();
  attend->add_option("--format", format)->check(CLI::IsMember({"html", "ansi"}))->capture_default_str();
  attend->add_option("--out", attend_out, "Write to file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*prepare) {
    const auto report = miarn::cli::cmd_prepare(prep);
    std::cout << miarn::cli::format_report(report);
  } else if (*train) {
    tr.config.kind = *miarn::model::parse_model_kind(model_name);
    if (k_opt->count() > 0) tr.k = k;
    if (!embeddings.empty()) tr.embeddings = embeddings;
    if (!history.empty()) tr.history = history;
    const auto result = miarn::cli::cmd_train(tr, std::cerr);
    std::cerr << "best epoch " << result.best_epoch << ", checkpoint written to " << tr.out.string()
              << '\n';
  } else if (*eval) {
    std::cout << miarn::cli::format_metrics(miarn::cli::cmd_eval(ev)) << '\n';
  } else if (*attend) {
    at.format = format == "ansi" ? miarn::cli::RenderFormat::ansi : miarn::cli::RenderFormat::html;
    const auto rendered = miarn::cli::cmd_attend(at);
    if (attend_out.empty()) {
      std::cout << rendered;
    } else {
      miarn::io::write_file_atomic(attend_out, rendered);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
