#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "miarn/embeddings.hpp"

namespace miarn::cli {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string encoded_text(const corpus::EncodedSplit& split) {
  std::ostringstream os;
  corpus::write_encoded(os, split);
  return os.str();
}

corpus::EncodedSplit encode_split(const std::vector<corpus::CleanDoc>& docs,
                                  const corpus::Vocabulary& vocab, std::size_t max_len) {
  corpus::EncodedSplit split{max_len, vocab.size(), {}};
  split.docs.reserve(docs.size());
  for (const auto& d : docs) split.docs.push_back(corpus::encode(d.tokens, d.label, vocab, max_len));
  return split;
}

bool looks_encoded(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string first;
  std::getline(in, first);
  return first.rfind("# miarn-encoded", 0) == 0;
}

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

double max_weight(const model::AttentionRecord& r) {
  double m = 0.0;
  for (std::size_t i = 0; i < r.valid_len; ++i) m = std::max(m, r.attention[i]);
  return m;
}

std::string strip_label(const std::string& line) {
  if (line.size() >= 2 && (line[0] == '0' || line[0] == '1') && line[1] == '\t') {
    return line.substr(2);
  }
  return line;
}

}  // namespace

// prepare ------------------------------------------------------------------

PrepareReport cmd_prepare(const PrepareOptions& options) {
  if (options.max_len < corpus::kMinTokens) {
    throw UsageError("--max-len must be at least " + std::to_string(corpus::kMinTokens));
  }
  const auto train_raw = corpus::load_tsv(options.train);
  const auto dev_raw = corpus::load_tsv(options.dev);
  const auto test_raw = corpus::load_tsv(options.test);

  auto train = corpus::clean_split("train", train_raw);
  auto dev = corpus::clean_split("dev", dev_raw);
  auto test = corpus::clean_split("test", test_raw);
  if (train.docs.empty()) throw std::runtime_error(options.train.string() + ": no documents survive cleaning");
  const auto vocab = corpus::Vocabulary::build(train.docs);

  PrepareReport report{{train.stats, dev.stats, test.stats}, vocab.size(), options.max_len};

  fs::create_directories(options.out_dir);
  std::ostringstream vocab_text;
  vocab.save(vocab_text);
  io::write_file_atomic(options.out_dir / "vocab.txt", vocab_text.str());
  io::write_file_atomic(options.out_dir / "train.enc",
                        encoded_text(encode_split(train.docs, vocab, options.max_len)));
  io::write_file_atomic(options.out_dir / "dev.enc",
                        encoded_text(encode_split(dev.docs, vocab, options.max_len)));
  io::write_file_atomic(options.out_dir / "test.enc",
                        encoded_text(encode_split(test.docs, vocab, options.max_len)));
  io::write_file_atomic(options.out_dir / "report.txt", format_report(report));
  return report;
}

std::string format_report(const PrepareReport& report) {
  std::ostringstream os;
  os << "split\ttotal\tkept\trejected_url\trejected_length\tavg_len\n";
  for (const auto& s : report.splits) {
    os << s.name << '\t' << s.total << '\t' << s.kept << '\t' << s.rejected_url << '\t'
       << s.rejected_length << '\t' << fixed(s.avg_tokens, 2) << '\n';
  }
  os << "vocab_size\t" << report.vocab_size << '\n';
  os << "max_len\t" << report.max_len << '\n';
  return os.str();
}

// train --------------------------------------------------------------------

train::TrainResult cmd_train(const TrainOptions& options, std::ostream& log) {
  train::TrainConfig config = options.config;
  if (config.kind == model::ModelKind::miarn) {
    if (!options.k) throw UsageError("--model miarn requires --k");
    config.proj_dim = *options.k;
  } else {
    if (options.k) {
      log << "warning: --k is only used by miarn; ignoring it for " << model::to_string(config.kind)
          << '\n';
    }
    config.proj_dim = 0;
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const auto vocab = corpus::Vocabulary::load(options.data_dir / "vocab.txt");
  const auto train_split = corpus::load_encoded(options.data_dir / "train.enc");
  const auto dev_split = corpus::load_encoded(options.data_dir / "dev.enc");
  for (const auto* s : {&train_split, &dev_split}) {
    if (s->vocab_size != vocab.size()) {
      throw std::runtime_error("encoded data was built with vocab_size " +
                               std::to_string(s->vocab_size) + " but vocab.txt has " +
                               std::to_string(vocab.size()) + " entries");
    }
  }
  if (train_split.max_len != dev_split.max_len) {
    throw std::runtime_error("train and dev splits use different max_len");
  }

  std::optional<num::Tensor<float>> embedding;
  if (options.embeddings) {
    Rng init = Rng::stream(config.seed, "embedding-init");
    embedding = corpus::load_pretrained(*options.embeddings, vocab, config.embed_dim, init);
  }

  auto result = train::train(config, train_split.docs, dev_split.docs, vocab.size(),
                             std::move(embedding), [&log](const train::EpochRecord& r) {
                               log << "epoch " << r.epoch << " loss " << fixed(r.train_loss, 6)
                                   << " dev_acc " << fixed(r.dev_accuracy, 4) << " dev_f1 "
                                   << fixed(r.dev_macro_f1, 4) << '\n';
                             });

  io::Checkpoint ckpt{result.best.clone(), train_split.max_len, vocab, {}};
  ckpt.extra["lambda"] = fixed(config.lambda, 12);
  ckpt.extra["lr"] = fixed(config.learning_rate, 8);
  ckpt.extra["epochs"] = std::to_string(config.epochs);
  ckpt.extra["batch_size"] = std::to_string(config.batch_size);
  ckpt.extra["seed"] = std::to_string(config.seed);
  ckpt.extra["best_epoch"] = std::to_string(result.best_epoch);
  io::save_checkpoint(options.out, ckpt);

  fs::path history = options.history.value_or(fs::path(options.out.string() + ".history.tsv"));
  std::ostringstream hist;
  train::write_history(hist, result.history);
  io::write_file_atomic(history, hist.str());
  return result;
}

// eval ---------------------------------------------------------------------

train::Metrics cmd_eval(const EvalOptions& options) {
  const auto ckpt = io::load_checkpoint(options.checkpoint);
  std::vector<corpus::EncodedDoc> docs;
  if (looks_encoded(options.data)) {
    auto split = corpus::load_encoded(options.data);
    if (split.vocab_size != ckpt.vocab.size()) {
      throw std::runtime_error("vocabulary size mismatch: " + options.data.string() +
                               " was encoded with " + std::to_string(split.vocab_size) +
                               " entries, checkpoint has " + std::to_string(ckpt.vocab.size()));
    }
    docs = std::move(split.docs);
  } else {
    const auto raw = corpus::load_tsv(options.data);
    for (const auto& d : corpus::clean_split("eval", raw).docs) {
      docs.push_back(corpus::encode(d.tokens, d.label, ckpt.vocab, ckpt.max_len));
    }
  }
  if (docs.empty()) throw std::runtime_error(options.data.string() + ": no documents to evaluate");
  return train::evaluate(ckpt.params, docs);
}

std::string format_metrics(const train::Metrics& m) {
  return fixed(100.0 * m.macro.precision, 2) + " " + fixed(100.0 * m.macro.recall, 2) + " " +
         fixed(100.0 * m.macro.f1, 2) + " " + fixed(100.0 * m.accuracy, 2);
}

// attend -------------------------------------------------------------------

std::vector<model::AttentionRecord> attention_records(const io::Checkpoint& ckpt,
                                                      const std::vector<std::string>& texts) {
  if (!model::has_attention(ckpt.params.config().kind)) {
    throw std::runtime_error(std::string("model has no attention (") +
                             model::to_string(ckpt.params.config().kind) + ")");
  }
  std::vector<model::AttentionRecord> out;
  for (const auto& text : texts) {
    auto tokens = corpus::normalize(text);
    if (tokens.empty()) continue;
    if (tokens.size() > ckpt.max_len) tokens.resize(ckpt.max_len);
    const auto doc = corpus::encode(tokens, 0, ckpt.vocab, ckpt.max_len);
    num::Graph<float> g(false);
    auto res = model::forward_doc(g, ckpt.params, doc.ids, doc.valid_len);
    auto record = std::move(*res.attention);
    record.tokens = std::move(tokens);
    out.push_back(std::move(record));
  }
  return out;
}

std::string cmd_attend(const AttendOptions& options) {
  const auto ckpt = io::load_checkpoint(options.checkpoint);
  std::ifstream in(options.input, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + options.input.string());
  std::vector<std::string> texts;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    texts.push_back(strip_label(line));
  }
  const auto records = attention_records(ckpt, texts);
  return options.format == RenderFormat::html ? render_html(records) : render_ansi(records);
}

int intensity_level(double ratio) {
  if (!(ratio > 0.0)) return 0;
  return std::min(7, static_cast<int>(ratio * 8.0));
}

std::string audit_lines(const model::AttentionRecord& r) {
  std::ostringstream os;
  os << "a:";
  for (std::size_t i = 0; i < r.valid_len; ++i) os << ' ' << fixed(r.attention[i], 6);
  os << '\n';
  if (!r.affinity.empty()) {
    os << "s:";
    for (std::size_t i = 0; i < r.valid_len; ++i) {
      for (std::size_t j = i + 1; j < r.valid_len; ++j) {
        const std::size_t cell = i * r.max_len + j;
        if (!r.affinity_mask[cell]) continue;
        os << ' ' << i << ',' << j << '=' << fixed(r.affinity[cell], 6);
      }
    }
    os << '\n';
  }
  return os.str();
}

std::string render_html(const std::vector<model::AttentionRecord>& records) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
     << "<title>Attention maps</title>\n<style>\n"
     << "body { font-family: sans-serif; margin: 2em; }\n"
     << ".doc { margin-bottom: 1.5em; }\n"
     << ".doc p { font-size: 1.2em; line-height: 1.8; margin: 0.2em 0; }\n"
     << ".tok { padding: 2px 4px; margin-right: 2px; border-radius: 3px; }\n"
     << ".audit { color: #555; font-size: 0.8em; white-space: pre-wrap; }\n"
     << "</style>\n</head>\n<body>\n";
  for (const auto& r : records) {
    const double peak = max_weight(r);
    os << "<div class=\"doc\">\n<p>";
    for (std::size_t i = 0; i < r.valid_len; ++i) {
      const double ratio = peak > 0.0 ? r.attention[i] / peak : 0.0;
      if (i != 0) os << ' ';
      os << "<span class=\"tok\" title=\"" << fixed(r.attention[i], 6)
         << "\" style=\"background-color: rgba(220, 38, 38, " << fixed(ratio, 3) << ")\">"
         << html_escape(i < r.tokens.size() ? r.tokens[i] : std::string()) << "</span>";
    }
    os << "</p>\n<pre class=\"audit\">" << html_escape(audit_lines(r)) << "</pre>\n</div>\n";
  }
  os << "</body>\n</html>\n";
  return os.str();
}

std::string render_ansi(const std::vector<model::AttentionRecord>& records) {
  // xterm-256 background ramp from near-white to saturated red.
  static constexpr int kRamp[8] = {231, 224, 217, 210, 203, 197, 160, 124};
  std::ostringstream os;
  for (const auto& r : records) {
    const double peak = max_weight(r);
    for (std::size_t i = 0; i < r.valid_len; ++i) {
      const int level = intensity_level(peak > 0.0 ? r.attention[i] / peak : 0.0);
      if (i != 0) os << ' ';
      os << "\x1b[38;5;16;48;5;" << kRamp[level] << 'm'
         << (i < r.tokens.size() ? r.tokens[i] : std::string()) << "\x1b[0m";
    }
    os << '\n' << audit_lines(r) << '\n';
  }
  return os.str();
}

}  // namespace miarn::cli
