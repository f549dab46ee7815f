#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "bitvoc/ecc.hpp"
#include "bitvoc/harness.hpp"
#include "bitvoc/head.hpp"
#include "bitvoc/nn.hpp"
#include "bitvoc/vocab.hpp"

namespace bitvoc::cli {

namespace {

using json = nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Format { json, tsv };

struct Globals {
  std::uint64_t seed = 1;
  std::string out_path;
  Format format = Format::json;
};

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) parts.push_back(item);
  return parts;
}

std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

// Validated head configuration from --kind/--v/--h/--n/--ecc.
head::HeadConfig head_config(const std::string& kind, std::size_t V, std::size_t H, std::size_t N, bool ecc) {
  head::HeadConfig cfg;
  try {
    if (kind == "hybrid") {
      cfg.kind = ecc ? head::Kind::hybrid_ec : head::Kind::hybrid;
      cfg.softmax_size = N;
    } else if (kind == "binary" && ecc) {
      cfg.kind = head::Kind::binary_ec;
    } else {
      head::parse_kind(kind, cfg);
      if (ecc && cfg.kind == head::Kind::softmax) throw std::invalid_argument("softmax head has no bit part to code");
      if (ecc && cfg.kind == head::Kind::hybrid) cfg.kind = head::Kind::hybrid_ec;
    }
    cfg.vocab_size = V;
    cfg.hidden = H;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

class Output {
 public:
  Output(const Globals& g, std::ostream& fallback) {
    if (!g.out_path.empty()) {
      file_ = std::make_unique<std::ofstream>(g.out_path, std::ios::binary);
      if (!*file_) throw std::runtime_error("cannot open " + g.out_path + " for writing");
    }
    stream_ = file_ ? file_.get() : &fallback;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Binary-code word prediction toolkit", "bitvoc"};
  app.set_help_flag("--help", "Print help and exit");
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out_path, "Write results to this file instead of stdout");
  std::map<std::string, Format> formats{{"json", Format::json}, {"tsv", Format::tsv}};
  app.add_option("--format", g.format, "Output format: json (default) or tsv")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case).description(""));

  // vocab
  auto* vocab = app.add_subcommand("vocab", "Vocabulary construction and word/bit mapping");
  vocab->require_subcommand(1);
  std::string vocab_input, vocab_file;
  std::size_t vocab_v = 0, vocab_b = 0;
  auto* vocab_build = vocab->add_subcommand("build", "Count a whitespace-tokenized corpus");
  vocab_build->add_option("--input", vocab_input, "Corpus text")->required();
  vocab_build->add_option("--v", vocab_v, "Vocabulary size V, markers included")->required();
  auto* vocab_map = vocab->add_subcommand("map", "Replace tokens with bit strings");
  vocab_map->add_option("--vocab", vocab_file, "Vocabulary file from vocab build")->required();
  vocab_map->add_option("--input", vocab_input, "Tokenized text")->required();
  vocab_map->add_option("--b", vocab_b, "Bit width (default ceil(log2 V))");
  auto* vocab_unmap = vocab->add_subcommand("unmap", "Replace bit strings with surfaces");
  vocab_unmap->add_option("--vocab", vocab_file, "Vocabulary file from vocab build")->required();
  vocab_unmap->add_option("--input", vocab_input, "Lines of bit strings")->required();

  // ecc
  auto* ecc_cmd = app.add_subcommand("ecc", "Convolutional code");
  ecc_cmd->require_subcommand(1);
  std::string ecc_bits, ecc_probs;
  std::size_t ecc_max_b = 12, sim_b = 16, sim_flips = 0, sim_trials = 1000;
  auto* ecc_encode = ecc_cmd->add_subcommand("encode", "Encode a bit string");
  ecc_encode->add_option("--bits", ecc_bits, "Input bits, LSB first")->required();
  auto* ecc_decode = ecc_cmd->add_subcommand("decode", "Viterbi-decode bit probabilities");
  ecc_decode->add_option("--probs", ecc_probs, "Comma-separated probabilities")->required();
  auto* ecc_fd = ecc_cmd->add_subcommand("fd", "Free distance by exhaustive search");
  ecc_fd->add_option("--max-b", ecc_max_b, "Input width of the search (default 12)")->check(CLI::Range(1, 24));
  auto* ecc_sim = ecc_cmd->add_subcommand("simulate", "Random blocks through a bit-flip channel");
  ecc_sim->add_option("--b", sim_b, "Bits per block (default 16)")->check(CLI::Range(1, 4096));
  ecc_sim->add_option("--flips", sim_flips, "Flipped bits per block (default 0)");
  ecc_sim->add_option("--trials", sim_trials, "Blocks (default 1000)");

  // head
  auto* head_cmd = app.add_subcommand("head", "Output layers");
  head_cmd->require_subcommand(1);
  std::string head_kind = "softmax", head_params_file, head_input, head_vocab;
  std::size_t head_v = 0, head_h = 512, head_n = 0;
  bool head_ecc = false;
  auto add_head_opts = [&](CLI::App* sub) {
    sub->add_option("--kind", head_kind, "softmax|binary|hybrid|binary-ec|hybrid-N|hybrid-N-ec")->required();
    sub->add_option("--v", head_v, "Vocabulary size V")->required();
    sub->add_option("--h", head_h, "Hidden width H (default 512)");
    sub->add_option("--n", head_n, "Softmax size for hybrid heads");
    sub->add_flag("--ecc", head_ecc, "Use the convolutional code on the bit part");
  };
  auto* head_params = head_cmd->add_subcommand("params", "Output rows and parameter count");
  add_head_opts(head_params);
  auto* head_predict = head_cmd->add_subcommand("predict", "Predict words for float32 hidden vectors");
  add_head_opts(head_predict);
  head_predict->add_option("--input", head_input, "Little-endian float32 hidden vectors")->required();
  head_predict->add_option("--params", head_params_file, "Checkpoint; its last layer is the head");
  head_predict->add_option("--vocab", head_vocab, "Vocabulary for surfaces");

  // train
  auto* train = app.add_subcommand("train", "Train heads on a synthetic task");
  std::string task_name = "zipf", heads_arg = "softmax,binary,binary-ec,hybrid-64", bit_loss = "squared", save_prefix;
  harness::ZipfTask task;
  harness::TrainConfig tcfg;
  train->add_option("--task", task_name, "Task (default zipf)")->check(CLI::IsMember({"zipf"}));
  train->add_option("--v", task.vocab_size, "Vocabulary size V (default 256)");
  train->add_option("--heads", heads_arg, "Comma-separated head kinds");
  train->add_option("--exponent", task.exponent, "Zipf exponent (default 1)");
  train->add_option("--features", task.features, "Feature dimension (default 16)");
  train->add_option("--spread", task.spread, "Std-dev around class centroids (default 0.5)");
  train->add_option("--noise", task.label_noise, "Training label noise fraction (default 0)");
  train->add_option("--train-size", task.train_size, "Training examples (default 10000)");
  train->add_option("--test-size", task.test_size, "Test examples (default 2000)");
  train->add_option("--hidden", tcfg.hidden, "Hidden width (default 64)");
  train->add_option("--epochs", tcfg.epochs, "Epochs (default 5)");
  train->add_option("--batch", tcfg.batch_size, "Batch size (default 32)");
  train->add_option("--bit-loss", bit_loss, "Bit loss (default squared)")->check(CLI::IsMember({"squared", "cross-entropy"}));
  train->add_option("--save", save_prefix, "Write <prefix>.<head>.ckpt per head");

  // bench
  auto* bench = app.add_subcommand("bench", "Time output layers");
  std::string bench_v = "4096,16384,65536", bench_heads = "softmax,binary,binary-ec,hybrid-512,hybrid-512-ec";
  harness::BenchConfig bcfg;
  bench->add_option("--v", bench_v, "Comma-separated vocabulary sizes");
  bench->add_option("--h", bcfg.hidden, "Hidden width (default 512)");
  bench->add_option("--heads", bench_heads, "Comma-separated head kinds");
  bench->add_option("--trials", bcfg.trials, "Timed trials (default 30)");
  bench->add_option("--batch", bcfg.batch, "Hidden vectors per trial (default 4)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const bool as_json = g.format == Format::json;

    if (vocab_build->parsed()) {
      if (vocab_v < kNumMarkers + 1) throw UsageError("--v must be at least 4");
      auto in = open_input(vocab_input);
      auto v = build_vocabulary(in, vocab_v);
      Output o(g, out);
      save_vocabulary(v, *o);
    } else if (vocab_map->parsed() || vocab_unmap->parsed()) {
      auto vin = open_input(vocab_file);
      auto v = load_vocabulary(vin);
      auto in = open_input(vocab_input);
      std::unique_ptr<Codebook> book;
      if (vocab_map->parsed()) {
        if (vocab_b != 0 && vocab_b < ceil_log2(v.size())) throw UsageError("--b is too small for this vocabulary");
        book = std::make_unique<Codebook>(v, vocab_b);
      }
      Output o(g, out);
      for (std::string line; std::getline(in, line);) {
        std::istringstream tokens(line);
        bool first = true;
        for (std::string tok; tokens >> tok; first = false) {
          if (!first) *o << ' ';
          if (book)
            *o << bits_to_string(book->encode(v.id(tok)));
          else
            *o << v.surface(bits_to_word(v, bits_from_string(tok)));
        }
        *o << '\n';
      }
    } else if (ecc_encode->parsed()) {
      BitArray bits;
      try {
        bits = bits_from_string(ecc_bits);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      if (bits.empty()) throw UsageError("--bits must not be empty");
      const auto code = ecc::encode(bits);
      Output o(g, out);
      if (as_json)
        *o << json{{"bits", ecc_bits}, {"codeword", bits_to_string(code)}, {"length", code.size()}}.dump() << '\n';
      else
        *o << bits_to_string(code) << '\n';
    } else if (ecc_decode->parsed()) {
      std::vector<double> q;
      for (const auto& tok : split(ecc_probs, ',')) {
        try {
          std::size_t used = 0;
          q.push_back(std::stod(tok, &used));
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw UsageError("bad probability: " + tok);
        }
      }
      if (q.size() < ecc::coded_length(1) || q.size() % 2 != 0)
        throw UsageError("--probs needs 2(B+6) values with B >= 1");
      for (double x : q)
        if (!(x > 0.0 && x < 1.0)) throw UsageError("probabilities must lie strictly inside (0, 1)");
      const auto bits = ecc::viterbi_decode(q);
      Output o(g, out);
      if (as_json)
        *o << json{{"bits", bits_to_string(bits)}}.dump() << '\n';
      else
        *o << bits_to_string(bits) << '\n';
    } else if (ecc_fd->parsed()) {
      const auto d = ecc::free_distance(ecc_max_b);
      Output o(g, out);
      if (as_json)
        *o << json{{"free_distance", d}, {"max_b", ecc_max_b}, {"correctable", ecc::correctable_errors(d)}}.dump()
           << '\n';
      else
        *o << d << '\n';
    } else if (ecc_sim->parsed()) {
      if (sim_flips > ecc::coded_length(sim_b)) throw UsageError("--flips exceeds the coded length 2(b+6)");
      const auto r = ecc::simulate(sim_b, sim_flips, sim_trials, g.seed);
      Output o(g, out);
      if (as_json)
        *o << json{{"trials", r.trials}, {"recovered", r.recovered}, {"recovery_rate", r.recovery_rate()}}.dump()
           << '\n';
      else
        *o << r.trials << '\t' << r.recovered << '\t' << fmt17(r.recovery_rate()) << '\n';
    } else if (head_params->parsed()) {
      const auto cfg = head_config(head_kind, head_v, head_h, head_n, head_ecc);
      const auto pc = head::param_count(cfg);
      const auto geom = head::layout(cfg);
      Output o(g, out);
      if (as_json)
        *o << json{{"kind", head::kind_name(cfg)}, {"b", geom.code_bits}, {"out", pc.rows},
                   {"params", pc.params}, {"ratio", pc.ratio_to_softmax}}.dump()
           << '\n';
      else
        *o << head::kind_name(cfg) << '\t' << geom.code_bits << '\t' << pc.rows << '\t' << pc.params << '\t'
           << fmt17(pc.ratio_to_softmax) << '\n';
    } else if (head_predict->parsed()) {
      const auto cfg = head_config(head_kind, head_v, head_h, head_n, head_ecc);
      std::unique_ptr<Vocabulary> names;
      if (!head_vocab.empty()) {
        auto vin = open_input(head_vocab);
        names = std::make_unique<Vocabulary>(load_vocabulary(vin));
        if (names->size() != cfg.vocab_size) throw UsageError("--vocab size does not match --v");
      }
      head::HeadParams params;
      if (head_params_file.empty()) {
        params = head::random_params(cfg, g.seed);
      } else {
        auto pin = open_input(head_params_file, std::ios::binary);
        auto layers = nn::load_checkpoint(pin);
        if (layers.empty()) throw std::runtime_error("checkpoint has no layers");
        params.weight = std::move(layers.back().weight);
        params.bias = std::move(layers.back().bias);
      }
      const head::Head model(cfg, std::move(params));

      auto hin = open_input(head_input, std::ios::binary);
      std::vector<char> raw((std::istreambuf_iterator<char>(hin)), std::istreambuf_iterator<char>());
      if (raw.size() % (4 * cfg.hidden) != 0)
        throw std::runtime_error("hidden vector file size is not a multiple of 4*H bytes");
      const std::size_t count = raw.size() / (4 * cfg.hidden);
      Output o(g, out);
      std::vector<double> h(cfg.hidden);
      for (std::size_t n = 0; n < count; ++n) {
        for (std::size_t i = 0; i < cfg.hidden; ++i) {
          std::array<char, 4> bytes;
          std::memcpy(bytes.data(), raw.data() + 4 * (n * cfg.hidden + i), 4);
          if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
          h[i] = std::bit_cast<float>(bytes);
        }
        const auto p = model.predict(h);
        const std::string surface = names ? names->surface(p.word) : std::to_string(p.word);
        if (as_json)
          *o << json{{"index", n}, {"id", p.word}, {"word", surface}, {"score", p.score}}.dump() << '\n';
        else
          *o << n << '\t' << p.word << '\t' << surface << '\t' << fmt17(p.score) << '\n';
      }
    } else if (train->parsed()) {
      const auto heads = split(heads_arg, ',');
      if (heads.empty()) throw UsageError("--heads is empty");
      tcfg.bit_loss = bit_loss == "squared" ? head::BitLoss::squared : head::BitLoss::cross_entropy;
      try {
        task.validate();
        if (tcfg.epochs == 0 || tcfg.batch_size == 0 || tcfg.hidden == 0)
          throw std::invalid_argument("--epochs, --batch and --hidden must be positive");
        for (const auto& name : heads) head_config(name, task.vocab_size, tcfg.hidden, 0, false);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto data = harness::generate_task(task, g.seed);
      harness::TrainedCallback save;
      if (!save_prefix.empty()) {
        save = [&](const std::string& name, const nn::Network& net) {
          std::ofstream ck(save_prefix + "." + name + ".ckpt", std::ios::binary);
          if (!ck) throw std::runtime_error("cannot write checkpoint for " + name);
          const nn::DenseLayer* layers[] = {&net.hidden_layer(), &net.output_layer()};
          nn::save_checkpoint(ck, layers);
        };
      }
      const auto results = harness::run_experiment(data, task.vocab_size, heads, tcfg, g.seed, {}, save);
      Output o(g, out);
      if (!as_json) *o << "head\tepoch\ttrain_loss\taccuracy\tfrequent_accuracy\trare_accuracy\tout\tparams\n";
      bool diverged = false;
      for (const auto& r : results) {
        diverged |= r.diverged;
        for (const auto& e : r.epochs) {
          if (as_json) {
            json row{{"head", e.head},
                     {"epoch", e.epoch},
                     {"train_loss", std::isfinite(e.train_loss) ? json(e.train_loss) : json(nullptr)},
                     {"accuracy", e.accuracy},
                     {"frequent_accuracy", e.frequent_accuracy},
                     {"rare_accuracy", e.rare_accuracy},
                     {"out", r.output_rows},
                     {"params", r.head_params}};
            if (r.diverged && &e == &r.epochs.back()) row["diverged"] = true;
            *o << row.dump() << '\n';
          } else {
            *o << e.head << '\t' << e.epoch << '\t' << fmt17(e.train_loss) << '\t' << fmt17(e.accuracy) << '\t'
               << fmt17(e.frequent_accuracy) << '\t' << fmt17(e.rare_accuracy) << '\t' << r.output_rows << '\t'
               << r.head_params << '\n';
          }
        }
      }
      if (diverged) {
        err << "error: training diverged (non-finite loss)\n";
        return kExitRuntime;
      }
    } else if (bench->parsed()) {
      std::vector<std::size_t> sizes;
      for (const auto& tok : split(bench_v, ',')) {
        try {
          sizes.push_back(std::stoul(tok));
        } catch (const std::exception&) {
          throw UsageError("bad vocabulary size: " + tok);
        }
      }
      const auto heads = split(bench_heads, ',');
      for (std::size_t V : sizes)
        for (const auto& name : heads) head_config(name, V, bcfg.hidden, 0, false);
      bcfg.seed = g.seed;
      const auto rows = harness::bench_heads(sizes, heads, bcfg);
      Output o(g, out);
      if (as_json) {
        json arr = json::array();
        for (const auto& r : rows)
          arr.push_back({{"head", r.head}, {"v", r.vocab_size}, {"out", r.output_rows}, {"params", r.params},
                         {"median_ns", r.median_ns}});
        *o << arr.dump(2) << '\n';
      } else {
        *o << "head\tv\tout\tparams\tmedian_ns\n";
        for (const auto& r : rows)
          *o << r.head << '\t' << r.vocab_size << '\t' << r.output_rows << '\t' << r.params << '\t'
             << fmt17(r.median_ns) << '\n';
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace bitvoc::cli
