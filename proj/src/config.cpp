#include "madtwinnet/config.hpp"

#include "madtwinnet/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace madt {
namespace {

std::string trim_ws(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

RunConfig RunConfig::paper_preset() {
  RunConfig cfg;
  cfg.stft = StftConfig{2049, 4096, 384, 44100};
  cfg.sequence = SequenceConfig{60, 10};
  cfg.trimmed_bins = 744;
  return cfg;
}

MaskerConfig RunConfig::masker_config() const {
  return MaskerConfig{stft.retained_bins(), trimmed_bins, sequence, encoder_alignment};
}

LossOptions RunConfig::loss_options() const {
  LossOptions opts;
  opts.twin_enabled = twin_enabled;
  opts.lambda_diag = train.lambda_diag;
  opts.lambda_dec = train.lambda_dec;
  opts.twin.backprop = twin_loss_backprop;
  opts.twin.shares_projection = twin_shares_projection;
  return opts;
}

void RunConfig::validate() const {
  try {
    stft.validate();
    masker_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(train.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (train.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(train.grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  if (train.lambda_diag < 0.0 || train.lambda_dec < 0.0) throw ConfigError("lambdas must be >= 0");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "schema_version") {
    if (parse_uint(key, value) != kConfigSchemaVersion) {
      throw ConfigError("unsupported config schema_version " + value);
    }
  } else if (key == "frame_length") {
    stft.frame_length = parse_uint(key, value);
  } else if (key == "fft_length") {
    stft.fft_length = parse_uint(key, value);
  } else if (key == "hop") {
    stft.hop = parse_uint(key, value);
  } else if (key == "sample_rate") {
    stft.sample_rate = parse_uint(key, value);
  } else if (key == "seq_length") {
    sequence.length = parse_uint(key, value);
  } else if (key == "context") {
    sequence.context = parse_uint(key, value);
  } else if (key == "trimmed_bins") {
    trimmed_bins = parse_uint(key, value);
  } else if (key == "learning_rate") {
    train.learning_rate = parse_double(key, value);
  } else if (key == "batch_size") {
    train.batch_size = parse_uint(key, value);
  } else if (key == "grad_clip") {
    train.grad_clip = parse_double(key, value);
  } else if (key == "lambda_diag") {
    train.lambda_diag = parse_double(key, value);
  } else if (key == "lambda_dec") {
    train.lambda_dec = parse_double(key, value);
  } else if (key == "epochs") {
    train.epochs = parse_uint(key, value);
  } else if (key == "seed") {
    train.seed = parse_uint(key, value);
  } else if (key == "griffin_lim_iterations") {
    griffin_lim_iterations = parse_uint(key, value);
  } else if (key == "encoder_alignment") {
    if (value == "literal") {
      encoder_alignment = EncoderAlignment::literal;
    } else if (value == "realigned") {
      encoder_alignment = EncoderAlignment::realigned;
    } else {
      throw ConfigError("encoder_alignment must be literal or realigned");
    }
  } else if (key == "twin_enabled") {
    twin_enabled = parse_bool(key, value);
  } else if (key == "twin_loss_backprop") {
    if (value == "stop") {
      twin_loss_backprop = TwinLossBackprop::stop;
    } else if (value == "full") {
      twin_loss_backprop = TwinLossBackprop::full;
    } else {
      throw ConfigError("twin_loss_backprop must be stop or full");
    }
  } else if (key == "twin_shares_projection") {
    twin_shares_projection = parse_bool(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "schema_version = " << kConfigSchemaVersion << '\n'
     << "frame_length = " << stft.frame_length << '\n'
     << "fft_length = " << stft.fft_length << '\n'
     << "hop = " << stft.hop << '\n'
     << "sample_rate = " << stft.sample_rate << '\n'
     << "seq_length = " << sequence.length << '\n'
     << "context = " << sequence.context << '\n'
     << "trimmed_bins = " << trimmed_bins << '\n'
     << "learning_rate = " << format_double(train.learning_rate) << '\n'
     << "batch_size = " << train.batch_size << '\n'
     << "grad_clip = " << format_double(train.grad_clip) << '\n'
     << "lambda_diag = " << format_double(train.lambda_diag) << '\n'
     << "lambda_dec = " << format_double(train.lambda_dec) << '\n'
     << "epochs = " << train.epochs << '\n'
     << "seed = " << train.seed << '\n'
     << "griffin_lim_iterations = " << griffin_lim_iterations << '\n'
     << "encoder_alignment = "
     << (encoder_alignment == EncoderAlignment::literal ? "literal" : "realigned") << '\n'
     << "twin_enabled = " << (twin_enabled ? "true" : "false") << '\n'
     << "twin_loss_backprop = "
     << (twin_loss_backprop == TwinLossBackprop::stop ? "stop" : "full") << '\n'
     << "twin_shares_projection = " << (twin_shares_projection ? "true" : "false") << '\n';
  return os.str();
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim_ws(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    base.set(trim_ws(line.substr(0, eq)), trim_ws(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), base);
}

}  // namespace madt
