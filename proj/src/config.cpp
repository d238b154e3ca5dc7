#include "dpn/config.hpp"

#include <fstream>
#include <sstream>

namespace dpn {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

Index parse_index(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<Index>(n);
  } catch (const std::exception&) {
    throw ConfigError(where + "expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where + "expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(where + "expected true|false, got '" + v + "'");
}

std::vector<Index> parse_index_list(const std::string& v, const std::string& where) {
  std::vector<Index> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_index(trim(item), where));
  if (out.empty()) throw ConfigError(where + "expected a comma-separated list");
  return out;
}

}  // namespace

FullConfig parse_config_text(const std::string& text, const std::string& origin) {
  FullConfig cfg;
  std::istringstream in(text);
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + "expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto& h = cfg.hyper;
    auto& t = cfg.train;
    if (key == "word_dim") h.word_dim = parse_index(value, where);
    else if (key == "char_dim") h.char_dim = parse_index(value, where);
    else if (key == "entity_type_dim") h.entity_type_dim = parse_index(value, where);
    else if (key == "cnn_filter_sizes") h.cnn_filter_sizes = parse_index_list(value, where);
    else if (key == "cnn_total_filters") h.cnn_total_filters = parse_index(value, where);
    else if (key == "encoder_hidden") h.encoder_hidden = parse_index(value, where);
    else if (key == "decoder_hidden") h.decoder_hidden = parse_index(value, where);
    else if (key == "heads") h.heads = parse_index(value, where);
    else if (key == "head_dim") h.head_dim = parse_index(value, where);
    else if (key == "dropout") h.dropout = parse_double(value, where);
    else if (key == "alpha") h.alpha = parse_double(value, where);
    else if (key == "learning_rate") t.learning_rate = parse_double(value, where);
    else if (key == "batch_size") t.batch_size = parse_index(value, where);
    else if (key == "max_epochs") t.max_epochs = parse_index(value, where);
    else if (key == "clip_norm") t.clip_norm = parse_double(value, where);
    else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_index(value, where));
    else if (key == "beta1") t.beta1 = parse_double(value, where);
    else if (key == "beta2") t.beta2 = parse_double(value, where);
    else if (key == "adam_eps") t.adam_eps = parse_double(value, where);
    else if (key == "patience") t.patience = parse_index(value, where);
    else if (key == "min_count") t.min_count = parse_index(value, where);
    else if (key == "attention") cfg.attn = attention_from_name(value);
    else if (key == "dual") cfg.dual = parse_bool(value, where);
    else throw ConfigError(where + "unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

FullConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string render_config(const FullConfig& cfg) {
  std::ostringstream os;
  const auto& h = cfg.hyper;
  const auto& t = cfg.train;
  os << "# architecture\n";
  os << "word_dim = " << h.word_dim << "\n";
  os << "char_dim = " << h.char_dim << "\n";
  os << "entity_type_dim = " << h.entity_type_dim << "\n";
  os << "cnn_filter_sizes = ";
  for (std::size_t i = 0; i < h.cnn_filter_sizes.size(); ++i)
    os << (i ? "," : "") << h.cnn_filter_sizes[i];
  os << "\n";
  os << "cnn_total_filters = " << h.cnn_total_filters << "\n";
  os << "encoder_hidden = " << h.encoder_hidden << "\n";
  os << "decoder_hidden = " << h.decoder_hidden << "\n";
  os << "heads = " << h.heads << "\n";
  os << "head_dim = " << h.head_dim << "\n";
  os << "dropout = " << h.dropout << "\n";
  os << "alpha = " << h.alpha << "\n";
  os << "attention = " << attention_name(cfg.attn) << "\n";
  os << "dual = " << (cfg.dual ? "true" : "false") << "\n";
  os << "# optimization\n";
  os << "learning_rate = " << t.learning_rate << "\n";
  os << "batch_size = " << t.batch_size << "\n";
  os << "max_epochs = " << t.max_epochs << "\n";
  os << "clip_norm = " << t.clip_norm << "\n";
  os << "seed = " << t.seed << "\n";
  os << "beta1 = " << t.beta1 << "\n";
  os << "beta2 = " << t.beta2 << "\n";
  os << "adam_eps = " << t.adam_eps << "\n";
  os << "patience = " << t.patience << "\n";
  os << "min_count = " << t.min_count << "\n";
  return os.str();
}

}  // namespace dpn
