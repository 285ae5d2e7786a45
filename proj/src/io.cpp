#include "more/io.hpp"

#include "more/error.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace more {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = pos + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::optional<double> parse_number(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

template <typename T>
T parse_integer(std::string_view text, const std::string& what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError(what + ": '" + std::string(text) + "' is not an integer");
  }
  return value;
}

double parse_real(std::string_view text, const std::string& what) {
  const auto v = parse_number(text);
  if (!v || !std::isfinite(*v)) {
    throw ValidationError(what + ": '" + std::string(text) + "' is not a finite number");
  }
  return *v;
}

ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("could not format number");
  return std::string(buf, ptr);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix parse_matrix_csv(std::string_view text, const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw LoadError(source + ": file is empty");
  std::size_t first = 0;
  {
    const auto cells = split(lines[0], ',');
    bool any_numeric = false;
    for (auto c : cells) any_numeric |= parse_number(c).has_value();
    if (!any_numeric) first = 1;
  }
  if (first >= lines.size()) throw LoadError(source + ": no data rows");
  const std::size_t cols = split(lines[first], ',').size();
  Matrix out(static_cast<Index>(lines.size() - first), static_cast<Index>(cols));
  for (std::size_t l = first; l < lines.size(); ++l) {
    const auto cells = split(lines[l], ',');
    if (cells.size() != cols) {
      throw LoadError(source + ": line " + std::to_string(l + 1) + " has " +
                      std::to_string(cells.size()) + " columns, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const auto v = parse_number(cells[c]);
      const std::string where = source + ": line " + std::to_string(l + 1) + ", column " +
                                std::to_string(c + 1);
      if (!v) throw LoadError(where + ": '" + std::string(cells[c]) + "' is not a number");
      if (!std::isfinite(*v)) throw LoadError(where + ": non-finite value");
      out(static_cast<Index>(l - first), static_cast<Index>(c)) = *v;
    }
  }
  return out;
}

Matrix read_matrix_csv(const fs::path& path) {
  return parse_matrix_csv(read_file(path), path.string());
}

std::string matrix_to_csv(const Matrix& values, const std::vector<std::string>& header) {
  std::string out;
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out += ',';
      out += header[i];
    }
    out += '\n';
  }
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(values(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_matrix_csv(const fs::path& path, const Matrix& values,
                      const std::vector<std::string>& header) {
  write_file_atomic(path, matrix_to_csv(values, header));
}

Dataset load_dataset(const fs::path& features, const fs::path& targets,
                     const std::optional<fs::path>& labels) {
  Dataset data;
  data.inputs = read_matrix_csv(features);
  data.targets = read_matrix_csv(targets);
  if (data.inputs.rows() != data.targets.rows()) {
    throw LoadError("features have " + std::to_string(data.inputs.rows()) + " rows but targets have " +
                    std::to_string(data.targets.rows()));
  }
  if (labels) {
    const std::string text = read_file(*labels);
    for (auto line : split_lines(text)) data.labels.emplace_back(trim(line));
    if (static_cast<Index>(data.labels.size()) != data.size()) {
      throw LoadError("labels have " + std::to_string(data.labels.size()) + " lines but features have " +
                      std::to_string(data.size()) + " rows");
    }
  }
  data.validate();
  return data;
}

std::string model_to_json(const MoreModel& model) {
  model.validate();
  ordered_json doc;
  doc["k"] = model.input_dim();
  doc["m"] = model.output_dim();
  doc["K"] = model.num_experts();
  ordered_json gate = ordered_json::array();
  for (Index j = 0; j < model.num_experts(); ++j) {
    ordered_json row = ordered_json::array();
    for (Index i = 0; i < model.input_dim(); ++i) row.push_back(model.gate.vectors(j, i));
    gate.push_back(std::move(row));
  }
  doc["gate"] = std::move(gate);
  ordered_json experts = ordered_json::array();
  for (const auto& e : model.experts) {
    ordered_json weights = ordered_json::array();
    for (Index r = 0; r < e.weights.rows(); ++r) {
      for (Index c = 0; c < e.weights.cols(); ++c) weights.push_back(e.weights(r, c));
    }
    ordered_json logvar = ordered_json::array();
    for (Index i = 0; i < e.log_variances.size(); ++i) logvar.push_back(e.log_variances(i));
    experts.push_back({{"weights", std::move(weights)}, {"log_variances", std::move(logvar)}});
  }
  doc["experts"] = std::move(experts);
  doc["format_version"] = kModelFormatVersion;
  return doc.dump() + "\n";
}

MoreModel model_from_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError(std::string("model: parse error: ") + e.what());
  }
  try {
    if (!doc.contains("format_version") || doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw LoadError("model: unsupported format_version (expected " +
                      std::to_string(kModelFormatVersion) + ")");
    }
    const auto k = doc.at("k").get<Index>();
    const auto m = doc.at("m").get<Index>();
    const auto K = doc.at("K").get<Index>();
    const auto& gate = doc.at("gate");
    const auto& experts = doc.at("experts");
    if (k < 1 || m < 1 || K < 1) throw LoadError("model: dimensions must be >= 1");
    if (static_cast<Index>(experts.size()) != K || static_cast<Index>(gate.size()) != K) {
      throw LoadError("model: integrity error: K=" + std::to_string(K) + " but file has " +
                      std::to_string(experts.size()) + " experts and " +
                      std::to_string(gate.size()) + " gate vectors");
    }
    MoreModel model = make_zero_model(K, k, m);
    for (Index j = 0; j < K; ++j) {
      const auto& row = gate.at(static_cast<std::size_t>(j));
      if (static_cast<Index>(row.size()) != k) {
        throw LoadError("model: integrity error: gate vector " + std::to_string(j) +
                        " has length " + std::to_string(row.size()));
      }
      for (Index i = 0; i < k; ++i) model.gate.vectors(j, i) = row.at(static_cast<std::size_t>(i)).get<double>();
      const auto& e = experts.at(static_cast<std::size_t>(j));
      const auto& w = e.at("weights");
      const auto& lv = e.at("log_variances");
      if (static_cast<Index>(w.size()) != m * k || static_cast<Index>(lv.size()) != m) {
        throw LoadError("model: integrity error: expert " + std::to_string(j) +
                        " has wrong parameter counts");
      }
      auto& params = model.experts[static_cast<std::size_t>(j)];
      for (Index r = 0; r < m; ++r) {
        for (Index c = 0; c < k; ++c) {
          params.weights(r, c) = w.at(static_cast<std::size_t>(r * k + c)).get<double>();
        }
        params.log_variances(r) = lv.at(static_cast<std::size_t>(r)).get<double>();
      }
    }
    model.validate();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("model: malformed document: ") + e.what());
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    throw LoadError(std::string("model: ") + e.what());
  }
}

void save_model(const MoreModel& model, const fs::path& path) {
  write_file_atomic(path, model_to_json(model));
}

MoreModel load_model(const fs::path& path) { return model_from_json(read_file(path)); }

std::string train_report_to_json(const TrainReport& report) {
  ordered_json doc;
  doc["initial_loglik"] = finite_or_null(report.initial_loglik);
  ordered_json trace = ordered_json::array();
  for (double v : report.loglik_trace) trace.push_back(finite_or_null(v));
  doc["loglik_trace"] = std::move(trace);
  doc["gate_updates_discarded"] = report.gate_updates_discarded;
  doc["expert_updates_discarded"] = report.expert_updates_discarded;
  doc["covariance_updates_discarded"] = report.covariance_updates_discarded;
  doc["converged"] = report.converged;
  doc["iterations_run"] = report.iterations_run;
  doc["starved_experts"] = report.starved_experts;
  doc["variance_floor_hits"] = report.variance_floor_hits;
  return doc.dump(2) + "\n";
}

std::string loglik_trace_csv(const TrainReport& report) {
  std::string out = "iteration,loglik\n0," + format_double(report.initial_loglik) + "\n";
  for (std::size_t i = 0; i < report.loglik_trace.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_double(report.loglik_trace[i]) + "\n";
  }
  return out;
}

std::string eval_report_to_json(const EvalReport& report) {
  ordered_json doc;
  doc["model_tag"] = report.model_tag;
  doc["mean_r2"] = finite_or_null(report.mean_r2);
  doc["undefined_outputs"] = report.undefined_outputs;
  doc["n_folds"] = report.fold_sizes.size();
  doc["fold_sizes"] = report.fold_sizes;
  ordered_json per_fold = ordered_json::array();
  for (double v : report.per_fold_mean_r2) per_fold.push_back(finite_or_null(v));
  doc["per_fold_mean_r2"] = std::move(per_fold);
  ordered_json per_output = ordered_json::array();
  for (Index v = 0; v < report.per_output_r2.size(); ++v) {
    per_output.push_back(finite_or_null(report.per_output_r2(v)));
  }
  doc["per_output_r2"] = std::move(per_output);
  return doc.dump(2) + "\n";
}

std::string eval_report_csv(const EvalReport& report) {
  std::string header = "model_tag,mean_r2";
  std::string row = report.model_tag + "," + format_double(report.mean_r2);
  for (std::size_t f = 0; f < report.per_fold_mean_r2.size(); ++f) {
    header += ",fold_" + std::to_string(f + 1);
    row += "," + format_double(report.per_fold_mean_r2[f]);
  }
  return header + "\n" + row + "\n";
}

std::string sweep_to_csv(const BicSweepResult& sweep) {
  std::string out = "K,d,loglik,bic,status\n";
  for (const auto& e : sweep.entries) {
    std::string status = e.ok ? "ok" : "failed";
    out += std::to_string(e.num_experts) + "," + std::to_string(e.num_params) + "," +
           (e.ok ? format_double(e.loglik) : "") + "," + (e.ok ? format_double(e.bic) : "") + "," +
           status + "\n";
  }
  return out;
}

std::string synth_truth_to_json(const SynthSpec& spec, const SynthResult& result) {
  ordered_json doc;
  doc["spec"] = {{"K", spec.num_experts},
                 {"k", spec.input_dim},
                 {"m", spec.output_dim},
                 {"N", spec.num_samples},
                 {"gate_separation", spec.gate_separation},
                 {"weight_scale", spec.weight_scale},
                 {"noise_sigma", spec.noise_sigma},
                 {"seed", spec.seed}};
  doc["model"] = ordered_json::parse(model_to_json(result.truth));
  doc["assignments"] = result.assignments;
  return doc.dump() + "\n";
}

void apply_config_text(std::string_view text, TrainConfig& config) {
  using Setter = std::function<void(std::string_view, const std::string&)>;
  const std::vector<std::pair<std::string, Setter>> setters = {
      {"num_experts", [&](auto v, auto& w) { config.num_experts = parse_integer<Index>(v, w); }},
      {"max_em_iterations", [&](auto v, auto& w) { config.max_em_iterations = parse_integer<int>(v, w); }},
      {"convergence_tol", [&](auto v, auto& w) { config.convergence_tol = parse_real(v, w); }},
      {"gate_learning_rate", [&](auto v, auto& w) { config.gate_learning_rate = parse_real(v, w); }},
      {"expert_learning_rate", [&](auto v, auto& w) { config.expert_learning_rate = parse_real(v, w); }},
      {"m_step_inner_iterations",
       [&](auto v, auto& w) { config.m_step_inner_iterations = parse_integer<int>(v, w); }},
      {"discard_threshold", [&](auto v, auto& w) { config.discard_threshold = parse_real(v, w); }},
      {"variance_floor", [&](auto v, auto& w) { config.variance_floor = parse_real(v, w); }},
      {"seed", [&](auto v, auto& w) { config.seed = parse_integer<std::uint64_t>(v, w); }},
      {"init_strategy", [&](auto v, auto&) { config.init_strategy = parse_init_strategy(std::string(v)); }},
      {"adaptive_learning_rate",
       [&](auto v, auto& w) {
         if (v == "true" || v == "1") {
           config.adaptive_learning_rate = true;
         } else if (v == "false" || v == "0") {
           config.adaptive_learning_rate = false;
         } else {
           throw ValidationError(w + ": expected true or false");
         }
       }},
      {"num_threads", [&](auto v, auto& w) { config.num_threads = parse_integer<int>(v, w); }},
  };

  const auto lines = split_lines(text);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    auto line = lines[l];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(l + 1);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValidationError(where + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    bool known = false;
    for (const auto& [name, set] : setters) {
      if (key == name) {
        set(value, where + " (" + name + ")");
        known = true;
        break;
      }
    }
    if (!known) throw ValidationError(where + ": unknown key '" + std::string(key) + "'");
  }
}

void apply_config_file(const fs::path& path, TrainConfig& config) {
  apply_config_text(read_file(path), config);
}

std::string config_to_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "num_experts = " << c.num_experts << "\n"
      << "max_em_iterations = " << c.max_em_iterations << "\n"
      << "convergence_tol = " << format_double(c.convergence_tol) << "\n"
      << "gate_learning_rate = " << format_double(c.gate_learning_rate) << "\n"
      << "expert_learning_rate = " << format_double(c.expert_learning_rate) << "\n"
      << "m_step_inner_iterations = " << c.m_step_inner_iterations << "\n"
      << "discard_threshold = " << format_double(c.discard_threshold) << "\n"
      << "variance_floor = " << format_double(c.variance_floor) << "\n"
      << "seed = " << c.seed << "\n"
      << "init_strategy = " << to_string(c.init_strategy) << "\n"
      << "adaptive_learning_rate = " << (c.adaptive_learning_rate ? "true" : "false") << "\n"
      << "num_threads = " << c.num_threads << "\n";
  return out.str();
}

}  // namespace more
