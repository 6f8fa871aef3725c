#include "arena/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "arena/config.hpp"
#include "arena/error.hpp"

namespace fs = std::filesystem;

namespace arena {

namespace {

const std::vector<std::string> kRowColumns = {"truth",  "epsilon",    "replication",     "recovered", "margin",
                                              "cycles_used", "winner", "final_posterior", "errors"};
const std::vector<std::string> kSummaryColumns = {"truth", "epsilon", "runs", "recovery_rate", "mean_margin"};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::string number(double v) { return std::isnan(v) ? std::string{} : format_double(v); }

std::string posterior_field(const Posterior& p) {
  std::string out;
  for (const auto& [id, v] : p) out += (out.empty() ? "" : ";") + id + "=" + format_double(v);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path);
}

// Reads a versioned CSV and checks the header. Returns data rows.
std::vector<std::vector<std::string>> read_table(const std::string& path, const std::vector<std::string>& columns) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArenaError(ErrorCode::SchemaError, path + ": cannot open file");
  std::string line;
  if (!std::getline(f, line)) throw ArenaError(ErrorCode::SchemaError, path + ": empty file");
  if (line.rfind("# schema=", 0) != 0) throw ArenaError(ErrorCode::SchemaError, path + ": missing '# schema=' line");
  if (line != kCsvSchema)
    throw ArenaError(ErrorCode::SchemaError, path + ": unsupported schema '" + line.substr(9) + "'");
  if (!std::getline(f, line)) throw ArenaError(ErrorCode::SchemaError, path + ": missing header row");
  const auto header = split_csv_line(line);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i >= header.size())
      throw ArenaError(ErrorCode::SchemaError, path + ": missing column '" + columns[i] + "'");
    if (header[i] != columns[i])
      throw ArenaError(ErrorCode::SchemaError,
                       path + ": column " + std::to_string(i + 1) + " is '" + header[i] + "', expected '" + columns[i] + "'");
  }
  if (header.size() > columns.size())
    throw ArenaError(ErrorCode::SchemaError, path + ": unexpected column '" + header[columns.size()] + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != columns.size())
      throw ArenaError(ErrorCode::SchemaError, path + ": line " + std::to_string(rows.size() + 3) + " has " +
                                                   std::to_string(fields.size()) + " fields, expected " +
                                                   std::to_string(columns.size()));
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw ArenaError(ErrorCode::SchemaError, path + ": no data rows");
  return rows;
}

double parse_number(const std::string& text, const std::string& path, const std::string& column, bool allow_empty) {
  if (text.empty() && allow_empty) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ArenaError(ErrorCode::SchemaError, path + ": column '" + column + "': bad value '" + text + "'");
}

int parse_int(const std::string& text, const std::string& path, const std::string& column) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ArenaError(ErrorCode::SchemaError, path + ": column '" + column + "': bad value '" + text + "'");
}

std::string slug(double epsilon) {
  std::string s = format_double(epsilon);
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

std::string dump(const Json& j) { return j.dump(1) + "\n"; }

void print_summary(const DebateTrace& trace, std::ostream& out) {
  for (const auto& c : trace.cycles) {
    out << "cycle " << c.cycle << ": pool " << c.pool_size << ", selected " << c.selected.id << " (EIG "
        << format_double(c.selected_eig.value) << " " << to_string(c.selected_eig.method) << "), posterior";
    for (const auto& [id, p] : c.posterior_after) out << " " << id << "=" << format_double(p);
    if (c.degenerate_evidence) out << " [degenerate evidence]";
    for (const auto& e : c.agent_errors) out << "\n  agent error: " << e;
    out << "\n";
  }
  out << "stop: " << trace.stop_reason << " after " << trace.cycles.size() << " cycle(s)\n";
  out << "verdict: winner " << trace.verdict.winner << ", truth " << trace.truth << ", margin "
      << format_double(trace.verdict.margin) << ", " << (trace.verdict.recovered ? "recovered" : "not recovered")
      << "\n";
}

StimulusSpace load_space(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ArenaError(ErrorCode::ConfigError, path + ": cannot open file");
  std::stringstream buf;
  buf << f.rdbuf();
  Json j;
  try {
    j = Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ArenaError(ErrorCode::ConfigError, path + ": parse error: " + e.what());
  }
  // Accept either a bare space object or a full config with a space section.
  if (j.is_object() && j.contains("space")) j = j["space"];
  StimulusSpace s;
  try {
    s = space_from_json(j, "space");
    s.check();
  } catch (const ArenaError& e) {
    throw ArenaError(ErrorCode::ConfigError, path + ": " + e.what());
  }
  return s;
}

}  // namespace

void write_rows_csv(const std::string& path, const std::vector<RecoveryRow>& rows) {
  std::string text = std::string(kCsvSchema) + "\n";
  for (std::size_t i = 0; i < kRowColumns.size(); ++i) text += (i ? "," : "") + kRowColumns[i];
  text += "\n";
  for (const auto& r : rows) {
    text += csv_field(r.truth) + "," + format_double(r.epsilon) + "," + std::to_string(r.replication) + "," +
            (r.recovered ? "1" : "0") + "," + number(r.margin) + "," + std::to_string(r.cycles_used) + "," +
            csv_field(r.winner) + "," + csv_field(posterior_field(r.final_posterior)) + "," + csv_field(r.error) + "\n";
  }
  write_text(path, text);
}

void write_summary_csv(const std::string& path, const std::vector<RecoveryCell>& cells) {
  std::string text = std::string(kCsvSchema) + "\n";
  for (std::size_t i = 0; i < kSummaryColumns.size(); ++i) text += (i ? "," : "") + kSummaryColumns[i];
  text += "\n";
  for (const auto& c : cells) {
    text += csv_field(c.truth) + "," + format_double(c.epsilon) + "," + std::to_string(c.runs) + "," +
            format_double(c.recovery_rate) + "," + number(c.mean_margin) + "\n";
  }
  write_text(path, text);
}

std::vector<RecoveryRow> read_rows_csv(const std::string& path) {
  std::vector<RecoveryRow> rows;
  for (const auto& f : read_table(path, kRowColumns)) {
    RecoveryRow r;
    r.truth = f[0];
    r.epsilon = parse_number(f[1], path, "epsilon", false);
    r.replication = parse_int(f[2], path, "replication");
    if (f[3] != "0" && f[3] != "1")
      throw ArenaError(ErrorCode::SchemaError, path + ": column 'recovered': bad value '" + f[3] + "'");
    r.recovered = f[3] == "1";
    r.margin = parse_number(f[4], path, "margin", true);
    r.cycles_used = parse_int(f[5], path, "cycles_used");
    r.winner = f[6];
    std::stringstream ss(f[7]);
    std::string part;
    while (std::getline(ss, part, ';')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos)
        throw ArenaError(ErrorCode::SchemaError, path + ": column 'final_posterior': bad entry '" + part + "'");
      r.final_posterior[part.substr(0, eq)] = parse_number(part.substr(eq + 1), path, "final_posterior", false);
    }
    r.error = f[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<RecoveryCell> read_summary_csv(const std::string& path) {
  std::vector<RecoveryCell> cells;
  for (const auto& f : read_table(path, kSummaryColumns)) {
    cells.push_back({f[0], parse_number(f[1], path, "epsilon", false), parse_int(f[2], path, "runs"),
                     parse_number(f[3], path, "recovery_rate", false), parse_number(f[4], path, "mean_margin", true)});
  }
  return cells;
}

int threads_from_env() {
  const char* v = std::getenv("THEORY_ARENA_THREADS");
  if (!v || !*v) return 1;
  try {
    std::size_t used = 0;
    const int n = std::stoi(v, &used);
    if (used == std::string(v).size() && n >= 0) return n;
  } catch (const std::exception&) {
  }
  throw ArenaError(ErrorCode::ConfigError, std::string("THEORY_ARENA_THREADS: expected a non-negative integer, got '") + v + "'");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-loop theory adjudication simulator", "theory_arena"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir = ".", space_path, rows_path;
  std::uint64_t seed = 0;
  int cycles = 0, reps = 0, budget = 0;
  std::vector<std::string> truths;
  std::vector<double> eps;

  auto* run = app.add_subcommand("run", "run one adjudication and write trace.json");
  run->add_option("--config", config_path, "config file")->required();
  auto* run_seed_opt = run->add_option("--seed", seed, "master seed override");
  auto* run_cycles_opt = run->add_option("--cycles", cycles, "cycle cap override");
  run->add_option("--out", out_dir, "output directory");

  auto* study = app.add_subcommand("study", "run the recovery study and write CSV tables");
  study->add_option("--config", config_path, "config file")->required();
  auto* truths_opt = study->add_option("--truths", truths, "ground-truth theory ids")->delimiter(',');
  auto* eps_opt = study->add_option("--eps", eps, "lapse rates")->delimiter(',');
  auto* reps_opt = study->add_option("--reps", reps, "replications per cell");
  auto* study_seed_opt = study->add_option("--seed", seed, "master seed override");
  auto* study_cycles_opt = study->add_option("--cycles", cycles, "cycle cap override");
  study->add_option("--out", out_dir, "output directory");

  auto* designs = app.add_subcommand("designs", "print the enumerated seed pool");
  designs->add_option("--space", space_path, "space or config file")->required();
  designs->add_option("--budget", budget, "number of designs")->required();

  auto* report = app.add_subcommand("report", "write per-truth plot series from a rows file");
  report->add_option("--rows", rows_path, "recovery_rows.csv")->required();
  report->add_option("--out", out_dir, "output directory");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (run->parsed()) {
      ArenaConfig cfg = load_config(config_path);
      if (*run_seed_opt) cfg.run.master_seed = seed;
      if (*run_cycles_opt) cfg.run.cycles = cycles;
      cfg.run.check();
      const DebateTrace trace = run_adjudication(cfg.run);
      ensure_dir(out_dir);
      write_text((fs::path(out_dir) / "trace.json").string(), dump(to_json(trace)));
      print_summary(trace, out);
      return kExitOk;
    }
    if (study->parsed()) {
      ArenaConfig cfg = load_config(config_path);
      if (*study_seed_opt) cfg.run.master_seed = seed;
      if (*study_cycles_opt) cfg.run.cycles = cycles;
      if (*truths_opt) cfg.study.truths = truths;
      if (*eps_opt) cfg.study.epsilons = eps;
      if (*reps_opt) cfg.study.replications = reps;
      cfg.run.check();
      const int threads = threads_from_env();
      std::vector<DebateTrace> traces;
      const RecoveryTable table =
          run_recovery_study(cfg.study, cfg.run, cfg.fiducials, cfg.run.master_seed, threads, &traces);
      ensure_dir(out_dir);
      ensure_dir((fs::path(out_dir) / "traces").string());
      write_rows_csv((fs::path(out_dir) / "recovery_rows.csv").string(), table.rows);
      write_summary_csv((fs::path(out_dir) / "recovery_summary.csv").string(), table.cells);
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        if (!r.error.empty()) continue;
        const std::string name = r.truth + "_eps" + slug(r.epsilon) + "_rep" + std::to_string(r.replication) + ".json";
        write_text((fs::path(out_dir) / "traces" / name).string(), dump(to_json(traces[i])));
      }
      for (const auto& c : table.cells) {
        out << c.truth << " eps=" << format_double(c.epsilon) << " runs=" << c.runs
            << " recovery_rate=" << format_double(c.recovery_rate) << " mean_margin=" << number(c.mean_margin) << "\n";
      }
      for (const auto& r : table.rows)
        if (!r.error.empty()) out << "error: " << r.truth << " eps=" << format_double(r.epsilon) << " rep=" << r.replication << ": " << r.error << "\n";
      return kExitOk;
    }
    if (designs->parsed()) {
      const StimulusSpace space = load_space(space_path);
      for (const auto& d : enumerate_designs(space, budget)) out << to_json(d).dump() << "\n";
      return kExitOk;
    }
    if (report->parsed()) {
      const auto rows = read_rows_csv(rows_path);
      const auto cells = aggregate_rows(rows);
      ensure_dir(out_dir);
      std::vector<std::string> order;
      for (const auto& c : cells)
        if (std::find(order.begin(), order.end(), c.truth) == order.end()) order.push_back(c.truth);
      for (const auto& truth : order) {
        std::string a = std::string(kCsvSchema) + "\nepsilon,recovery_rate\n";
        std::string b = std::string(kCsvSchema) + "\nepsilon,mean_margin\n";
        for (const auto& c : cells) {
          if (c.truth != truth) continue;
          a += format_double(c.epsilon) + "," + format_double(c.recovery_rate) + "\n";
          b += format_double(c.epsilon) + "," + number(c.mean_margin) + "\n";
        }
        write_text((fs::path(out_dir) / ("fig1a_" + truth + ".csv")).string(), a);
        write_text((fs::path(out_dir) / ("fig1b_" + truth + ".csv")).string(), b);
        out << "wrote fig1a_" << truth << ".csv, fig1b_" << truth << ".csv\n";
      }
      return kExitOk;
    }
  } catch (const ArenaError& e) {
    err << "error: " << e.what() << "\n";
    const bool config = e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::SchemaError ||
                        e.code() == ErrorCode::InvalidBudget;
    return config ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace arena
