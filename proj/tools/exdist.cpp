#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "exdist/experiments.hpp"

namespace fs = std::filesystem;
namespace ex = exdist::experiments;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kInvariantBreach = 3;

// Line of the key path "a.b.c" in the config text, found by searching for
// each quoted component after the previous one.
int line_of(const std::string& text, const std::string& key_path) {
  std::size_t pos = 0, found = std::string::npos;
  std::size_t start = 0;
  while (start <= key_path.size()) {
    const std::size_t dot = key_path.find('.', start);
    const std::string part = key_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    const std::size_t at = text.find("\"" + part + "\"", pos);
    if (at == std::string::npos) break;
    found = pos = at;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (found == std::string::npos) return 1;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(found), '\n'));
}

int config_error(const std::string& source, int line, const std::string& msg) {
  std::cerr << source << ':' << line << ": error: " << msg << '\n';
  return kConfigError;
}

int run(const std::string& what, const std::optional<std::uint64_t>& seed, const std::string& out_dir,
        const std::optional<double>& tol) {
  std::string text, source;
  fs::path base;
  if (fs::is_regular_file(what)) {
    source = what;
    base = fs::path(what).parent_path();
    try {
      text = exdist::io::read_file(what);
    } catch (const std::exception& e) {
      return config_error(source, 1, e.what());
    }
  } else if (const auto j = ex::find_config(what)) {
    source = "catalog:" + what;
    text = j->dump(2);
  } else {
    return config_error(what, 1, "no such config file or bundled experiment");
  }

  ex::Config cfg;
  try {
    cfg = ex::Config::from_json(json::parse(text), base);
    if (seed) cfg.seed = *seed;
    if (tol) {
      if (!(*tol > 0.0 && *tol < 1.0)) return config_error(source, 1, "--tol must lie in (0, 1)");
      cfg.tol = *tol;
    }
  } catch (const json::parse_error& e) {
    return config_error(source, 1, e.what());
  } catch (const ex::ConfigError& e) {
    return config_error(source, line_of(text, e.path()), e.what());
  }

  const fs::path dir = out_dir.empty() ? fs::path("out") / cfg.name : fs::path(out_dir);
  ex::Outcome outcome;
  try {
    outcome = ex::run(cfg);
  } catch (const ex::ConfigError& e) {
    return config_error(source, line_of(text, e.path()), e.what());
  } catch (const exdist::ConsistencyError& e) {
    std::cerr << "invariant breach: " << e.what() << '\n';
    return kInvariantBreach;
  }
  const bool breach = !outcome.breaches.empty();
  const json summary = outcome.results["result"].value("checks", json::array());
  ex::write(std::move(outcome), dir);
  std::cout << "wrote " << (dir / "results.json").string() << '\n';
  for (const auto& c : summary)
    std::cout << (c.at("pass").get<bool>() ? "  pass  " : "  FAIL  ") << c.at("name").get<std::string>() << '\n';
  if (breach) {
    std::cerr << "invariant breach recorded in results.json\n";
    return kInvariantBreach;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extremal distance experiments: discrete modulus, coverings, distortion, quasihyperbolic geometry"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run a config file or a bundled experiment by name");
  std::string target, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  run_cmd->add_option("config", target, "Config path or bundled name")->required();
  run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_option("--out", out_dir, "Output directory (default out/<name>)");
  run_cmd->add_option("--tol", tol, "Override the solver tolerance");

  auto* list_cmd = app.add_subcommand("list", "List the bundled experiments");
  bool as_json = false;
  list_cmd->add_flag("--json", as_json, "Print the full configs as JSON");

  auto* show_cmd = app.add_subcommand("show", "Print a bundled config");
  std::string show_name;
  show_cmd->add_option("name", show_name, "Bundled name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (*list_cmd) {
    if (as_json) {
      json all = json::array();
      for (const auto& c : ex::catalog()) all.push_back(c);
      std::cout << all.dump(2) << '\n';
      return 0;
    }
    for (const auto& c : ex::catalog())
      std::printf("%-22s %-16s %s\n", c.at("name").get<std::string>().c_str(), c.at("kind").get<std::string>().c_str(),
                  c.at("description").get<std::string>().c_str());
    return 0;
  }
  if (*show_cmd) {
    const auto j = ex::find_config(show_name);
    if (!j) return config_error(show_name, 1, "no bundled experiment with this name");
    std::cout << j->dump(2) << '\n';
    return 0;
  }
  return run(target, seed, out_dir, tol);
}
