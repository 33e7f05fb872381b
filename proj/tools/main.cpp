#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config.hpp"
#include "fowlerlab/fowlerlab.h"
#include "json.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitPass = 0, kExitVerdict = 1, kExitUsage = 2;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Library failure inside a stage; the stage is reported as an error.
struct StageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ok(fl_status s, const char* what) {
  if (s != FL_OK) throw StageError(std::string(what) + ": " + fl_status_name(s) + ": " + fl_last_error());
}

std::string take(char* s) {
  std::string out = s ? s : "";
  fl_free_string(s);
  return out;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw IoError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string num_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const std::vector<std::string> kKnownKeys = {
    "run.n", "run.stages", "run.out",
    "potential.family", "potential.q", "potential.delta", "potential.kInf", "potential.amp", "potential.eta",
    "potential.gamma", "potential.q2", "potential.delta2", "potential.k2Inf", "potential.k2Amp", "potential.k2Eta",
    "potential.k2Gamma",
    "check.ny", "check.ns", "check.sMax",
    "shoot.alphas", "shoot.rMax", "shoot.tol", "shoot.pointsPerDecade",
    "separation.alphas", "separation.rMin", "separation.rMax", "separation.gapFloor", "separation.pointsPerDecade",
    "separation.tol", "separation.window0", "separation.halvingDelta", "separation.curves",
    "expand.a", "expand.b", "expand.tau", "expand.theta",
    "fit.alpha", "fit.r1", "fit.r2", "fit.theta", "fit.window0",
    "evolve.alpha", "evolve.scale", "evolve.T", "evolve.Rmax", "evolve.pointsPerDecade", "evolve.rMin", "evolve.outer",
    "evolve.dtMax", "evolve.sampleEvery",
    "experiment.kinds", "experiment.alpha", "experiment.d", "experiment.T", "experiment.Rmax", "experiment.weakRmax",
    "experiment.pointsPerDecade", "experiment.k",
};

const std::vector<std::string> kPipeline = {"check", "exponents", "shoot", "separation", "expand", "fit", "evolve",
                                            "experiment"};
const std::vector<std::string> kDefaultRun = {"check", "exponents", "shoot", "separation", "expand", "experiment"};

class Pipeline {
 public:
  Pipeline(cli::Config cfg, fs::path out, std::vector<std::string> overrides)
      : cfg_(std::move(cfg)), out_(std::move(out)), overrides_(std::move(overrides)) {}

  ~Pipeline() { fl_potential_free(pot_); }

  int run(std::vector<std::string> stages) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec || !fs::is_directory(out_)) throw IoError("cannot create output directory " + out_.string());
    n_ = cfg_.integer("run.n", 13);
    if (n_ < 3) throw cli::ConfigError("run.n: dimension must be at least 3");

    bool needsCheck = std::any_of(stages.begin(), stages.end(), [](const std::string& s) { return s != "exponents"; });
    if (needsCheck && std::find(stages.begin(), stages.end(), "check") == stages.end()) stages.push_back("check");
    std::vector<std::string> ordered;
    for (const auto& s : kPipeline)
      if (std::find(stages.begin(), stages.end(), s) != stages.end()) ordered.push_back(s);

    try {
      ok(fl_potential_from_json(potential_json().dump().c_str(), &pot_), "potential");
    } catch (const StageError& e) {
      throw cli::ConfigError(std::string("[potential] ") + e.what());
    }

    for (const auto& s : ordered) run_stage(s);
    write_manifest();
    return failed_ ? kExitVerdict : kExitPass;
  }

 private:
  json potential_json() const {
    json k = {{"kInf", cfg_.number("potential.kInf", 1.0)},
              {"amp", cfg_.number("potential.amp", 0.0)},
              {"eta", cfg_.number("potential.eta", 0.0)},
              {"gamma", cfg_.number("potential.gamma", 1.0)}};
    json j = {{"family", cfg_.string("potential.family", "PurePower")},
              {"q", cfg_.number("potential.q", 4.0)},
              {"delta", cfg_.number("potential.delta", 0.0)},
              {"k", k}};
    if (cfg_.has("potential.q2") || j["family"] == "TwoPower" || j["family"] == "two_power") {
      j["q2"] = cfg_.number("potential.q2", 0.0);
      j["delta2"] = cfg_.number("potential.delta2", 0.0);
      j["k2"] = {{"kInf", cfg_.number("potential.k2Inf", 1.0)},
                 {"amp", cfg_.number("potential.k2Amp", 0.0)},
                 {"eta", cfg_.number("potential.k2Eta", 0.0)},
                 {"gamma", cfg_.number("potential.k2Gamma", 1.0)}};
    }
    return j;
  }

  void artifact(const std::string& name, const std::string& kind, const std::string& content) {
    fs::path p = out_ / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write " + p.string());
    f << content;
    if (!f) throw IoError("write failed for " + p.string());
    artifacts_.push_back({{"path", name}, {"kind", kind}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
    current_["artifacts"].push_back(name);
  }

  void run_stage(const std::string& name) {
    current_ = {{"stage", name}, {"artifacts", json::array()}};
    if (name != "check" && name != "exponents" && !failedHypothesis_.empty()) {
      current_["status"] = "skipped (hypothesis " + failedHypothesis_ + " failed)";
    } else if (name == "exponents" && !failedHypothesis_.empty()) {
      current_["status"] = "skipped (hypothesis " + failedHypothesis_ + " failed)";
    } else {
      try {
        bool pass = true;
        if (name == "check") pass = stage_check();
        else if (name == "exponents") stage_exponents();
        else if (name == "shoot") pass = stage_shoot();
        else if (name == "separation") pass = stage_separation();
        else if (name == "expand") stage_expand();
        else if (name == "fit") stage_fit();
        else if (name == "evolve") stage_evolve();
        else if (name == "experiment") pass = stage_experiment();
        if (!current_.contains("status")) current_["status"] = pass ? "pass" : "fail";
        if (!pass) failed_ = true;
      } catch (const StageError& e) {
        current_["status"] = "error";
        current_["error"] = e.what();
        failed_ = true;
      }
    }
    std::cerr << name << ": " << current_["status"].get<std::string>() << '\n';
    stages_.push_back(current_);
  }

  json exponents() {
    char* s = nullptr;
    ok(fl_exponents(pot_, n_, &s), "exponents");
    return json::parse(take(s));
  }

  bool stage_check() {
    json lat = {{"ny", cfg_.integer("check.ny", 200)},
                {"ns", cfg_.integer("check.ns", 200)},
                {"sMax", cfg_.number("check.sMax", 12.0)}};
    char* s = nullptr;
    int all = 0;
    ok(fl_check_hypotheses(pot_, n_, lat.dump().c_str(), &s, &all), "check");
    json rep = json::parse(take(s));
    artifact("hypotheses.json", "hypotheses", rep.dump(2) + "\n");
    for (const auto& it : rep["items"])
      if (it["verdict"] == "fail") {
        failedHypothesis_ = it["name"].get<std::string>();
        break;
      }
    current_["failed"] = failedHypothesis_;
    return all != 0;
  }

  void stage_exponents() { artifact("exponents.json", "exponents", exponents().dump(2) + "\n"); }

  bool stage_shoot() {
    json opts = {{"tol", cfg_.number("shoot.tol", 1e-11)},
                 {"pointsPerDecade", cfg_.integer("shoot.pointsPerDecade", 32)}};
    double rMax = cfg_.number("shoot.rMax", 1e3);
    json decays = json::array();
    for (double a : cfg_.numbers("shoot.alphas", {0.5, 1.0, 2.0})) {
      fl_ground_state* gs = nullptr;
      ok(fl_shoot(pot_, n_, a, rMax, opts.dump().c_str(), &gs), "shoot");
      char* csv = nullptr;
      fl_decay d;
      char* note = nullptr;
      fl_status s1 = fl_ground_state_csv(gs, &csv);
      fl_status s2 = s1 == FL_OK ? fl_classify_decay(gs, &d, &note) : s1;
      fl_ground_state_free(gs);
      std::string text = take(csv);
      std::string noteText = take(note);
      ok(s1, "profile csv");
      ok(s2, "classify decay");
      artifact("gs_alpha_" + num_label(a) + ".csv", "profile", text);
      static const char* names[] = {"fast", "slow", "crossed zero", "inconclusive"};
      decays.push_back({{"alpha", a}, {"decay", names[d]}, {"note", noteText}});
    }
    current_["decay"] = decays;
    return true;
  }

  bool stage_separation() {
    std::vector<double> alphas = cfg_.numbers("separation.alphas", {0.5, 1.0, 2.0, 4.0});
    json opts = {{"rMin", cfg_.number("separation.rMin", 1e-3)},
                 {"rMax", cfg_.number("separation.rMax", 100.0)},
                 {"gapFloor", cfg_.number("separation.gapFloor", 1e-10)},
                 {"pointsPerDecade", cfg_.integer("separation.pointsPerDecade", 32)},
                 {"tol", cfg_.number("separation.tol", 1e-11)},
                 {"window0", cfg_.number("separation.window0", 20.0)},
                 {"curves", cfg_.boolean("separation.curves", true)}};
    if (cfg_.has("separation.halvingDelta")) opts["halvingDelta"] = cfg_.number("separation.halvingDelta", 0.0);
    char* s = nullptr;
    int pass = 0;
    ok(fl_separation(pot_, n_, alphas.data(), alphas.size(), opts.dump().c_str(), &s, &pass), "separation");
    artifact("separation.json", "separation", json::parse(take(s)).dump(2) + "\n");
    return pass != 0;
  }

  void stage_expand() {
    char* s = nullptr;
    ok(fl_fowler_expansion(pot_, n_, cfg_.number("expand.a", 1.0), cfg_.number("expand.b", 0.0),
                           cfg_.number("expand.tau", 0.0), cfg_.number("expand.theta", 0.0), &s),
       "expand");
    artifact("expansion.json", "expansion", json::parse(take(s)).dump(2) + "\n");
  }

  void stage_fit() {
    json pot = potential_json();
    double a = cfg_.number("fit.alpha", 1.0);
    double q = pot["q"], delta = pot["delta"];
    double len = std::max(1.0, std::pow(a, -(q - 2.0) / (2.0 + delta)));
    double r1 = cfg_.number("fit.r1", cfg_.number("fit.window0", 20.0) * len);
    double r2 = cfg_.number("fit.r2", 10.0 * r1);
    fl_ground_state* gs = nullptr;
    ok(fl_shoot(pot_, n_, a, r2 * 1.01, "{\"tol\": 1e-11}", &gs), "shoot");
    double A = 0, B = 0, res = 0;
    fl_status st = fl_fit_tail(gs, r1, r2, cfg_.number("fit.theta", 0.0), &A, &B, &res);
    char* s = nullptr;
    if (st == FL_OK) st = fl_ground_state_json(gs, &s);
    fl_ground_state_free(gs);
    ok(st, "fit");
    json j = {{"alpha", a}, {"r1", r1}, {"r2", r2}, {"A", A}, {"B", B}, {"residual", res}};
    j["groundState"] = json::parse(take(s));
    artifact("fit.json", "fit", j.dump(2) + "\n");
  }

  json grid(const std::string& table, double defaultRmax) const {
    return {{"Rmax", cfg_.number(table + ".Rmax", defaultRmax)},
            {"pointsPerDecade", cfg_.integer(table + ".pointsPerDecade", 48)},
            {"rMin", cfg_.number(table + ".rMin", 1e-3)}};
  }

  void stage_evolve() {
    fl_field* phi = nullptr;
    ok(fl_field_from_profile(pot_, n_, cfg_.number("evolve.alpha", 1.0), grid("evolve", 1e3).dump().c_str(), &phi),
       "profile");
    std::vector<double> r(fl_field_size(phi)), u(r.size());
    fl_field_values(phi, r.data(), u.data(), r.size());
    fl_field_free(phi);
    double scale = cfg_.number("evolve.scale", 1.0);
    for (double& v : u) v *= scale;
    ok(fl_field_create(r.data(), u.data(), r.size(), &phi), "initial data");
    json scheme = {{"outer", cfg_.string("evolve.outer", "robin")},
                   {"dtMax", cfg_.number("evolve.dtMax", 0.01)},
                   {"sampleEvery", cfg_.number("evolve.sampleEvery", 0.1)}};
    fl_field* fin = nullptr;
    char* trace = nullptr;
    fl_termination term;
    fl_status st = fl_evolve(pot_, n_, phi, cfg_.number("evolve.T", 1.0), scheme.dump().c_str(), &fin, &trace, &term);
    fl_field_free(phi);
    ok(st, "evolve");
    char* csv = nullptr;
    st = fl_field_csv(fin, &csv);
    fl_field_free(fin);
    ok(st, "field csv");
    static const char* names[] = {"completed", "blowup", "steady"};
    current_["termination"] = names[term];
    artifact("evolve_trace.csv", "trace", take(trace));
    artifact("evolve_final.csv", "field", take(csv));
  }

  bool stage_experiment() {
    json ex = exponents();
    if (ex["regime"] == "focus") {
      current_["status"] = "skipped (focus regime: no ordered barriers)";
      return true;
    }
    bool pass = true;
    double alpha = cfg_.number("experiment.alpha", 1.0), T = cfg_.number("experiment.T", 10.0);
    for (const auto& kind : cfg_.strings("experiment.kinds", {"stability", "weak"})) {
      if (kind == "stability") {
        json p = {{"alpha", alpha}, {"d", cfg_.number("experiment.d", 0.5)}, {"T", T},
                  {"grid", grid("experiment", 1e3)}};
        char* s = nullptr;
        int ps = 0;
        ok(fl_stability_experiment(pot_, n_, p.dump().c_str(), &s, nullptr, &ps), "stability");
        json r = json::parse(take(s));
        std::ostringstream csv;
        csv.precision(17);
        csv << "t,distance,bound\n";
        for (size_t i = 0; i < r["times"].size(); ++i)
          csv << r["times"][i].get<double>() << ',' << r["distances"][i].get<double>() << ','
              << r["bound"].get<double>() << '\n';
        artifact("stability_trace.csv", "trace", csv.str());
        artifact("stability.json", "experiment", r.dump(2) + "\n");
        pass = pass && ps;
      } else if (kind == "weak") {
        json g = grid("experiment", 100.0);
        g["Rmax"] = cfg_.number("experiment.weakRmax", 100.0);
        json p = {{"alpha", alpha}, {"T", T}, {"k", cfg_.integer("experiment.k", 1)}, {"grid", g}};
        char* s = nullptr;
        int ps = 0;
        ok(fl_weak_asymptotic_experiment(pot_, n_, p.dump().c_str(), &s, nullptr, nullptr, &ps), "weak");
        json r = json::parse(take(s));
        std::ostringstream csv;
        csv.precision(17);
        csv << "t,gap\n";
        for (size_t i = 0; i < r["times"].size(); ++i)
          csv << r["times"][i].get<double>() << ',' << r["gaps"][i].get<double>() << '\n';
        artifact("weak_trace.csv", "trace", csv.str());
        artifact("weak.json", "experiment", r.dump(2) + "\n");
        pass = pass && ps;
      } else {
        throw cli::ConfigError("experiment.kinds: unknown experiment '" + kind + "'");
      }
    }
    return pass;
  }

  void write_manifest() {
    std::string input = cfg_.raw();
    for (const auto& o : overrides_) input += "\n--override " + o;
    json m = {{"tool", "fowlerlab"},
              {"version", fl_version()},
              {"inputSha256", sha256_hex(input)},
              {"overrides", overrides_},
              {"n", n_},
              {"potential", potential_json()},
              {"stages", stages_},
              {"artifacts", artifacts_},
              {"exitStatus", failed_ ? kExitVerdict : kExitPass}};
    std::ofstream f(out_ / "manifest.json", std::ios::binary);
    if (!f) throw IoError("cannot write manifest");
    f << m.dump(2) << '\n';
  }

  cli::Config cfg_;
  fs::path out_;
  std::vector<std::string> overrides_;
  fl_potential* pot_ = nullptr;
  int n_ = 13;
  std::string failedHypothesis_;
  bool failed_ = false;
  json current_;
  json stages_ = json::array();
  json artifacts_ = json::array();
};

// ---- report ----

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> cols;
  std::vector<double> col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return cols[i];
    return {};
  }
};

Csv parse_csv(const std::string& text) {
  Csv c;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return c;
  std::stringstream hs(line);
  for (std::string h; std::getline(hs, h, ',');) c.header.push_back(h);
  c.cols.resize(c.header.size());
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (size_t i = 0; i < c.header.size() && std::getline(ls, cell, ','); ++i)
      c.cols[i].push_back(std::strtod(cell.c_str(), nullptr));
  }
  return c;
}

std::string fmt(const json& v) {
  if (v.is_number()) return num_label(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "-";
  return v.dump();
}

int emit_report(const fs::path& manifestPath) {
  fs::path dir = manifestPath.parent_path();
  json m = json::parse(read_file(manifestPath));
  std::ostringstream md;
  std::vector<std::string> missing;
  std::vector<std::string> plots;

  auto load = [&](const json& a) -> std::string {
    fs::path p = dir / a["path"].get<std::string>();
    if (!fs::exists(p)) {
      missing.push_back(a["path"]);
      return "";
    }
    return read_file(p);
  };
  auto plot = [&](const std::string& name, const cli::PlotSpec& spec, const std::vector<cli::Series>& s) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw IoError("cannot write " + name);
    f << cli::line_plot(spec, s);
    plots.push_back(name);
  };

  if (m.contains("stages") && !m["stages"].empty()) {
    md << "# Run summary\n\n";
    if (m.contains("potential")) md << "Potential: `" << m["potential"].dump() << "`, n = " << m.value("n", 0) << "\n\n";
    md << "| stage | status |\n|---|---|\n";
    for (const auto& s : m["stages"]) md << "| " << s["stage"].get<std::string>() << " | " << fmt(s["status"]) << " |\n";
    md << '\n';
  }

  std::vector<cli::Series> profiles;
  json artifacts = m.value("artifacts", json::array());
  for (const auto& a : artifacts) {
    std::string kind = a.value("kind", ""), path = a.value("path", "");
    std::string text = load(a);
    if (text.empty()) continue;
    if (kind == "profile") {
      Csv c = parse_csv(text);
      profiles.push_back({path, c.col("r"), c.col("U")});
    } else if (kind == "hypotheses") {
      json h = json::parse(text);
      md << "## Hypotheses\n\n| item | verdict | note |\n|---|---|---|\n";
      for (const auto& it : h["items"])
        md << "| " << fmt(it["name"]) << " | " << fmt(it["verdict"]) << " | " << fmt(it["note"]) << " |\n";
      md << '\n';
    } else if (kind == "exponents") {
      json e = json::parse(text);
      md << "## Exponents\n\n| quantity | value |\n|---|---|\n";
      for (const char* k : {"l_s", "m_s", "A", "B", "P1plus", "lambda1", "lambda2", "lambdaImag", "regime",
                            "sigmaStarPaperFormula", "sigmaStarUpper"})
        if (e.contains(k)) md << "| " << k << " | " << fmt(e[k]) << " |\n";
      md << '\n';
    } else if (kind == "separation") {
      json s = json::parse(text);
      md << "## Separation\n\n| check | verdict | violations |\n|---|---|---|\n";
      for (const char* k : {"ordering", "singularMajorant", "coefficientMonotonicity", "distanceHalving"})
        if (s.contains(k)) md << "| " << k << " | " << fmt(s[k]["verdict"]) << " | " << fmt(s[k]["violations"]) << " |\n";
      for (const auto& b : s.value("phaseBounds", json::array()))
        md << "| phase bounds, alpha " << fmt(b["alpha"]) << " | " << fmt(b["verdict"]) << " | "
           << fmt(b["violations"]) << " |\n";
      md << '\n';
      std::vector<cli::Series> gaps;
      for (const auto& c : s.value("curves", json::array())) {
        cli::Series g{"alpha " + fmt(c["alphaLow"]) + " / " + fmt(c["alphaHigh"]), c["r"], c["gap"]};
        gaps.push_back(g);
      }
      if (!gaps.empty()) plot("gap_vs_r.svg", {"Gap between consecutive ground states", "r", "U(r, high) - U(r, low)", true, true}, gaps);
    } else if (kind == "experiment") {
      json e = json::parse(text);
      md << "## Experiment " << path << "\n\n| quantity | value |\n|---|---|\n";
      for (auto it = e.begin(); it != e.end(); ++it)
        if (!it.value().is_array() && !it.value().is_object()) md << "| " << it.key() << " | " << fmt(it.value()) << " |\n";
      md << '\n';
    } else if (kind == "trace") {
      Csv c = parse_csv(text);
      if (path == "stability_trace.csv") {
        plot("sandwich.svg", {"Weighted distance to the ground state", "t", "distance", false, false},
             {{"distance", c.col("t"), c.col("distance")}, {"bound", c.col("t"), c.col("bound"), true}});
      } else if (path == "weak_trace.csv") {
        plot("norm_decay.svg", {"Gap between the perturbed evolutions", "t", "gap norm", false, true},
             {{"gap", c.col("t"), c.col("gap")}});
      } else {
        std::vector<cli::Series> s{{"max u", c.col("t"), c.col("maxU")}};
        for (const auto& h : c.header)
          if (h.rfind("norm", 0) == 0) s.push_back({h, c.col("t"), c.col(h)});
        plot(fs::path(path).stem().string() + ".svg", {"Evolution trace", "t", "value", false, false}, s);
      }
    }
  }
  if (!profiles.empty()) plot("profiles.svg", {"Ground state profiles", "r", "U", true, true}, profiles);
  if (!plots.empty()) {
    md << "## Plots\n\n";
    for (const auto& p : plots) md << "- " << p << "\n";
    md << '\n';
  }
  if (!missing.empty()) {
    md << "## Missing artifacts\n\n";
    for (const auto& p : missing) md << "- " << p << "\n";
  }
  std::ofstream f(dir / "summary.md", std::ios::binary);
  if (!f) throw IoError("cannot write summary.md");
  f << md.str();
  std::cout << md.str();
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fowlerlab: radial ground states, separation checks and parabolic experiments"};
  app.require_subcommand(1);
  std::string configPath, outDir;
  std::vector<std::string> overrides;
  std::string manifestPath;

  std::vector<std::pair<std::string, std::string>> commands = {
      {"run", "run the stages listed in run.stages"},
      {"exponents", "derive the exponent table"},
      {"check", "check the structural hypotheses"},
      {"shoot", "shoot ground states for shoot.alphas"},
      {"separation", "ordering, phase bound and coefficient checks"},
      {"expand", "Fowler expansion of the tail"},
      {"fit", "fit the tail coefficients of one ground state"},
      {"evolve", "evolve a scaled ground state"},
      {"experiment", "stability and weak asymptotic experiments"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", configPath, "configuration file");
    sub->add_option("--out", outDir, "output directory");
    sub->add_option("--override", overrides, "table.key=value, repeatable");
  }
  CLI::App* rep = app.add_subcommand("report", "render a summary and SVG plots from a manifest");
  rep->add_option("--out", outDir, "directory holding manifest.json");
  rep->add_option("manifest", manifestPath, "manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (rep->parsed()) {
      fs::path p = !manifestPath.empty() ? fs::path(manifestPath) : fs::path(outDir.empty() ? "." : outDir) / "manifest.json";
      return emit_report(p);
    }
    cli::Config cfg = configPath.empty() ? cli::Config::parse("", "defaults") : cli::Config::load(configPath);
    for (const auto& o : overrides) cfg.apply_override(o);
    cfg.check_keys(kKnownKeys);
    std::string out = !outDir.empty() ? outDir : cfg.string("run.out", "fowlerlab-out");
    std::string name = app.get_subcommands().front()->get_name();
    std::vector<std::string> stages = name == "run" ? cfg.strings("run.stages", kDefaultRun) : std::vector<std::string>{name};
    for (const auto& s : stages)
      if (std::find(kPipeline.begin(), kPipeline.end(), s) == kPipeline.end())
        throw cli::ConfigError("run.stages: unknown stage '" + s + "'");
    Pipeline pipeline(std::move(cfg), out, overrides);
    return pipeline.run(stages);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "malformed input: " << e.what() << '\n';
    return kExitUsage;
  }
}
