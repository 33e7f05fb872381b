#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "fowlerlab/fowlerlab.h"
#include "json.hpp"

using nlohmann::json;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  fl_free_string(s);
  return out;
}

fl_potential* pure_power(double q) {
  fl_potential* p = nullptr;
  std::string spec = R"({"family": "PurePower", "q": )" + std::to_string(q) + "}";
  REQUIRE(fl_potential_from_json(spec.c_str(), &p) == FL_OK);
  return p;
}

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("version and status names") {
  CHECK(std::string(fl_version()).size() > 0);
  CHECK(std::string(fl_status_name(FL_OK)) == "ok");
  CHECK(std::string(fl_status_name(FL_ERR_NOT_FOUND)) == "not found");
}

TEST_CASE("potential handles") {
  fl_potential* p = pure_power(4.0);
  double v = 0, du = 0;
  CHECK(fl_potential_f(p, 2.0, 1.0, &v, &du) == FL_OK);
  CHECK(v == doctest::Approx(8.0));
  CHECK(du == doctest::Approx(12.0));
  char* js = nullptr;
  CHECK(fl_potential_to_json(p, &js) == FL_OK);
  CHECK(json::parse(take(js))["family"] == "PurePower");

  fl_potential* sup = nullptr;
  CHECK(fl_potential_perturbed(p, 1, 1, 13, &sup) == FL_OK);
  double g0 = 0, g1 = 0;
  CHECK(fl_potential_g(p, 1.0, std::log(0.5), 4.0, &g0) == FL_OK);
  CHECK(fl_potential_g(sup, 1.0, std::log(0.5), 4.0, &g1) == FL_OK);
  CHECK(g1 > g0);
  CHECK(fl_potential_perturbed(p, 0, 1, 13, &sup) == FL_ERR_INVALID_ARGUMENT);
  fl_potential_free(sup);
  fl_potential_free(p);
  fl_potential_free(nullptr);
}

TEST_CASE("error codes and messages") {
  fl_potential* p = nullptr;
  CHECK(fl_potential_from_json("{not json", &p) == FL_ERR_INVALID_ARGUMENT);
  CHECK(std::string(fl_last_error()).find("json") != std::string::npos);
  CHECK(fl_potential_from_json(R"({"family": "Cubic", "q": 4})", &p) != FL_OK);
  CHECK(fl_potential_from_json(R"({"family": "PurePower", "q": 4})", nullptr) == FL_ERR_INVALID_ARGUMENT);
  CHECK(std::string(fl_last_error()).find("null") != std::string::npos);
  p = pure_power(3.0);
  char* js = nullptr;
  CHECK(fl_fowler_expansion(p, 13, 0.1, 0.1, 0.0, 0.0, &js) == FL_ERR_DOMAIN);
  CHECK(js == nullptr);
  char* out = nullptr;
  CHECK(fl_exponents(p, 2, &out) != FL_OK);
  fl_potential_free(p);
}

TEST_CASE("exponents and hypotheses as JSON") {
  fl_potential* p = pure_power(4.0);
  char* js = nullptr;
  REQUIRE(fl_exponents(p, 13, &js) == FL_OK);
  json e = json::parse(take(js));
  CHECK(e["A"].get<double>() == doctest::Approx(9.0));
  CHECK(e["regime"] == "node");
  double formula = 0, lo = 0, hi = 0;
  CHECK(fl_sigma_star(13, 0.0, &formula, &lo, &hi) == FL_OK);
  CHECK(std::fabs(hi - 3.9306913006394556575) < 1e-12);
  int all = 0;
  REQUIRE(fl_check_hypotheses(p, 13, nullptr, &js, &all) == FL_OK);
  CHECK(all == 1);
  take(js);
  fl_potential_free(p);
}

TEST_CASE("ground state handles") {
  fl_potential* p = pure_power(4.0);
  fl_ground_state* gs = nullptr;
  REQUIRE(fl_shoot(p, 13, 1.0, 1e3, R"({"tol": 1e-11})", &gs) == FL_OK);
  size_t n = fl_ground_state_size(gs);
  REQUIRE(n > 100);
  std::vector<double> r(n), u(n), du(n);
  CHECK(fl_ground_state_samples(gs, r.data(), u.data(), du.data(), n - 1) == FL_ERR_INVALID_ARGUMENT);
  CHECK(fl_ground_state_samples(gs, r.data(), u.data(), du.data(), n) == FL_OK);
  CHECK(u.back() * r.back() == doctest::Approx(std::sqrt(10.0)).epsilon(0.01));
  fl_decay d;
  char* note = nullptr;
  CHECK(fl_classify_decay(gs, &d, &note) == FL_OK);
  take(note);
  CHECK(d == FL_DECAY_SLOW);
  double a = 0, b = 0, res = 0;
  CHECK(fl_fit_tail(gs, 10.0, 100.0, 0.0, &a, &b, &res) == FL_OK);
  CHECK(a == doctest::Approx(-995.71).epsilon(1e-4));
  char* js = nullptr;
  CHECK(fl_ground_state_json(gs, &js) == FL_OK);
  CHECK(json::parse(take(js))["tailA"].get<double>() == doctest::Approx(a));
  CHECK(fl_ground_state_csv(gs, &js) == FL_OK);
  CHECK(take(js).rfind("r,", 0) == 0);
  fl_ground_state_free(gs);

  fl_ground_state* sing = nullptr;
  CHECK(fl_singular_orbit(p, 13, nullptr, &sing) == FL_OK);
  CHECK(fl_ground_state_size(sing) > 0);
  fl_ground_state_free(sing);
  CHECK(fl_shoot(p, 13, -1.0, 1e3, nullptr, &gs) != FL_OK);
  fl_potential_free(p);
}

TEST_CASE("separation and expansion") {
  fl_potential* p = pure_power(4.0);
  const double alphas[] = {0.5, 1.0, 2.0, 4.0};
  char* js = nullptr;
  int all = 0;
  REQUIRE(fl_separation(p, 13, alphas, 4, nullptr, &js, &all) == FL_OK);
  json s = json::parse(take(js));
  CHECK(all == 1);
  CHECK(s["ordering"]["verdict"] == "pass");
  REQUIRE(fl_fowler_expansion(p, 13, 0.3, 0.1, 0.0, 0.0, &js) == FL_OK);
  json f = json::parse(take(js));
  CHECK(f["P"].get<double>() == doctest::Approx(std::sqrt(10.0)));
  fl_potential_free(p);
}

TEST_CASE("fields, evolution and experiments") {
  fl_potential* p = pure_power(4.0);
  const double r[] = {0.0, 0.5, 1.0};
  const double u[] = {1.0, 0.5};
  fl_field* f = nullptr;
  CHECK(fl_field_create(r, u, 3, nullptr) == FL_ERR_INVALID_ARGUMENT);
  REQUIRE(fl_field_from_profile(p, 13, 1.0, R"({"Rmax": 100, "pointsPerDecade": 16})", &f) == FL_OK);
  size_t n = fl_field_size(f);
  std::vector<double> fr(n), fu(n);
  CHECK(fl_field_values(f, fr.data(), fu.data(), n) == FL_OK);
  CHECK(fu[0] == 1.0);
  double norm = 0;
  CHECK(fl_weighted_norm(f, 0.0, 0, nullptr, &norm) == FL_OK);
  CHECK(norm == doctest::Approx(1.0));

  fl_field* fin = nullptr;
  char* trace = nullptr;
  fl_termination term;
  REQUIRE(fl_evolve(p, 13, f, 0.5, R"({"outer": "dirichlet"})", &fin, &trace, &term) == FL_OK);
  CHECK(term == FL_COMPLETED);
  CHECK(take(trace).rfind("t,", 0) == 0);
  CHECK(fl_field_size(fin) == n);
  CHECK(fl_evolve(p, 13, f, 0.5, R"({"outer": "neumann"})", &fin, &trace, &term) == FL_ERR_INVALID_ARGUMENT);
  fl_field_free(fin);
  fl_field_free(f);

  char* js = nullptr;
  int pass = 0;
  REQUIRE(fl_stability_experiment(p, 13, R"({"alpha": 1, "d": 0.5, "T": 1, "grid": {"Rmax": 100}})", &js, &trace,
                                  &pass) == FL_OK);
  CHECK(pass == 1);
  CHECK(json::parse(take(js))["verdict"] == "pass");
  take(trace);
  CHECK(fl_stability_experiment(p, 13, R"({"alpha": 1, "d": 0, "T": 1})", &js, &trace, &pass) ==
        FL_ERR_INVALID_ARGUMENT);
  fl_potential_free(p);
}

}  // TEST_SUITE
