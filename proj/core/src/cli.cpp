#include "partmix/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "partmix/detail/json_writer.hpp"
#include "partmix/estimation.hpp"
#include "partmix/io.hpp"
#include "partmix/likelihoods.hpp"
#include "partmix/model.hpp"
#include "partmix/simulation.hpp"
#include "partmix/version.hpp"

namespace partmix::cli {

namespace {

using detail::JsonWriter;

// ---------------------------------------------------------------------------
// JSON building blocks

void write_vector(JsonWriter& w, const Eigen::VectorXd& v) {
  w.begin_array();
  for (Eigen::Index i = 0; i < v.size(); ++i) w.value(v[i]);
  w.end_array();
}

void write_matrix(JsonWriter& w, const Eigen::MatrixXd& m) {
  w.begin_array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    w.begin_array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.value(m(i, j));
    w.end_array();
  }
  w.end_array();
}

void write_theta(JsonWriter& w, const MixtureParams& theta) {
  w.begin_object();
  w.key("pi1").value(theta.pi1);
  w.key("mu1");
  write_vector(w, theta.mu1);
  w.key("mu2");
  write_vector(w, theta.mu2);
  w.key("covariance").begin_object();
  if (theta.has_common_covariance()) {
    w.key("kind").value("common");
    w.key("sigma");
    write_matrix(w, theta.common_sigma());
  } else {
    w.key("kind").value("per_class");
    w.key("sigma1");
    write_matrix(w, theta.sigma(ClassLabel::Class1));
    w.key("sigma2");
    write_matrix(w, theta.sigma(ClassLabel::Class2));
  }
  w.end_object();
  w.end_object();
}

void write_mechanism(JsonWriter& w, const MissingnessMechanism& mechanism) {
  w.begin_object();
  if (const auto* mcar = std::get_if<Mcar>(&mechanism)) {
    w.key("kind").value("mcar");
    w.key("gamma").value(mcar->gamma);
  } else if (const auto* fixed = std::get_if<FixedCounts>(&mechanism)) {
    w.key("kind").value("fixed_counts");
    w.key("n1c").value(fixed->n1c);
    w.key("n2c").value(fixed->n2c);
  } else {
    const auto& el = std::get<EntropyLogistic>(mechanism);
    w.key("kind").value("entropy_logistic");
    w.key("xi0").value(el.psi.xi.xi0);
    w.key("xi1").value(el.psi.xi.xi1);
  }
  w.end_object();
}

void write_fit_options(JsonWriter& w, const FitOptions& fit) {
  w.begin_object();
  w.key("max_iterations").value(fit.max_iterations);
  w.key("rel_tol").value(fit.rel_tol);
  w.key("variance_floor_factor").value(fit.variance_floor_factor);
  w.key("fixed_pi1");
  fit.fixed_pi1 ? w.value(*fit.fixed_pi1) : w.null_value();
  w.key("fixed_xi1");
  fit.fixed_xi1 ? w.value(*fit.fixed_xi1) : w.null_value();
  w.end_object();
}

void write_metadata(JsonWriter& w, const std::string& command, std::uint64_t seed,
                    const std::string& canonical_config) {
  w.key("partmix_version").value(kVersion);
  w.key("command").value(command);
  w.key("seed").value(seed);
  w.key("config_hash").value(fnv1a_hex(canonical_config));
  w.key("config").raw_value(canonical_config);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
}

// ---------------------------------------------------------------------------
// Simulation config: presets and strict JSON parsing

struct SimulateSpec {
  std::string experiment;  // table1 | figure1 | eq2
  ExperimentConfig config;
  int k_max = 10;                            // eq2
  std::vector<double> pi1_list, delta_list;  // table1
  double gamma = 1.0;                        // table1
};

SimulateSpec preset_spec(const std::string& name) {
  SimulateSpec spec;
  spec.experiment = name;
  if (name == "table1") {
    spec.pi1_list = {0.1, 0.2, 0.3, 0.4, 0.5};
    spec.delta_list = {1.0, 2.0, 3.0, 4.0};
    spec.gamma = 1.0;
    return spec;
  }
  if (name == "figure1") {
    Eigen::MatrixXd sigma1(2, 2), sigma2(2, 2);
    sigma1 << 1.0, 0.7, 0.7, 1.0;
    sigma2 << 1.0, 0.0, 0.0, 1.0;
    spec.config.theta_true =
        make_per_class(0.5, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.0, 3.0),
                       sigma1, sigma2);
    spec.config.mechanism =
        EntropyLogistic{FullParams{spec.config.theta_true, {-5.0, 100.0}}};
    spec.config.n = 500;
    spec.config.n_test = 2000;
    spec.config.replications = 100;
    for (int i = 1; i <= 19; ++i) spec.config.alpha_grid.push_back(0.05 * i);
    spec.config.methods = {"fsc", "full"};
    return spec;
  }
  if (name == "eq2") {
    spec.config.theta_true =
        make_common(0.5, Eigen::Vector3d(1.0, 0.0, 0.0), Eigen::Vector3d(-1.0, 0.0, 0.0),
                    Eigen::Matrix3d::Identity());
    spec.config.mechanism = FixedCounts{25, 25};
    spec.config.n = 5050;  // 50 classified + 5000 unclassified
    spec.config.n_test = 2000;
    spec.config.replications = 500;
    spec.config.fit.fixed_pi1 = 0.5;  // equal known priors
    spec.k_max = 10;
    return spec;
  }
  throw UsageError("unknown preset '" + name + "' (expected table1, figure1 or eq2)");
}

void require_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (const auto& item : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end())
      throw ParseError("unknown key '" + item.key() + "' in " + where);
  }
}

Eigen::VectorXd vector_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = a.at(i).get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& a) {
  const std::size_t rows = a.size();
  const std::size_t cols = rows == 0 ? 0 : a.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (a.at(i).size() != cols) throw ParseError("ragged matrix in config");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          a.at(i).at(j).get<double>();
  }
  return m;
}

MixtureParams theta_from_config(const nlohmann::json& t) {
  require_keys(t, {"pi1", "mu1", "mu2", "covariance"}, "theta");
  MixtureParams theta;
  theta.pi1 = t.at("pi1").get<double>();
  theta.mu1 = vector_from_json(t.at("mu1"));
  theta.mu2 = vector_from_json(t.at("mu2"));
  const nlohmann::json& cov = t.at("covariance");
  require_keys(cov, {"kind", "sigma", "sigma1", "sigma2"}, "theta.covariance");
  const std::string kind = cov.at("kind").get<std::string>();
  if (kind == "common") {
    theta.covariance = CommonCovariance{matrix_from_json(cov.at("sigma"))};
  } else if (kind == "per_class") {
    theta.covariance =
        PerClassCovariance{matrix_from_json(cov.at("sigma1")), matrix_from_json(cov.at("sigma2"))};
  } else {
    throw ParseError("covariance kind must be 'common' or 'per_class'");
  }
  theta.validate();
  return theta;
}

MissingnessMechanism mechanism_from_config(const nlohmann::json& m,
                                           const MixtureParams& theta_true) {
  require_keys(m, {"kind", "gamma", "n1c", "n2c", "xi0", "xi1"}, "mechanism");
  const std::string kind = m.at("kind").get<std::string>();
  if (kind == "mcar") return Mcar{m.at("gamma").get<double>()};
  if (kind == "fixed_counts")
    return FixedCounts{m.at("n1c").get<int>(), m.at("n2c").get<int>()};
  if (kind == "entropy_logistic")
    return EntropyLogistic{FullParams{
        theta_true, {m.at("xi0").get<double>(), m.at("xi1").get<double>()}}};
  throw ParseError("mechanism kind must be mcar, fixed_counts or entropy_logistic");
}

FitOptions fit_options_from_config(const nlohmann::json& f) {
  require_keys(f, {"max_iterations", "rel_tol", "variance_floor_factor", "fixed_pi1",
                   "fixed_xi1"},
               "fit");
  FitOptions fit;
  if (f.contains("max_iterations")) fit.max_iterations = f.at("max_iterations").get<int>();
  if (f.contains("rel_tol")) fit.rel_tol = f.at("rel_tol").get<double>();
  if (f.contains("variance_floor_factor"))
    fit.variance_floor_factor = f.at("variance_floor_factor").get<double>();
  if (f.contains("fixed_pi1") && !f.at("fixed_pi1").is_null())
    fit.fixed_pi1 = f.at("fixed_pi1").get<double>();
  if (f.contains("fixed_xi1") && !f.at("fixed_xi1").is_null())
    fit.fixed_xi1 = f.at("fixed_xi1").get<double>();
  return fit;
}

SimulateSpec spec_from_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open config file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    require_keys(doc,
                 {"experiment", "seed", "replications", "n", "n_test", "threads",
                  "alpha_grid", "methods", "k_max", "pi1_list", "delta_list", "gamma",
                  "theta", "mechanism", "fit"},
                 "config");
    SimulateSpec spec;
    spec.experiment = doc.at("experiment").get<std::string>();
    if (spec.experiment != "table1" && spec.experiment != "figure1" &&
        spec.experiment != "eq2")
      throw ParseError("experiment must be table1, figure1 or eq2");
    if (doc.contains("seed")) spec.config.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("threads")) spec.config.threads = doc.at("threads").get<int>();

    if (spec.experiment == "table1") {
      spec.pi1_list = doc.at("pi1_list").get<std::vector<double>>();
      spec.delta_list = doc.at("delta_list").get<std::vector<double>>();
      spec.gamma = doc.contains("gamma") ? doc.at("gamma").get<double>() : 1.0;
      return spec;
    }
    spec.config.theta_true = theta_from_config(doc.at("theta"));
    spec.config.mechanism =
        mechanism_from_config(doc.at("mechanism"), spec.config.theta_true);
    if (doc.contains("replications"))
      spec.config.replications = doc.at("replications").get<int>();
    if (doc.contains("n")) spec.config.n = doc.at("n").get<Eigen::Index>();
    if (doc.contains("n_test")) spec.config.n_test = doc.at("n_test").get<Eigen::Index>();
    if (doc.contains("alpha_grid"))
      spec.config.alpha_grid = doc.at("alpha_grid").get<std::vector<double>>();
    if (doc.contains("methods"))
      spec.config.methods = doc.at("methods").get<std::vector<std::string>>();
    if (doc.contains("fit")) spec.config.fit = fit_options_from_config(doc.at("fit"));
    if (doc.contains("k_max")) spec.k_max = doc.at("k_max").get<int>();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Canonical serialized form; excludes runtime knobs (threads, output paths)
/// so hashes identify the experiment itself.
std::string canonical_spec_json(const SimulateSpec& spec) {
  JsonWriter w;
  w.begin_object();
  w.key("experiment").value(spec.experiment);
  w.key("seed").value(spec.config.seed);
  if (spec.experiment == "table1") {
    w.key("pi1_list").begin_array();
    for (double v : spec.pi1_list) w.value(v);
    w.end_array();
    w.key("delta_list").begin_array();
    for (double v : spec.delta_list) w.value(v);
    w.end_array();
    w.key("gamma").value(spec.gamma);
    w.end_object();
    return w.str();
  }
  w.key("replications").value(spec.config.replications);
  w.key("n").value(static_cast<std::int64_t>(spec.config.n));
  w.key("n_test").value(static_cast<std::int64_t>(spec.config.n_test));
  if (spec.experiment == "figure1") {
    w.key("alpha_grid").begin_array();
    for (double a : spec.config.alpha_grid) w.value(a);
    w.end_array();
    w.key("methods").begin_array();
    for (const auto& m : spec.config.methods) w.value(m);
    w.end_array();
  } else {
    w.key("k_max").value(spec.k_max);
  }
  w.key("theta");
  write_theta(w, spec.config.theta_true);
  w.key("mechanism");
  write_mechanism(w, spec.config.mechanism);
  w.key("fit");
  write_fit_options(w, spec.config.fit);
  w.end_object();
  return w.str();
}

// ---------------------------------------------------------------------------
// Minimal SVG line plots (presentation only)

struct SvgSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
  std::string color;
};

std::string format_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return std::string(buf);
}

std::string render_line_svg(const std::string& title, const std::string& x_label,
                            const std::string& y_label,
                            const std::vector<SvgSeries>& series) {
  const double width = 640, height = 420;
  const double ml = 64, mr = 16, mt = 36, mb = 48;
  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  if (!(x_hi > x_lo)) x_hi = x_lo + 1.0;
  if (!(y_hi > y_lo)) y_hi = y_lo + 1.0;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;
  auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr); };
  auto py = [&](double y) {
    return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb);
  };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
      << height << "' viewBox='0 0 " << width << " " << height << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-size='14'>"
      << title << "</text>\n";
  // axes
  svg << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr
      << "' y2='" << height - mb << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << height - mb << "' stroke='black'/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x_lo + (x_hi - x_lo) * t / 4.0;
    const double fy = y_lo + (y_hi - y_lo) * t / 4.0;
    svg << "<text x='" << px(fx) << "' y='" << height - mb + 18
        << "' text-anchor='middle' font-size='11'>" << format_tick(fx) << "</text>\n";
    svg << "<text x='" << ml - 8 << "' y='" << py(fy) + 4
        << "' text-anchor='end' font-size='11'>" << format_tick(fy) << "</text>\n";
    svg << "<line x1='" << ml << "' y1='" << py(fy) << "' x2='" << width - mr << "' y2='"
        << py(fy) << "' stroke='#dddddd'/>\n";
  }
  svg << "<text x='" << (ml + width - mr) / 2 << "' y='" << height - 10
      << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
  svg << "<text x='16' y='" << (mt + height - mb) / 2
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
      << (mt + height - mb) / 2 << ")'>" << y_label << "</text>\n";
  int legend_row = 0;
  for (const auto& s : series) {
    svg << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
    for (const auto& [x, y] : s.points) svg << px(x) << "," << py(y) << " ";
    svg << "'/>\n";
    const double ly = mt + 14 * legend_row++;
    svg << "<line x1='" << width - mr - 130 << "' y1='" << ly << "' x2='"
        << width - mr - 110 << "' y2='" << ly << "' stroke='" << s.color
        << "' stroke-width='1.5'/>\n";
    svg << "<text x='" << width - mr - 104 << "' y='" << ly + 4 << "' font-size='11'>"
        << s.name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

// ---------------------------------------------------------------------------
// Subcommand bodies

struct FitArgs {
  std::string input;
  std::string method = "em";
  double alpha = -1.0;  // negative = not set
  bool homoscedastic = false;
  int k_max = 30;
  std::uint64_t seed = 0;
  int max_iterations = 1000;
  double rel_tol = 1e-8;
  double fixed_pi1 = -1.0;  // negative = not set
  bool freeze_xi1 = false;
  std::string out;
};

std::string fit_config_json(const FitArgs& a, const FitOptions& fit) {
  JsonWriter w;
  w.begin_object();
  w.key("input").value(a.input);
  w.key("method").value(a.method);
  w.key("alpha");
  a.method == "fsc" ? w.value(a.alpha) : w.null_value();
  w.key("homoscedastic").value(a.homoscedastic);
  w.key("k_max").value(a.k_max);
  w.key("fit");
  write_fit_options(w, fit);
  w.end_object();
  return w.str();
}

void run_fit(const FitArgs& args) {
  FitOptions fit;
  fit.max_iterations = args.max_iterations;
  fit.rel_tol = args.rel_tol;
  fit.seed = args.seed;
  if (args.fixed_pi1 >= 0.0) fit.fixed_pi1 = args.fixed_pi1;
  if (args.freeze_xi1) fit.fixed_xi1 = 0.0;

  const PartialSample sample = read_sample_csv(args.input);
  FitResult result;
  if (args.method == "supervised") {
    result = fit_supervised(sample, args.homoscedastic);
  } else if (args.method == "em") {
    result = fit_em_ignorable(sample, fit, args.homoscedastic);
  } else if (args.method == "cml") {
    result = fit_cml(sample, fit, args.k_max);
  } else if (args.method == "full") {
    result = fit_full(sample, fit, args.homoscedastic);
  } else if (args.method == "fsc") {
    if (args.alpha < 0.0) throw UsageError("--alpha is required for --method fsc");
    result = fit_fsc(sample, args.alpha, fit, args.homoscedastic);
  } else {
    throw UsageError("unknown method '" + args.method + "'");
  }

  const std::string config = fit_config_json(args, fit);
  JsonWriter w;
  w.begin_object();
  write_metadata(w, "fit", args.seed, config);
  w.key("n").value(static_cast<std::int64_t>(sample.size()));
  w.key("n_classified").value(static_cast<std::int64_t>(sample.n_classified()));
  w.key("n_unclassified").value(static_cast<std::int64_t>(sample.n_unclassified()));
  w.key("p").value(static_cast<std::int64_t>(sample.dim()));
  w.key("method").value(args.method);
  w.key("converged").value(result.converged);
  w.key("iterations").value(result.iterations);
  w.key("restarts_used").value(result.restarts_used);
  w.key("at_variance_floor").value(result.at_variance_floor);
  w.key("objective").value(result.final_objective());
  w.key("objective_trace").begin_array();
  for (double v : result.objective_trace) w.value(v);
  w.end_array();
  w.key("theta");
  write_theta(w, result.theta);
  w.key("xi");
  if (result.xi) {
    w.begin_object();
    w.key("xi0").value(result.xi->xi0);
    w.key("xi1").value(result.xi->xi1);
    w.end_object();
  } else {
    w.null_value();
  }
  w.key("beta");
  if (result.theta.has_common_covariance()) {
    const DiscriminantCoeffs rule = discriminant_from_theta(result.theta);
    w.begin_object();
    w.key("beta0").value(rule.beta0);
    w.key("beta");
    write_vector(w, rule.beta);
    w.end_object();
  } else {
    w.null_value();
  }
  w.end_object();

  if (args.out.empty())
    std::cout << w.str() << "\n";
  else
    write_text_file(args.out, w.str() + "\n");
}

struct EvaluateArgs {
  std::string model;
  std::string test;
  std::string out;
};

void run_evaluate(const EvaluateArgs& args) {
  const MixtureParams theta = theta_from_fit_json(args.model);
  const PartialSample test = read_sample_csv(args.test);
  const RuleEvaluation eval = evaluate_rule(theta, test);

  JsonWriter cfg;
  cfg.begin_object();
  cfg.key("model").value(args.model);
  cfg.key("test").value(args.test);
  cfg.end_object();

  JsonWriter w;
  w.begin_object();
  write_metadata(w, "evaluate", 0, cfg.str());
  w.key("n_test").value(static_cast<std::int64_t>(test.size()));
  w.key("ari").value(eval.ari);
  w.key("error").value(eval.error);
  w.end_object();
  if (args.out.empty())
    std::cout << w.str() << "\n";
  else
    write_text_file(args.out, w.str() + "\n");
}

std::string are_grid_csv(const AreGrid& grid) {
  std::ostringstream csv;
  csv << "pi1";
  for (double d : grid.delta_values) csv << ",delta=" << format_double(d);
  csv << "\n";
  for (std::size_t i = 0; i < grid.pi1_values.size(); ++i) {
    csv << format_double(grid.pi1_values[i]);
    for (std::size_t j = 0; j < grid.delta_values.size(); ++j)
      csv << ","
          << format_double(grid.values(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(j)));
    csv << "\n";
  }
  return csv.str();
}

struct AreArgs {
  std::vector<double> pi1_list;
  std::vector<double> delta_list;
  double gamma = 1.0;
  std::string out;
  std::string json_out;
};

void run_are(const AreArgs& args) {
  const AreGrid grid = run_table1_grid(args.pi1_list, args.delta_list, args.gamma);
  const std::string csv = are_grid_csv(grid);
  if (args.out.empty())
    std::cout << csv;
  else
    write_text_file(args.out, csv);
  if (!args.json_out.empty()) {
    JsonWriter cfg;
    cfg.begin_object();
    cfg.key("pi1_list").begin_array();
    for (double v : args.pi1_list) cfg.value(v);
    cfg.end_array();
    cfg.key("delta_list").begin_array();
    for (double v : args.delta_list) cfg.value(v);
    cfg.end_array();
    cfg.key("gamma").value(args.gamma);
    cfg.end_object();

    JsonWriter w;
    w.begin_object();
    write_metadata(w, "are", 0, cfg.str());
    w.key("are").begin_array();
    for (std::size_t i = 0; i < grid.pi1_values.size(); ++i) {
      w.begin_array();
      for (std::size_t j = 0; j < grid.delta_values.size(); ++j)
        w.value(grid.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      w.end_array();
    }
    w.end_array();
    w.end_object();
    write_text_file(args.json_out, w.str() + "\n");
  }
}

struct AsymptoticArgs {
  double delta = 2.0;
  int p = 1;
  int n1c = 25;
  int n2c = 25;
  int k_max = 20;
  std::string out;
};

void run_asymptotic_error(const AsymptoticArgs& args) {
  std::ostringstream csv;
  csv << "k,a1,expected_error\n";
  for (int k = 0; k <= args.k_max; ++k) {
    const ExpansionInputs in{args.delta, args.p, args.n1c, args.n2c, k};
    csv << k << "," << format_double(a1_k(in)) << ","
        << format_double(expected_error_cml(in)) << "\n";
  }
  if (args.out.empty())
    std::cout << csv.str();
  else
    write_text_file(args.out, csv.str());
}

struct SimulateArgs {
  std::string preset;
  std::string config_path;
  std::int64_t seed = -1;  // negative = keep spec value
  int replications = 0;    // 0 = keep spec value
  int threads = 0;
  std::string out_dir = ".";
  bool svg = false;
};

void run_simulate(const SimulateArgs& args) {
  if (args.preset.empty() == args.config_path.empty())
    throw UsageError("simulate needs exactly one of a preset name or --config");
  SimulateSpec spec =
      args.preset.empty() ? spec_from_config_file(args.config_path) : preset_spec(args.preset);
  if (args.seed >= 0) spec.config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.replications > 0) spec.config.replications = args.replications;
  spec.config.threads = args.threads;

  const std::string canonical = canonical_spec_json(spec);
  std::filesystem::create_directories(args.out_dir);
  const auto path_in_out = [&](const std::string& name) {
    return (std::filesystem::path(args.out_dir) / name).string();
  };

  if (spec.experiment == "table1") {
    const AreGrid grid = run_table1_grid(spec.pi1_list, spec.delta_list, spec.gamma);
    write_text_file(path_in_out("table1_table.csv"), are_grid_csv(grid));
    JsonWriter w;
    w.begin_object();
    write_metadata(w, "simulate", spec.config.seed, canonical);
    w.key("are").begin_array();
    for (std::size_t i = 0; i < grid.pi1_values.size(); ++i) {
      w.begin_array();
      for (std::size_t j = 0; j < grid.delta_values.size(); ++j)
        w.value(grid.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      w.end_array();
    }
    w.end_array();
    w.end_object();
    write_text_file(path_in_out("table1_report.json"), w.str() + "\n");
    std::cout << "table1: wrote " << path_in_out("table1_table.csv") << "\n";
    return;
  }

  if (spec.experiment == "eq2") {
    const Eq2Result result = run_eq2_experiment(spec.config, spec.k_max);
    std::ostringstream csv;
    csv << "k,mc_mean,mc_se,analytic\n";
    for (const auto& row : result.rows)
      csv << row.k << "," << format_double(row.mean_error) << ","
          << format_double(row.se_error) << "," << format_double(row.analytic) << "\n";
    write_text_file(path_in_out("eq2_curve.csv"), csv.str());

    JsonWriter w;
    w.begin_object();
    write_metadata(w, "simulate", spec.config.seed, canonical);
    w.key("rows").begin_array();
    for (const auto& row : result.rows) {
      w.begin_object();
      w.key("k").value(row.k);
      w.key("mc_mean").value(row.mean_error);
      w.key("mc_se").value(row.se_error);
      w.key("analytic").value(row.analytic);
      w.end_object();
    }
    w.end_array();
    w.end_object();
    write_text_file(path_in_out("eq2_report.json"), w.str() + "\n");

    if (args.svg) {
      SvgSeries mc{"monte carlo", {}, "#c0392b"};
      SvgSeries an{"expansion", {}, "#2c3e50"};
      for (const auto& row : result.rows) {
        mc.points.emplace_back(row.k, row.mean_error);
        an.points.emplace_back(row.k, row.analytic);
      }
      write_text_file(path_in_out("eq2.svg"),
                      render_line_svg("Expected error rate by iteration", "k",
                                      "error rate", {mc, an}));
    }
    std::cout << "eq2: wrote " << path_in_out("eq2_curve.csv") << "\n";
    return;
  }

  const ReplicationReport report = run_figure1_experiment(spec.config);
  std::ostringstream csv;
  csv << "method,alpha,mean_ari,se_ari,mean_error,se_error,n_ok,n_failed\n";
  for (const auto& row : report.aggregates) {
    csv << row.method << ",";
    if (row.alpha) csv << format_double(*row.alpha);
    csv << "," << format_double(row.mean_ari) << "," << format_double(row.se_ari) << ","
        << format_double(row.mean_error) << "," << format_double(row.se_error) << ","
        << row.n_ok << "," << row.n_failed << "\n";
  }
  write_text_file(path_in_out("figure1_curve.csv"), csv.str());

  JsonWriter w;
  w.begin_object();
  write_metadata(w, "simulate", spec.config.seed, canonical);
  w.key("failures").value(report.failures);
  w.key("aggregates").begin_array();
  for (const auto& row : report.aggregates) {
    w.begin_object();
    w.key("method").value(row.method);
    w.key("alpha");
    row.alpha ? w.value(*row.alpha) : w.null_value();
    w.key("mean_ari").value(row.mean_ari);
    w.key("se_ari").value(row.se_ari);
    w.key("mean_error").value(row.mean_error);
    w.key("se_error").value(row.se_error);
    w.key("n_ok").value(row.n_ok);
    w.key("n_failed").value(row.n_failed);
    w.end_object();
  }
  w.end_array();
  w.key("records").begin_array();
  for (const auto& rec : report.records) {
    w.begin_object();
    w.key("replication").value(rec.replication);
    w.key("method").value(rec.method);
    w.key("alpha");
    rec.alpha ? w.value(*rec.alpha) : w.null_value();
    w.key("ok").value(rec.ok);
    w.key("ari").value(rec.ari);
    w.key("error").value(rec.error);
    if (!rec.ok) w.key("failure").value(rec.failure);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  write_text_file(path_in_out("figure1_report.json"), w.str() + "\n");

  if (args.svg) {
    SvgSeries fsc{"FSC", {}, "#c0392b"};
    SvgSeries full{"full likelihood", {}, "#2c3e50"};
    double full_ari = 0.0;
    bool has_full = false;
    for (const auto& row : report.aggregates) {
      if (row.method == "fsc" && row.alpha) fsc.points.emplace_back(*row.alpha, row.mean_ari);
      if (row.method == "full") {
        full_ari = row.mean_ari;
        has_full = true;
      }
    }
    if (has_full && !fsc.points.empty()) {
      full.points.emplace_back(fsc.points.front().first, full_ari);
      full.points.emplace_back(fsc.points.back().first, full_ari);
    }
    write_text_file(path_in_out("figure1.svg"),
                    render_line_svg("Mean test ARI", "alpha", "ARI", {fsc, full}));
  }
  std::cout << "figure1: wrote " << path_in_out("figure1_curve.csv") << " ("
            << report.failures << " failed fits)\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"partmix: classification rules from partially classified Gaussian samples"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a mixture model to a sample CSV");
  fit_cmd->add_option("--input,-i", fit_args.input, "Sample CSV path")->required();
  fit_cmd->add_option("--method,-m", fit_args.method, "Estimator")
      ->check(CLI::IsMember({"supervised", "em", "cml", "full", "fsc"}));
  fit_cmd->add_option("--alpha", fit_args.alpha, "FSC weight in [0,1]");
  fit_cmd->add_flag("--homoscedastic", fit_args.homoscedastic,
                    "Common covariance across classes");
  fit_cmd->add_option("--kmax", fit_args.k_max, "CML iteration cap");
  fit_cmd->add_option("--seed", fit_args.seed, "Seed for random restarts");
  fit_cmd->add_option("--max-iter", fit_args.max_iterations, "Iteration cap");
  fit_cmd->add_option("--rel-tol", fit_args.rel_tol, "Relative objective tolerance");
  fit_cmd->add_option("--fixed-pi1", fit_args.fixed_pi1, "Known mixing proportion");
  fit_cmd->add_flag("--freeze-xi1", fit_args.freeze_xi1,
                    "Pin xi1 = 0 in the full-likelihood fit");
  fit_cmd->add_option("--out,-o", fit_args.out, "Result JSON path (default stdout)");
  fit_cmd->callback([&] { run_fit(fit_args); });

  EvaluateArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Score a stored fit on a labeled test CSV");
  eval_cmd->add_option("--model", eval_args.model, "Fit result JSON")->required();
  eval_cmd->add_option("--test", eval_args.test, "Labeled test CSV")->required();
  eval_cmd->add_option("--out,-o", eval_args.out, "Result JSON path (default stdout)");
  eval_cmd->callback([&] { run_evaluate(eval_args); });

  AreArgs are_args;
  CLI::App* are_cmd = app.add_subcommand(
      "are", "Asymptotic relative efficiency of the partially classified rule");
  are_cmd->add_option("--pi1-list", are_args.pi1_list, "Mixing proportions")->required();
  are_cmd->add_option("--delta-list", are_args.delta_list, "Mahalanobis distances")
      ->required();
  are_cmd->add_option("--gamma", are_args.gamma, "Fraction of labels missing at random");
  are_cmd->add_option("--out,-o", are_args.out, "CSV path (default stdout)");
  are_cmd->add_option("--json", are_args.json_out, "Optional JSON report path");
  are_cmd->callback([&] { run_are(are_args); });

  AsymptoticArgs asym_args;
  CLI::App* asym_cmd = app.add_subcommand(
      "asymptotic-error", "Expected error rate of the hard-EM rule by iteration");
  asym_cmd->add_option("--delta", asym_args.delta, "Mahalanobis distance")->required();
  asym_cmd->add_option("--p", asym_args.p, "Feature dimension");
  asym_cmd->add_option("--n1c", asym_args.n1c, "Classified count, class 1");
  asym_cmd->add_option("--n2c", asym_args.n2c, "Classified count, class 2");
  asym_cmd->add_option("--kmax", asym_args.k_max, "Iterations to tabulate");
  asym_cmd->add_option("--out,-o", asym_args.out, "CSV path (default stdout)");
  asym_cmd->callback([&] { run_asymptotic_error(asym_args); });

  SimulateArgs sim_args;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Run a replication experiment (preset or config)");
  sim_cmd->add_option("preset", sim_args.preset, "table1, figure1 or eq2")
      ->check(CLI::IsMember({"table1", "figure1", "eq2"}));
  sim_cmd->add_option("--config", sim_args.config_path, "Experiment config JSON");
  sim_cmd->add_option("--seed", sim_args.seed, "Master seed override");
  sim_cmd->add_option("--replications", sim_args.replications, "Replication override");
  sim_cmd->add_option("--threads", sim_args.threads,
                      "Worker threads (default: machine parallelism)");
  sim_cmd->add_option("--out,-o", sim_args.out_dir, "Output directory");
  sim_cmd->add_flag("--svg", sim_args.svg, "Also render an SVG line plot");
  sim_cmd->callback([&] { run_simulate(sim_args); });

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("partmix");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace partmix::cli
