#include "stirap/chain_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "stirap/errors.hpp"

namespace stirap {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr int kValidationSamples = 257;

std::string fmt_index_mismatch(const char* what, int i, int j, double a, double b) {
  std::ostringstream os;
  os.precision(17);
  os << "symmetry violation: " << what << "_" << i << " != " << what << "_" << j << " (" << a
     << " vs " << b << ")";
  return os.str();
}

bool close(double a, double b) {
  return std::abs(a - b) <= kSymmetryTol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

std::string to_string(PulseShape shape) {
  switch (shape) {
    case PulseShape::gaussian:
      return "gaussian";
    case PulseShape::sech:
      return "sech";
    case PulseShape::sin_squared:
      return "sin_squared";
    case PulseShape::custom:
      return "custom";
  }
  return "unknown";
}

PulseShape pulse_shape_from_string(const std::string& name) {
  if (name == "gaussian") return PulseShape::gaussian;
  if (name == "sech") return PulseShape::sech;
  if (name == "sin_squared" || name == "sin2") return PulseShape::sin_squared;
  if (name == "custom") return PulseShape::custom;
  throw ConfigError("unknown pulse shape '" + name + "'");
}

// ---------------------------------------------------------------------------
// SampledEnvelope

SampledEnvelope::SampledEnvelope(std::vector<double> samples, double step)
    : samples_(std::move(samples)), step_(step) {
  if (samples_.size() < 2) throw ConfigError("custom envelope needs at least 2 samples");
  if (!(step_ > 0.0) || !std::isfinite(step_))
    throw ConfigError("custom envelope sample step must be positive");
  for (double v : samples_) {
    if (!std::isfinite(v)) throw ConfigError("custom envelope samples must be finite");
  }

  // Clamped spline, zero slope at both ends; Thomas algorithm.
  const std::size_t n = samples_.size();
  const double h = step_;
  std::vector<double> diag(n), upper(n), rhs(n);
  diag[0] = 2.0;
  upper[0] = 1.0;
  rhs[0] = 6.0 / h * ((samples_[1] - samples_[0]) / h);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    diag[i] = 4.0;
    upper[i] = 1.0;
    rhs[i] = 6.0 / (h * h) * (samples_[i + 1] - 2.0 * samples_[i] + samples_[i - 1]);
  }
  diag[n - 1] = 2.0;
  rhs[n - 1] = 6.0 / h * (-(samples_[n - 1] - samples_[n - 2]) / h);

  for (std::size_t i = 1; i < n; ++i) {
    const double m = 1.0 / diag[i - 1];  // sub-diagonal entries are all 1
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  second_derivs_.assign(n, 0.0);
  second_derivs_[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    second_derivs_[i] = (rhs[i] - upper[i] * second_derivs_[i + 1]) / diag[i];
  }
}

double SampledEnvelope::value(double x) const {
  if (samples_.empty()) return 0.0;
  const double ax = std::abs(x);
  if (ax >= extent()) return ax == extent() ? samples_.back() : 0.0;
  const auto i = std::min(static_cast<std::size_t>(ax / step_), samples_.size() - 2);
  const double h = step_;
  const double a = (static_cast<double>(i + 1) * h - ax) / h;
  const double b = 1.0 - a;
  return a * samples_[i] + b * samples_[i + 1] +
         ((a * a * a - a) * second_derivs_[i] + (b * b * b - b) * second_derivs_[i + 1]) * h * h /
             6.0;
}

double SampledEnvelope::derivative(double x) const {
  if (samples_.empty()) return 0.0;
  const double ax = std::abs(x);
  if (ax >= extent()) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(ax / step_), samples_.size() - 2);
  const double h = step_;
  const double a = (static_cast<double>(i + 1) * h - ax) / h;
  const double b = 1.0 - a;
  const double d = (samples_[i + 1] - samples_[i]) / h -
                   (3.0 * a * a - 1.0) / 6.0 * h * second_derivs_[i] +
                   (3.0 * b * b - 1.0) / 6.0 * h * second_derivs_[i + 1];
  return x < 0.0 ? -d : d;
}

// ---------------------------------------------------------------------------
// PulseSpec

double PulseSpec::envelope(double x) const {
  const double u = x / width;
  switch (shape) {
    case PulseShape::gaussian:
      return std::exp(-u * u);
    case PulseShape::sech:
      return 1.0 / std::cosh(u);
    case PulseShape::sin_squared: {
      if (std::abs(u) >= 3.0) return 0.0;
      const double c = std::cos(std::numbers::pi * u / 6.0);
      return c * c;
    }
    case PulseShape::custom:
      return custom.value(u);
  }
  return 0.0;
}

double PulseSpec::envelope_derivative(double x) const {
  const double u = x / width;
  switch (shape) {
    case PulseShape::gaussian:
      return -2.0 * u / width * std::exp(-u * u);
    case PulseShape::sech:
      return -std::tanh(u) / std::cosh(u) / width;
    case PulseShape::sin_squared:
      if (std::abs(u) >= 3.0) return 0.0;
      return -std::numbers::pi / (6.0 * width) * std::sin(std::numbers::pi * u / 3.0);
    case PulseShape::custom:
      return custom.derivative(u) / width;
  }
  return 0.0;
}

double PulseSpec::natural_half_span() const {
  switch (shape) {
    case PulseShape::gaussian:
      return 6.0 * width;
    case PulseShape::sech:
      return 36.0 * width;
    case PulseShape::sin_squared:
      return 3.0 * width;
    case PulseShape::custom:
      return custom.extent() * width;
  }
  return 6.0 * width;
}

double Detuning::value(double t) const {
  const double u = t / gauss_width;
  return constant + gauss_amp * std::exp(-u * u);
}

double Detuning::derivative(double t) const {
  const double u = t / gauss_width;
  return -2.0 * gauss_amp * u / gauss_width * std::exp(-u * u);
}

// ---------------------------------------------------------------------------
// SymTridiagonal

Eigen::MatrixXd SymTridiagonal::dense() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diagonal[i];
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    m(i, i + 1) = off_diagonal[i];
    m(i + 1, i) = off_diagonal[i];
  }
  return m;
}

double SymTridiagonal::max_abs() const {
  double m = 0.0;
  for (double v : diagonal) m = std::max(m, std::abs(v));
  for (double v : off_diagonal) m = std::max(m, std::abs(v));
  return m;
}

SymTridiagonal SymTridiagonal::reversed() const {
  SymTridiagonal r{diagonal, off_diagonal};
  std::reverse(r.diagonal.begin(), r.diagonal.end());
  std::reverse(r.off_diagonal.begin(), r.off_diagonal.end());
  return r;
}

// ---------------------------------------------------------------------------
// Validation

ChainConfig validate_config(ChainConfig raw) {
  const int n = raw.num_states;
  if (n < 3) throw ConfigError("N must be at least 3");
  if (n % 2 == 0) throw ConfigError("N must be odd");
  if (raw.couplings.size() != static_cast<std::size_t>(n - 1)) {
    throw ConfigError("expected " + std::to_string(n - 1) + " couplings xi, got " +
                      std::to_string(raw.couplings.size()));
  }
  if (raw.detunings.size() != static_cast<std::size_t>(n - 2)) {
    throw ConfigError("expected " + std::to_string(n - 2) + " detunings, got " +
                      std::to_string(raw.detunings.size()));
  }
  for (std::size_t i = 0; i < raw.couplings.size(); ++i) {
    const double xi = raw.couplings[i];
    if (!std::isfinite(xi) || xi <= 0.0) {
      throw ConfigError("coupling xi_" + std::to_string(i + 1) + " must be positive");
    }
  }
  for (std::size_t i = 0; i < raw.detunings.size(); ++i) {
    const auto& d = raw.detunings[i];
    if (!std::isfinite(d.constant) || !std::isfinite(d.gauss_amp) || !std::isfinite(d.gauss_width) ||
        d.gauss_width <= 0.0) {
      throw ConfigError("detuning Delta_" + std::to_string(i + 2) +
                        " needs finite values and a positive gaussian width");
    }
  }

  auto& p = raw.pulse;
  if (!std::isfinite(p.width) || p.width <= 0.0) throw ConfigError("pulse width T must be positive");
  if (!std::isfinite(p.peak_rabi) || p.peak_rabi < 0.0)
    throw ConfigError("peak Rabi frequency must be non-negative");
  if (!std::isfinite(p.delay)) throw ConfigError("pulse delay must be finite");
  if (p.shape == PulseShape::custom) {
    if (p.custom.samples().empty()) throw ConfigError("custom pulse shape requires samples");
    for (double v : p.custom.samples()) {
      if (v < 0.0) throw ConfigError("custom envelope samples must be non-negative");
    }
  }
  if (std::abs(p.envelope(0.0) - 1.0) > kSymmetryTol) {
    throw ConfigError("envelope must be peak-normalized, f(0) = 1");
  }
  const double span = p.natural_half_span();
  for (int k = 0; k < kValidationSamples; ++k) {
    const double x = span * k / (kValidationSamples - 1);
    if (std::abs(p.envelope(x) - p.envelope(-x)) > kSymmetryTol) {
      throw ConfigError("envelope is not even in time");
    }
  }

  if (raw.symmetry_enforced) {
    for (int j = 1; j <= n - 1; ++j) {
      const int m = n - j;
      if (j >= m) break;
      if (!close(raw.couplings[j - 1], raw.couplings[m - 1])) {
        throw ConfigError(fmt_index_mismatch("xi", j, m, raw.couplings[j - 1], raw.couplings[m - 1]));
      }
    }
    const double tspan = span + std::abs(p.delay);
    for (int j = 2; j <= n - 1; ++j) {
      const int m = n + 1 - j;
      const auto& dj = raw.detunings[j - 2];
      const auto& dm = raw.detunings[m - 2];
      for (int k = 0; k < kValidationSamples; ++k) {
        const double t = tspan * k / (kValidationSamples - 1);
        if (!close(dj.value(t), dm.value(t))) {
          throw ConfigError(
              fmt_index_mismatch("Delta", j, m, dj.value(t), dm.value(t)) + " at t=" +
              std::to_string(t));
        }
        if (!close(dj.value(t), dj.value(-t))) {
          throw ConfigError("detuning Delta_" + std::to_string(j) + " is not even in time");
        }
      }
    }
  }
  return raw;
}

// ---------------------------------------------------------------------------
// JSON

ChainConfig config_from_json(const nlohmann::json& doc) {
  try {
    ChainConfig c;
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    c.num_states = doc.at("n_states").get<int>();
    c.couplings = doc.at("xi").get<std::vector<double>>();
    c.detunings.clear();
    if (doc.contains("detunings")) {
      for (const auto& d : doc.at("detunings")) {
        Detuning det;
        if (d.is_number()) {
          det.constant = d.get<double>();
        } else {
          det.constant = d.value("const", 0.0);
          det.gauss_amp = d.value("gauss_amp", 0.0);
          det.gauss_width = d.value("gauss_width", 1.0);
        }
        c.detunings.push_back(det);
      }
    } else if (c.num_states >= 2) {
      c.detunings.assign(static_cast<std::size_t>(std::max(0, c.num_states - 2)), Detuning{});
    }
    const auto& p = doc.at("pulse");
    c.pulse.shape = pulse_shape_from_string(p.value("shape", std::string("gaussian")));
    c.pulse.peak_rabi = p.at("omega0_T").get<double>();
    c.pulse.delay = p.value("tau_over_T", 0.0);
    c.pulse.width = 1.0;
    const std::string order = p.value("order", std::string("stokes_first"));
    if (order == "stokes_first") {
      c.pulse.order = PulseOrder::stokes_first;
    } else if (order == "swapped") {
      c.pulse.order = PulseOrder::swapped;
    } else {
      throw ConfigError("unknown pulse order '" + order + "'");
    }
    if (c.pulse.shape == PulseShape::custom) {
      c.pulse.custom = SampledEnvelope(p.at("samples").get<std::vector<double>>(),
                                       p.at("sample_step").get<double>());
    }
    c.symmetry_enforced = doc.value("symmetry_enforced", true);
    return validate_config(std::move(c));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

ChainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config file '" + path + "': " + e.what());
  }
  return config_from_json(doc);
}

nlohmann::json config_to_json(const ChainConfig& config) {
  nlohmann::json doc;
  doc["n_states"] = config.num_states;
  doc["xi"] = config.couplings;
  auto dets = nlohmann::json::array();
  for (const auto& d : config.detunings) {
    dets.push_back({{"const", d.constant}, {"gauss_amp", d.gauss_amp}, {"gauss_width", d.gauss_width}});
  }
  doc["detunings"] = dets;
  nlohmann::json pulse{{"shape", to_string(config.pulse.shape)},
                       {"omega0_T", config.pulse.peak_rabi * config.pulse.width},
                       {"tau_over_T", config.pulse.delay / config.pulse.width},
                       {"order", config.pulse.order == PulseOrder::stokes_first ? "stokes_first"
                                                                                : "swapped"}};
  if (config.pulse.shape == PulseShape::custom) {
    pulse["samples"] = config.pulse.custom.samples();
    pulse["sample_step"] = config.pulse.custom.step();
  }
  doc["pulse"] = pulse;
  doc["symmetry_enforced"] = config.symmetry_enforced;
  return doc;
}

std::string config_fingerprint(const ChainConfig& config) {
  const std::string text = config_to_json(config).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hamiltonian

double envelope_value(const PulseSpec& pulse, Pulse which, double t) {
  const double tau = pulse.effective_delay();
  const double x = which == Pulse::pump ? t - tau : t + tau;
  return pulse.peak_rabi * pulse.envelope(x);
}

double envelope_derivative(const PulseSpec& pulse, Pulse which, double t) {
  const double tau = pulse.effective_delay();
  const double x = which == Pulse::pump ? t - tau : t + tau;
  return pulse.peak_rabi * pulse.envelope_derivative(x);
}

SymTridiagonal hamiltonian_at(const ChainConfig& config, double t) {
  const auto n = static_cast<std::size_t>(config.num_states);
  SymTridiagonal h;
  h.diagonal.assign(n, 0.0);
  h.off_diagonal.resize(n - 1);
  const double pump = envelope_value(config.pulse, Pulse::pump, t);
  const double stokes = envelope_value(config.pulse, Pulse::stokes, t);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    // link j = i+1: odd j -> pump
    h.off_diagonal[i] = config.couplings[i] * (i % 2 == 0 ? pump : stokes);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) h.diagonal[i] = config.detunings[i - 1].value(t);
  return h;
}

SymTridiagonal hamiltonian_derivative_at(const ChainConfig& config, double t) {
  const auto n = static_cast<std::size_t>(config.num_states);
  SymTridiagonal h;
  h.diagonal.assign(n, 0.0);
  h.off_diagonal.resize(n - 1);
  const double pump = envelope_derivative(config.pulse, Pulse::pump, t);
  const double stokes = envelope_derivative(config.pulse, Pulse::stokes, t);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h.off_diagonal[i] = config.couplings[i] * (i % 2 == 0 ? pump : stokes);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) h.diagonal[i] = config.detunings[i - 1].derivative(t);
  return h;
}

ChainConfig swap_pulses(const ChainConfig& config) {
  ChainConfig out = config;
  out.pulse.order = config.pulse.order == PulseOrder::stokes_first ? PulseOrder::swapped
                                                                   : PulseOrder::stokes_first;
  return out;
}

ChainConfig mirror_indices(const ChainConfig& config) {
  ChainConfig out = config;
  std::reverse(out.couplings.begin(), out.couplings.end());
  std::reverse(out.detunings.begin(), out.detunings.end());
  return out;
}

ChainConfig with_delay(const ChainConfig& config, double delay) {
  ChainConfig out = config;
  out.pulse.delay = delay;
  out.pulse.order = PulseOrder::stokes_first;
  return out;
}

ChainConfig five_state_reference(double delay) {
  ChainConfig c;
  c.num_states = 5;
  const double a = std::sqrt(1.0 / 3.0);
  const double b = std::sqrt(1.0 / 2.0);
  c.couplings = {a, b, b, a};
  c.detunings.assign(3, Detuning{});
  c.pulse.shape = PulseShape::gaussian;
  c.pulse.peak_rabi = 30.0;
  c.pulse.width = 1.0;
  c.pulse.delay = delay;
  c.symmetry_enforced = true;
  return validate_config(std::move(c));
}

}  // namespace stirap
