#include "ihtp/flux_signals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "ihtp/error.hpp"
#include "ihtp/io.hpp"

namespace ihtp {

std::string to_string(FluxKind kind) {
  switch (kind) {
    case FluxKind::Step: return "step";
    case FluxKind::Triangular: return "triangular";
    case FluxKind::Sinusoidal: return "sinusoidal";
    case FluxKind::Parabolic: return "parabolic";
    case FluxKind::Smooth: return "smooth";
  }
  return "unknown";
}

FluxKind flux_kind_from_string(const std::string& name) {
  for (auto k : {FluxKind::Step, FluxKind::Triangular, FluxKind::Sinusoidal, FluxKind::Parabolic,
                 FluxKind::Smooth})
    if (to_string(k) == name || family_label(k) == name) return k;
  fail(ErrorKind::InvalidArgument, "unknown flux kind '" + name + "'");
}

std::string family_label(FluxKind kind) {
  switch (kind) {
    case FluxKind::Step: return "step";
    case FluxKind::Triangular: return "tri";
    case FluxKind::Sinusoidal: return "sin";
    case FluxKind::Parabolic: return "para";
    case FluxKind::Smooth: return "smooth";
  }
  return "unknown";
}

FluxKind flux_kind_from_family(const std::string& label) { return flux_kind_from_string(label); }

void FluxSegment::validate() const {
  require(std::isfinite(duration) && duration > 0.0, ErrorKind::InvalidArgument,
          "flux segment duration must be positive");
  require(std::isfinite(amplitude) && std::isfinite(offset), ErrorKind::InvalidArgument,
          "flux segment amplitude/offset must be finite");
  if (kind == FluxKind::Triangular || kind == FluxKind::Sinusoidal)
    require(std::isfinite(frequency) && frequency > 0.0, ErrorKind::InvalidArgument,
            "periodic flux segment needs a positive frequency");
  if (kind == FluxKind::Smooth) {
    require(control_points.size() >= 2, ErrorKind::InvalidArgument,
            "smooth flux segment needs at least two control points");
    for (std::size_t i = 0; i < control_points.size(); ++i) {
      require(std::isfinite(control_points[i].first) && std::isfinite(control_points[i].second),
              ErrorKind::InvalidArgument, "smooth flux control point is not finite");
      if (i)
        require(control_points[i].first > control_points[i - 1].first, ErrorKind::InvalidArgument,
                "smooth flux control points must be strictly increasing in time");
    }
  }
}

void FluxSignal::validate() const {
  require(std::isfinite(dt) && dt > 0.0, ErrorKind::InvalidArgument, "flux signal dt must be positive");
  for (double s : samples)
    require(std::isfinite(s), ErrorKind::InvalidArgument, "flux signal has a non-finite sample");
}

NaturalCubicSpline::NaturalCubicSpline(std::vector<std::pair<double, double>> knots) {
  require(knots.size() >= 2, ErrorKind::InvalidArgument, "spline needs at least two knots");
  const std::size_t n = knots.size();
  t_.resize(n);
  y_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t_[i] = knots[i].first;
    y_[i] = knots[i].second;
    if (i)
      require(t_[i] > t_[i - 1], ErrorKind::InvalidArgument, "spline knots must be strictly increasing");
  }
  // Tridiagonal system for interior second derivatives, natural ends (m0 = mn = 0).
  m_.assign(n, 0.0);
  if (n < 3) return;
  std::vector<double> c(n, 0.0), d(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = t_[i] - t_[i - 1];
    const double h1 = t_[i + 1] - t_[i];
    const double a = h0 / 6.0;
    const double b = (h0 + h1) / 3.0;
    const double cc = h1 / 6.0;
    const double rhs = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    const double denom = b - a * c[i - 1];
    c[i] = cc / denom;
    d[i] = (rhs - a * d[i - 1]) / denom;
  }
  for (std::size_t i = n - 2; i >= 1; --i) m_[i] = d[i] - c[i] * m_[i + 1];
}

double NaturalCubicSpline::operator()(double t) const {
  if (t <= t_.front()) return y_.front();
  if (t >= t_.back()) return y_.back();
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
  const double h = t_[i + 1] - t_[i];
  const double a = (t_[i + 1] - t) / h;
  const double b = (t - t_[i]) / h;
  return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

namespace {

// Fractional position within the period for sample k. When the period is a whole
// number of samples the phase is computed from k mod period so repeats are exact.
double periodic_phase(std::size_t k, double frequency, double dt) {
  const double per = 1.0 / (frequency * dt);
  const double rounded = std::round(per);
  if (rounded >= 1.0 && std::abs(per - rounded) <= 1e-9 * per) {
    const auto p = static_cast<std::size_t>(rounded);
    return static_cast<double>(k % p) / static_cast<double>(p);
  }
  const double x = frequency * static_cast<double>(k) * dt;
  return x - std::floor(x);
}

}  // namespace

FluxSignal render_segment(const FluxSegment& seg, double dt) {
  seg.validate();
  require(std::isfinite(dt) && dt > 0.0, ErrorKind::InvalidArgument, "render_segment: dt must be positive");
  const double exact = seg.duration / dt;
  const auto n = static_cast<std::size_t>(std::llround(exact));
  require(n >= 1, ErrorKind::InvalidArgument, "render_segment: duration shorter than half a sample");

  FluxSignal out{dt, std::vector<double>(n)};
  std::optional<NaturalCubicSpline> spline;
  if (seg.kind == FluxKind::Smooth) spline.emplace(seg.control_points);

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    double v = 0.0;
    switch (seg.kind) {
      case FluxKind::Step:
        v = seg.offset + seg.amplitude;
        break;
      case FluxKind::Triangular: {
        const double phase = periodic_phase(k, seg.frequency, dt);
        v = seg.offset + seg.amplitude * (1.0 - std::abs(2.0 * phase - 1.0));
        break;
      }
      case FluxKind::Sinusoidal: {
        const double phase = periodic_phase(k, seg.frequency, dt);
        v = seg.offset + seg.amplitude * std::sin(2.0 * std::numbers::pi * phase);
        break;
      }
      case FluxKind::Parabolic: {
        const double s = t / seg.duration;
        v = seg.offset + 4.0 * seg.amplitude * s * (1.0 - s);
        break;
      }
      case FluxKind::Smooth:
        v = (*spline)(t);
        break;
    }
    out.samples[k] = v;
  }
  return out;
}

FluxSignal concat(std::span<const FluxSignal> signals) {
  require(!signals.empty(), ErrorKind::InvalidArgument, "concat: no signals given");
  FluxSignal out{signals.front().dt, {}};
  std::size_t total = 0;
  for (const auto& s : signals) {
    require(std::abs(s.dt - out.dt) <= 1e-12 * out.dt, ErrorKind::InvalidArgument,
            "concat: signals have different dt");
    total += s.size();
  }
  out.samples.reserve(total);
  for (const auto& s : signals) out.samples.insert(out.samples.end(), s.samples.begin(), s.samples.end());
  return out;
}

SignalManifest SignalManifest::without(const std::set<std::string>& excluded) const {
  for (const auto& f : excluded) flux_kind_from_family(f);  // reject unknown labels
  SignalManifest out{name, version, {}};
  if (!excluded.empty()) {
    out.name += "-without";
    for (const auto& f : excluded) out.name += "-" + f;
  }
  for (const auto& seg : segments)
    if (!excluded.contains(family_label(seg.kind))) out.segments.push_back(seg);
  require(!out.segments.empty(), ErrorKind::InvalidArgument,
          "manifest '" + name + "' has no segments left after exclusion");
  return out;
}

std::set<std::string> SignalManifest::families() const {
  std::set<std::string> out;
  for (const auto& seg : segments) out.insert(family_label(seg.kind));
  return out;
}

nlohmann::json SignalManifest::to_json() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : segments) {
    nlohmann::json j{{"family", family_label(s.kind)},
                     {"kind", to_string(s.kind)},
                     {"duration", s.duration},
                     {"amplitude", s.amplitude},
                     {"offset", s.offset},
                     {"frequency", s.frequency}};
    if (s.kind == FluxKind::Smooth) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& [t, q] : s.control_points) pts.push_back({t, q});
      j["control_points"] = pts;
    }
    segs.push_back(j);
  }
  return {{"format", "ihtp-signal-manifest"}, {"name", name}, {"version", version}, {"segments", segs}};
}

SignalManifest SignalManifest::from_json(const nlohmann::json& doc) {
  try {
    SignalManifest m;
    m.name = doc.at("name").get<std::string>();
    m.version = doc.at("version").get<int>();
    for (const auto& j : doc.at("segments")) {
      FluxSegment s;
      s.kind = flux_kind_from_string(j.at("kind").get<std::string>());
      s.duration = j.at("duration").get<double>();
      s.amplitude = j.value("amplitude", 0.0);
      s.offset = j.value("offset", 0.0);
      s.frequency = j.value("frequency", 0.0);
      if (j.contains("control_points"))
        for (const auto& p : j.at("control_points"))
          s.control_points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      s.validate();
      m.segments.push_back(std::move(s));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed signal manifest: ") + e.what());
  }
}

std::string SignalManifest::hash() const { return io::json_hash(to_json()); }

RenderedSignal render_manifest(const SignalManifest& manifest, double dt) {
  require(!manifest.segments.empty(), ErrorKind::InvalidArgument, "render_manifest: empty manifest");
  std::vector<FluxSignal> parts;
  RenderedSignal out;
  std::size_t pos = 0;
  for (const auto& seg : manifest.segments) {
    parts.push_back(render_segment(seg, dt));
    const std::string fam = family_label(seg.kind);
    const std::size_t len = parts.back().size();
    if (!out.sections.empty() && out.sections.back().family == fam) {
      out.sections.back().end += len;
    } else {
      out.sections.push_back({fam, pos, pos + len});
    }
    pos += len;
  }
  out.signal = concat(parts);
  return out;
}

namespace {

FluxSegment step(double level, double duration) {
  return {FluxKind::Step, duration, level, 0.0, 0.0, {}};
}
FluxSegment tri(double offset, double amplitude, double frequency, double duration) {
  return {FluxKind::Triangular, duration, amplitude, offset, frequency, {}};
}
FluxSegment sine(double offset, double amplitude, double frequency, double duration) {
  return {FluxKind::Sinusoidal, duration, amplitude, offset, frequency, {}};
}
FluxSegment para(double offset, double amplitude, double duration) {
  return {FluxKind::Parabolic, duration, amplitude, offset, 0.0, {}};
}

}  // namespace

// Each family spans 16.98-16.99 s (1698-1699 samples at 0.01 s), 67.94 s in total.
// Step "frequency" is the switching rate, set by the segment durations.
SignalManifest builtin_training_manifest() {
  SignalManifest m{"builtin-training", 1, {}};
  auto& s = m.segments;
  // step: 1699 samples
  for (auto seg : {step(1500, 2.0), step(4000, 2.0), step(500, 2.0), step(3000, 1.0), step(0, 1.0),
                   step(5000, 1.0), step(2000, 1.0), step(1000, 2.0), step(3500, 2.0), step(0, 2.99)})
    s.push_back(seg);
  // triangular: 1698 samples
  for (auto seg : {tri(0, 4000, 0.25, 4.0), tri(500, 2000, 0.5, 4.0), tri(1000, 3000, 0.2, 5.0),
                   tri(0, 5000, 0.25, 3.98)})
    s.push_back(seg);
  // sinusoidal: 1699 samples
  for (auto seg : {sine(2500, 2500, 0.25, 4.0), sine(2000, 1500, 0.5, 4.0), sine(3000, 2000, 1.0, 3.0),
                   sine(1500, 1000, 0.2, 5.99)})
    s.push_back(seg);
  // parabolic: 1698 samples
  for (auto seg : {para(0, 5000, 4.0), para(500, 2500, 3.0), para(0, 3500, 5.0), para(1000, 2000, 2.0),
                   para(0, 1500, 2.98)})
    s.push_back(seg);
  return m;
}

SignalManifest builtin_testing_manifest() {
  SignalManifest m{"builtin-testing", 1, {}};
  FluxSegment curve{FluxKind::Smooth, 10.0, 0.0, 0.0, 0.0,
                    {{0.0, 0.0}, {1.5, 1800.0}, {3.0, 3200.0}, {4.5, 2200.0}, {6.0, 2800.0},
                     {7.5, 1200.0}, {9.0, 600.0}, {10.0, 900.0}}};
  m.segments.push_back(curve);
  m.segments.push_back(step(3700, 3.5));
  m.segments.push_back(step(1200, 3.0));
  m.segments.push_back(step(4400, 3.5));
  m.segments.push_back(tri(300, 3600, 0.3, 10.0));
  return m;
}

FluxSignal builtin_training_signal(double dt) { return render_manifest(builtin_training_manifest(), dt).signal; }
FluxSignal builtin_testing_signal(double dt) { return render_manifest(builtin_testing_manifest(), dt).signal; }

void write_signal_csv(const std::filesystem::path& path, const FluxSignal& signal) {
  signal.validate();
  const std::vector<std::string> header{"t", "q"};
  io::CsvWriter csv(path, header);
  for (std::size_t k = 0; k < signal.size(); ++k) {
    const double row[2] = {static_cast<double>(k) * signal.dt, signal.samples[k]};
    csv.row(std::span<const double>(row, 2));
  }
  csv.close();
}

FluxSignal read_signal_csv(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  const auto ct = table.column("t");
  const auto cq = table.column("q");
  require(table.rows.size() >= 2, ErrorKind::Io, "signal CSV needs at least two rows to infer dt");
  FluxSignal out;
  out.dt = table.number(1, ct) - table.number(0, ct);
  require(out.dt > 0.0, ErrorKind::Io, "signal CSV time column is not increasing");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double expected = table.number(0, ct) + static_cast<double>(r) * out.dt;
    require(std::abs(table.number(r, ct) - expected) <= 1e-6 * out.dt + 1e-9 * std::abs(expected),
            ErrorKind::Io, "signal CSV rows are not evenly spaced");
    out.samples.push_back(table.number(r, cq));
  }
  out.validate();
  return out;
}

}  // namespace ihtp
