#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace ihtp {

enum class FluxKind { Step, Triangular, Sinusoidal, Parabolic, Smooth };

std::string to_string(FluxKind kind);
FluxKind flux_kind_from_string(const std::string& name);

/// Short family labels used for dataset ablation: "step", "tri", "sin", "para", "smooth".
std::string family_label(FluxKind kind);
FluxKind flux_kind_from_family(const std::string& label);

struct FluxSegment {
  FluxKind kind = FluxKind::Step;
  double duration = 1.0;   // s
  double amplitude = 0.0;  // W/m^2
  double offset = 0.0;     // W/m^2
  double frequency = 0.0;  // Hz, triangular and sinusoidal only
  std::vector<std::pair<double, double>> control_points;  // (s, W/m^2), smooth only

  void validate() const;
};

struct FluxSignal {
  double dt = 0.01;
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  void validate() const;
};

/// Natural cubic spline through strictly increasing knots. Clamped to the end
/// values outside the knot range.
class NaturalCubicSpline {
 public:
  explicit NaturalCubicSpline(std::vector<std::pair<double, double>> knots);
  double operator()(double t) const;

 private:
  std::vector<double> t_, y_, m_;  // m_: second derivatives at the knots
};

/// Samples at t = k*dt, k = 0 .. round(duration/dt) - 1, relative to the segment start.
FluxSignal render_segment(const FluxSegment& segment, double dt);

FluxSignal concat(std::span<const FluxSignal> signals);

/// A reproducible composition of labelled segments.
struct SignalManifest {
  std::string name;
  int version = 1;
  std::vector<FluxSegment> segments;

  /// Drops every segment whose family label is in `families`.
  SignalManifest without(const std::set<std::string>& families) const;
  std::set<std::string> families() const;

  nlohmann::json to_json() const;
  static SignalManifest from_json(const nlohmann::json& doc);
  std::string hash() const;
};

struct RenderedSignal {
  FluxSignal signal;
  /// [begin, end) sample range and family label for each contiguous family run.
  struct Section {
    std::string family;
    std::size_t begin = 0;
    std::size_t end = 0;
  };
  std::vector<Section> sections;
};

RenderedSignal render_manifest(const SignalManifest& manifest, double dt);

/// Step, triangular, sinusoidal and parabolic sections of near-equal length; 6794 samples at 0.01 s.
SignalManifest builtin_training_manifest();
/// Smooth curve, step and triangular sections with levels unused in training.
SignalManifest builtin_testing_manifest();

FluxSignal builtin_training_signal(double dt = 0.01);
FluxSignal builtin_testing_signal(double dt = 0.01);

/// CSV with header `t,q`; dt is recovered from the row spacing.
void write_signal_csv(const std::filesystem::path& path, const FluxSignal& signal);
FluxSignal read_signal_csv(const std::filesystem::path& path);

}  // namespace ihtp
