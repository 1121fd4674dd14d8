#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bohmflow/guidance.hpp"
#include "bohmflow/linalg.hpp"
#include "bohmflow/oscillator.hpp"

namespace bohmflow {

/// A point of the base-state nodal line at time t, restricted to the sphere
/// of radius R, with its kinematics. C is the common ratio
/// sqrt(omega_k) x_k / sin(omega_ij t) shared by all three components.
struct NodalPoint {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    double C = 0.0;
    Vec3 velocity = Vec3::Zero();
    Vec3 acceleration = Vec3::Zero();
};

/// Rotation S(t) carrying lab coordinates into the frame whose third axis
/// lies along the nodal direction.
struct ComovingFrame {
    double theta = 0.0;  // [0, pi]
    double phi = 0.0;    // [0, 2 pi)
    Mat3 S = Mat3::Identity();
};

/// Coefficients of the reduced planar flow in the comoving frame:
///   du/dt = (B/G) v - V_u,   dv/dt = -(B/G) u - V_v,
///   G = Phi1 u^2 + Phi2 u v + Phi3 v^2.
struct PlanarFlow {
    double t = 0.0;
    double R = 0.0;
    double B = 0.0;
    double Phi1 = 0.0, Phi2 = 0.0, Phi3 = 0.0;
    double V_u = 0.0, V_v = 0.0;
    ComovingFrame frame;
    NodalPoint node;
};

/// The hyperbolic companion critical point of the reduced flow.
struct XPoint {
    double u = 0.0, v = 0.0;  // w' = 0 by the reduction
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;  // Jacobian entries at the X-point
    double lambda1 = 0.0, lambda2 = 0.0;        // lambda1 > 0 > lambda2
    double slope1 = 0.0, slope2 = 0.0;          // eigenvector slopes (lambda - a)/b
};

enum class ManifoldBranch { UnstablePlus, UnstableMinus, StablePlus, StableMinus };

enum class CurveEnd { NearNode, DomainBox, ArcLengthCap, WindingCap, StepLimit };

struct ManifoldCurve {
    ManifoldBranch branch{};
    double frozen_t = 0.0;
    double R = 0.0;
    std::vector<double> s;       // fictitious time along the frozen flow (signed)
    std::vector<Vec2> points;    // (u', v') samples aligned with s
    CurveEnd termination = CurveEnd::StepLimit;
};

struct TraceOptions {
    double seed = 1e-5;
    double arc_cap = 250.0;
    double box_factor = 2.0;       // domain box |u'|,|v'| <= box_factor * R
    double max_winding = 1e9;      // radians around the node
    long max_steps = 2'000'000;
};

/// Winding and radial trend of a traced curve around the node at the origin.
struct SpiralStats {
    double total_winding = 0.0;            // radians, signed
    double trend = 0.0;                    // d(ln r)/d|winding|, negative = inward
    std::vector<double> turn_radii;        // radius at each completed turn
    bool has_trend = false;                // at least two full turns
};

enum class ComplexStability { Stable, Unstable };

struct HopfTransition {
    double t_star = 0.0;
    ComplexStability before{};
    ComplexStability after{};
};

struct StructureLayer {
    double R = 0.0;
    NodalPoint node;
    std::optional<XPoint> xpoint;
    Vec3 xpoint_lab = Vec3::Zero();
    std::string degeneracy;  // empty when the X-point was computed
    std::vector<ManifoldCurve> manifolds;
};

struct NodalXStructure {
    double t = 0.0;
    std::vector<StructureLayer> layers;
};

/// Unit vector along the nodal line, sign fixed so the common ratio C is
/// positive. Throws DegenerateTimeError when all defining sines vanish.
Vec3 nodal_direction(double t, const OscillatorConfig& config = {});

NodalPoint nodal_point(double t, double R, const OscillatorConfig& config = {});

/// Analytic first and second time derivatives of the nodal point position.
std::pair<Vec3, Vec3> nodal_kinematics(double t, double R, const OscillatorConfig& config = {});

/// Newton refinement of a node of an arbitrary state, constrained to the
/// sphere |x| = |guess|. Residual target |Psi| < 1e-12.
Vec3 nodal_point_numeric(const Superposition& state, double t, const Vec3& guess);

ComovingFrame comoving_frame(double t, double R, const OscillatorConfig& config = {});

PlanarFlow planar_flow(double t, double R, const OscillatorConfig& config = {});

/// (F1, F2) of the reduced flow; NearNodeError when G < eps_g.
Vec2 planar_velocity(const PlanarFlow& pf, double u, double v, double eps_g = 1e-12);

XPoint xpoint_from(const PlanarFlow& pf);
XPoint xpoint(double t, double R, const OscillatorConfig& config = {});

/// X-point mapped back to lab coordinates: x_nod + S^T (u'_X, v'_X, 0).
Vec3 xpoint_lab_position(const PlanarFlow& pf, const XPoint& xp);

/// Integrates the frozen-time flow from a seed displaced along the matching
/// eigenvector; forward in s for unstable branches, backward for stable ones.
ManifoldCurve manifold_trace(double t, double R, ManifoldBranch branch,
                             const IntegratorSettings& settings = {},
                             const TraceOptions& opts = {},
                             const OscillatorConfig& config = {});

/// Frozen-flow streamline from an arbitrary seed (time_sign = +1 or -1).
ManifoldCurve trace_frozen_flow(const PlanarFlow& pf, const Vec2& p0, int time_sign,
                                const IntegratorSettings& settings = {},
                                const TraceOptions& opts = {});

SpiralStats analyze_spiral(const ManifoldCurve& curve);

/// Which manifold type reaches the node's neighbourhood and spirals into it.
/// Throws ClassificationAmbiguousError near a transition.
ComplexStability classify_complex(double t, double R, const OscillatorConfig& config = {},
                                  const IntegratorSettings& settings = {});

/// Scans [t_lo, t_hi] at spacing dt and bisects every stability change to
/// tolerance tol. Ambiguous samples are skipped; bisection uses the nearest
/// unambiguous labels.
std::vector<HopfTransition> hopf_scan(double R, double t_lo, double t_hi, double dt,
                                      const OscillatorConfig& config = {},
                                      const IntegratorSettings& settings = {},
                                      double tol = 1e-3);

/// Per-layer nodal point + X-point assembly over a grid of sphere radii.
/// X-point degeneracies are recorded per layer, not propagated.
NodalXStructure foliation(double t, const std::vector<double>& R_grid,
                          const OscillatorConfig& config = {}, bool with_manifolds = false,
                          const IntegratorSettings& settings = {});

/// Minimum distance from x to the layered X-points (both central-symmetric
/// copies of each). Layers whose X-point is degenerate are skipped.
double distance_to_structure(const Vec3& x, double t, const std::vector<double>& R_grid,
                             const OscillatorConfig& config = {});

/// Distance to the X-point of the single layer R = |x|.
double distance_to_xpoint(const Vec3& x, double t, const OscillatorConfig& config = {});

/// Perpendicular distance from x to the nodal line through the origin.
double distance_to_nodal_line(const Vec3& x, double t, const OscillatorConfig& config = {});

/// Distance to the full structure skeleton: nodal line plus layered X-points.
double distance_to_complexes(const Vec3& x, double t, const std::vector<double>& R_grid,
                             const OscillatorConfig& config = {});

/// Sign- and pole-continuous nodal direction / frame along a time series.
class NodalPathTracker {
  public:
    explicit NodalPathTracker(OscillatorConfig config = {}) : config_(std::move(config)) {}

    NodalPoint point(double t, double R);
    ComovingFrame frame(double t, double R);
    void reset();

  private:
    OscillatorConfig config_;
    double sigma_ = 1.0;
    bool have_prev_ = false;
    Vec3 prev_n_ = Vec3::Zero();
    double prev_phi_ = 0.0;
    bool have_phi_ = false;
};

}  // namespace bohmflow
