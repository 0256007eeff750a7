// Damped-wave state on a 2D grid: field containers, one-sided difference
// operators, the explicit two-stage time stepper (velocity update followed by
// a reciprocal damping correction), and a dense assembly of the same linear
// update for oracle comparisons.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "biooss/common.hpp"

namespace biooss {

enum class BoundaryCondition { ZeroPad, Periodic };

struct GridShape {
  int h = 0;          // rows (x-direction index i)
  int w = 0;          // columns (y-direction index j)
  double dx = 1.0;    // spatial step
  double dt = 1.0;    // time step

  int cells() const { return h * w; }
  void validate() const;
  bool operator==(const GridShape& o) const = default;
};

// A real scalar field over an H x W grid, row-major.
struct Field {
  int h = 0;
  int w = 0;
  std::vector<double> a;

  Field() = default;
  Field(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), a(static_cast<std::size_t>(h_) * w_, fill) {}

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * w + j]; }
  double at(int i, int j) const {
    return a[static_cast<std::size_t>(i) * w + j];
  }
  std::size_t size() const { return a.size(); }

  bool same_shape(const Field& o) const { return h == o.h && w == o.w; }
};

// Throws DimensionError unless f matches shape.
void require_shape(const Field& f, const GridShape& shape, const char* label);

// Pressure-like scalar p plus the two velocity-like components.
struct GridState {
  Field p;
  Field ox;
  Field oy;

  GridState() = default;
  explicit GridState(const GridShape& s)
      : p(s.h, s.w), ox(s.h, s.w), oy(s.h, s.w) {}
};

// Per-cell wave speed and damping rates.
struct PhysicalParams {
  Field c;
  Field kp;
  Field ko;

  PhysicalParams() = default;
  explicit PhysicalParams(const GridShape& s)
      : c(s.h, s.w), kp(s.h, s.w), ko(s.h, s.w) {}

  // Checks positivity invariants; throws DomainError on violation.
  void validate(const GridShape& shape) const;

  // Uniform parameter constructor used heavily by tests and experiments.
  static PhysicalParams uniform(const GridShape& s, double c, double kp,
                                double ko);
};

// Backward one-sided differences (p_{i,j} - p_{i-1,j})/dx per axis.
// ZeroPad treats out-of-range entries as zero; Periodic wraps.
void gradient(const Field& p, const GridShape& shape, BoundaryCondition bc,
              Field& gx, Field& gy);

// Forward one-sided differences (o^x_{i+1,j} - o^x_{i,j})/dx summed over axes.
void divergence(const Field& ox, const Field& oy, const GridShape& shape,
                BoundaryCondition bc, Field& out);

// Allocating conveniences for the two stencils above.
std::pair<Field, Field> gradient(const Field& p, const GridShape& shape,
                                 BoundaryCondition bc);
Field divergence(const Field& ox, const Field& oy, const GridShape& shape,
                 BoundaryCondition bc);

// One explicit update:
//   o* = o - dt * grad(p)
//   p* = p - c^2 dt * div(o*) + dt * drive
//   o_new = o* / (1 + dt k^o),   p_new = p* / (1 + dt k^p)
// `drive` is the already-projected input for this step.
GridState step(const GridState& state, const PhysicalParams& params,
               const Field& drive, const GridShape& shape,
               BoundaryCondition bc);

// Iterates `step` over drives[0..T-1], recording every record_every-th state
// (1-based: steps record_every, 2*record_every, ...) plus always the final
// state. Raises NumericError with the failing step index on non-finite state.
std::vector<GridState> simulate(const GridState& x0,
                                const PhysicalParams& params,
                                const std::vector<Field>& drives,
                                const GridShape& shape, BoundaryCondition bc,
                                int record_every = 1);

// In-place variant used by hot loops: advances `state` by one step using
// caller-provided scratch fields (no allocation).
struct StepWorkspace {
  Field gx, gy, div;
  explicit StepWorkspace(const GridShape& s)
      : gx(s.h, s.w), gy(s.h, s.w), div(s.h, s.w) {}
};
void step_in_place(GridState& state, const PhysicalParams& params,
                   const Field& drive, const GridShape& shape,
                   BoundaryCondition bc, StepWorkspace& ws);

// Dense matrix of the zero-drive linear update over the stacked state
// (p, ox, oy) flattened row-major, built from independently assembled
// difference-operator matrices (not by probing `step`), so the two code
// paths can serve as mutual oracles. Guarded to HW <= 4096 cells.
Eigen::MatrixXd assemble_coupling_matrix(const PhysicalParams& params,
                                         const GridShape& shape,
                                         BoundaryCondition bc);

// Flatten/unflatten between GridState and the stacked (p, ox, oy) vector.
Eigen::VectorXd flatten_state(const GridState& s);
GridState unflatten_state(const Eigen::VectorXd& v, const GridShape& shape);

// Sum of elementwise products; the canonical inner product for adjoint tests.
double dot(const Field& a, const Field& b);

// Euclidean norm over all three components.
double state_norm(const GridState& s);

// Writes one field as CSV with header line `# field=<name> H=<H> W=<W> t=<t>`.
// Values carry 17 significant digits so a reload reproduces the doubles.
void write_field_snapshot(std::ostream& os, const Field& f,
                          const std::string& name, long t);

}  // namespace biooss
