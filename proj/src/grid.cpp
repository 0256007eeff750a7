#include "biooss/grid.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace biooss {

void GridShape::validate() const {
  if (h < 2 || w < 2) {
    throw DimensionError("grid must be at least 2x2 for difference stencils");
  }
  if (!(dx > 0.0) || !(dt > 0.0)) {
    throw DomainError("dx and dt must be positive");
  }
}

void require_shape(const Field& f, const GridShape& shape, const char* label) {
  if (f.h != shape.h || f.w != shape.w) {
    throw DimensionError(std::string(label) + ": field is " +
                         std::to_string(f.h) + "x" + std::to_string(f.w) +
                         ", expected " + std::to_string(shape.h) + "x" +
                         std::to_string(shape.w));
  }
}

void PhysicalParams::validate(const GridShape& shape) const {
  require_shape(c, shape, "params.c");
  require_shape(kp, shape, "params.kp");
  require_shape(ko, shape, "params.ko");
  for (std::size_t n = 0; n < c.a.size(); ++n) {
    // c = 0 is admitted (pure damping, no propagation); the damping rates
    // must be strictly positive for the reciprocal correction to contract.
    if (!(c.a[n] >= 0.0) || !(kp.a[n] > 0.0) || !(ko.a[n] > 0.0)) {
      throw DomainError("c must be >= 0 and kp, ko > 0 everywhere");
    }
    if (!std::isfinite(c.a[n]) || !std::isfinite(kp.a[n]) ||
        !std::isfinite(ko.a[n])) {
      throw NumericError("non-finite physical parameter");
    }
  }
}

PhysicalParams PhysicalParams::uniform(const GridShape& s, double c, double kp,
                                       double ko) {
  PhysicalParams p(s);
  std::fill(p.c.a.begin(), p.c.a.end(), c);
  std::fill(p.kp.a.begin(), p.kp.a.end(), kp);
  std::fill(p.ko.a.begin(), p.ko.a.end(), ko);
  return p;
}

void gradient(const Field& p, const GridShape& shape, BoundaryCondition bc,
              Field& gx, Field& gy) {
  require_shape(p, shape, "gradient input");
  require_finite(p.a, "gradient input");
  const int h = shape.h, w = shape.w;
  const double inv_dx = 1.0 / shape.dx;
  gx = Field(h, w);
  gy = Field(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double up, left;
      if (bc == BoundaryCondition::ZeroPad) {
        up = (i > 0) ? p.at(i - 1, j) : 0.0;
        left = (j > 0) ? p.at(i, j - 1) : 0.0;
      } else {
        up = p.at((i + h - 1) % h, j);
        left = p.at(i, (j + w - 1) % w);
      }
      gx.at(i, j) = (p.at(i, j) - up) * inv_dx;
      gy.at(i, j) = (p.at(i, j) - left) * inv_dx;
    }
  }
}

void divergence(const Field& ox, const Field& oy, const GridShape& shape,
                BoundaryCondition bc, Field& out) {
  require_shape(ox, shape, "divergence input ox");
  require_shape(oy, shape, "divergence input oy");
  require_finite(ox.a, "divergence input ox");
  require_finite(oy.a, "divergence input oy");
  const int h = shape.h, w = shape.w;
  const double inv_dx = 1.0 / shape.dx;
  out = Field(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double down, right;
      if (bc == BoundaryCondition::ZeroPad) {
        down = (i + 1 < h) ? ox.at(i + 1, j) : 0.0;
        right = (j + 1 < w) ? oy.at(i, j + 1) : 0.0;
      } else {
        down = ox.at((i + 1) % h, j);
        right = oy.at(i, (j + 1) % w);
      }
      out.at(i, j) =
          (down - ox.at(i, j)) * inv_dx + (right - oy.at(i, j)) * inv_dx;
    }
  }
}

std::pair<Field, Field> gradient(const Field& p, const GridShape& shape,
                                 BoundaryCondition bc) {
  Field gx, gy;
  gradient(p, shape, bc, gx, gy);
  return {std::move(gx), std::move(gy)};
}

Field divergence(const Field& ox, const Field& oy, const GridShape& shape,
                 BoundaryCondition bc) {
  Field out;
  divergence(ox, oy, shape, bc, out);
  return out;
}

void step_in_place(GridState& state, const PhysicalParams& params,
                   const Field& drive, const GridShape& shape,
                   BoundaryCondition bc, StepWorkspace& ws) {
  const int h = shape.h, w = shape.w;
  const double dt = shape.dt;
  const double inv_dx = 1.0 / shape.dx;

  // o* = o - dt grad(p), written into state.ox/oy.
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double up, left;
      if (bc == BoundaryCondition::ZeroPad) {
        up = (i > 0) ? state.p.at(i - 1, j) : 0.0;
        left = (j > 0) ? state.p.at(i, j - 1) : 0.0;
      } else {
        up = state.p.at((i + h - 1) % h, j);
        left = state.p.at(i, (j + w - 1) % w);
      }
      state.ox.at(i, j) -= dt * (state.p.at(i, j) - up) * inv_dx;
      state.oy.at(i, j) -= dt * (state.p.at(i, j) - left) * inv_dx;
    }
  }
  // p* = p - c^2 dt div(o*) + dt drive, then both damping corrections.
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double down, right;
      if (bc == BoundaryCondition::ZeroPad) {
        down = (i + 1 < h) ? state.ox.at(i + 1, j) : 0.0;
        right = (j + 1 < w) ? state.oy.at(i, j + 1) : 0.0;
      } else {
        down = state.ox.at((i + 1) % h, j);
        right = state.oy.at(i, (j + 1) % w);
      }
      double div = (down - state.ox.at(i, j)) * inv_dx +
                   (right - state.oy.at(i, j)) * inv_dx;
      ws.div.at(i, j) = div;
    }
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double c = params.c.at(i, j);
      double pstar =
          state.p.at(i, j) - c * c * dt * ws.div.at(i, j) + dt * drive.at(i, j);
      state.p.at(i, j) = pstar / (1.0 + dt * params.kp.at(i, j));
      state.ox.at(i, j) /= 1.0 + dt * params.ko.at(i, j);
      state.oy.at(i, j) /= 1.0 + dt * params.ko.at(i, j);
    }
  }
}

GridState step(const GridState& state, const PhysicalParams& params,
               const Field& drive, const GridShape& shape,
               BoundaryCondition bc) {
  shape.validate();
  params.validate(shape);
  require_shape(state.p, shape, "state.p");
  require_shape(state.ox, shape, "state.ox");
  require_shape(state.oy, shape, "state.oy");
  require_shape(drive, shape, "drive");
  GridState out = state;
  StepWorkspace ws(shape);
  step_in_place(out, params, drive, shape, bc, ws);
  require_finite(out.p.a, "step output p");
  require_finite(out.ox.a, "step output ox");
  require_finite(out.oy.a, "step output oy");
  return out;
}

std::vector<GridState> simulate(const GridState& x0,
                                const PhysicalParams& params,
                                const std::vector<Field>& drives,
                                const GridShape& shape, BoundaryCondition bc,
                                int record_every) {
  shape.validate();
  params.validate(shape);
  if (drives.empty()) {
    throw DimensionError("simulate requires at least one drive step");
  }
  if (record_every < 1) {
    throw DomainError("record_every must be >= 1");
  }
  GridState cur = x0;
  StepWorkspace ws(shape);
  std::vector<GridState> recorded;
  const long T = static_cast<long>(drives.size());
  for (long n = 0; n < T; ++n) {
    require_shape(drives[n], shape, "drive");
    step_in_place(cur, params, drives[n], shape, bc, ws);
    bool finite = true;
    for (double v : cur.p.a) {
      if (!std::isfinite(v)) {
        finite = false;
        break;
      }
    }
    if (!finite) {
      throw NumericError("state became non-finite during simulate", n);
    }
    if ((n + 1) % record_every == 0 || n + 1 == T) {
      recorded.push_back(cur);
    }
  }
  return recorded;
}

namespace {

// Dense backward-difference gradient operators Gx, Gy (HW x HW) and forward
// difference divergence Dx, Dy, assembled entry by entry from the stencil
// definitions. Kept independent from step()'s fused loops on purpose: the
// equality of the two implementations is a tested oracle, not a tautology.
void assemble_difference_operators(const GridShape& shape, BoundaryCondition bc,
                                   Eigen::MatrixXd& gx_op,
                                   Eigen::MatrixXd& gy_op,
                                   Eigen::MatrixXd& dx_op,
                                   Eigen::MatrixXd& dy_op) {
  const int h = shape.h, w = shape.w, n = h * w;
  const double inv_dx = 1.0 / shape.dx;
  gx_op = Eigen::MatrixXd::Zero(n, n);
  gy_op = Eigen::MatrixXd::Zero(n, n);
  dx_op = Eigen::MatrixXd::Zero(n, n);
  dy_op = Eigen::MatrixXd::Zero(n, n);
  auto idx = [w](int i, int j) { return i * w + j; };
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      int r = idx(i, j);
      gx_op(r, r) += inv_dx;
      gy_op(r, r) += inv_dx;
      dx_op(r, r) -= inv_dx;
      dy_op(r, r) -= inv_dx;
      if (i > 0) {
        gx_op(r, idx(i - 1, j)) -= inv_dx;
      } else if (bc == BoundaryCondition::Periodic) {
        gx_op(r, idx(h - 1, j)) -= inv_dx;
      }
      if (j > 0) {
        gy_op(r, idx(i, j - 1)) -= inv_dx;
      } else if (bc == BoundaryCondition::Periodic) {
        gy_op(r, idx(i, w - 1)) -= inv_dx;
      }
      if (i + 1 < h) {
        dx_op(r, idx(i + 1, j)) += inv_dx;
      } else if (bc == BoundaryCondition::Periodic) {
        dx_op(r, idx(0, j)) += inv_dx;
      }
      if (j + 1 < w) {
        dy_op(r, idx(i, j + 1)) += inv_dx;
      } else if (bc == BoundaryCondition::Periodic) {
        dy_op(r, idx(i, 0)) += inv_dx;
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd assemble_coupling_matrix(const PhysicalParams& params,
                                         const GridShape& shape,
                                         BoundaryCondition bc) {
  shape.validate();
  params.validate(shape);
  const int n = shape.cells();
  if (n > 4096) {
    throw CapacityError("assemble_coupling_matrix is limited to HW <= 4096 "
                        "cells (dense 3HW x 3HW storage)");
  }
  Eigen::MatrixXd gx_op, gy_op, dx_op, dy_op;
  assemble_difference_operators(shape, bc, gx_op, gy_op, dx_op, dy_op);

  const double dt = shape.dt;
  Eigen::VectorXd c2(n), alpha(n), beta(n);
  for (int r = 0; r < n; ++r) {
    c2(r) = params.c.a[r] * params.c.a[r];
    alpha(r) = 1.0 / (1.0 + dt * params.kp.a[r]);
    beta(r) = 1.0 / (1.0 + dt * params.ko.a[r]);
  }

  // Stage one (velocity update, with o* substituted into the p update):
  //   o*x = ox - dt Gx p,  o*y = oy - dt Gy p
  //   p*  = p - c^2 dt (Dx o*x + Dy o*y)
  //       = (I + c^2 dt^2 (Dx Gx + Dy Gy)) p - c^2 dt Dx ox - c^2 dt Dy oy
  // Stage two scales rows by the damping reciprocals.
  Eigen::MatrixXd a(3 * n, 3 * n);
  a.setZero();
  Eigen::MatrixXd lap = dx_op * gx_op + dy_op * gy_op;
  a.block(0, 0, n, n) =
      Eigen::MatrixXd::Identity(n, n) + dt * dt * c2.asDiagonal() * lap;
  a.block(0, n, n, n) = -dt * c2.asDiagonal() * dx_op;
  a.block(0, 2 * n, n, n) = -dt * c2.asDiagonal() * dy_op;
  a.block(n, 0, n, n) = -dt * gx_op;
  a.block(n, n, n, n) = Eigen::MatrixXd::Identity(n, n);
  a.block(2 * n, 0, n, n) = -dt * gy_op;
  a.block(2 * n, 2 * n, n, n) = Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd damp(3 * n);
  damp.segment(0, n) = alpha;
  damp.segment(n, n) = beta;
  damp.segment(2 * n, n) = beta;
  return damp.asDiagonal() * a;
}

Eigen::VectorXd flatten_state(const GridState& s) {
  const int n = s.p.h * s.p.w;
  Eigen::VectorXd v(3 * n);
  for (int r = 0; r < n; ++r) {
    v(r) = s.p.a[r];
    v(n + r) = s.ox.a[r];
    v(2 * n + r) = s.oy.a[r];
  }
  return v;
}

GridState unflatten_state(const Eigen::VectorXd& v, const GridShape& shape) {
  const int n = shape.cells();
  if (v.size() != 3 * n) {
    throw DimensionError("unflatten_state: vector length mismatch");
  }
  GridState s(shape);
  for (int r = 0; r < n; ++r) {
    s.p.a[r] = v(r);
    s.ox.a[r] = v(n + r);
    s.oy.a[r] = v(2 * n + r);
  }
  return s;
}

double dot(const Field& a, const Field& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("dot: mismatched field shapes");
  }
  double acc = 0.0;
  for (std::size_t n = 0; n < a.a.size(); ++n) acc += a.a[n] * b.a[n];
  return acc;
}

double state_norm(const GridState& s) {
  double acc = 0.0;
  for (double v : s.p.a) acc += v * v;
  for (double v : s.ox.a) acc += v * v;
  for (double v : s.oy.a) acc += v * v;
  return std::sqrt(acc);
}

void write_field_snapshot(std::ostream& os, const Field& f,
                          const std::string& name, long t) {
  os << "# field=" << name << " H=" << f.h << " W=" << f.w << " t=" << t
     << "\n";
  char buf[32];
  for (int i = 0; i < f.h; ++i) {
    for (int j = 0; j < f.w; ++j) {
      if (j) os << ",";
      // 17 significant digits round-trip a double exactly.
      std::snprintf(buf, sizeof(buf), "%.17g", f.at(i, j));
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace biooss
