#include "gmprop/propagation.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include "gmprop/error.hpp"

namespace gmprop {

namespace {

constexpr int kN = kStateDim;
constexpr int kPairs = kN * (kN + 1) / 2;
constexpr Eigen::Index kStmOffset = kN;
constexpr Eigen::Index kSttOffset = kN + kN * kN;

struct PairTable {
  std::array<std::array<int, kN>, kN> index{};
  std::array<std::pair<int, int>, kPairs> pairs{};
  PairTable() {
    int p = 0;
    for (int j = 0; j < kN; ++j) {
      for (int k = j; k < kN; ++k) {
        index[j][k] = index[k][j] = p;
        pairs[p++] = {j, k};
      }
    }
  }
};

const PairTable& pair_table() {
  static const PairTable table;
  return table;
}

void unpack_slices(const Eigen::VectorXd& y, std::array<Mat6, kN>& psi) {
  const auto& pt = pair_table();
  for (int i = 0; i < kN; ++i) {
    const double* src = y.data() + kSttOffset + i * kPairs;
    for (int p = 0; p < kPairs; ++p) {
      const auto [j, k] = pt.pairs[p];
      psi[i](j, k) = psi[i](k, j) = src[p];
    }
  }
}

void pack_slices(const std::array<Mat6, kN>& psi, Eigen::VectorXd& y) {
  const auto& pt = pair_table();
  for (int i = 0; i < kN; ++i) {
    double* dst = y.data() + kSttOffset + i * kPairs;
    for (int p = 0; p < kPairs; ++p) {
      const auto [j, k] = pt.pairs[p];
      dst[p] = psi[i](j, k);
    }
  }
}

class VariationalRhs {
 public:
  VariationalRhs(const DynamicsModel& model, int order) : model_(model), order_(order) {}

  void operator()(double /*t*/, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(y.size());
    const Vec6 x = y.head<kN>();
    eval_jet6(model_, x, order_, jet_);
    dy.head<kN>() = jet_.f;
    if (order_ < 1) return;

    const Eigen::Map<const Mat6> phi(y.data() + kStmOffset);
    Eigen::Map<Mat6> dphi(dy.data() + kStmOffset);
    dphi.noalias() = jet_.df * phi;
    if (order_ < 2) return;

    unpack_slices(y, psi_);
    for (int i = 0; i < kN; ++i) {
      dpsi_[i].setZero();
      for (int l = 0; l < kN; ++l) {
        const double a = jet_.df(i, l);
        if (a != 0.0) dpsi_[i] += a * psi_[l];
      }
    }
    const Eigen::Matrix<double, 3, kN> phi_r = phi.topRows<3>();
    for (int i = 0; i < 3; ++i) {
      dpsi_[3 + i].noalias() += phi_r.transpose() * jet_.accel_hessian[i] * phi_r;
    }
    pack_slices(dpsi_, dy);
  }

 private:
  const DynamicsModel& model_;
  int order_;
  Jet6 jet_;
  std::array<Mat6, kN> psi_;
  std::array<Mat6, kN> dpsi_;
};

}  // namespace

int Mixand::depth() const { return static_cast<int>(std::count(lineage.begin(), lineage.end(), '.')) + 1; }

Eigen::Index extended_state_size(int order) {
  switch (order) {
    case 0:
      return kN;
    case 1:
      return kSttOffset;
    case 2:
      return kSttOffset + kN * kPairs;
    default:
      throw DimensionError("extended_state_size: order must be 0, 1 or 2");
  }
}

FlowExpansion integrate_flow(const DynamicsModel& model, const Vector& x0, double t0,
                             std::span<const double> checkpoint_times, int order, const IntegratorOptions& opts) {
  if (x0.size() != kN) throw DimensionError("integrate_flow: state must have 6 components");
  if (order != 1 && order != 2) throw DimensionError("integrate_flow: order must be 1 or 2");
  if (checkpoint_times.empty()) throw Error("integrate_flow: no checkpoint times");
  for (std::size_t i = 1; i < checkpoint_times.size(); ++i) {
    if (!(checkpoint_times[i] > checkpoint_times[i - 1])) {
      throw Error("integrate_flow: checkpoint times must be strictly increasing");
    }
  }

  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(extended_state_size(order));
  y0.head<kN>() = x0;
  Eigen::Map<Mat6>(y0.data() + kStmOffset).setIdentity();

  IntegratorOptions o = opts;
  o.error_components = kSttOffset;
  VariationalRhs rhs(model, order);
  const auto ys = integrate_ode(std::ref(rhs), y0, t0, checkpoint_times, o);

  FlowExpansion flow;
  flow.t0 = t0;
  flow.order = order;
  flow.checkpoints.reserve(ys.size());
  std::array<Mat6, kN> slices;
  for (std::size_t c = 0; c < ys.size(); ++c) {
    Checkpoint cp;
    cp.t = checkpoint_times[c];
    cp.x = ys[c].head<kN>();
    cp.phi = Eigen::Map<const Mat6>(ys[c].data() + kStmOffset);
    if (order == 2) {
      unpack_slices(ys[c], slices);
      cp.psi = Tensor3(kN);
      for (int i = 0; i < kN; ++i) cp.psi.slice(i) = slices[i];
    }
    flow.checkpoints.push_back(std::move(cp));
  }
  return flow;
}

std::vector<Vec6> propagate_states(const DynamicsModel& model, const Vector& x0, double t0,
                                   std::span<const double> times, const IntegratorOptions& opts) {
  if (x0.size() != kN) throw DimensionError("propagate_states: state must have 6 components");
  IntegratorOptions o = opts;
  o.error_components = kN;
  VariationalRhs rhs(model, 0);
  const auto ys = integrate_ode(std::ref(rhs), x0, t0, times, o);
  std::vector<Vec6> out;
  out.reserve(ys.size());
  for (const auto& y : ys) out.emplace_back(y);
  return out;
}

Matrix stm_between(const Matrix& phi_f0, const Matrix& phi_s0) {
  // X phi_s0 = phi_f0  <=>  phi_s0^T X^T = phi_f0^T
  LuSolver lu(phi_s0.transpose());
  return lu.solve(Matrix(phi_f0.transpose())).transpose();
}

Tensor3 stt_between(const Matrix& phi_f0, const Tensor3& psi_f0, const Matrix& phi_s0, const Tensor3& psi_s0,
                    const Matrix& phi_fs) {
  const Eigen::Index n = psi_f0.dim();
  if (phi_f0.rows() != n || phi_s0.rows() != n || phi_fs.rows() != n || psi_s0.dim() != n) {
    throw DimensionError("stt_between: dimension mismatch");
  }
  Tensor3 a = psi_f0 - left_multiply(phi_fs, psi_s0);
  Tensor3 b = solve_tensor_system(phi_s0, a, 1);
  Tensor3 out = solve_tensor_system(phi_s0, b, 2);
  out.symmetrize_trailing();
  return out;
}

Tensor3 stt_compose(const Matrix& phi_fs, const Tensor3& psi_fs, const Matrix& phi_s0, const Tensor3& psi_s0) {
  return congruence(psi_fs, phi_s0) + left_multiply(phi_fs, psi_s0);
}

Matrix stm_shift_reference(const Matrix& phi, const Tensor3& psi, const Vector& dm) {
  if (psi.dim() == 0) return phi;
  return phi + contract1(psi, dm);
}

void require_spd(const Matrix& p, const std::string& what) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(p, Eigen::EigenvaluesOnly);
  const Vector ev = es.eigenvalues().reverse();
  const double floor = -16.0 * static_cast<double>(p.rows()) * std::numeric_limits<double>::epsilon() * ev.maxCoeff();
  if (!ev.allFinite() || !(ev.maxCoeff() > 0.0) || !(ev.minCoeff() >= floor)) {
    throw IndefiniteCovarianceError(what + ": covariance is not positive definite (min eigenvalue " +
                                        std::to_string(ev.minCoeff()) + ")",
                                    ev);
  }
}

Mixand propagate_moments_first(const Mixand& mix, const Vector& x_f, const Matrix& phi) {
  Mixand out = mix;
  out.m = x_f;
  out.P = symmetric_part(phi * mix.P * phi.transpose());
  require_spd(out.P, "propagate_moments_first");
  return out;
}

Mixand propagate_moments_second(const Mixand& mix, const Vector& x_f, const Matrix& phi, const Tensor3& psi) {
  const Eigen::Index n = psi.dim();
  if (n == 0) return propagate_moments_first(mix, x_f, phi);
  if (mix.P.rows() != phi.cols() || psi.slice(0).rows() != mix.P.rows()) {
    throw DimensionError("propagate_moments_second: dimension mismatch");
  }
  std::vector<Matrix> s(static_cast<std::size_t>(n));
  Vector dm(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    s[j] = psi.slice(j) * mix.P;
    dm(j) = 0.5 * s[j].trace();
  }
  // 1/4 Psi^j_no Psi^k_pq (P_no P_pq + P_np P_oq + P_nq P_op)
  Matrix quartic(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = j; k < n; ++k) {
      const double c = s[j].trace() * s[k].trace() + (s[j] * psi.slice(k).transpose() * mix.P).trace() +
                       (s[j] * s[k]).trace();
      quartic(j, k) = quartic(k, j) = 0.25 * c;
    }
  }
  Mixand out = mix;
  out.m = x_f + dm;
  out.P = symmetric_part(phi * mix.P * phi.transpose() - dm * dm.transpose() + quartic);
  require_spd(out.P, "propagate_moments_second");
  return out;
}

}  // namespace gmprop
