// Copyright 2026 rigidkit contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Five-point relative pose. The essential matrix is written as
// E = x*E1 + y*E2 + z*E3 + E4 over the nullspace of the epipolar design
// matrix, constrained by det(E) = 0 and 2*E*E'*E - trace(E*E')*E = 0.
// Treating z as the hidden variable turns the ten cubics into a 10x10
// polynomial matrix M(z) acting on the (x,y) monomial vector; roots of
// det M(z) (degree 10) give the candidate solutions. Constraint
// coefficients are recovered numerically by interpolation over a fixed
// generic sample set, and each root is polished by Gauss-Newton before
// projection onto the essential manifold.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "rigidkit/egomotion.hpp"

namespace rigidkit::egomotion {
namespace {

using Mat10 = Eigen::Matrix<double, 10, 10>;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat20 = Eigen::Matrix<double, 20, 20>;
using Vec20 = Eigen::Matrix<double, 20, 1>;

// Monomial order (degree <= 3 in x, y, z), grouped by (x,y)-monomial:
//   0:x^3 1:x^2y 2:xy^2 3:y^3
//   4:x^2z 5:x^2   6:xyz 7:xy   8:y^2z 9:y^2
//   10:xz^2 11:xz 12:x   13:yz^2 14:yz 15:y
//   16:z^3 17:z^2 18:z 19:1
Vec20 monomials(double x, double y, double z) {
  Vec20 m;
  m << x * x * x, x * x * y, x * y * y, y * y * y,
      x * x * z, x * x, x * y * z, x * y, y * y * z, y * y,
      x * z * z, x * z, x, y * z * z, y * z, y,
      z * z * z, z * z, z, 1.0;
  return m;
}

// Fixed generic sample points; the inverse of their monomial matrix converts
// constraint evaluations into monomial coefficients.
struct SampleBasis {
  std::array<Eigen::Vector3d, 20> points;
  Eigen::PartialPivLU<Mat20> lu;

  SampleBasis() {
    std::mt19937_64 eng(0x5eedf00dULL);
    const auto u = [&] { return (static_cast<double>(eng() >> 11) * 0x1.0p-53) * 2.0 - 1.0; };
    Mat20 m;
    for (int i = 0; i < 20; ++i) {
      points[i] = Eigen::Vector3d(u(), u(), u()) * 1.5;
      m.row(i) = monomials(points[i].x(), points[i].y(), points[i].z()).transpose();
    }
    lu.compute(m);
  }
};

const SampleBasis& sample_basis() {
  static const SampleBasis basis;
  return basis;
}

Mat3 essential_at(const std::array<Mat3, 4>& basis, double x, double y, double z) {
  return x * basis[0] + y * basis[1] + z * basis[2] + basis[3];
}

// det(E) followed by the nine entries of 2*E*E'*E - trace(E*E')*E.
Vec10 constraint_values(const Mat3& e) {
  Vec10 c;
  c(0) = e.determinant();
  const Mat3 eet = e * e.transpose();
  const Mat3 g = 2.0 * eet * e - eet.trace() * e;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c(1 + 3 * i + j) = g(i, j);
  return c;
}

// Directional derivative of the constraints at E along D.
Vec10 constraint_jacobian_dir(const Mat3& e, const Mat3& d) {
  Vec10 c;
  Mat3 cof;  // cofactor matrix: d det(E) = <cof(E), D>
  cof.row(0) = e.row(1).cross(e.row(2));
  cof.row(1) = e.row(2).cross(e.row(0));
  cof.row(2) = e.row(0).cross(e.row(1));
  c(0) = (cof.array() * d.array()).sum();
  const Mat3 eet = e * e.transpose();
  const Mat3 dg = 2.0 * (d * e.transpose() * e + e * d.transpose() * e + eet * d) -
                  2.0 * (e.array() * d.array()).sum() * e - eet.trace() * d;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c(1 + 3 * i + j) = dg(i, j);
  return c;
}

// 10x20 coefficient matrix of the constraints over the monomial basis.
Eigen::Matrix<double, 10, 20> constraint_coefficients(const std::array<Mat3, 4>& basis) {
  const SampleBasis& sb = sample_basis();
  Eigen::Matrix<double, 20, 10> values;
  for (int j = 0; j < 20; ++j) {
    const auto& p = sb.points[j];
    values.row(j) = constraint_values(essential_at(basis, p.x(), p.y(), p.z())).transpose();
  }
  // Solve M * coeffs_i = values_i per constraint.
  return sb.lu.solve(values).transpose();
}

// Assembles M(z): columns follow the (x,y)-monomial order
// [x^3, x^2y, xy^2, y^3, x^2, xy, y^2, x, y, 1].
Mat10 hidden_variable_matrix(const Eigen::Matrix<double, 10, 20>& coeffs, double z) {
  const double z2 = z * z, z3 = z2 * z;
  Mat10 m;
  for (int i = 0; i < 10; ++i) {
    const auto& c = coeffs.row(i);
    m(i, 0) = c(0);
    m(i, 1) = c(1);
    m(i, 2) = c(2);
    m(i, 3) = c(3);
    m(i, 4) = c(4) * z + c(5);
    m(i, 5) = c(6) * z + c(7);
    m(i, 6) = c(8) * z + c(9);
    m(i, 7) = c(10) * z2 + c(11) * z + c(12);
    m(i, 8) = c(13) * z2 + c(14) * z + c(15);
    m(i, 9) = c(16) * z3 + c(17) * z2 + c(18) * z + c(19);
  }
  return m;
}

// Interpolation nodes and Vandermonde solver for the degree-10 determinant.
struct DetInterp {
  std::array<double, 11> nodes;
  Eigen::PartialPivLU<Eigen::Matrix<double, 11, 11>> lu;
  DetInterp() {
    Eigen::Matrix<double, 11, 11> v;
    for (int i = 0; i < 11; ++i) {
      nodes[i] = 3.0 * std::cos(kPi * i / 10.0);
      double p = 1.0;
      for (int j = 0; j < 11; ++j) {
        v(i, j) = p;
        p *= nodes[i];
      }
    }
    lu.compute(v);
  }
};

const DetInterp& det_interp() {
  static const DetInterp interp;
  return interp;
}

std::vector<double> real_roots(const Eigen::Matrix<double, 11, 1>& poly) {
  // poly(0) + poly(1) z + ... + poly(10) z^10
  int degree = 10;
  const double scale = poly.cwiseAbs().maxCoeff();
  if (scale <= 0.0 || !std::isfinite(scale)) return {};
  while (degree > 0 && std::abs(poly(degree)) < 1e-10 * scale) --degree;
  if (degree == 0) return {};

  // Companion matrix of the monic polynomial.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i) companion(i, degree - 1) = -poly(i) / poly(degree);

  Eigen::EigenSolver<Eigen::MatrixXd> eig(companion, /*computeEigenvectors=*/false);
  std::vector<double> roots;
  for (int i = 0; i < degree; ++i) {
    const auto& r = eig.eigenvalues()(i);
    if (std::abs(r.imag()) < 1e-6 * (1.0 + std::abs(r.real()))) roots.push_back(r.real());
  }
  return roots;
}

bool polish_solution(const std::array<Mat3, 4>& basis, double& x, double& y, double& z) {
  for (int iter = 0; iter < 12; ++iter) {
    const Mat3 e = essential_at(basis, x, y, z);
    const Vec10 r = constraint_values(e);
    if (r.norm() < 1e-14) return true;
    Eigen::Matrix<double, 10, 3> jac;
    jac.col(0) = constraint_jacobian_dir(e, basis[0]);
    jac.col(1) = constraint_jacobian_dir(e, basis[1]);
    jac.col(2) = constraint_jacobian_dir(e, basis[2]);
    const Eigen::Matrix3d jtj = jac.transpose() * jac + 1e-14 * Eigen::Matrix3d::Identity();
    const Eigen::Vector3d delta = jtj.ldlt().solve(-jac.transpose() * r);
    x += delta.x();
    y += delta.y();
    z += delta.z();
    if (delta.norm() < 1e-15 * (1.0 + std::abs(x) + std::abs(y) + std::abs(z))) break;
  }
  return constraint_values(essential_at(basis, x, y, z)).norm() < 1e-9;
}

}  // namespace

std::vector<Mat3> five_point_essential(const CorrespondenceSet& corr,
                                       const CameraIntrinsics& k0, const CameraIntrinsics& k1) {
  if (corr.size() != 5)
    throw std::invalid_argument("five_point_essential: exactly 5 correspondences required");

  const Mat3 k0i = k0.inverse_matrix();
  const Mat3 k1i = k1.inverse_matrix();
  Eigen::Matrix<double, 5, 9> design;
  for (int i = 0; i < 5; ++i) {
    Vec3 q0 = k0i * corr.p0[i].homogeneous();
    Vec3 q1 = k1i * corr.p1[i].homogeneous();
    q0 /= q0.z();
    q1 /= q1.z();
    design.row(i) << q1.x() * q0.x(), q1.x() * q0.y(), q1.x(),
        q1.y() * q0.x(), q1.y() * q0.y(), q1.y(),
        q0.x(), q0.y(), 1.0;
  }

  const Eigen::JacobiSVD<Eigen::Matrix<double, 5, 9>> svd(design, Eigen::ComputeFullV);
  if (svd.singularValues()(4) < 1e-10 * svd.singularValues()(0))
    return {};  // repeated or otherwise rank-deficient points

  // A fixed generic rotation of the nullspace basis keeps the solution from
  // being orthogonal to the vector that receives coefficient 1 (which would
  // push the hidden-variable root to infinity for structured data such as
  // axis-aligned translation).
  static const Eigen::Matrix4d mix = [] {
    Eigen::Matrix4d seedm;
    seedm << 0.8147, 0.0975, 0.1576, 0.1419,
        0.9058, 0.2785, 0.9706, 0.4218,
        0.1270, 0.5469, 0.9572, 0.9157,
        0.9134, 0.9575, 0.4854, 0.7922;
    return Eigen::Matrix4d(seedm.householderQr().householderQ());
  }();

  std::array<Mat3, 4> basis;
  for (int b = 0; b < 4; ++b) {
    Eigen::Matrix<double, 9, 1> v = Eigen::Matrix<double, 9, 1>::Zero();
    for (int j = 0; j < 4; ++j) v += mix(j, b) * svd.matrixV().col(5 + j);
    basis[b] << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  }

  const auto coeffs = constraint_coefficients(basis);

  const DetInterp& interp = det_interp();
  Eigen::Matrix<double, 11, 1> dets;
  for (int i = 0; i < 11; ++i)
    dets(i) = hidden_variable_matrix(coeffs, interp.nodes[i]).partialPivLu().determinant();
  const Eigen::Matrix<double, 11, 1> poly = interp.lu.solve(dets);

  std::vector<Mat3> candidates;
  const auto try_solution = [&](double z) {
    const Mat10 m = hidden_variable_matrix(coeffs, z);
    const Eigen::JacobiSVD<Mat10> msvd(m, Eigen::ComputeFullV);
    const Vec10 v = msvd.matrixV().col(9);
    if (std::abs(v(9)) < 1e-10 * v.cwiseAbs().maxCoeff()) return;
    double x = v(7) / v(9);
    double y = v(8) / v(9);
    if (!polish_solution(basis, x, y, z)) return;

    Mat3 e = essential_at(basis, x, y, z);
    const Eigen::JacobiSVD<Mat3> esvd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 s = esvd.singularValues();
    if (s(0) <= 0.0) return;
    if ((s(0) - s(1)) / s(0) > 1e-6 || s(2) / s(0) > 1e-6) return;
    // Exact essential structure: singular values (1, 1, 0).
    e = esvd.matrixU() * Eigen::DiagonalMatrix<double, 3>(1.0, 1.0, 0.0) *
        esvd.matrixV().transpose();

    for (const Mat3& prev : candidates)
      if (std::min((prev - e).norm(), (prev + e).norm()) < 1e-6) return;
    candidates.push_back(e);
  };

  for (double z : real_roots(poly)) try_solution(z);
  if (candidates.empty()) {
    // Degenerate data (e.g. pure rotation or coplanar points) makes the
    // determinant vanish identically: solutions form a variety instead of
    // isolated roots. Any polished point on it is a valid candidate.
    for (double z : {0.0, 0.37, -0.41}) try_solution(z);
  }
  return candidates;
}

}  // namespace rigidkit::egomotion
