#pragma once

// Brute-force reference for the Kalman recursions: builds the joint Gaussian
// of every multiplier and growth rate as an affine map of the independent
// draws (m_{-1}, m_0, v_1..H, u_1..H) and conditions it directly. m_{-1} is
// the independent copy of the prior that fills the lagged slot of z_0.

#include "pcm/model.hpp"

#include <span>
#include <vector>

namespace pcm {

struct OracleMoments {
  // t = 0..T
  std::vector<Vec4> filt_z;
  std::vector<Mat4> filt_P;
  // t = 1..T at index t-1
  std::vector<Vec4> pred_z;
  std::vector<Mat4> pred_P;
  std::vector<Vec2> pred_b;
  std::vector<Mat2> pred_S;
  // t = 0..T; cross at index t is Cov(z_t, z_{t+1} | F_T), t = 0..T-1
  std::vector<Vec4> smooth_z;
  std::vector<Mat4> smooth_P;
  std::vector<Mat4> smooth_cross;
  // t = T+1..H at index t-T-1
  std::vector<Vec4> fc_z;
  std::vector<Mat4> fc_P;
  std::vector<Vec2> fc_b;
  std::vector<Mat2> fc_S;
  double loglik = 0.0;  // ln density of (b~_1..b~_T)
};

constexpr int kOracleMaxT = 8;
constexpr int kOracleMaxH = 16;

/// T = observations.size() <= 8, T <= H <= 16; intercepts cover H periods.
OracleMoments conditioning_oracle(const ModelParams& params, const LinearizationSchedule& schedule,
                                  std::span<const Vec2> observations,
                                  std::span<const Vec2> intercepts, int H);

}  // namespace pcm
