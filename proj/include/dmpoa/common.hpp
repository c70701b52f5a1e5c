#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace dmpoa {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

/// Runs fn(i) for i in [0, n). With jobs <= 1 this is a plain loop; otherwise
/// indices are striped over worker threads. fn must not touch shared state.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         int jobs = 1) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  int workers = std::min<std::size_t>(jobs, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace dmpoa
