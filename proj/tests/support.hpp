// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_TESTS_SUPPORT_HPP
#define RISPA_TESTS_SUPPORT_HPP

#include <filesystem>
#include <random>
#include <string>

#include "rispa/model.hpp"

namespace rispa::testing {

inline CMatrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double var = 1.0)
{
    CMatrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            m(r, c) = complex_normal(rng, var);
    return m;
}

inline CVector random_vector(Rng& rng, Eigen::Index n, double var = 1.0)
{
    return random_matrix(rng, n, 1, var).col(0);
}

// Unit-modulus (L+1) x N_v matrix with a ones first row.
inline PhaseMatrix random_phase(Rng& rng, std::size_t elements, std::size_t allocations)
{
    std::uniform_real_distribution<double> u(0.0, 6.283185307179586);
    CMatrix V(static_cast<Eigen::Index>(elements + 1), static_cast<Eigen::Index>(allocations));
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
        V(0, c) = 1.0;
        for (Eigen::Index r = 1; r < V.rows(); ++r)
            V(r, c) = std::polar(1.0, u(rng));
    }
    return PhaseMatrix(V);
}

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("rispa-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace rispa::testing

#endif
