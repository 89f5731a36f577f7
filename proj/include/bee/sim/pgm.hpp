#pragma once

#include <Eigen/Dense>
#include <string>

namespace bee {

/// Binary (P5) PGM with maxval 255. Pixel byte = round(255 * value).
void save_pgm(const std::string& path, const Eigen::VectorXd& image, int h, int w);
Eigen::VectorXd load_pgm(const std::string& path, int* h_out, int* w_out);

}  // namespace bee
