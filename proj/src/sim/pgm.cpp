#include "bee/sim/pgm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace bee {

void save_pgm(const std::string& path, const Eigen::VectorXd& image, int h, int w) {
  if (image.size() != static_cast<long>(h) * w)
    throw std::invalid_argument("save_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_pgm: cannot open " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  for (long i = 0; i < image.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(image(i) * 255.0));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Eigen::VectorXd load_pgm(const std::string& path, int* h_out, int* w_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_pgm: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255)
    throw std::runtime_error("load_pgm: unsupported format in " + path);
  in.get();  // single whitespace after the header
  std::vector<unsigned char> bytes(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error("load_pgm: truncated data in " + path);
  Eigen::VectorXd img(static_cast<long>(w) * h);
  for (size_t i = 0; i < bytes.size(); ++i) img(i) = bytes[i] / 255.0;
  if (h_out) *h_out = h;
  if (w_out) *w_out = w;
  return img;
}

}  // namespace bee
