#include "ghnforge/ghn/decoder.hpp"

namespace ghnforge {

std::vector<int64_t> materialize_indices(const Shape& src, const Shape& target) {
  if (src.size() != 4) throw UnsupportedShape("decoded tensor must be rank 4");
  const int64_t To = src[0], Ti = src[1], Th = src[2], Tw = src[3];
  size_t r = target.size();
  if (r != 1 && r != 2 && r != 4)
    throw UnsupportedShape("target slot rank must be 1, 2 or 4 (got " + std::to_string(r) + ")");
  int64_t o = target[0];
  int64_t i = r >= 2 ? target[1] : 1;
  int64_t h = r == 4 ? target[2] : 1;
  int64_t w = r == 4 ? target[3] : 1;
  if (h > Th || w > Tw)
    throw UnsupportedShape("target spatial extent exceeds the decoded tensor");
  for (int64_t d : target)
    if (d < 1) throw UnsupportedShape("target dims must be positive");

  const int64_t sh0 = (Th - h) / 2;
  const int64_t sw0 = (Tw - w) / 2;
  std::vector<int64_t> idx;
  idx.reserve(static_cast<size_t>(o * i * h * w));
  for (int64_t oo = 0; oo < o; ++oo) {
    int64_t so = oo % To;
    for (int64_t ii = 0; ii < i; ++ii) {
      int64_t si = ii % Ti;
      for (int64_t hh = 0; hh < h; ++hh) {
        int64_t base = ((so * Ti + si) * Th + sh0 + hh) * Tw + sw0;
        for (int64_t ww = 0; ww < w; ++ww) idx.push_back(base + ww);
      }
    }
  }
  return idx;
}

}  // namespace ghnforge
