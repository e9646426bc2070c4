// resample.h
// Windowed-sinc sample-rate conversion (Kaiser window, beta 8, 32-sample
// kernel support).
#pragma once

#include <vector>

namespace pcgl::corpus {

std::vector<float> resample_sinc(const std::vector<float>& x, int sr_in, int sr_out);

}  // namespace pcgl::corpus
