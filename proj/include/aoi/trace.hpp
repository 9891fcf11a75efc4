#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/csv.hpp"

namespace aoi {

inline const char* kTraceCsvHeader = "step,inst_aoi,running_avg,seed,algorithm,scenario";

/// Time-indexed record of one run: instantaneous receiver AoI per step and
/// the running average, the unit of all experiment output.
struct RunTrace {
  std::uint64_t seed = 0;
  std::string algorithm;
  std::string scenario;
  std::vector<int> inst;
  std::vector<double> running_avg;
  std::vector<std::string> notes;
  double wall_seconds = 0.0;  // not serialized: outputs stay byte-reproducible

  void append(int aoi) {
    sum_ += aoi;
    inst.push_back(aoi);
    running_avg.push_back(static_cast<double>(sum_) / static_cast<double>(inst.size()));
  }

  std::size_t steps() const { return inst.size(); }

  double final_running_avg() const {
    if (running_avg.empty()) throw std::logic_error("empty trace");
    return running_avg.back();
  }

  /// Mean instantaneous AoI over the trailing fraction of the trace, the
  /// "converged" read-out of a learning curve.
  double tail_avg(double fraction = 0.25) const {
    if (inst.empty()) throw std::logic_error("empty trace");
    auto window = static_cast<std::size_t>(static_cast<double>(inst.size()) * fraction);
    window = std::max<std::size_t>(window, 1);
    long long acc = 0;
    for (std::size_t i = inst.size() - window; i < inst.size(); ++i) acc += inst[i];
    return static_cast<double>(acc) / static_cast<double>(window);
  }

  void write_csv(std::ostream& out, bool with_header) const {
    if (with_header) out << kTraceCsvHeader << "\n";
    for (std::size_t t = 0; t < inst.size(); ++t) {
      out << (t + 1) << ',' << inst[t] << ',' << format_double(running_avg[t]) << ',' << seed << ','
          << algorithm << ',' << scenario << "\n";
    }
  }

 private:
  long long sum_ = 0;
};

}  // namespace aoi
