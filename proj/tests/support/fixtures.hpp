#pragma once

#include <fstream>
#include <iterator>
#include <string>

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(VIDA_TEST_DATA) + "/" + name, std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + name);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct SampleRecord {
  const char* dp;
  double time_us;
  double energy;
};

// The records of the sample first-step-mode log, as printed.
inline const SampleRecord kSampleRecords[] = {
    {"....(.((((..........)))).+.((((..........)))).)....", 0.0000000, -1.737},
    {"...((.((((..........)))).+.((((..........)))).))...", 0.1153000, -2.137},
    {"...(((((((..........)))).+.((((..........)))))))...", 0.1802000, -1.787},
    {"....((((((..........)))).+.((((..........))))))....", 0.2768000, -1.387},
    {"....((((((...(.....))))).+.((((..........))))))....", 0.5369000, +1.392},
    {"((((((((((..........))...+...((..((....))))))))))))", 17.760000, -1.310},
    {"(((((((.((..........))...+...((..((....)))).)))))))", 17.800000, -1.829},
    {"((((((((((..........))...+...((..((....))))))))))))", 17.860000, -1.310},
    {"(((((((.((..........))...+...((..((....)))).)))))))", 17.940000, -1.829},
    {".((((((.((..........))...+...((..((....)))).)))))).", 18.140000, -1.961},
    {".(((((((((((((((((((((...+...))))))))))))))))))))).", 71.570000, -27.496},
    {".((((((((((((((((((((((..+..)))))))))))))))))))))).", 71.620000, -26.401},
    {".((((((((((((((((((((((.(+).)))))))))))))))))))))).", 71.810000, -26.201},
    {"(((((((((((((((((((((((.(+).)))))))))))))))))))))))", 71.900000, -26.069},
    {"(((((((((((((((((((((((((+)))))))))))))))))))))))))", 71.910000, -30.522},
};

inline constexpr const char* kSampleHeader = "AGATCAGTGCGTCTGTACTAGCACA+TGTGCTAGTACAGACGCACTGATCT";
