#include "tinydef/diffconv_io.h"

#include <fstream>

#include "json.hpp"
#include "tinydef/tensor_io.h"

namespace tinydef {

namespace {

std::filesystem::path with_ext(std::filesystem::path p, const char* ext) {
  p += ext;
  return p;
}

}  // namespace

void save_fused(const std::filesystem::path& stem, const FusedConv& fused) {
  save_t4(with_ext(stem, ".t4"), fused.w_final);
  const nlohmann::json side{{"out_channels", fused.out_channels()},
                            {"in_channels", fused.in_channels()},
                            {"activation", std::string(to_string(fused.act))},
                            {"bias", fused.b_final}};
  std::ofstream os(with_ext(stem, ".json"));
  if (!os) throw FormatError("cannot write " + with_ext(stem, ".json").string());
  os << side.dump(2) << '\n';
}

FusedConv load_fused(const std::filesystem::path& stem) {
  FusedConv f;
  f.w_final = load_t4(with_ext(stem, ".t4"));
  std::ifstream is(with_ext(stem, ".json"));
  if (!is) throw FormatError("cannot read " + with_ext(stem, ".json").string());
  try {
    const auto side = nlohmann::json::parse(is);
    const int out = side.at("out_channels").get<int>();
    const int in = side.at("in_channels").get<int>();
    f.b_final = side.at("bias").get<std::vector<double>>();
    f.act = parse_activation(side.at("activation").get<std::string>());
    if (out != f.out_channels() || in != f.in_channels() ||
        static_cast<int>(f.b_final.size()) != out) {
      throw FormatError("fused sidecar disagrees with kernel shape " +
                        to_string(f.w_final.shape()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fused sidecar: ") + e.what());
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("fused sidecar: ") + e.what());
  }
  return f;
}

}  // namespace tinydef
