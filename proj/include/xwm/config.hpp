#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "xwm/kgw.hpp"
#include "xwm/lm.hpp"
#include "xwm/sir.hpp"
#include "xwm/uw.hpp"

namespace xwm {

/// The ironing model and the detector were built against different
/// clusterings. Detection must not proceed.
class ChecksumMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Engine section of a run config:
///   {"scheme": "KGW" | "UW" | "SIR" | "XSIR" | "none",
///    "kgw": {"gamma", "delta", "hash_window", "hash_key"},
///    "uw": {"hash_window", "tv_bound", "zero_probability_floor", "hash_key"},
///    "sir": {"model": path, "clustering": path, "scale"}}
/// Missing keys keep their defaults. Paths are taken as given.
struct EngineSpec {
    std::string scheme = "none";
    KgwConfig kgw;
    UwConfig uw;
    SirEngineConfig sir;
    std::filesystem::path model_path;
    std::filesystem::path clustering_path;
};

/// Throws std::invalid_argument on an unknown scheme or a bad parameter.
EngineSpec parse_engine_spec(const nlohmann::json& doc);

/// nullptr for scheme "none". Loads SIR artifacts and throws
/// ChecksumMismatch when the model was trained on another clustering, or
/// when the artifact variant disagrees with the scheme.
std::shared_ptr<const WatermarkEngine> build_engine(const EngineSpec& spec, const Vocabulary& vocab,
                                                    std::shared_ptr<const LanguageModel> lm);

ToyLmConfig parse_lm_config(const nlohmann::json& doc);

/// FNV-1a of the compact dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

}  // namespace xwm
