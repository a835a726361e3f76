#include "xwm/watermark.hpp"

#include <stdexcept>
#include <string>

namespace xwm {

std::string_view to_string(Scheme scheme) noexcept {
    switch (scheme) {
        case Scheme::KgwZ: return "KGW_Z";
        case Scheme::UwLlr: return "UW_LLR";
        case Scheme::SirMeanBias: return "SIR_MEANBIAS";
        case Scheme::XsirMeanBias: return "XSIR_MEANBIAS";
    }
    return "?";
}

Scheme parse_scheme(std::string_view name) {
    for (Scheme s : {Scheme::KgwZ, Scheme::UwLlr, Scheme::SirMeanBias, Scheme::XsirMeanBias}) {
        if (to_string(s) == name) return s;
    }
    throw std::invalid_argument("unknown score scheme '" + std::string(name) + "'");
}

}  // namespace xwm
