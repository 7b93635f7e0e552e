#include "unite/kernels.hpp"

namespace unite::kernels {
namespace {

const Ops* g_forced = nullptr;

const Ops& pick_best() {
    if (const Ops* v = avx2_ops()) return *v;
    if (const Ops* v = neon_ops()) return *v;
    return scalar_ops();
}

}  // namespace

const Ops& active_ops() {
    if (g_forced) return *g_forced;
    static const Ops& best = pick_best();
    return best;
}

bool force_variant(std::string_view name) {
    if (name == "scalar") {
        g_forced = &scalar_ops();
        return true;
    }
    if (name == "avx2") {
        g_forced = avx2_ops();
        return g_forced != nullptr;
    }
    if (name == "neon") {
        g_forced = neon_ops();
        return g_forced != nullptr;
    }
    return false;
}

std::vector<std::string> available_variants() {
    std::vector<std::string> v{"scalar"};
    if (avx2_ops()) v.emplace_back("avx2");
    if (neon_ops()) v.emplace_back("neon");
    return v;
}

}  // namespace unite::kernels
