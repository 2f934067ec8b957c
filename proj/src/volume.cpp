#include "petkin/volume.hpp"

#include <cmath>
#include <sstream>

#include "petkin/error.hpp"

namespace petkin {

void KineticParams::validate() const {
    if (!std::isfinite(K1) || !std::isfinite(k2) || !std::isfinite(k3) || !std::isfinite(Vb))
        throw ValidationError("kinetic parameters must be finite");
    if (K1 < 0.0 || k2 < 0.0 || k3 < 0.0) {
        std::ostringstream msg;
        msg << "rate constants must be >= 0 (K1=" << K1 << ", k2=" << k2 << ", k3=" << k3 << ")";
        throw ValidationError(msg.str());
    }
    if (Vb < 0.0 || Vb > 1.0) {
        std::ostringstream msg;
        msg << "blood volume fraction must lie in [0, 1], got " << Vb;
        throw ValidationError(msg.str());
    }
    if (K1 > 0.0 && !(k2 + k3 > 0.0))
        throw ValidationError("degenerate kernel: k2 + k3 = 0 with K1 > 0");
}

ParametricMaps::ParametricMaps(Dims3 d) : dims(d), mask(d.count(), 1) {
    for (auto &c : channels)
        c.assign(d.count(), 0.0);
}

KineticParams ParametricMaps::at(std::size_t v) const {
    return {channels[0][v], channels[1][v], channels[2][v], channels[3][v]};
}

void ParametricMaps::set(std::size_t v, const KineticParams &p) {
    channels[0][v] = p.K1;
    channels[1][v] = p.k2;
    channels[2][v] = p.k3;
    channels[3][v] = p.Vb;
}

void ParametricMaps::validate() const {
    const std::size_t n = dims.count();
    if (n == 0)
        throw ValidationError("parameter maps have an empty extent");
    for (const auto &c : channels)
        if (c.size() != n)
            throw ValidationError("parameter map channel size does not match its dimensions");
    if (mask.size() != n)
        throw ValidationError("parameter map mask size does not match its dimensions");
    for (std::size_t v = 0; v < n; ++v) {
        if (!mask[v])
            continue;
        try {
            at(v).validate();
        } catch (const ValidationError &e) {
            std::ostringstream msg;
            msg << "voxel " << v << ": " << e.what();
            throw ValidationError(msg.str());
        }
    }
}

DynamicImage::DynamicImage(FrameSchedule s, Dims3 d)
    : schedule(std::move(s)), dims(d), values(schedule.size() * d.count(), 0.0) {}

std::vector<double> DynamicImage::tac(std::size_t voxel) const {
    std::vector<double> out(frames());
    for (std::size_t f = 0; f < out.size(); ++f)
        out[f] = at(f, voxel);
    return out;
}

void DynamicImage::set_tac(std::size_t voxel, std::span<const double> tac) {
    if (tac.size() != frames())
        throw ValidationError("TAC length does not match the frame count");
    for (std::size_t f = 0; f < tac.size(); ++f)
        at(f, voxel) = tac[f];
}

} // namespace petkin
