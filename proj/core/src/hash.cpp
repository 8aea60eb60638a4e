#include "dep/hash.hpp"

#include <cmath>
#include <cstring>

namespace dep {

void HashAccumulator::update_u64(std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    update(std::string_view(buf, 8));
}

void HashAccumulator::update_f64(double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    update_u64(bits);
}

std::string HashAccumulator::hex() const { return to_hex(h_); }

std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

double Rng::next_gauss(double mu, double sigma) {
    if (has_spare_) {
        has_spare_ = false;
        return mu + sigma * spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    // Guard log(0); next_double() < 1 by construction.
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mu + sigma * r * std::cos(theta);
}

}  // namespace dep
