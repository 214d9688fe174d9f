#include "utad/core/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "utad/error.hpp"

namespace utad::core {

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw InvalidInput("Rng::below: n must be positive");
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << std::hexfloat << spare_;
    return os.str();
}

void Rng::set_state(const std::string& s) {
    std::istringstream is(s);
    std::mt19937_64 engine;
    int has_spare = 0;
    std::string spare_text;
    is >> engine >> has_spare >> spare_text;
    if (!is && !is.eof()) throw InvalidInput("Rng::set_state: malformed state");
    engine_ = engine;
    has_spare_ = has_spare != 0;
    spare_ = std::strtod(spare_text.c_str(), nullptr);
}

}  // namespace utad::core
