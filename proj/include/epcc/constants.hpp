#pragma once

// CODATA 2022 exact or recommended values, SI unless noted.
namespace epcc::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double k_B = 1.380649e-23;            // J/K
inline constexpr double k_B_eV = 8.617333262e-5;       // eV/K
inline constexpr double q = 1.602176634e-19;           // C
inline constexpr double m0 = 9.1093837139e-31;         // kg
inline constexpr double eps0_cm = 8.8541878188e-14;    // F/cm

} // namespace epcc::constants
