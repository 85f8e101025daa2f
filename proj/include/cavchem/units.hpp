#pragma once

// Atomic units throughout; these are the only conversion constants.
namespace cavchem::units {

inline constexpr double hartree_ev = 27.211386;
inline constexpr double bohr_nm = 0.052917721;
inline constexpr double boltzmann = 3.166811563e-6;  // hartree / K
inline constexpr double fs_au = 41.34137;            // atomic time units per fs

inline constexpr double angstrom_bohr = 0.1 / bohr_nm;

constexpr double ev(double hartree) { return hartree * hartree_ev; }
constexpr double from_ev(double e) { return e / hartree_ev; }
constexpr double mev(double hartree) { return 1000.0 * hartree * hartree_ev; }
constexpr double from_mev(double e) { return e / (1000.0 * hartree_ev); }
constexpr double nm(double bohr) { return bohr * bohr_nm; }
constexpr double from_nm(double x) { return x / bohr_nm; }
constexpr double fs(double t) { return t / fs_au; }
constexpr double from_fs(double t) { return t * fs_au; }
constexpr double beta(double kelvin) { return 1.0 / (boltzmann * kelvin); }

}  // namespace cavchem::units
