//! Physical constants and unit conversions.
//!
//! Energies are reported in units of h * Hz at every interface; lengths in
//! Bohr radii for matrix elements and micrometers for geometry. All values
//! derive from the 2018 CODATA set.

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Bohr radius, m.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Electron mass, kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON_SI: f64 = 9.274_010_078_3e-24;

/// Rydberg frequency R_inf * c, Hz. Infinite nuclear mass; the element
/// dependence of high-l Rydberg levels is negligible.
pub const RYDBERG_HZ: f64 = 3.289_841_960_250_8e15;

/// Bohr magneton in Hz per Gauss (orbital Zeeman, g_l = 1).
pub const BOHR_MAGNETON_HZ_PER_GAUSS: f64 = BOHR_MAGNETON_SI / PLANCK * 1.0e-4;

/// Stark coupling: energy in Hz of a dipole of 1 e*a0 in a field of 1 V/cm.
pub const STARK_HZ_PER_EA0_V_CM: f64 = ELEMENTARY_CHARGE * BOHR_RADIUS * 100.0 / PLANCK;

/// Dipole-dipole prefactor: (e*a0)^2 / (4 pi eps0 (1 um)^3 h), in Hz.
/// Multiplying by the dimensionless angular factor and dividing by
/// (R/um)^3 gives the interaction of two unit dipoles in h*Hz.
pub const DD_PREFACTOR_HZ_UM3: f64 = (ELEMENTARY_CHARGE * BOHR_RADIUS)
    * (ELEMENTARY_CHARGE * BOHR_RADIUS)
    / (4.0 * std::f64::consts::PI * EPSILON_0 * 1.0e-18 * PLANCK);

/// Diamagnetic coupling: e^2 a0^2 / (8 m_e h) in Hz per Gauss^2, to be
/// multiplied by B^2 [G^2] and <rho^2> [a0^2].
pub const DIAMAGNETIC_HZ_PER_G2_A02: f64 = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE * BOHR_RADIUS
    * BOHR_RADIUS
    / (8.0 * ELECTRON_MASS * PLANCK)
    * 1.0e-8;

/// Hartree energy expressed as a frequency, Hz.
pub const HARTREE_HZ: f64 = 2.0 * RYDBERG_HZ;

/// Atomic unit of electric field, V/cm.
pub const EFIELD_AU_V_CM: f64 = 5.142_206_747_63e9;

/// Atomic unit of magnetic field, Gauss.
pub const BFIELD_AU_GAUSS: f64 = 2.350_517_567_58e9;

/// Energy conversions between h*Hz and Hartree atomic units.
pub fn hz_to_atomic(e_hz: f64) -> f64 {
    e_hz / HARTREE_HZ
}

pub fn atomic_to_hz(e_au: f64) -> f64 {
    e_au * HARTREE_HZ
}

/// Electric field conversions, V/cm <-> atomic units.
pub fn v_cm_to_atomic(e: f64) -> f64 {
    e / EFIELD_AU_V_CM
}

pub fn atomic_to_v_cm(e: f64) -> f64 {
    e * EFIELD_AU_V_CM
}

/// Magnetic field conversions, Gauss <-> atomic units.
pub fn gauss_to_atomic(b: f64) -> f64 {
    b / BFIELD_AU_GAUSS
}

pub fn atomic_to_gauss(b: f64) -> f64 {
    b * BFIELD_AU_GAUSS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_prefactor_matches_codata_arithmetic() {
        // (e a0)^2 / (4 pi eps0 um^3 h), evaluated independently.
        let ea0 = 1.602_176_634e-19 * 5.291_772_109_03e-11;
        let expected = ea0 * ea0
            / (4.0 * std::f64::consts::PI * 8.854_187_812_8e-12 * 1.0e-18 * 6.626_070_15e-34);
        assert!((DD_PREFACTOR_HZ_UM3 - expected).abs() / expected < 1e-6);
        // order-of-magnitude anchor: ~975 Hz at 1 um for unit dipoles
        assert!((DD_PREFACTOR_HZ_UM3 - 975.0).abs() < 1.0);
    }

    #[test]
    fn rydberg_consistent_with_base_constants() {
        // R_inf c = m_e e^4 / (8 eps0^2 h^3)
        let ry = ELECTRON_MASS * ELEMENTARY_CHARGE.powi(4)
            / (8.0 * EPSILON_0 * EPSILON_0 * PLANCK.powi(3));
        assert!((ry - RYDBERG_HZ).abs() / RYDBERG_HZ < 1e-9);
    }

    #[test]
    fn zeeman_constant_value() {
        assert!((BOHR_MAGNETON_HZ_PER_GAUSS - 1.399_624e6).abs() < 1e2);
    }

    #[test]
    fn conversions_round_trip() {
        for &x in &[1.0e-3, 1.0, 3.7e9, 784.07, 6.0] {
            assert!((atomic_to_hz(hz_to_atomic(x)) - x).abs() <= 1e-12 * x.abs());
            assert!((atomic_to_v_cm(v_cm_to_atomic(x)) - x).abs() <= 1e-12 * x.abs());
            assert!((atomic_to_gauss(gauss_to_atomic(x)) - x).abs() <= 1e-12 * x.abs());
        }
    }
}
