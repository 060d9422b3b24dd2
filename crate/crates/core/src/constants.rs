//! Physical constants (CODATA 2018 exact/recommended values).
//!
//! The code works in Kelvin for energies, so the only combination the
//! Hamiltonian needs is `μ_B / k_B`. The CGS constants are only used when
//! converting molar susceptibilities to reduced units.

/// Bohr magneton, J/T.
pub const BOHR_MAGNETON_J_PER_T: f64 = 9.2740100783e-24;

/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;

/// Avogadro constant, 1/mol (exact).
pub const AVOGADRO_PER_MOL: f64 = 6.02214076e23;

/// `μ_B / k_B` in K/T (≈ 0.6717138).
pub const MU_B_OVER_K_B: f64 = BOHR_MAGNETON_J_PER_T / BOLTZMANN_J_PER_K;

/// 1 Oe in a vacuum corresponds to 1e-4 T.
pub const OERSTED_TO_TESLA: f64 = 1e-4;

/// Bohr magneton in erg/G (CGS).
pub const BOHR_MAGNETON_ERG_PER_G: f64 = BOHR_MAGNETON_J_PER_T * 1e3;

/// Boltzmann constant in erg/K (CGS).
pub const BOLTZMANN_ERG_PER_K: f64 = BOLTZMANN_J_PER_K * 1e7;

/// `N_A μ_B² / k_B` in emu·K/mol (≈ 0.37515). A mole of free spins-1/2 with
/// g = 2 has Curie constant `g² S(S+1)/3` times this.
pub const MOLAR_CURIE_UNIT: f64 =
    AVOGADRO_PER_MOL * BOHR_MAGNETON_ERG_PER_G * BOHR_MAGNETON_ERG_PER_G / BOLTZMANN_ERG_PER_K;

/// Zeeman energy scale in Kelvin of one unit of `S^z` for the given g factor
/// and field in Oersted.
pub fn zeeman_kelvin(g_factor: f64, field_oe: f64) -> f64 {
    g_factor * MU_B_OVER_K_B * field_oe * OERSTED_TO_TESLA
}
