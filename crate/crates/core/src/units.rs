//! Unit conversions. Everything internal is in atomic units.

use serde::{Deserialize, Serialize};

/// Wavenumbers per hartree (CODATA).
pub const CM_PER_HARTREE: f64 = 219_474.631_363_2;
/// Electron volts per hartree.
pub const EV_PER_HARTREE: f64 = 27.211_386_245_988;
/// Kelvin per hartree (E_h / k_B).
pub const KELVIN_PER_HARTREE: f64 = 315_775.024_804_07;
/// Femtoseconds per atomic unit of time.
pub const FS_PER_AU_TIME: f64 = 0.024_188_843_265_857;
/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT: f64 = 137.036;
/// Vacuum permittivity in (Gaussian) atomic units.
pub const VACUUM_PERMITTIVITY: f64 = 1.0 / (4.0 * std::f64::consts::PI);

/// Energy unit a parameter block is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyUnit {
    #[default]
    Hartree,
    Wavenumber,
    ElectronVolt,
}

impl EnergyUnit {
    pub fn to_hartree(self, value: f64) -> f64 {
        match self {
            EnergyUnit::Hartree => value,
            EnergyUnit::Wavenumber => value / CM_PER_HARTREE,
            EnergyUnit::ElectronVolt => value / EV_PER_HARTREE,
        }
    }

    pub fn from_hartree(self, value: f64) -> f64 {
        match self {
            EnergyUnit::Hartree => value,
            EnergyUnit::Wavenumber => value * CM_PER_HARTREE,
            EnergyUnit::ElectronVolt => value * EV_PER_HARTREE,
        }
    }
}

pub fn cm_to_hartree(cm: f64) -> f64 {
    EnergyUnit::Wavenumber.to_hartree(cm)
}

pub fn hartree_to_cm(e: f64) -> f64 {
    EnergyUnit::Wavenumber.from_hartree(e)
}

/// Inverse temperature in 1/hartree.
pub fn beta_from_kelvin(t: f64) -> f64 {
    KELVIN_PER_HARTREE / t
}
