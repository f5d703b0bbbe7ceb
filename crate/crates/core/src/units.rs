//! Decibel helpers and physical constants.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Power ratio to decibels.
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Decibels to power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Decibels to amplitude ratio.
pub fn amplitude_from_db(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
