//! WMO sea-state base motion: periodic heave/surge/sway offsets applied to
//! the gripper's world pose.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Fraction of the heave amplitude carried by the surge (x) axis.
pub const DEFAULT_SURGE_FRAC: f64 = 0.4;
/// Fraction of the heave amplitude carried by the sway (y) axis.
pub const DEFAULT_SWAY_FRAC: f64 = 0.4;
/// Default phase offsets in radians, ordered `[heave, surge, sway]`.
pub const DEFAULT_PHASES: [f64; 3] = [0.0, PI / 3.0, 2.0 * PI / 3.0];

/// Wave period (seconds) used by every preset.
pub const PRESET_PERIOD_S: f64 = 5.0;

/// One sea state: a WMO code plus the sinusoid parameters that realize it.
///
/// `offset` returns `[x, y, z]` displacements in meters, where z is heave,
/// x surge and y sway. `phases` is ordered `[heave, surge, sway]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeaStateSpec {
    pub wmo_code: u8,
    /// Heave amplitude in meters.
    pub amplitude: f64,
    /// Wave period in seconds.
    pub period: f64,
    pub surge_frac: f64,
    pub sway_frac: f64,
    pub phases: [f64; 3],
}

impl Default for SeaStateSpec {
    fn default() -> Self {
        SeaStateSpec::preset(0).expect("preset 0 is always valid")
    }
}

impl SeaStateSpec {
    /// The tested configuration for a WMO code: calm (0), the 0.1 m band
    /// maximum (1) or the 0.5 m band maximum (2), all with a 5 s period.
    pub fn preset(wmo_code: u8) -> Result<Self, ConfigError> {
        let amplitude = match wmo_code {
            0 => 0.0,
            1 => 0.1,
            2 => 0.5,
            other => return Err(ConfigError::UnknownSeaState(other)),
        };
        Ok(SeaStateSpec {
            wmo_code,
            amplitude,
            period: PRESET_PERIOD_S,
            surge_frac: DEFAULT_SURGE_FRAC,
            sway_frac: DEFAULT_SWAY_FRAC,
            phases: DEFAULT_PHASES,
        })
    }

    /// Check the amplitude band for the code and the sinusoid parameters.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.period.is_finite() || self.period <= 0.0 {
            return Err(ConfigError::invalid("period", "must be positive seconds"));
        }
        if !self.amplitude.is_finite() || self.amplitude < 0.0 {
            return Err(ConfigError::invalid(
                "amplitude",
                "must be a non-negative length in meters",
            ));
        }
        let band_ok = match self.wmo_code {
            0 => self.amplitude == 0.0,
            1 => self.amplitude > 0.0 && self.amplitude <= 0.1,
            2 => self.amplitude > 0.1 && self.amplitude <= 0.5,
            other => return Err(ConfigError::UnknownSeaState(other)),
        };
        if !band_ok {
            return Err(ConfigError::invalid(
                "amplitude",
                format!(
                    "{} m is outside the WMO band for sea state {}",
                    self.amplitude, self.wmo_code
                ),
            ));
        }
        for (name, frac) in [("surge_frac", self.surge_frac), ("sway_frac", self.sway_frac)] {
            if !frac.is_finite() || !(0.0..=1.0).contains(&frac) {
                return Err(ConfigError::invalid(
                    match name {
                        "surge_frac" => "surge_frac",
                        _ => "sway_frac",
                    },
                    "must lie in [0, 1]",
                ));
            }
        }
        if self.phases.iter().any(|p| !p.is_finite()) {
            return Err(ConfigError::invalid("phases", "must be finite radians"));
        }
        Ok(())
    }

    /// Base-motion offset `[x, y, z]` in meters at time `t` seconds.
    pub fn offset(&self, t: f64) -> [f64; 3] {
        if self.amplitude == 0.0 {
            return [0.0; 3];
        }
        let phase = 2.0 * PI * t / self.period;
        let a = self.amplitude;
        [
            self.surge_frac * a * (phase + self.phases[1]).sin(),
            self.sway_frac * a * (phase + self.phases[2]).sin(),
            a * (phase + self.phases[0]).sin(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_band_maxima() {
        let s0 = SeaStateSpec::preset(0).unwrap();
        assert_eq!(s0.amplitude, 0.0);
        let s1 = SeaStateSpec::preset(1).unwrap();
        assert_eq!(s1.amplitude, 0.1);
        assert_eq!(s1.period, 5.0);
        let s2 = SeaStateSpec::preset(2).unwrap();
        assert_eq!(s2.amplitude, 0.5);
        assert_eq!(s2.period, 5.0);
        for code in 0..3 {
            SeaStateSpec::preset(code).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn unknown_code_rejected() {
        assert!(matches!(
            SeaStateSpec::preset(3),
            Err(ConfigError::UnknownSeaState(3))
        ));
    }

    #[test]
    fn calm_state_is_identically_zero() {
        let s0 = SeaStateSpec::preset(0).unwrap();
        for k in 0..100 {
            assert_eq!(s0.offset(0.173 * k as f64), [0.0; 3]);
        }
    }

    #[test]
    fn quarter_period_heave_peaks() {
        // A = 0.5, T = 5, heave phase 0: at t = T/4 the heave is exactly A.
        let s2 = SeaStateSpec::preset(2).unwrap();
        let z = s2.offset(1.25)[2];
        assert!((z - 0.5).abs() < 1e-12, "heave at quarter period: {z}");
    }

    #[test]
    fn band_validation_rejects_out_of_band_amplitudes() {
        let mut s = SeaStateSpec::preset(1).unwrap();
        s.amplitude = 0.3;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("amplitude"), "{err}");

        let mut s = SeaStateSpec::preset(2).unwrap();
        s.period = 0.0;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("period"), "{err}");
    }

    #[test]
    fn scanned_amplitude_and_period_match_spec() {
        // Fine scan: recover the heave amplitude and the dominant period
        // from samples alone.
        for code in 1..3u8 {
            let s = SeaStateSpec::preset(code).unwrap();
            let dt = 0.01;
            let n = (50.0 / dt) as usize;
            let mut max_z: f64 = 0.0;
            let mut crossings = Vec::new();
            let mut prev = s.offset(0.0)[2];
            for k in 1..=n {
                let t = k as f64 * dt;
                let z = s.offset(t)[2];
                max_z = max_z.max(z.abs());
                if prev < 0.0 && z >= 0.0 {
                    crossings.push(t);
                }
                prev = z;
            }
            assert!(
                (max_z - s.amplitude).abs() < 1e-3,
                "code {code}: scanned amplitude {max_z}"
            );
            let spans: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
            let mean_period = spans.iter().sum::<f64>() / spans.len() as f64;
            assert!(
                (mean_period - s.period).abs() <= dt,
                "code {code}: scanned period {mean_period}"
            );
        }
    }

    #[test]
    fn periodicity_residual_below_tolerance() {
        for code in 0..3u8 {
            let s = SeaStateSpec::preset(code).unwrap();
            for k in 0..500 {
                let t = 0.37 * k as f64;
                let a = s.offset(t);
                let b = s.offset(t + s.period);
                for i in 0..3 {
                    assert!(
                        (a[i] - b[i]).abs() < 1e-9,
                        "code {code} t {t} axis {i}: {} vs {}",
                        a[i],
                        b[i]
                    );
                }
            }
        }
    }

    #[test]
    fn components_bounded_by_their_amplitudes() {
        let s = SeaStateSpec::preset(2).unwrap();
        for k in 0..5000 {
            let t = 0.0137 * k as f64;
            let [x, y, z] = s.offset(t);
            assert!(x.abs() <= s.surge_frac * s.amplitude + 1e-12);
            assert!(y.abs() <= s.sway_frac * s.amplitude + 1e-12);
            assert!(z.abs() <= s.amplitude + 1e-12);
        }
    }

    #[test]
    fn zero_mean_over_one_period() {
        for code in 1..3u8 {
            let s = SeaStateSpec::preset(code).unwrap();
            let n = 10_000;
            let h = s.period / n as f64;
            let mut integral = [0.0f64; 3];
            for k in 0..n {
                let a = s.offset(k as f64 * h);
                let b = s.offset((k + 1) as f64 * h);
                for (acc, (ai, bi)) in integral.iter_mut().zip(a.iter().zip(&b)) {
                    *acc += 0.5 * (ai + bi) * h;
                }
            }
            for (i, v) in integral.iter().enumerate() {
                assert!(
                    v.abs() < 1e-6 * s.amplitude,
                    "code {code} axis {i}: integral {v}"
                );
            }
        }
    }
}
