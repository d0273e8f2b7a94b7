//! Model constants shared by the analytic model and the simulators.

use crate::error::{Error, Result};

/// Converts a decibel value to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// System constants.
///
/// `snr` is the receive SNR `P_rx / N0` and `threshold` is the decoding SINR
/// threshold, both in linear scale. `preambles` is the number of orthogonal
/// preambles, which equals the preamble length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub antennas: u32,
    pub preambles: u32,
    pub snr: f64,
    pub threshold: f64,
    pub arrival_rate: f64,
}

impl SystemParams {
    pub fn new(
        antennas: u32,
        preambles: u32,
        snr: f64,
        threshold: f64,
        arrival_rate: f64,
    ) -> Result<Self> {
        let p = Self {
            antennas,
            preambles,
            snr,
            threshold,
            arrival_rate,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from SNR and threshold given in dB.
    pub fn from_db(
        antennas: u32,
        preambles: u32,
        snr_db: f64,
        threshold_db: f64,
        arrival_rate: f64,
    ) -> Result<Self> {
        Self::new(
            antennas,
            preambles,
            db_to_linear(snr_db),
            db_to_linear(threshold_db),
            arrival_rate,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::InvalidParams("antenna count must be >= 1".into()));
        }
        if self.preambles == 0 {
            return Err(Error::InvalidParams("preamble count must be >= 1".into()));
        }
        if !(self.snr.is_finite() && self.snr > 0.0) {
            return Err(Error::InvalidParams(format!(
                "snr must be > 0, got {}",
                self.snr
            )));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::InvalidParams(format!(
                "threshold must be > 0, got {}",
                self.threshold
            )));
        }
        if !(self.arrival_rate.is_finite() && self.arrival_rate >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "arrival rate must be >= 0, got {}",
                self.arrival_rate
            )));
        }
        Ok(())
    }

    pub fn with_arrival_rate(mut self, arrival_rate: f64) -> Self {
        self.arrival_rate = arrival_rate;
        self
    }

    pub fn with_antennas(mut self, antennas: u32) -> Self {
        self.antennas = antennas;
        self
    }

    pub fn with_preambles(mut self, preambles: u32) -> Self {
        self.preambles = preambles;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn m(&self) -> f64 {
        f64::from(self.antennas)
    }

    pub fn l(&self) -> f64 {
        f64::from(self.preambles)
    }

    /// `1 + 1/snr`, the per-device coefficient of the mean-SINR denominator.
    pub fn b1(&self) -> f64 {
        1.0 + 1.0 / self.snr
    }

    /// `1/snr^2 - 1`, the constant term of the mean-SINR denominator.
    pub fn b0(&self) -> f64 {
        1.0 / (self.snr * self.snr) - 1.0
    }

    pub fn snr_db(&self) -> f64 {
        linear_to_db(self.snr)
    }

    pub fn threshold_db(&self) -> f64 {
        linear_to_db(self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derived_coefficients() {
        let p = SystemParams::from_db(100, 64, 6.0, 6.0, 20.0).unwrap();
        assert!((p.b1() - 1.25119).abs() < 1e-5);
        assert!((p.b0() + 0.93690).abs() < 1e-5);
        assert!(p.b1() > 1.0);
        assert!(p.b0() > -1.0 && p.b0() < 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SystemParams::new(0, 64, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1, 0, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1, 1, 0.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1, 1, 1.0, -1.0, 1.0).is_err());
        assert!(SystemParams::new(1, 1, 1.0, 1.0, -0.1).is_err());
        assert!(SystemParams::new(1, 1, 1.0, 1.0, f64::NAN).is_err());
        assert!(SystemParams::new(1, 1, 1.0, 1.0, 0.0).is_ok());
    }

    proptest! {
        #[test]
        fn db_round_trip(db in -60.0f64..60.0) {
            let back = linear_to_db(db_to_linear(db));
            let tol = 1e-12 * db.abs().max(1.0);
            prop_assert!((back - db).abs() <= tol, "{} -> {}", db, back);
        }
    }
}
