use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The box `(-l/2, l/2]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationRegion {
    pub dim: usize,
    pub side: f64,
}

impl SimulationRegion {
    pub fn new(dim: usize, side: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("dimension must be at least 1".into()));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::Argument(format!(
                "side length must be positive, got {side}"
            )));
        }
        Ok(Self { dim, side })
    }

    /// Region with the given volume.
    pub fn with_volume(dim: usize, volume: f64) -> Result<Self> {
        Self::new(dim, volume.powf(1.0 / dim as f64))
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    pub fn boundary(&self) -> f64 {
        2.0 * self.dim as f64 * self.side.powi(self.dim as i32 - 1)
    }

    pub fn lower(&self) -> f64 {
        -0.5 * self.side
    }

    pub fn upper(&self) -> f64 {
        0.5 * self.side
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_and_boundary() {
        let r = SimulationRegion::new(2, 3.0).unwrap();
        assert_eq!(r.volume(), 9.0);
        assert_eq!(r.boundary(), 12.0);
        let r = SimulationRegion::new(1, 50.0).unwrap();
        assert_eq!(r.boundary(), 2.0);
        assert!(SimulationRegion::new(1, -1.0).is_err());
        let r = SimulationRegion::with_volume(2, 16.0).unwrap();
        assert!((r.side - 4.0).abs() < 1e-15);
    }
}
