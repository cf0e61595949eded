use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HPolytope, Result};

/// Volume with its Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl VolumeEstimate {
    pub fn exact(value: f64) -> Self {
        VolumeEstimate {
            value,
            std_error: 0.0,
            samples: 0,
        }
    }
}

impl HPolytope {
    /// Hit-or-miss estimate inside the bounding box.
    pub fn volume_monte_carlo<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<VolumeEstimate> {
        let bb = self.bounding_box()?;
        let box_vol = bb.volume();
        if box_vol == 0.0 || samples == 0 {
            return Ok(VolumeEstimate::exact(0.0));
        }
        let n = self.dim();
        let mut x = DVector::zeros(n);
        let mut hits = 0usize;
        for _ in 0..samples {
            for i in 0..n {
                x[i] = rng.gen_range(bb.lower()[i]..=bb.upper()[i]);
            }
            if self.contains(&x, 0.0) {
                hits += 1;
            }
        }
        let p = hits as f64 / samples as f64;
        Ok(VolumeEstimate {
            value: box_vol * p,
            std_error: box_vol * (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        })
    }
}
