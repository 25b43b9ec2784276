//! Symmetric 2x2 conductivity tensors: isotropic grey matter plus the
//! optional axonal rank-one part used for white matter.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    /// sigma * identity
    pub fn iso(sigma: f64) -> Tensor2 {
        Tensor2 {
            xx: sigma,
            xy: 0.0,
            yy: sigma,
        }
    }

    /// sigma_ext * I + sigma_axn * n (x) n, with `dir` normalized here.
    pub fn with_axon(sigma_ext: f64, sigma_axn: f64, dir: (f64, f64)) -> Tensor2 {
        let len = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
        let (nx, ny) = if len > 0.0 {
            (dir.0 / len, dir.1 / len)
        } else {
            (1.0, 0.0)
        };
        Tensor2 {
            xx: sigma_ext + sigma_axn * nx * nx,
            xy: sigma_axn * nx * ny,
            yy: sigma_ext + sigma_axn * ny * ny,
        }
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        Tensor2 {
            xx: self.xx * s,
            xy: self.xy * s,
            yy: self.yy * s,
        }
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (
            self.xx * v.0 + self.xy * v.1,
            self.xy * v.0 + self.yy * v.1,
        )
    }

    /// Largest eigenvalue (spectral norm for SPD tensors).
    pub fn max_eigenvalue(&self) -> f64 {
        let tr = self.xx + self.yy;
        let det = self.xx * self.yy - self.xy * self.xy;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        tr / 2.0 + disc
    }
}
