//! Two-layer network with quadratic activations, rewritten as a linear model
//! over fourth-order Kronecker features:
//!
//! ```text
//! sum_i a_i (sum_j b_ij (c_ij^T phi)^2)^2 = theta*^T ((phi (x) phi) (x) (phi (x) phi))
//! theta_i = sum_j b_ij c_ij (x) c_ij,   theta* = sum_i a_i theta_i (x) theta_i
//! ```

use crate::error::{Error, Result};
use crate::types::ParameterVector;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadNetSpec {
    /// Input dimension `d`.
    pub d: usize,
    /// Outer weights, length `m1`.
    pub a: Vec<f64>,
    /// Inner weights, `m1 x m2`.
    pub b: Vec<Vec<f64>>,
    /// Inner directions, `m1 x m2` vectors of length `d`.
    pub c: Vec<Vec<Vec<f64>>>,
}

impl QuadNetSpec {
    pub fn m1(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m1 = self.a.len();
        if self.d == 0 || m1 == 0 {
            return Err(Error::config("quadnet", "d and m1 must be positive"));
        }
        if self.b.len() != m1 || self.c.len() != m1 {
            return Err(Error::Dimension {
                context: "quadnet rows",
                expected: m1,
                got: self.b.len().min(self.c.len()),
            });
        }
        let m2 = self.b[0].len();
        if m2 == 0 {
            return Err(Error::config("quadnet", "m2 must be positive"));
        }
        for (bi, ci) in self.b.iter().zip(&self.c) {
            if bi.len() != m2 || ci.len() != m2 {
                return Err(Error::Dimension {
                    context: "quadnet columns",
                    expected: m2,
                    got: bi.len().min(ci.len()),
                });
            }
            if let Some(bad) = ci.iter().find(|v| v.len() != self.d) {
                return Err(Error::Dimension {
                    context: "quadnet direction",
                    expected: self.d,
                    got: bad.len(),
                });
            }
        }
        Ok(())
    }

    /// Direct evaluation of the network output.
    pub fn nested_eval(&self, phi: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(self.b.iter().zip(&self.c))
            .map(|(ai, (bi, ci))| {
                let inner: f64 = bi
                    .iter()
                    .zip(ci)
                    .map(|(bij, cij)| {
                        let s = crate::numeric::dot(cij, phi);
                        bij * s * s
                    })
                    .sum();
                ai * inner * inner
            })
            .sum()
    }
}

/// Kronecker product of two vectors, `a` major.
pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        out.extend(b.iter().map(|y| x * y));
    }
    out
}

/// Feature map `phi -> (phi (x) phi) (x) (phi (x) phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KroneckerFeatures {
    pub d: usize,
}

impl KroneckerFeatures {
    pub fn lifted_dim(&self) -> usize {
        self.d.pow(4)
    }

    pub fn lift(&self, phi: &[f64]) -> Result<Vec<f64>> {
        if phi.len() != self.d {
            return Err(Error::Dimension {
                context: "kronecker lift input",
                expected: self.d,
                got: phi.len(),
            });
        }
        let pp = kron(phi, phi);
        Ok(kron(&pp, &pp))
    }
}

/// Lift a network to its linear form: the `d^4`-dimensional true parameter and
/// the matching feature map.
pub fn quadnet_lift(spec: &QuadNetSpec) -> Result<(ParameterVector, KroneckerFeatures)> {
    spec.validate()?;
    let d = spec.d;
    let mut theta_star = vec![0.0; d.pow(4)];
    for (ai, (bi, ci)) in spec.a.iter().zip(spec.b.iter().zip(&spec.c)) {
        let mut theta_i = vec![0.0; d * d];
        for (bij, cij) in bi.iter().zip(ci) {
            for (t, v) in theta_i.iter_mut().zip(kron(cij, cij)) {
                *t += bij * v;
            }
        }
        for (t, v) in theta_star.iter_mut().zip(kron(&theta_i, &theta_i)) {
            *t += ai * v;
        }
    }
    Ok((ParameterVector::truth(theta_star)?, KroneckerFeatures { d }))
}
