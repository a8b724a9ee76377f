//! Regularized square-root noise coefficients.
//!
//! `sigma_n` equals the target on `[1/n, 1 - 1/n]` (resp. `[1/n, inf)`), is
//! zero below `1/(2n)`, and is ramped in between by the cubic smoothstep
//! `s(u) = 3u^2 - 2u^3`, which makes it C^1 with an explicit derivative.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    /// `sqrt(z (1 - z))` on `[0, 1]`.
    Ssep,
    /// `sqrt(z)` on `[0, inf)`.
    Dk,
}

impl SigmaKind {
    pub fn name(self) -> &'static str {
        match self {
            SigmaKind::Ssep => "ssep",
            SigmaKind::Dk => "dk",
        }
    }

    pub fn target(self, z: f64) -> f64 {
        match self {
            SigmaKind::Ssep => (z * (1.0 - z)).max(0.0).sqrt(),
            SigmaKind::Dk => z.max(0.0).sqrt(),
        }
    }

    fn target_deriv(self, z: f64) -> f64 {
        match self {
            SigmaKind::Ssep => (1.0 - 2.0 * z) / (2.0 * (z * (1.0 - z)).sqrt()),
            SigmaKind::Dk => 0.5 / z.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaReg {
    kind: SigmaKind,
    n: usize,
    max_deriv: f64,
}

impl SigmaReg {
    pub fn new(kind: SigmaKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("regularization n must be >= 2, got {n}")));
        }
        let mut reg = Self {
            kind,
            n,
            max_deriv: 0.0,
        };
        reg.max_deriv = reg.sampled_max_deriv();
        Ok(reg)
    }

    pub fn kind(&self) -> SigmaKind {
        self.kind
    }

    pub fn reg_n(&self) -> usize {
        self.n
    }

    /// `sup |sigma_n'|`, used by the time-step rule.
    pub fn max_abs_deriv(&self) -> f64 {
        self.max_deriv
    }

    /// `(sigma_n(z), sigma_n'(z))`.
    #[inline]
    pub fn eval(&self, z: f64) -> (f64, f64) {
        match self.kind {
            SigmaKind::Ssep if z > 0.5 => {
                let (v, dv) = self.lower(1.0 - z);
                (v, -dv)
            }
            _ => self.lower(z),
        }
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        self.eval(z).0
    }

    #[inline]
    pub fn deriv(&self, z: f64) -> f64 {
        self.eval(z).1
    }

    /// Lower-boundary branch, valid for `z <= 1/2` (ssep) or all `z` (dk).
    #[inline]
    fn lower(&self, z: f64) -> (f64, f64) {
        let b = 1.0 / self.n as f64;
        let a = 0.5 * b;
        if z <= a {
            (0.0, 0.0)
        } else if z < b {
            let width = b - a;
            let u = (z - a) / width;
            let s = u * u * (3.0 - 2.0 * u);
            let ds = 6.0 * u * (1.0 - u) / width;
            let t = self.kind.target(z);
            (s * t, ds * t + s * self.kind.target_deriv(z))
        } else {
            (self.kind.target(z), self.kind.target_deriv(z))
        }
    }

    fn sampled_max_deriv(&self) -> f64 {
        let samples = 200_000;
        let b = 1.0 / self.n as f64;
        // the sup sits on the ramp or at the start of the plateau
        let mut best = self.deriv(b).abs();
        for i in 0..=samples {
            let z = i as f64 / samples as f64;
            best = best.max(self.deriv(z).abs());
        }
        let ramp = 2000;
        for i in 0..=ramp {
            let z = 0.5 * b + 0.5 * b * i as f64 / ramp as f64;
            best = best.max(self.deriv(z).abs());
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_at_zero_and_matches_target_inside() {
        for kind in [SigmaKind::Ssep, SigmaKind::Dk] {
            let s = SigmaReg::new(kind, 16).unwrap();
            assert_eq!(s.value(0.0), 0.0);
            assert_eq!(s.value(-0.3), 0.0);
            for z in [1.0 / 16.0, 0.2, 0.5, 0.9] {
                assert!((s.value(z) - kind.target(z)).abs() < 1e-15);
            }
        }
        let s = SigmaReg::new(SigmaKind::Ssep, 16).unwrap();
        assert_eq!(s.value(1.0), 0.0);
        assert_eq!(s.value(1.2), 0.0);
        assert!((s.value(0.7) - s.value(0.3)).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for kind in [SigmaKind::Ssep, SigmaKind::Dk] {
            let s = SigmaReg::new(kind, 10).unwrap();
            let h = 1e-7;
            for i in 1..400 {
                let z = i as f64 / 400.0;
                let fd = (s.value(z + h) - s.value(z - h)) / (2.0 * h);
                assert!((fd - s.deriv(z)).abs() < 1e-4 * (1.0 + fd.abs()), "{kind:?} z={z}");
            }
        }
    }

    #[test]
    fn c1_at_ramp_endpoints() {
        let s = SigmaReg::new(SigmaKind::Dk, 20).unwrap();
        let (a, b) = (0.025, 0.05);
        let e = 1e-9;
        assert!((s.value(a + e) - s.value(a - e)).abs() < 1e-8);
        assert!((s.deriv(a + e) - s.deriv(a - e)).abs() < 1e-4);
        assert!((s.value(b + e) - s.value(b - e)).abs() < 1e-8);
        assert!((s.deriv(b + e) - s.deriv(b - e)).abs() < 1e-4);
    }

    #[test]
    fn bounded_derivative_and_convergence() {
        let mut prev = 0.0;
        for n in [4, 16, 64] {
            let s = SigmaReg::new(SigmaKind::Ssep, n).unwrap();
            assert!(s.max_abs_deriv().is_finite());
            // grows as the ramp steepens
            assert!(s.max_abs_deriv() > prev);
            prev = s.max_abs_deriv();
            let z = 0.3;
            assert_eq!(s.deriv(z), SigmaKind::Ssep.target_deriv(z));
        }
    }

    #[test]
    fn rejects_tiny_n() {
        assert!(SigmaReg::new(SigmaKind::Ssep, 1).is_err());
    }
}
