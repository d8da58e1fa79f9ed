//! Quadrature rules and the cutoff functions used by the oracles.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Composite Gauss-Legendre rule on `[a, b]` as `(node, weight)` pairs.
pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (x, w) in xs.iter().zip(&ws) {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// Radial cutoff: 1 on `[0, flat]`, 0 on `[zero, inf)`, degree-7 smoothstep in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub flat: f64,
    pub zero: f64,
}

impl Cutoff {
    pub const REFERENCE: Cutoff = Cutoff { flat: 0.5, zero: 1.0 };

    pub fn new(flat: f64, zero: f64) -> Self {
        assert!(0.0 < flat && flat < zero, "cutoff needs 0 < flat < zero");
        Self { flat, zero }
    }

    /// `x -> omega(s x)`.
    pub fn dilated(&self, s: f64) -> Self {
        Self { flat: self.flat / s, zero: self.zero / s }
    }

    fn t(&self, x: f64) -> f64 {
        ((x - self.flat) / (self.zero - self.flat)).clamp(0.0, 1.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.flat {
            return 1.0;
        }
        if x >= self.zero {
            return 0.0;
        }
        let t = self.t(x);
        let t4 = t * t * t * t;
        1.0 - t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    }

    pub fn deriv(&self, x: f64) -> f64 {
        if x <= self.flat || x >= self.zero {
            return 0.0;
        }
        let t = self.t(x);
        let u = t * (1.0 - t);
        -140.0 * u * u * u / (self.zero - self.flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn composite_rule_integrates_exp() {
        let s: f64 = composite(0.0, 3.0, 10, 8).iter().map(|(x, w)| w * x.exp()).sum();
        assert!((s - (3f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cutoff_profile() {
        let w = Cutoff::REFERENCE;
        assert_eq!(w.eval(0.2), 1.0);
        assert_eq!(w.eval(0.5), 1.0);
        assert_eq!(w.eval(1.0), 0.0);
        assert!((w.eval(0.75) - 0.5).abs() < 1e-14);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = w.eval(0.5 + 0.005 * k as f64);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        // total descent equals the integral of the derivative
        let s: f64 = composite(0.5, 1.0, 4, 8).iter().map(|(x, q)| q * w.deriv(*x)).sum();
        assert!((s + 1.0).abs() < 1e-13);
    }

    #[test]
    fn cutoff_derivative_matches_difference_quotient() {
        let w = Cutoff::new(0.3, 0.8);
        for &x in &[0.35, 0.5, 0.62, 0.79] {
            let h = 1e-6;
            let fd = (w.eval(x + h) - w.eval(x - h)) / (2.0 * h);
            assert!((fd - w.deriv(x)).abs() < 1e-7);
        }
    }
}
