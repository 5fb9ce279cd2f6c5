//! Compensated floating-point accumulation (Neumaier summation, exact
//! FMA-based products). The biharmonic stencil at fine meshes multiplies
//! O(h⁻⁴) coefficients against O(1) values and cancels back down to O(1);
//! plain f64 accumulation leaves ~1e−7 noise there, which is above some of
//! the residual tolerances this crate must certify. These helpers keep the
//! error at the final-rounding level instead.

/// Running Neumaier (improved Kahan–Babuška) sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Adds a product a·b exactly (both the rounded product and its
    /// FMA-recovered rounding error enter the sum).
    #[inline]
    pub fn add_prod(&mut self, a: f64, b: f64) {
        let hi = a * b;
        let lo = a.mul_add(b, -hi);
        self.add(hi);
        self.add(lo);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated dot product.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = CompensatedSum::new();
    for (&x, &y) in a.iter().zip(b) {
        acc.add_prod(x, y);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_catastrophic_cancellation() {
        let mut acc = CompensatedSum::new();
        for &x in &[1e16, 1.0, -1e16, 1.0] {
            acc.add(x);
        }
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn product_rounding_is_recovered() {
        // (1 + 2^-30)² rounds when squared; the compensated path keeps the
        // low bits that a plain product drops.
        let a = 1.0 + (0.5f64).powi(30);
        let mut acc = CompensatedSum::new();
        acc.add_prod(a, a);
        acc.add(-1.0);
        acc.add(-2.0 * (0.5f64).powi(30));
        let exact_tail = (0.5f64).powi(60);
        assert!((acc.value() - exact_tail).abs() < 1e-25);
    }

    #[test]
    fn dot_matches_plain_sum_on_benign_data() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 * 0.25).collect();
        let b: Vec<f64> = (0..100).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let plain: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - plain).abs() <= 1e-12 * plain.abs());
    }
}
