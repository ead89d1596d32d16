use std::ops::AddAssign;

use num_complex::Complex64;

/// Kahan–Babuška–Neumaier running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for NeumaierSum {
    #[inline]
    fn add_assign(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
}

impl AddAssign<NeumaierSum> for NeumaierSum {
    fn add_assign(&mut self, other: NeumaierSum) {
        *self += other.sum;
        *self += other.comp;
    }
}

/// Compensated complex sum, real and imaginary parts independently.
#[derive(Debug, Default, Clone, Copy)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl AddAssign<Complex64> for ComplexSum {
    #[inline]
    fn add_assign(&mut self, z: Complex64) {
        self.re += z.re;
        self.im += z.im;
    }
}

impl AddAssign<ComplexSum> for ComplexSum {
    fn add_assign(&mut self, other: ComplexSum) {
        self.re += other.re;
        self.im += other.im;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let mut s = NeumaierSum::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s += x;
        }
        assert_eq!(s.value(), 2.0);
    }
}
