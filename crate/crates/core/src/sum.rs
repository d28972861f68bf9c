//! Compensated accumulation.
//!
//! Every kernel sum in the crate goes through [`Neumaier`] so that results
//! depend only on the summation order, which is always the canonical node
//! order.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline(always)]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for Neumaier {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = Neumaier::new();
    acc.extend(iter);
    acc.value()
}

/// A fixed-width vector of compensated accumulators.
#[derive(Debug, Clone)]
pub struct VecSum {
    parts: Vec<Neumaier>,
}

impl VecSum {
    pub fn new(d: usize) -> Self {
        Self {
            parts: vec![Neumaier::new(); d],
        }
    }

    #[inline(always)]
    pub fn add_scaled(&mut self, v: &[f64], scale: f64) {
        for (p, x) in self.parts.iter_mut().zip(v) {
            p.add(x * scale);
        }
    }

    #[inline(always)]
    pub fn add_component(&mut self, i: usize, x: f64) {
        self.parts[i].add(x);
    }

    pub fn values(&self) -> Vec<f64> {
        self.parts.iter().map(Neumaier::value).collect()
    }

    pub fn write_into(&self, out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.parts) {
            *o = p.value();
        }
    }
}
