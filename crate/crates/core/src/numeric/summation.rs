use std::iter::Sum;
use std::ops::AddAssign;

/// Neumaier's variant of Kahan summation.
///
/// The error bound does not grow with the number of terms, which matters when
/// millions of cell contributions of very different magnitudes are added.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Merge another partial sum, keeping both compensation terms.
    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, x: f64) {
        self.add(x);
    }
}

impl Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    xs.iter().copied().sum::<NeumaierSum>().value()
}

/// Pairwise merge of partial sums in a fixed tree order, so the result does
/// not depend on how the partials were produced.
pub fn merge_pairwise(parts: &[NeumaierSum]) -> NeumaierSum {
    match parts.len() {
        0 => NeumaierSum::new(),
        1 => parts[0],
        len => {
            let (l, r) = parts.split_at(len / 2);
            let mut acc = merge_pairwise(l);
            acc.merge(&merge_pairwise(r));
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancels_catastrophic_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum(&xs), 2.0);
        let naive: f64 = xs.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn many_small_terms() {
        let n = 1_000_000;
        let s: NeumaierSum = std::iter::repeat(0.1).take(n).sum();
        assert!((s.value() - 100_000.0).abs() < 1e-9);
    }

    #[test]
    fn pairwise_merge_matches_serial() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 113) as f64 * 1e-3 - 0.05).collect();
        let parts: Vec<NeumaierSum> = xs.chunks(37).map(|c| c.iter().copied().sum()).collect();
        assert!((merge_pairwise(&parts).value() - sum(&xs)).abs() < 1e-15);
    }
}
