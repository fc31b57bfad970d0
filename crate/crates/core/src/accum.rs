//! Compensated summation.

/// Neumaier variant of Kahan summation. Used for every ball sum so that
/// exact operator identities survive at tolerances near machine precision.
#[derive(Clone, Copy, Default)]
pub struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    pub fn new() -> Sum {
        Sum { s: 0.0, c: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.s + self.c
    }
}

pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = Sum::new();
    for v in iter {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensates_cancellation() {
        let vals = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum(vals.iter().copied()), 2.0);
    }

    #[test]
    fn matches_plain_sum_on_benign_data() {
        let vals: Vec<f64> = (0..1000).map(|i| (i as f64).sin().abs()).collect();
        let plain: f64 = vals.iter().sum();
        assert!((sum(vals.iter().copied()) - plain).abs() < 1e-10);
    }
}
