//! Correctly rounded floating-point summation (Shewchuk's non-overlapping
//! partials). The result does not depend on the order of the terms, which
//! lets a tree reduction reproduce a sequential sum bit for bit.

/// Running sum kept as non-overlapping partials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
    special: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        if !x.is_finite() {
            self.special += x;
            return;
        }
        let mut i = 0;
        for k in 0..self.partials.len() {
            let mut y = self.partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Absorbs another partial sum; the exact total is unchanged by how the
    /// terms were grouped.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
        self.special += other.special;
    }

    /// Nearest double to the exact sum, ties to even.
    pub fn value(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // half-way case: the next partial decides the direction
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    terms.into_iter().collect::<ExactSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation() {
        assert_eq!(exact_sum([1e16, 1.0, -1e16, 0.5]), 1.5);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
    }

    #[test]
    fn order_free() {
        let v = [1e100, 1.0, -1e100, 1e-20, 3.0, -2.5e-7];
        let mut r = v;
        r.reverse();
        assert_eq!(exact_sum(v), exact_sum(r));
        let mut a: ExactSum = v[..3].iter().copied().collect();
        let b: ExactSum = v[3..].iter().copied().collect();
        a.merge(&b);
        assert_eq!(a.value(), exact_sum(v));
    }

    #[test]
    fn half_way_rounds_to_even() {
        // 1 + 2^-53 is a tie and rounds down to 1; adding 2^-106 breaks it
        let t = (2f64).powi(-53);
        assert_eq!(exact_sum([1.0, t]), 1.0);
        assert_eq!(exact_sum([1.0, t, t * t]), 1.0 + 2.0 * t);
    }
}
