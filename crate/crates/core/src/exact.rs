//! Error-free floating point accumulation.
//!
//! The chain update is a short sum of products. Both the piecewise-scalar and
//! the matrix route feed their terms into an [`ExactSum`], which returns the
//! correctly rounded value of the real sum. Two routes that describe the same
//! real number therefore produce the same `f64`, bit for bit.

const CAPACITY: usize = 24;

/// Shewchuk-style accumulator of non-overlapping partials.
///
/// Holds at most `CAPACITY` partials; the chain update never needs more than a
/// dozen.
#[derive(Debug, Clone)]
pub(crate) struct ExactSum {
    partials: [f64; CAPACITY],
    len: usize,
    /// Set when a non-finite term was seen; the result is then the plain sum.
    special: Option<f64>,
}

impl ExactSum {
    pub(crate) fn new() -> Self {
        Self {
            partials: [0.0; CAPACITY],
            len: 0,
            special: None,
        }
    }

    pub(crate) fn add(&mut self, x: f64) -> &mut Self {
        if !x.is_finite() {
            self.special = Some(self.special.unwrap_or(0.0) + x);
            return self;
        }
        let mut x = x;
        let mut i = 0;
        for j in 0..self.len {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            if !hi.is_finite() {
                // Intermediate overflow: fall back to the naive sum.
                let rest: f64 = self.partials[j + 1..self.len].iter().sum();
                self.special = Some(self.special.unwrap_or(0.0) + hi + rest);
                self.len = i;
                return self;
            }
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        assert!(i < CAPACITY, "ExactSum capacity exceeded");
        self.partials[i] = x;
        self.len = i + 1;
        self
    }

    /// Adds `a * b` exactly (as the pair `p + e` with `p = fl(a*b)`).
    pub(crate) fn add_product(&mut self, a: f64, b: f64) -> &mut Self {
        let p = a * b;
        if !p.is_finite() {
            return self.add(p);
        }
        let e = a.mul_add(b, -p);
        self.add(p).add(e)
    }

    /// Correctly rounded (round-half-even) value of the accumulated sum.
    pub(crate) fn value(&self) -> f64 {
        if let Some(s) = self.special {
            return s + self.partials[..self.len].iter().sum::<f64>();
        }
        let p = &self.partials[..self.len];
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
        // Half-way case: the remaining partials decide the rounding direction.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

/// `a + b` as an unevaluated pair `(hi, lo)` with `hi + lo == a + b` exactly.
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let hi = a + b;
    let bb = hi - a;
    let lo = (a - (hi - bb)) + (b - bb);
    (hi, lo)
}
