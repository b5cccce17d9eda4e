//! Double-double (about 106-bit) evaluation of the plain three-term
//! recurrences. Slow; used to validate the binary64 evaluator.

use std::ops::{Add, Mul, Neg, Sub};

use super::{PerturbationSequences, QrsTriple};
use crate::mobius::Complex;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, o: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = DoubleDouble;
    fn neg(self) -> DoubleDouble {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, o: DoubleDouble) -> DoubleDouble {
        self + (-o)
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, o: DoubleDouble) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexDD {
    pub re: DoubleDouble,
    pub im: DoubleDouble,
}

impl ComplexDD {
    pub fn from_c64(z: Complex) -> Self {
        ComplexDD {
            re: DoubleDouble::from_f64(z.re),
            im: DoubleDouble::from_f64(z.im),
        }
    }

    pub fn to_c64(self) -> Complex {
        Complex::new(self.re.to_f64(), self.im.to_f64())
    }
}

impl Add for ComplexDD {
    type Output = ComplexDD;
    fn add(self, o: ComplexDD) -> ComplexDD {
        ComplexDD {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
}

impl Sub for ComplexDD {
    type Output = ComplexDD;
    fn sub(self, o: ComplexDD) -> ComplexDD {
        ComplexDD {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }
}

impl Mul for ComplexDD {
    type Output = ComplexDD;
    fn mul(self, o: ComplexDD) -> ComplexDD {
        ComplexDD {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

/// `x_{j+1} = (1 + rho - e) x_j - rho x_{j-1}`, coefficients formed in
/// double-double from the binary64 inputs.
fn three_term(
    x0: Complex,
    x1: Complex,
    coeffs: impl Iterator<Item = (Complex, Complex)>,
) -> Vec<Complex> {
    let one = ComplexDD::from_c64(Complex::new(1.0, 0.0));
    let mut prev = ComplexDD::from_c64(x0);
    let mut cur = ComplexDD::from_c64(x1);
    let mut out = vec![x0, x1];
    for (rho, e) in coeffs {
        let rho = ComplexDD::from_c64(rho);
        let c = one + rho - ComplexDD::from_c64(e);
        let next = c * cur - rho * prev;
        prev = cur;
        cur = next;
        out.push(cur.to_c64());
    }
    out
}

/// Same outputs as [`super::run_recurrences`], computed in double-double
/// and rounded once at the end.
pub fn run_recurrences_dd(seqs: &PerturbationSequences) -> QrsTriple {
    let n = seqs.n();
    let step = |k: usize| (seqs.rho(k), seqs.eps_sq(k));
    let zero = Complex::new(0.0, 0.0);
    let one = Complex::new(1.0, 0.0);
    let q = three_term(zero, one, (1..=n).map(step));
    let r = three_term(one, one, (1..=n).map(step));
    let s = three_term(zero, one, (2..=n).map(step));
    let mut rho_prod = vec![one];
    let mut p = ComplexDD::from_c64(one);
    for k in 1..=n {
        p = p * ComplexDD::from_c64(seqs.rho(k));
        rho_prod.push(p.to_c64());
    }
    QrsTriple { q, r, s, rho_prod }
}
