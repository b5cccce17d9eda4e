//! Three-term recurrences encoding the composition `f_N ∘ ... ∘ f_1` of
//! `f_k(z) = rho_k z / (1 - z) + eps_k^2`, their closed-form comparison
//! sequences, and the identities tying them together.
//!
//! Index conventions: `q`, `r` run over `0..=N+1`, `s` over `0..=N`, and the
//! per-step parameters `rho_k`, `eps_k^2` over `1..=N+1`. Accessors taking a
//! step index are 1-based to match.

pub mod extended;

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mobius::{Complex, MoebiusCoeffs};

/// Values beyond this modulus abort the recurrence.
pub const OVERFLOW_LIMIT: f64 = 1e100;

/// Relative Wronskian drift tolerated by [`coefficients_from_qr`].
pub const WRONSKIAN_GUARD: f64 = 1e-6;

/// Martingale identity tolerance.
pub const IDENTITY_TOL: f64 = 1e-8;

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);

/// `e^{2 pi i / n}`.
pub fn root_of_unity(n: usize) -> Complex {
    Complex::from_polar(1.0, 2.0 * PI / n as f64)
}

/// Per-step parameters of one composition of length `N`. Only `eps_k^2` is
/// stored; nothing downstream needs a square-root branch.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSequences {
    n: usize,
    rho: Vec<Complex>,
    eps_sq: Vec<Complex>,
    rho_base: Complex,
}

impl PerturbationSequences {
    /// `rho` and `eps_sq` hold steps `1..=N+1` (so `rho[0]` is `rho_1`).
    pub fn new(n: usize, rho: Vec<Complex>, eps_sq: Vec<Complex>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "composition length must be positive"));
        }
        for (name, v) in [("rho", &rho), ("eps_sq", &eps_sq)] {
            if v.len() != n + 1 {
                return Err(Error::invalid(
                    name,
                    format!("expected {} entries (steps 1..=N+1), got {}", n + 1, v.len()),
                ));
            }
            if let Some(k) = v.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::invalid(name, format!("non-finite entry at step {}", k + 1)));
            }
        }
        let rho_base = root_of_unity(n);
        if let Some(k) = rho.iter().position(|r| (r - rho_base).norm() > 2.0) {
            return Err(Error::invalid(
                "rho",
                format!("step {} is not a small perturbation of e^(2 pi i/N)", k + 1),
            ));
        }
        if let Some(k) = eps_sq.iter().position(|e| e.norm() > 1.0) {
            return Err(Error::invalid("eps_sq", format!("|eps|^2 exceeds 1 at step {}", k + 1)));
        }
        Ok(PerturbationSequences {
            n,
            rho,
            eps_sq,
            rho_base,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho_base(&self) -> Complex {
        self.rho_base
    }

    pub fn rho_values(&self) -> &[Complex] {
        &self.rho
    }

    pub fn eps_sq_values(&self) -> &[Complex] {
        &self.eps_sq
    }

    pub fn rho(&self, k: usize) -> Complex {
        self.rho[k - 1]
    }

    pub fn eps_sq(&self, k: usize) -> Complex {
        self.eps_sq[k - 1]
    }

    /// `b_k = rho_k - rho`.
    pub fn b(&self, k: usize) -> Complex {
        self.rho(k) - self.rho_base
    }

    /// `a_k = b_k - eps_k^2`.
    pub fn a(&self, k: usize) -> Complex {
        self.b(k) - self.eps_sq(k)
    }

    pub fn is_multiplicative_only(&self) -> bool {
        self.eps_sq.iter().all(|e| *e == ZERO)
    }

    /// Coefficient matrix of `f_k`: `((rho_k - eps_k^2, eps_k^2), (-1, 1))`.
    pub fn step_map(&self, k: usize) -> MoebiusCoeffs {
        let e = self.eps_sq(k);
        MoebiusCoeffs::new_unchecked(self.rho(k) - e, e, -ONE, ONE)
    }

    /// Step maps `f_1, ..., f_N`.
    pub fn step_maps(&self) -> Vec<MoebiusCoeffs> {
        (1..=self.n).map(|k| self.step_map(k)).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RecurrenceOptions {
    /// Carry the rounding error of each accumulation step (TwoSum).
    pub compensated: bool,
}

/// Outputs of [`run_recurrences`].
#[derive(Clone, Debug, PartialEq)]
pub struct QrsTriple {
    /// `q_0..=q_{N+1}`
    pub q: Vec<Complex>,
    /// `r_0..=r_{N+1}`
    pub r: Vec<Complex>,
    /// `s_0..=s_N`
    pub s: Vec<Complex>,
    /// `prod_{j<=k} rho_j` for `k = 0..=N`
    pub rho_prod: Vec<Complex>,
}

impl QrsTriple {
    pub fn n(&self) -> usize {
        self.s.len() - 1
    }

    /// Largest scale-relative deviation of `q_{k+1} r_k - r_{k+1} q_k` from
    /// `prod_{j<=k} rho_j` over `k = 0..=N`.
    pub fn wronskian_residual(&self) -> f64 {
        (0..=self.n())
            .map(|k| self.wronskian_residual_at(k))
            .fold(0.0, f64::max)
    }

    fn wronskian_residual_at(&self, k: usize) -> f64 {
        let lhs = self.q[k + 1] * self.r[k];
        let rhs = self.r[k + 1] * self.q[k];
        let p = self.rho_prod[k];
        let scale = p.norm().max(lhs.norm()).max(rhs.norm());
        ((lhs - rhs) - p).norm() / scale
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_sum_c(a: Complex, b: Complex) -> (Complex, Complex) {
    let (re, ere) = two_sum(a.re, b.re);
    let (im, eim) = two_sum(a.im, b.im);
    (Complex::new(re, im), Complex::new(ere, eim))
}

/// Runs `x_{j+1} = (1 + rho - e) x_j - rho x_{j-1}` for `steps` steps in the
/// difference form `x_{j+1} - x_j = rho (x_j - x_{j-1}) - e x_j`.
fn propagate(
    x0: Complex,
    x1: Complex,
    coeffs: impl Iterator<Item = (Complex, Complex)>,
    capacity: usize,
    compensated: bool,
) -> Result<Vec<Complex>> {
    let mut out = Vec::with_capacity(capacity);
    out.push(x0);
    out.push(x1);
    let mut x = x1;
    let mut carry = ZERO;
    let mut delta = x1 - x0;
    for (rho, e) in coeffs {
        if compensated {
            delta = rho * delta - e * (x + carry);
            let (s, err) = two_sum_c(x, delta + carry);
            x = s;
            carry = err;
            out.push(x + carry);
        } else {
            delta = rho * delta - e * x;
            x += delta;
            out.push(x);
        }
        let m = x.norm();
        if !(m <= OVERFLOW_LIMIT) {
            return Err(Error::Overflow {
                index: out.len() - 1,
                magnitude: m,
            });
        }
    }
    Ok(out)
}

pub fn run_recurrences(seqs: &PerturbationSequences) -> Result<QrsTriple> {
    run_recurrences_with(seqs, RecurrenceOptions::default())
}

pub fn run_recurrences_with(seqs: &PerturbationSequences, opts: RecurrenceOptions) -> Result<QrsTriple> {
    let n = seqs.n();
    let step = |k: usize| (seqs.rho(k), seqs.eps_sq(k));
    let q = propagate(ZERO, ONE, (1..=n).map(step), n + 2, opts.compensated)?;
    let r = propagate(ONE, ONE, (1..=n).map(step), n + 2, opts.compensated)?;
    // s uses the shifted coefficients rho_{k+1}, eps_{k+1}^2
    let s = propagate(ZERO, ONE, (2..=n).map(step), n + 1, opts.compensated)?;
    let mut rho_prod = Vec::with_capacity(n + 1);
    let mut p = ONE;
    rho_prod.push(p);
    for k in 1..=n {
        p *= seqs.rho(k);
        rho_prod.push(p);
    }
    Ok(QrsTriple { q, r, s, rho_prod })
}

/// `T_k = e^{i pi (k-1)/N} sin(pi k/N) / sin(pi/N)`, the `q` sequence of the
/// autonomous rotation `rho = e^{2 pi i/N}`.
pub fn closed_form_t(k: usize, n: usize) -> Complex {
    let n = n as f64;
    let k = k as f64;
    Complex::from_polar(1.0, PI * (k - 1.0) / n) * ((PI * k / n).sin() / (PI / n).sin())
}

/// A point `x = 2 cos(theta)` of the Chebyshev interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChebyshevPoint {
    theta: f64,
    x: f64,
}

impl ChebyshevPoint {
    pub fn from_theta(theta: f64) -> Self {
        ChebyshevPoint {
            theta,
            x: 2.0 * theta.cos(),
        }
    }

    pub fn from_x(x: f64) -> Result<Self> {
        if !(-2.0..=2.0).contains(&x) {
            return Err(Error::invalid("x", "must lie in [-2, 2]"));
        }
        Ok(ChebyshevPoint {
            theta: (x / 2.0).acos(),
            x,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn x(&self) -> f64 {
        self.x
    }
}

/// Chebyshev polynomial of the second kind, `U_0 = 0`, `U_1 = 1`,
/// `U_k(2 cos t) = sin(k t) / sin t`.
pub fn chebyshev_u(k: usize, point: ChebyshevPoint) -> f64 {
    let st = point.theta.sin();
    if st.abs() < 1e-300 {
        // x = +-2: U_k(2) = k, U_k(-2) = (-1)^(k-1) k
        let sign = if point.x > 0.0 || k % 2 == 1 { 1.0 } else { -1.0 };
        return sign * k as f64;
    }
    (k as f64 * point.theta).sin() / st
}

/// `U_k` by the recurrence `U_{k+1} = x U_k - U_{k-1}`.
pub fn chebyshev_u_recurrence(k: usize, point: ChebyshevPoint) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    if k == 0 {
        return 0.0;
    }
    for _ in 1..k {
        let next = point.x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Right-hand side of `q_k - T_k = sum_{j=1}^{k-1} (a_j q_j - b_j q_{j-1}) T_{k-j}`.
pub fn difference_formula(seqs: &PerturbationSequences, triple: &QrsTriple, k: usize) -> Result<Complex> {
    let n = seqs.n();
    if !(2..=n + 1).contains(&k) {
        return Err(Error::invalid("k", format!("must lie in 2..={}", n + 1)));
    }
    let q = &triple.q;
    Ok((1..k)
        .map(|j| (seqs.a(j) * q[j] - seqs.b(j) * q[j - 1]) * closed_form_t(k - j, n))
        .sum())
}

/// `r_k` rebuilt as `q_k - (rho + b_1) s_{k-1}`.
pub fn r_from_qs(seqs: &PerturbationSequences, triple: &QrsTriple, k: usize) -> Result<Complex> {
    let n = seqs.n();
    if !(1..=n + 1).contains(&k) {
        return Err(Error::invalid("k", format!("must lie in 1..={}", n + 1)));
    }
    Ok(triple.q[k] - seqs.rho(1) * triple.s[k - 1])
}

fn check_step(triple: &QrsTriple, k: usize) -> Result<()> {
    if !(1..=triple.n()).contains(&k) {
        return Err(Error::invalid("n", format!("must lie in 1..={}", triple.n())));
    }
    Ok(())
}

/// Coefficients `(q_{k+1} - q_k, r_k - r_{k+1}, -q_k, r_k)` of `f_k ∘ ... ∘ f_1`.
pub fn coefficients_from_qr(triple: &QrsTriple, k: usize) -> Result<MoebiusCoeffs> {
    check_step(triple, k)?;
    let resid = triple.wronskian_residual_at(k);
    let q = &triple.q;
    let r = &triple.r;
    let map = MoebiusCoeffs::new_unchecked(q[k + 1] - q[k], r[k] - r[k + 1], -q[k], r[k]);
    if !(resid <= WRONSKIAN_GUARD) {
        return Err(Error::DegenerateMap {
            det: map.determinant().norm(),
            scale: map.scale(),
        });
    }
    Ok(map)
}

/// Coefficients `(q_{k+1} - q_k, 0, -q_k, 1)` for purely multiplicative
/// schedules. `r` is identically one exactly when every `eps_j` vanishes,
/// which is what gets checked.
pub fn coefficients_rho_only(triple: &QrsTriple, k: usize) -> Result<MoebiusCoeffs> {
    check_step(triple, k)?;
    if let Some(j) = triple.r[..=k + 1].iter().position(|v| *v != ONE) {
        // r_j != 1 first happens one step after the first nonzero eps
        return Err(Error::ScheduleMismatch(j - 1));
    }
    let q = &triple.q;
    Ok(MoebiusCoeffs::new_unchecked(q[k + 1] - q[k], ZERO, -q[k], ONE))
}

/// Offsets `d_k = (2 - eps_k^2) - x` of an additive schedule (`rho == 1`)
/// from the Chebyshev coefficient `x`; `d[0]` holds `d_1`.
pub fn additive_offsets(seqs: &PerturbationSequences, x: f64) -> Result<Vec<Complex>> {
    if let Some(k) = seqs.rho_values().iter().position(|r| *r != ONE) {
        return Err(Error::invalid("rho", format!("additive schedule needs rho == 1, step {}", k + 1)));
    }
    Ok(seqs
        .eps_sq_values()
        .iter()
        .map(|e| (Complex::new(2.0, 0.0) - e) - x)
        .collect())
}

fn identity_residual(q_n: Complex, delta_n: Complex, point: ChebyshevPoint, n: usize) -> f64 {
    let theta = point.theta();
    let lhs = theta.sin() * (q_n - chebyshev_u(n, point));
    let rhs = -(delta_n * Complex::from_polar(1.0, -(n as f64) * theta)).im;
    (lhs - rhs).norm()
}

/// `delta_n = sum_{k=1}^{n-1} d_k q_k e^{i k theta}` (the `k = 0` term vanishes
/// since `q_0 = 0`). `d[0]` holds `d_1`. The identity
/// `sin(theta) (q_n - U_n) = -Im(delta_n e^{-i n theta})` is verified before
/// returning; it requires real `d_k q_k`.
pub fn martingale_sum(d: &[Complex], triple: &QrsTriple, theta: f64, n: usize) -> Result<Complex> {
    let n_max = triple.n() + 1;
    if !(1..=n_max).contains(&n) || d.len() + 1 < n {
        return Err(Error::invalid("n", format!("must lie in 1..={n_max} with d covering 1..n-1")));
    }
    let delta: Complex = (1..n)
        .map(|k| d[k - 1] * triple.q[k] * Complex::from_polar(1.0, k as f64 * theta))
        .sum();
    let residual = identity_residual(triple.q[n], delta, ChebyshevPoint::from_theta(theta), n);
    if !(residual <= IDENTITY_TOL) {
        return Err(Error::IdentityViolation { n, residual });
    }
    Ok(delta)
}

/// All partial sums `delta_1..=delta_{N+1}` with the identity checked at each.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingalePath {
    /// `deltas[n - 1]` is `delta_n`.
    pub deltas: Vec<Complex>,
    pub max_residual: f64,
}

pub fn martingale_path(d: &[Complex], triple: &QrsTriple, theta: f64) -> Result<MartingalePath> {
    let n_max = triple.n() + 1;
    if d.len() + 1 < n_max {
        return Err(Error::invalid("d", format!("need at least {} offsets", n_max - 1)));
    }
    let point = ChebyshevPoint::from_theta(theta);
    let mut deltas = Vec::with_capacity(n_max);
    let mut acc = ZERO;
    let mut max_residual: f64 = 0.0;
    for n in 1..=n_max {
        if n > 1 {
            let k = n - 1;
            acc += d[k - 1] * triple.q[k] * Complex::from_polar(1.0, k as f64 * theta);
        }
        let residual = identity_residual(triple.q[n], acc, point, n);
        if !(residual <= IDENTITY_TOL) {
            return Err(Error::IdentityViolation { n, residual });
        }
        max_residual = max_residual.max(residual);
        deltas.push(acc);
    }
    Ok(MartingalePath { deltas, max_residual })
}
