//! Fractional linear maps `z -> (a z + b) / (c z + d)` stored as 2x2 coefficient
//! matrices. Composition is matrix multiplication, which makes this module the
//! brute-force reference every recurrence result is checked against.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Default admissible lower bound for `|c z + d|` in [`evaluate`].
pub const DEFAULT_POLE_THRESHOLD: f64 = 1e-12;

/// Relative determinant floor below which a product is called degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Chain products are rescaled after this many multiplies.
pub const RENORMALIZE_EVERY: usize = 64;

/// Below this `|d|` a map is too far from the identity to normalize.
pub const NORMALIZATION_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusCoeffs {
    pub a: Complex,
    pub b: Complex,
    pub c: Complex,
    pub d: Complex,
}

impl MoebiusCoeffs {
    pub const IDENTITY: MoebiusCoeffs = MoebiusCoeffs {
        a: Complex::new(1.0, 0.0),
        b: Complex::new(0.0, 0.0),
        c: Complex::new(0.0, 0.0),
        d: Complex::new(1.0, 0.0),
    };

    /// Checked constructor: all entries finite and `ad - bc != 0`.
    pub fn new(a: Complex, b: Complex, c: Complex, d: Complex) -> Result<Self> {
        let m = Self::new_unchecked(a, b, c, d);
        if !m.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::invalid("moebius", "coefficients must be finite"));
        }
        if m.determinant() == Complex::new(0.0, 0.0) {
            return Err(Error::DegenerateMap {
                det: 0.0,
                scale: m.scale(),
            });
        }
        Ok(m)
    }

    pub const fn new_unchecked(a: Complex, b: Complex, c: Complex, d: Complex) -> Self {
        MoebiusCoeffs { a, b, c, d }
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn entries(&self) -> [Complex; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn determinant(&self) -> Complex {
        self.a * self.d - self.b * self.c
    }

    /// `|ad| + |bc|`, the magnitude against which the determinant is judged.
    pub fn scale(&self) -> f64 {
        (self.a * self.d).norm() + (self.b * self.c).norm()
    }

    pub fn max_entry_norm(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, lambda: Complex) -> Self {
        Self::new_unchecked(self.a * lambda, self.b * lambda, self.c * lambda, self.d * lambda)
    }

    /// The point `-d/c` sent to infinity, if `c != 0`.
    pub fn pole(&self) -> Option<Complex> {
        if self.c == Complex::new(0.0, 0.0) {
            None
        } else {
            Some(-self.d / self.c)
        }
    }

    fn check_degeneracy(self) -> Result<Self> {
        let det = self.determinant().norm();
        let scale = self.scale();
        let finite = self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite || det == 0.0 || det <= DEGENERACY_TOL * scale {
            return Err(Error::DegenerateMap { det, scale });
        }
        Ok(self)
    }
}

pub fn evaluate(map: &MoebiusCoeffs, z: Complex) -> Result<Complex> {
    evaluate_with_threshold(map, z, DEFAULT_POLE_THRESHOLD)
}

pub fn evaluate_with_threshold(map: &MoebiusCoeffs, z: Complex, threshold: f64) -> Result<Complex> {
    let den = map.c * z + map.d;
    let modulus = den.norm();
    if !(modulus > threshold) {
        return Err(Error::PoleProximity { modulus, threshold });
    }
    Ok((map.a * z + map.b) / den)
}

/// `outer ∘ inner`, i.e. the matrix product `outer · inner`.
pub fn compose(outer: &MoebiusCoeffs, inner: &MoebiusCoeffs) -> Result<MoebiusCoeffs> {
    MoebiusCoeffs::new_unchecked(
        outer.a * inner.a + outer.b * inner.c,
        outer.a * inner.b + outer.b * inner.d,
        outer.c * inner.a + outer.d * inner.c,
        outer.c * inner.b + outer.d * inner.d,
    )
    .check_degeneracy()
}

/// A chain product together with the natural log of the scale divided out by
/// renormalization; the true product is `map * exp(log_scale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledProduct {
    pub map: MoebiusCoeffs,
    pub log_scale: f64,
}

/// `maps[n-1] ∘ ... ∘ maps[0]`; `maps[0]` is applied first.
pub fn compose_chain(maps: &[MoebiusCoeffs]) -> Result<MoebiusCoeffs> {
    compose_chain_scaled(maps).map(|p| p.map)
}

pub fn compose_chain_scaled(maps: &[MoebiusCoeffs]) -> Result<ScaledProduct> {
    let (first, rest) = maps
        .split_first()
        .ok_or_else(|| Error::invalid("maps", "chain must contain at least one map"))?;
    let mut acc = first.check_degeneracy()?;
    let mut log_scale = 0.0;
    for (i, m) in rest.iter().enumerate() {
        acc = compose(m, &acc)?;
        if (i + 1) % RENORMALIZE_EVERY == 0 {
            let s = acc.max_entry_norm();
            acc = acc.scaled(Complex::new(1.0 / s, 0.0));
            log_scale += s.ln();
        }
    }
    Ok(ScaledProduct { map: acc, log_scale })
}

/// `|a/d - 1| + |b/d| + |c/d|`; zero exactly for projective identities.
pub fn projective_coeff_error(map: &MoebiusCoeffs) -> Result<f64> {
    let dn = map.d.norm();
    if !(dn > NORMALIZATION_FLOOR) {
        return Err(Error::DegenerateNormalization(dn));
    }
    Ok((map.a / map.d - 1.0).norm() + (map.b / map.d).norm() + (map.c / map.d).norm())
}

/// Projective distance between two coefficient matrices: both are divided by
/// their entry at the index where `lhs` is largest, then compared entrywise.
/// Returns infinity when `rhs` vanishes at that index.
pub fn projective_distance(lhs: &MoebiusCoeffs, rhs: &MoebiusCoeffs) -> f64 {
    let l = lhs.entries();
    let r = rhs.entries();
    let pivot = (0..4)
        .max_by(|&i, &j| l[i].norm().total_cmp(&l[j].norm()))
        .unwrap_or(0);
    if r[pivot].norm() == 0.0 || l[pivot].norm() == 0.0 {
        return f64::INFINITY;
    }
    (0..4)
        .map(|i| (l[i] / l[pivot] - r[i] / r[pivot]).norm())
        .fold(0.0, f64::max)
}

/// A disk in the plane sampled on a square grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRegion {
    pub center: Complex,
    pub radius: f64,
    pub grid_points: usize,
    pub pole_guard: f64,
}

impl EvalRegion {
    pub const DEFAULT_GRID: usize = 64;
    pub const DEFAULT_RADIUS: f64 = 0.25;

    pub fn new(center: Complex, radius: f64, grid_points: usize, pole_guard: f64) -> Result<Self> {
        let region = EvalRegion {
            center,
            radius,
            grid_points,
            pole_guard,
        };
        region.validate()?;
        Ok(region)
    }

    /// Disk with the default grid and a pole guard of `1e-3 * radius`.
    pub fn disk(center: Complex, radius: f64) -> Result<Self> {
        Self::new(center, radius, Self::DEFAULT_GRID, 1e-3 * radius)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("radius", "must be positive and finite"));
        }
        if self.grid_points < 2 {
            return Err(Error::invalid("grid_points", "need at least 2 points per axis"));
        }
        if !(self.pole_guard > 0.0) {
            return Err(Error::invalid("pole_guard", "must be positive"));
        }
        if !(self.center.re.is_finite() && self.center.im.is_finite()) {
            return Err(Error::invalid("center", "must be finite"));
        }
        Ok(())
    }

    /// Grid points inside the disk, row-major (imaginary part outer).
    pub fn points(&self) -> impl Iterator<Item = Complex> + '_ {
        let n = self.grid_points;
        let step = 2.0 * self.radius / (n - 1) as f64;
        (0..n).flat_map(move |j| {
            (0..n).filter_map(move |i| {
                let z = self.center
                    + Complex::new(-self.radius + step * i as f64, -self.radius + step * j as f64);
                ((z - self.center).norm() <= self.radius).then_some(z)
            })
        })
    }
}

impl Default for EvalRegion {
    fn default() -> Self {
        EvalRegion {
            center: Complex::new(0.0, 0.0),
            radius: Self::DEFAULT_RADIUS,
            grid_points: Self::DEFAULT_GRID,
            pole_guard: 1e-3 * Self::DEFAULT_RADIUS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityDistance {
    pub sup_error: f64,
    pub skipped: usize,
    /// First grid point (row-major) attaining the sup.
    pub witness: Complex,
}

/// Sup of `|F(z) - z|` over the region grid, skipping points within
/// `pole_guard` of the pole of `F`.
pub fn identity_distance(map: &MoebiusCoeffs, region: &EvalRegion) -> Result<IdentityDistance> {
    region.validate()?;
    let mut best: Option<(f64, Complex)> = None;
    let mut skipped = 0;
    let mut total = 0;
    for z in region.points() {
        total += 1;
        let near_pole = map
            .pole()
            .is_some_and(|p| (z - p).norm() < region.pole_guard);
        let value = if near_pole { None } else { evaluate(map, z).ok() };
        match value {
            Some(w) => {
                let err = (w - z).norm();
                if best.is_none_or(|(b, _)| err > b) {
                    best = Some((err, z));
                }
            }
            None => skipped += 1,
        }
    }
    let (sup_error, witness) = best.ok_or(Error::AllPointsSkipped(total))?;
    Ok(IdentityDistance {
        sup_error,
        skipped,
        witness,
    })
}
