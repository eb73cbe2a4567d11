//! Bounded test functions on `(c, w)` with bounded first and second
//! derivatives.
//!
//! Raw moments such as `c` or `c^2` are unbounded, so every moment-type
//! function passes through a [`SmoothClamp`]: the identity on `[-a, a]`,
//! continued by a `tanh` shoulder of width `b` that joins with matching
//! first and second derivatives.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{config, Error, Result};
use crate::math;

/// Identity on `|u| <= inner`, saturating smoothly at `inner + shoulder`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothClamp {
    pub inner: f64,
    pub shoulder: f64,
}

impl SmoothClamp {
    pub fn new(inner: f64, shoulder: f64) -> Result<Self> {
        if !(inner >= 0.0 && inner.is_finite() && shoulder > 0.0 && shoulder.is_finite()) {
            return Err(config("smooth clamp needs inner >= 0 and shoulder > 0"));
        }
        Ok(Self { inner, shoulder })
    }

    pub fn sup(&self) -> f64 {
        self.inner + self.shoulder
    }

    /// `(s(u), s'(u), s''(u))`.
    #[inline]
    pub fn eval3(&self, u: f64) -> (f64, f64, f64) {
        let a = math::abs(u);
        if a <= self.inner {
            return (u, 1.0, 0.0);
        }
        let b = self.shoulder;
        let t = num_traits::Float::tanh((a - self.inner) / b);
        let sign = if u < 0.0 { -1.0 } else { 1.0 };
        let d1 = 1.0 - t * t;
        (sign * (self.inner + b * t), d1, -sign * 2.0 / b * t * d1)
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        self.eval3(u).0
    }
}

impl Default for SmoothClamp {
    fn default() -> Self {
        Self { inner: 2.0, shoulder: 1.0 }
    }
}

/// Index into `z = (c, w_1, ..., w_d)`: `0` is `c`, `j` is `w_j`.
pub type Coord = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coord: Coord,
    pub coeff: f64,
    pub power: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    /// `s(z_coord)^power`.
    SmoothedMoment { coord: Coord, power: u32, clamp: SmoothClamp },
    /// `s(sum_j coeff_j z_{coord_j}^{power_j})`.
    ClampedPolynomial { terms: Vec<Monomial>, clamp: SmoothClamp },
    /// `amplitude * exp(-|z - center|^2 / (2 width^2))`.
    GaussianBump { center: Vec<f64>, width: f64, amplitude: f64 },
}

impl TestFunction {
    pub fn clamped_c(power: u32) -> Self {
        TestFunction::SmoothedMoment { coord: 0, power, clamp: SmoothClamp::default() }
    }

    /// Clamped `|w|^2`.
    pub fn clamped_w_norm2(dim: usize) -> Self {
        let terms = (1..=dim).map(|coord| Monomial { coord, coeff: 1.0, power: 2 }).collect();
        TestFunction::ClampedPolynomial { terms, clamp: SmoothClamp::new(4.0, 2.0).unwrap() }
    }

    /// The three functions used by the statistical studies: clamped `c`,
    /// clamped `c^2` and clamped `|w|^2`.
    pub fn standard_set(dim: usize) -> Vec<(String, TestFunction)> {
        alloc::vec![
            ("c".into(), Self::clamped_c(1)),
            ("c^2".into(), Self::clamped_c(2)),
            ("|w|^2".into(), Self::clamped_w_norm2(dim)),
        ]
    }

    /// Rejects functions that read coordinates beyond `1 + dim`.
    pub fn check_arity(&self, dim: usize) -> Result<()> {
        let ok = match self {
            TestFunction::Constant(_) => true,
            TestFunction::SmoothedMoment { coord, .. } => *coord <= dim,
            TestFunction::ClampedPolynomial { terms, .. } => terms.iter().all(|m| m.coord <= dim),
            TestFunction::GaussianBump { center, .. } => center.len() == 1 + dim,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: 1 + dim, found: self.min_arity() })
        }
    }

    fn min_arity(&self) -> usize {
        match self {
            TestFunction::Constant(_) => 0,
            TestFunction::SmoothedMoment { coord, .. } => coord + 1,
            TestFunction::ClampedPolynomial { terms, .. } => {
                terms.iter().map(|m| m.coord + 1).max().unwrap_or(0)
            }
            TestFunction::GaussianBump { center, .. } => center.len(),
        }
    }

    /// True when every derivative vanishes identically.
    pub fn is_constant(&self) -> bool {
        matches!(self, TestFunction::Constant(_))
    }

    #[inline]
    pub fn value(&self, c: f64, w: &[f64]) -> f64 {
        match self {
            TestFunction::Constant(v) => *v,
            TestFunction::SmoothedMoment { coord, power, clamp } => {
                math::powi(clamp.value(coord_of(c, w, *coord)), *power as i32)
            }
            TestFunction::ClampedPolynomial { terms, clamp } => clamp.value(poly(terms, c, w)),
            TestFunction::GaussianBump { center, width, amplitude } => {
                amplitude * math::exp(-0.5 * dist2(center, c, w) / (width * width))
            }
        }
    }

    /// Writes `grad_w f` into `grad_w` and returns `d f / d c`.
    pub fn gradient_into(&self, c: f64, w: &[f64], grad_w: &mut [f64]) -> f64 {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        match self {
            TestFunction::Constant(_) => 0.0,
            TestFunction::SmoothedMoment { coord, power, clamp } => {
                let (s, d1, _) = clamp.eval3(coord_of(c, w, *coord));
                let p = *power as i32;
                let g = if p == 0 { 0.0 } else { p as f64 * math::powi(s, p - 1) * d1 };
                put(*coord, g, grad_w)
            }
            TestFunction::ClampedPolynomial { terms, clamp } => {
                let (_, d1, _) = clamp.eval3(poly(terms, c, w));
                let mut gc = 0.0;
                for m in terms {
                    let u = coord_of(c, w, m.coord);
                    let p = m.power as i32;
                    let dm = if p == 0 { 0.0 } else { m.coeff * p as f64 * math::powi(u, p - 1) };
                    if m.coord == 0 {
                        gc += d1 * dm;
                    } else {
                        grad_w[m.coord - 1] += d1 * dm;
                    }
                }
                gc
            }
            TestFunction::GaussianBump { center, width, amplitude } => {
                let s2 = width * width;
                let v = amplitude * math::exp(-0.5 * dist2(center, c, w) / s2);
                for (j, g) in grad_w.iter_mut().enumerate() {
                    *g = -v * (w[j] - center[j + 1]) / s2;
                }
                -v * (c - center[0]) / s2
            }
        }
    }

    /// Writes the diagonal of `D^2_w f` into `h_w` and returns `d^2 f / d c^2`.
    pub fn hessian_diag_into(&self, c: f64, w: &[f64], h_w: &mut [f64]) -> f64 {
        h_w.iter_mut().for_each(|h| *h = 0.0);
        match self {
            TestFunction::Constant(_) => 0.0,
            TestFunction::SmoothedMoment { coord, power, clamp } => {
                let (s, d1, d2) = clamp.eval3(coord_of(c, w, *coord));
                let p = *power as i32;
                let h = match p {
                    0 => 0.0,
                    1 => d2,
                    _ => {
                        let pf = p as f64;
                        pf * (pf - 1.0) * math::powi(s, p - 2) * d1 * d1
                            + pf * math::powi(s, p - 1) * d2
                    }
                };
                put(*coord, h, h_w)
            }
            TestFunction::ClampedPolynomial { terms, clamp } => {
                let (_, d1, d2) = clamp.eval3(poly(terms, c, w));
                // Diagonal entries need the full partial of the inner sum in
                // each coordinate, so accumulate first and second partials.
                let mut first = alloc::vec![0.0; w.len() + 1];
                let mut second = alloc::vec![0.0; w.len() + 1];
                for m in terms {
                    let u = coord_of(c, w, m.coord);
                    let p = m.power as i32;
                    let pf = p as f64;
                    if p >= 1 {
                        first[m.coord] += m.coeff * pf * math::powi(u, p - 1);
                    }
                    if p >= 2 {
                        second[m.coord] += m.coeff * pf * (pf - 1.0) * math::powi(u, p - 2);
                    }
                }
                for j in 0..w.len() {
                    h_w[j] = d2 * first[j + 1] * first[j + 1] + d1 * second[j + 1];
                }
                d2 * first[0] * first[0] + d1 * second[0]
            }
            TestFunction::GaussianBump { center, width, amplitude } => {
                let s2 = width * width;
                let v = amplitude * math::exp(-0.5 * dist2(center, c, w) / s2);
                for (j, h) in h_w.iter_mut().enumerate() {
                    let dz = w[j] - center[j + 1];
                    *h = v * (dz * dz / s2 - 1.0) / s2;
                }
                let dz = c - center[0];
                v * (dz * dz / s2 - 1.0) / s2
            }
        }
    }

    /// Supremum of `|f|`, known in closed form for every kind.
    pub fn sup(&self) -> f64 {
        match self {
            TestFunction::Constant(v) => math::abs(*v),
            TestFunction::SmoothedMoment { power, clamp, .. } => math::powi(clamp.sup(), *power as i32),
            TestFunction::ClampedPolynomial { clamp, .. } => clamp.sup(),
            TestFunction::GaussianBump { amplitude, .. } => math::abs(*amplitude),
        }
    }
}

#[inline]
fn coord_of(c: f64, w: &[f64], coord: Coord) -> f64 {
    if coord == 0 {
        c
    } else {
        w[coord - 1]
    }
}

#[inline]
fn put(coord: Coord, g: f64, into_w: &mut [f64]) -> f64 {
    if coord == 0 {
        g
    } else {
        into_w[coord - 1] = g;
        0.0
    }
}

fn poly(terms: &[Monomial], c: f64, w: &[f64]) -> f64 {
    terms.iter().map(|m| m.coeff * math::powi(coord_of(c, w, m.coord), m.power as i32)).sum()
}

fn dist2(center: &[f64], c: f64, w: &[f64]) -> f64 {
    let dc = c - center[0];
    dc * dc + w.iter().zip(&center[1..]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}
