//! Bounded, twice continuously differentiable activations.
//!
//! Only activations with bounded value, first and second derivative are
//! representable. Unbounded or non-smooth choices (ReLU and friends) are
//! rejected when parsed from configuration.

use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use crate::error::Error;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    /// `tanh(u)`.
    Tanh,
    /// `1 / (1 + exp(-u))`.
    Logistic,
    /// Gaussian bump `exp(-u^2 / 2)`.
    SmoothBump,
}

/// Suprema of `|σ|`, `|σ'|` and `|σ''|` over the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

// 4 / (3 sqrt 3), attained at tanh(u) = ±1/sqrt 3.
const TANH_SECOND_SUP: f64 = 0.769_800_358_919_501_3;
// 1 / (6 sqrt 3), attained at σ(u) = 1/2 ± 1/(2 sqrt 3).
const LOGISTIC_SECOND_SUP: f64 = 0.096_225_044_864_937_63;
// exp(-1/2), attained at u = ±1.
const BUMP_FIRST_SUP: f64 = 0.606_530_659_712_633_4;

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Tanh, Activation::Logistic, Activation::SmoothBump];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Logistic => "logistic",
            Activation::SmoothBump => "smooth-bump",
        }
    }

    #[inline(always)]
    pub fn value(self, u: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(u),
            Activation::Logistic => {
                let e = math::exp_nonpos(-math::abs(u));
                let v = 1.0 / (1.0 + e);
                if u >= 0.0 {
                    v
                } else {
                    e * v
                }
            }
            Activation::SmoothBump => math::exp_nonpos(-0.5 * u * u),
        }
    }

    #[inline]
    pub fn derivative(self, u: f64) -> f64 {
        self.value_and_derivative(u).1
    }

    #[inline]
    pub fn second_derivative(self, u: f64) -> f64 {
        let (s, d) = self.value_and_derivative(u);
        match self {
            Activation::Tanh => -2.0 * s * d,
            Activation::Logistic => d * (1.0 - 2.0 * s),
            Activation::SmoothBump => (u * u - 1.0) * s,
        }
    }

    /// `(σ(u), σ'(u))` from a single transcendental evaluation.
    #[inline]
    pub fn value_and_derivative(self, u: f64) -> (f64, f64) {
        let s = self.value(u);
        (s, self.derivative_from_value(u, s))
    }

    /// `σ'(u)` given `s = σ(u)`; every supported kind has a closed form in
    /// terms of its own value.
    #[inline]
    pub fn derivative_from_value(self, u: f64, s: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - s * s,
            Activation::Logistic => s * (1.0 - s),
            Activation::SmoothBump => -u * s,
        }
    }

    /// `out[k] = σ(u[k])`, with the kind dispatched once per slice.
    #[inline(always)]
    pub fn value_into(self, u: &[f64], out: &mut [f64]) {
        let out = &mut out[..u.len()];
        match self {
            Activation::Tanh => out.iter_mut().zip(u).for_each(|(o, &v)| *o = tanh(v)),
            Activation::Logistic => out.iter_mut().zip(u).for_each(|(o, &v)| *o = Activation::Logistic.value(v)),
            Activation::SmoothBump => out.iter_mut().zip(u).for_each(|(o, &v)| *o = math::exp_nonpos(-0.5 * v * v)),
        }
    }

    /// `out[k] = σ'(u[k])` given `s[k] = σ(u[k])`.
    #[inline(always)]
    pub fn derivative_from_value_into(self, u: &[f64], s: &[f64], out: &mut [f64]) {
        let out = &mut out[..s.len()];
        match self {
            Activation::Tanh => out.iter_mut().zip(s).for_each(|(o, &v)| *o = 1.0 - v * v),
            Activation::Logistic => out.iter_mut().zip(s).for_each(|(o, &v)| *o = v * (1.0 - v)),
            Activation::SmoothBump => out.iter_mut().zip(u.iter().zip(s)).for_each(|(o, (&x, &v))| *o = -x * v),
        }
    }

    pub fn bounds(self) -> Bounds {
        match self {
            Activation::Tanh => Bounds { value: 1.0, first: 1.0, second: TANH_SECOND_SUP },
            Activation::Logistic => Bounds { value: 1.0, first: 0.25, second: LOGISTIC_SECOND_SUP },
            Activation::SmoothBump => Bounds { value: 1.0, first: BUMP_FIRST_SUP, second: 1.0 },
        }
    }
}

// Branch-free: the odd Taylor series near zero, (1 - e)/(1 + e) with
// e = exp(-2|u|) elsewhere.
#[inline(always)]
fn tanh(u: f64) -> f64 {
    let a = math::abs(u).min(20.0);
    let e = math::exp_nonpos(-2.0 * a);
    let far = (1.0 - e) / (1.0 + e);
    let z = a * a;
    let mut p = 929_569.0 / 638_512_875.0;
    p = p * z - 21_844.0 / 6_081_075.0;
    p = p * z + 1_382.0 / 155_925.0;
    p = p * z - 62.0 / 2_835.0;
    p = p * z + 17.0 / 315.0;
    p = p * z - 2.0 / 15.0;
    p = p * z + 1.0 / 3.0;
    let near = a - a * z * p;
    math::copysign(if a < 0.125 { near } else { far }, u)
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        match key.as_str() {
            "tanh" => Ok(Activation::Tanh),
            "logistic" | "sigmoid" => Ok(Activation::Logistic),
            "smooth-bump" | "bump" | "gaussian" => Ok(Activation::SmoothBump),
            "relu" | "leaky-relu" | "leaky_relu" | "elu" => Err(Error::UnsupportedActivation {
                name: key.to_string(),
                reason: "not twice continuously differentiable and unbounded; the limit theory needs a C^2 activation with bounded derivatives (use tanh, logistic or smooth-bump)",
            }),
            "softplus" | "identity" | "linear" | "gelu" | "swish" | "silu" => Err(Error::UnsupportedActivation {
                name: key.to_string(),
                reason: "unbounded; the limit theory needs a bounded activation (use tanh, logistic or smooth-bump)",
            }),
            _ => Err(Error::Config(alloc::format!(
                "unknown activation `{key}` (expected tanh, logistic or smooth-bump)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> impl Iterator<Item = f64> {
        (0..=20_000).map(|i| -50.0 + i as f64 * 0.005)
    }

    #[test]
    fn tanh_matches_library() {
        for u in grid() {
            let lib = u.tanh();
            assert!((Activation::Tanh.value(u) - lib).abs() <= 4.0 * f64::EPSILON, "u = {u}");
        }
        assert_eq!(Activation::Tanh.value(0.0), 0.0);
        assert_eq!(Activation::Tanh.derivative(0.0), 1.0);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for act in Activation::ALL {
            for i in 0..=400 {
                let u = -8.0 + i as f64 * 0.04;
                let fd1 = (act.value(u + h) - act.value(u - h)) / (2.0 * h);
                let d1 = act.derivative(u);
                let fd2 = (act.derivative(u + h) - act.derivative(u - h)) / (2.0 * h);
                let d2 = act.second_derivative(u);
                let tol1 = 1e-6 * d1.abs().max(1e-3);
                let tol2 = 1e-6 * d2.abs().max(1e-3);
                assert!((fd1 - d1).abs() <= tol1, "{act} σ' at {u}: {fd1} vs {d1}");
                assert!((fd2 - d2).abs() <= tol2, "{act} σ'' at {u}: {fd2} vs {d2}");
            }
        }
    }

    #[test]
    fn sampled_suprema_match_documented_constants() {
        for act in Activation::ALL {
            let (mut v, mut d1, mut d2) = (0.0f64, 0.0f64, 0.0f64);
            for u in grid() {
                v = v.max(act.value(u).abs());
                d1 = d1.max(act.derivative(u).abs());
                d2 = d2.max(act.second_derivative(u).abs());
            }
            let b = act.bounds();
            assert!(v <= b.value * (1.0 + 1e-12) && v >= 0.99 * b.value, "{act} value sup {v}");
            assert!(d1 <= b.first * (1.0 + 1e-12) && d1 >= 0.99 * b.first, "{act} σ' sup {d1}");
            assert!(d2 <= b.second * (1.0 + 1e-12) && d2 >= 0.99 * b.second, "{act} σ'' sup {d2}");
        }
    }

    #[test]
    fn tails_are_monotone_and_flat() {
        for act in Activation::ALL {
            let mut prev_d = act.derivative(40.0).abs();
            for i in 1..=100 {
                let u = 40.0 + i as f64;
                let d = act.derivative(u).abs();
                assert!(d <= prev_d, "{act}: |σ'| not decaying at {u}");
                prev_d = d;
            }
            assert!(act.derivative(50.0).abs() < 1e-12);
            assert!(act.derivative(-50.0).abs() < 1e-12);
        }
    }

    #[test]
    fn slice_evaluators_match_scalar() {
        let u: alloc::vec::Vec<f64> = (0..97).map(|i| -6.0 + 0.13 * i as f64).collect();
        let mut s = alloc::vec![0.0; u.len()];
        let mut d = alloc::vec![0.0; u.len()];
        for act in Activation::ALL {
            act.value_into(&u, &mut s);
            act.derivative_from_value_into(&u, &s, &mut d);
            for k in 0..u.len() {
                assert_eq!(s[k], act.value(u[k]));
                assert_eq!(d[k], act.derivative(u[k]));
            }
        }
    }

    #[test]
    fn parses_whitelist_and_rejects_relu() {
        assert_eq!("tanh".parse::<Activation>().unwrap(), Activation::Tanh);
        assert_eq!("Sigmoid".parse::<Activation>().unwrap(), Activation::Logistic);
        assert_eq!("smooth-bump".parse::<Activation>().unwrap(), Activation::SmoothBump);
        match "relu".parse::<Activation>() {
            Err(Error::UnsupportedActivation { name, reason }) => {
                assert_eq!(name, "relu");
                assert!(reason.contains("bounded"));
            }
            other => panic!("expected rejection, got {other:?}"),
        }
        assert!(matches!("softmax".parse::<Activation>(), Err(Error::Config(_))));
    }
}
