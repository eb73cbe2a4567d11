// Float intrinsics routed through num-traits so the crate builds with or
// without std (libm backs them in the no_std build).

use num_traits::Float;

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    Float::exp(x)
}

#[inline]
pub(crate) fn exp_m1(x: f64) -> f64 {
    Float::exp_m1(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    Float::ln(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    Float::sqrt(x)
}

#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    Float::powi(x, n)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    Float::floor(x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    Float::round(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    Float::abs(x)
}

/// `exp(x)` for `x <= 0`, branch-free so that loops over it vectorize.
/// Returns 0 below -708; elsewhere the relative error is a few ulp.
#[inline(always)]
pub(crate) fn exp_nonpos(x: f64) -> f64 {
    const LOG2E: f64 = core::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits.
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let under = x < -708.0;
    let x = x.max(-708.0);
    let t = x * LOG2E + SHIFT;
    let n = t - SHIFT;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    // Degree-13 Taylor polynomial in Estrin form: the short dependency
    // chain matters more than the operation count in vectorized loops.
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let c01 = 1.0 + r;
    let c23 = 0.5 + r * (1.0 / 6.0);
    let c45 = 1.0 / 24.0 + r * (1.0 / 120.0);
    let c67 = 1.0 / 720.0 + r * (1.0 / 5_040.0);
    let c89 = 1.0 / 40_320.0 + r * (1.0 / 362_880.0);
    let c1011 = 1.0 / 3_628_800.0 + r * (1.0 / 39_916_800.0);
    let c1213 = 1.0 / 479_001_600.0 + r * (1.0 / 6_227_020_800.0);
    let lo = (c01 + r2 * c23) + r4 * (c45 + r2 * c67);
    let hi = (c89 + r2 * c1011) + r4 * c1213;
    let p = lo + r8 * hi;
    let v = p * f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    if under {
        0.0
    } else {
        v
    }
}

/// Whether the running CPU has AVX2; hot kernels then run a copy compiled
/// for it. FMA is left off so both copies round identically.
#[cfg(all(feature = "std", target_arch = "x86_64"))]
#[inline]
pub(crate) fn has_avx2() -> bool {
    std::is_x86_feature_detected!("avx2")
}

#[inline(always)]
pub(crate) fn copysign(x: f64, sign: f64) -> f64 {
    Float::copysign(x, sign)
}

/// `floor(n * t)` tolerant to the roundoff in products such as `100 * 0.29`.
#[inline]
pub(crate) fn scaled_floor(n: usize, t: f64) -> u64 {
    let v = n as f64 * t;
    let r = round(v);
    if abs(v - r) <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        floor(v) as u64
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_nonpos_matches_library() {
        for i in 0..=2_000_000 {
            let x = -i as f64 * 3.5e-4;
            let want = x.exp();
            let got = exp_nonpos(x);
            assert!((got - want).abs() <= 4.0 * f64::EPSILON * want, "x = {x}: {got} vs {want}");
        }
        assert_eq!(exp_nonpos(0.0), 1.0);
        assert_eq!(exp_nonpos(-1e6), 0.0);
    }

    #[test]
    fn scaled_floor_absorbs_roundoff() {
        assert_eq!(scaled_floor(100, 0.29), 29);
        assert_eq!(scaled_floor(3, 0.5), 1);
        assert_eq!(scaled_floor(1600, 0.5), 800);
    }
}
