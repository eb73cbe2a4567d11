// Particle-by-node kernels. Every sum over particles goes through
// `reduce_particles`, a pairwise tree over leaves of LEAF particles, so
// results depend only on the particle order.
//
// Each kernel body is inlined into two entry points: the baseline build and,
// on x86-64 with std, a copy compiled for AVX2 chosen at run time. Neither
// contracts multiplies into FMAs, so both return identical bits.

use alloc::vec;
use alloc::vec::Vec;

use super::quadrature::Nodes;
use crate::activation::Activation;
use crate::measure::EmpiricalMeasure;
use crate::test_function::TestFunction;

const LEAF: usize = 64;

/// Largest activation matrix (particles x nodes) kept between the output
/// pass and the drift pass; beyond it the drift pass recomputes.
pub(crate) const CACHE_LIMIT: usize = 1 << 26;

#[derive(Debug, Default)]
pub(crate) struct Workspace {
    u: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    cache: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, k: usize) {
        if self.u.len() < k {
            self.u.resize(k, 0.0);
            self.s.resize(k, 0.0);
            self.t.resize(k, 0.0);
        }
    }
}

pub(crate) fn fits_cache(particles: usize, nodes: usize) -> bool {
    particles.saturating_mul(nodes) <= CACHE_LIMIT
}

/// `u[k] = w . x_k`.
#[inline(always)]
pub(crate) fn preactivations(w: &[f64], nodes: &Nodes, u: &mut [f64]) {
    let u = &mut u[..nodes.len()];
    for (o, &x) in u.iter_mut().zip(nodes.column(0)) {
        *o = w[0] * x;
    }
    for (j, &wj) in w.iter().enumerate().skip(1) {
        for (o, &x) in u.iter_mut().zip(nodes.column(j)) {
            *o += wj * x;
        }
    }
}

/// `sum_k a[k] b[k]` with four interleaved accumulators.
#[inline(always)]
pub(crate) fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `sum_i add_i` for length-`width` vectors over particles `0..m`: leaf sums
/// are merged like a binary counter, earlier operand on the left.
#[inline(always)]
pub(crate) fn reduce_particles<F: FnMut(usize, &mut [f64])>(m: usize, width: usize, mut add: F) -> Vec<f64> {
    let mut stack: Vec<(u32, Vec<f64>)> = Vec::new();
    let mut spare: Vec<Vec<f64>> = Vec::new();
    let mut lo = 0;
    while lo < m {
        let hi = (lo + LEAF).min(m);
        let mut acc = match spare.pop() {
            Some(mut v) => {
                v.iter_mut().for_each(|x| *x = 0.0);
                v
            }
            None => vec![0.0; width],
        };
        for i in lo..hi {
            add(i, &mut acc);
        }
        let mut level = 0;
        while stack.last().is_some_and(|(top, _)| *top == level) {
            let (_, mut left) = stack.pop().unwrap();
            left.iter_mut().zip(&acc).for_each(|(a, b)| *a += b);
            spare.push(core::mem::replace(&mut acc, left));
            level += 1;
        }
        stack.push((level, acc));
        lo = hi;
    }
    let Some((_, mut acc)) = stack.pop() else { return vec![0.0; width] };
    while let Some((_, mut left)) = stack.pop() {
        left.iter_mut().zip(&acc).for_each(|(a, b)| *a += b);
        acc = left;
    }
    acc
}

macro_rules! dispatched {
    ($(#[$meta:meta])* $vis:vis fn $name:ident($($arg:ident: $ty:ty),* $(,)?) $(-> $ret:ty)? => $body:ident) => {
        $(#[$meta])*
        #[allow(clippy::too_many_arguments)]
        $vis fn $name($($arg: $ty),*) $(-> $ret)? {
            #[cfg(all(feature = "std", target_arch = "x86_64"))]
            if crate::math::has_avx2() {
                #[allow(clippy::too_many_arguments)]
                #[target_feature(enable = "avx2")]
                fn wide($($arg: $ty),*) $(-> $ret)? {
                    $body($($arg),*)
                }
                // SAFETY: the running CPU supports AVX2.
                return unsafe { wide($($arg),*) };
            }
            $body($($arg),*)
        }
    };
}

dispatched! {
    /// Network output on every node, `Q_k = (1/M) sum_m c_m act(w_m . x_k)`.
    /// With `store`, the activation matrix is kept for [`drift_field`].
    pub(crate) fn network_on_nodes(cloud: &EmpiricalMeasure, act: Activation, nodes: &Nodes, ws: &mut Workspace, store: bool) -> Vec<f64> => network_body
}

#[inline(always)]
fn network_body(cloud: &EmpiricalMeasure, act: Activation, nodes: &Nodes, ws: &mut Workspace, store: bool) -> Vec<f64> {
    let k = nodes.len();
    let m = cloud.len();
    ws.ensure(k);
    if store {
        ws.cache.resize(m * k, 0.0);
    }
    let Workspace { u, s, cache, .. } = ws;
    let mut q = reduce_particles(m, k, |i, acc| {
        preactivations(cloud.w_of(i), nodes, u);
        let row: &mut [f64] = if store { &mut cache[i * k..(i + 1) * k] } else { &mut s[..k] };
        act.value_into(&u[..k], row);
        let c = cloud.c()[i];
        for (a, &v) in acc.iter_mut().zip(row.iter()) {
            *a += c * v;
        }
    });
    let inv = 1.0 / m as f64;
    q.iter_mut().for_each(|v| *v *= inv);
    q
}

dispatched! {
    /// Per-particle drift against node weights `r_k` (already `alpha (y_k - Q_k)`):
    /// `dc_m = (1/K) sum_k r_k act_mk`, `dw_m = (1/K) sum_k r_k c_m act'_mk x_k`.
    /// `cached` reuses the matrix stored by the preceding [`network_on_nodes`]
    /// call on the same cloud and nodes.
    pub(crate) fn drift_field(
        cloud: &EmpiricalMeasure,
        act: Activation,
        nodes: &Nodes,
        r: &[f64],
        ws: &mut Workspace,
        cached: bool,
        dc: &mut [f64],
        dw: &mut [f64],
    ) => drift_body
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn drift_body(cloud: &EmpiricalMeasure, act: Activation, nodes: &Nodes, r: &[f64], ws: &mut Workspace, cached: bool, dc: &mut [f64], dw: &mut [f64]) {
    let k = nodes.len();
    let d = cloud.dim();
    ws.ensure(k);
    let inv_k = 1.0 / k as f64;
    let need_u = !cached || act == Activation::SmoothBump;
    let Workspace { u, s, t, cache } = ws;
    if act != Activation::SmoothBump && (1..=4).contains(&d) {
        for i in 0..cloud.len() {
            let row: &[f64] = if cached {
                &cache[i * k..(i + 1) * k]
            } else {
                preactivations(cloud.w_of(i), nodes, u);
                act.value_into(&u[..k], &mut s[..k]);
                &s[..k]
            };
            let g = match (act, d) {
                (Activation::Tanh, 1) => fused_drift::<1, _>(|s| 1.0 - s * s, row, r, nodes),
                (Activation::Tanh, 2) => fused_drift::<2, _>(|s| 1.0 - s * s, row, r, nodes),
                (Activation::Tanh, 3) => fused_drift::<3, _>(|s| 1.0 - s * s, row, r, nodes),
                (Activation::Tanh, _) => fused_drift::<4, _>(|s| 1.0 - s * s, row, r, nodes),
                (_, 1) => fused_drift::<1, _>(|s| s * (1.0 - s), row, r, nodes),
                (_, 2) => fused_drift::<2, _>(|s| s * (1.0 - s), row, r, nodes),
                (_, 3) => fused_drift::<3, _>(|s| s * (1.0 - s), row, r, nodes),
                _ => fused_drift::<4, _>(|s| s * (1.0 - s), row, r, nodes),
            };
            dc[i] = g[0] * inv_k;
            let scale = cloud.c()[i] * inv_k;
            for j in 0..d {
                dw[i * d + j] = scale * g[1 + j];
            }
        }
        return;
    }
    for i in 0..cloud.len() {
        if need_u {
            preactivations(cloud.w_of(i), nodes, u);
        }
        let row: &[f64] = if cached {
            &cache[i * k..(i + 1) * k]
        } else {
            act.value_into(&u[..k], &mut s[..k]);
            &s[..k]
        };
        dc[i] = dot4(r, row) * inv_k;
        act.derivative_from_value_into(&u[..k], row, &mut t[..k]);
        for (tk, &rk) in t[..k].iter_mut().zip(r) {
            *tk *= rk;
        }
        let scale = cloud.c()[i] * inv_k;
        for j in 0..d {
            dw[i * d + j] = scale * dot4(&t[..k], nodes.column(j));
        }
    }
}

/// One pass over the nodes for an activation whose derivative is a function
/// of its value: `[sum_k r_k s_k, sum_k r_k act'_k x_kj for j < D]`, each
/// with four interleaved lanes.
#[inline(always)]
fn fused_drift<const D: usize, P: Fn(f64) -> f64>(deriv: P, s: &[f64], r: &[f64], nodes: &Nodes) -> [f64; 5] {
    let k = s.len();
    let cols: [&[f64]; D] = core::array::from_fn(|j| &nodes.column(j)[..k]);
    let r = &r[..k];
    let mut acc = [[0.0f64; 4]; 5];
    let body = |acc: &mut [[f64; 4]; 5], lane: usize, idx: usize| {
        let sk = s[idx];
        let rk = r[idx];
        acc[0][lane] += rk * sk;
        let tk = deriv(sk) * rk;
        for j in 0..D {
            acc[1 + j][lane] += tk * cols[j][idx];
        }
    };
    let whole = k - k % 4;
    let mut idx = 0;
    while idx < whole {
        for lane in 0..4 {
            body(&mut acc, lane, idx + lane);
        }
        idx += 4;
    }
    let mut tail = [[0.0f64; 4]; 5];
    while idx < k {
        body(&mut tail, 0, idx);
        idx += 1;
    }
    core::array::from_fn(|j| (acc[j][0] + acc[j][1]) + (acc[j][2] + acc[j][3]) + tail[j][0])
}

dispatched! {
    /// `A_k = (1/M) sum_m [act_mk df/dc_m + c_m act'_mk (x_k . grad_w f_m)]`,
    /// the pairing against `mu` of the generator applied to `f`, per node.
    pub(crate) fn generator_on_nodes(cloud: &EmpiricalMeasure, act: Activation, nodes: &Nodes, f: &TestFunction, ws: &mut Workspace) -> Vec<f64> => generator_body
}

#[inline(always)]
fn generator_body(cloud: &EmpiricalMeasure, act: Activation, nodes: &Nodes, f: &TestFunction, ws: &mut Workspace) -> Vec<f64> {
    let k = nodes.len();
    let d = cloud.dim();
    ws.ensure(k);
    let mut gw = vec![0.0; d];
    let Workspace { u, s, t, .. } = ws;
    let mut a = reduce_particles(cloud.len(), k, |i, acc| {
        let c = cloud.c()[i];
        let w = cloud.w_of(i);
        let gc = f.gradient_into(c, w, &mut gw);
        preactivations(w, nodes, u);
        act.value_into(&u[..k], &mut s[..k]);
        act.derivative_from_value_into(&u[..k], &s[..k], &mut t[..k]);
        preactivations(&gw, nodes, u);
        for kk in 0..k {
            acc[kk] += gc * s[kk] + c * t[kk] * u[kk];
        }
    });
    let inv = 1.0 / cloud.len() as f64;
    a.iter_mut().for_each(|v| *v *= inv);
    a
}

dispatched! {
    /// Network output and the two generator terms on every node, split:
    /// `Q_k`, `(1/M) sum_m act_mk df/dc_m` and `(1/M) sum_m c_m act'_mk (x_k . grad_w f_m)`.
    pub(crate) fn split_generator_on_nodes(cloud: &EmpiricalMeasure, act: Activation, nodes: &Nodes, f: &TestFunction, ws: &mut Workspace) -> (Vec<f64>, Vec<f64>, Vec<f64>) => split_body
}

#[inline(always)]
fn split_body(cloud: &EmpiricalMeasure, act: Activation, nodes: &Nodes, f: &TestFunction, ws: &mut Workspace) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = nodes.len();
    let d = cloud.dim();
    ws.ensure(k);
    let mut gw = vec![0.0; d];
    let Workspace { u, s, t, .. } = ws;
    let mut all = reduce_particles(cloud.len(), 3 * k, |i, acc| {
        let c = cloud.c()[i];
        let w = cloud.w_of(i);
        let gc = f.gradient_into(c, w, &mut gw);
        preactivations(w, nodes, u);
        act.value_into(&u[..k], &mut s[..k]);
        act.derivative_from_value_into(&u[..k], &s[..k], &mut t[..k]);
        preactivations(&gw, nodes, u);
        let (q, rest) = acc.split_at_mut(k);
        let (a1, a2) = rest.split_at_mut(k);
        for kk in 0..k {
            q[kk] += c * s[kk];
            a1[kk] += gc * s[kk];
            a2[kk] += c * t[kk] * u[kk];
        }
    });
    let inv = 1.0 / cloud.len() as f64;
    all.iter_mut().for_each(|v| *v *= inv);
    let a2 = all.split_off(2 * k);
    let a1 = all.split_off(k);
    (all, a1, a2)
}
