//! Interaction-picture perturbation theory for the Thirring automaton.
//!
//! One step is `U = U0 U_int` with `U_int = e^{i chi n_up n_dn}` on every site,
//! so the order-`n` Dyson term carries `(i chi)^n / n!`. Field operators evolve
//! as `psi(x, t) = int dk/2pi sum_s u^s_k e^{i(kx - s omega(k) t)} a_{k,s}` and
//! the contraction `<psi(x,t) psi^dag(x',t')>` is the retarded walk kernel
//! `theta(t - t') <x| U0^{t-t'} |x'>` with `theta(0) = 1`.
//!
//! The second-order amplitude is assembled from the equal-time product, which
//! the discrete time ordering keeps as a separate `delta_{t,t'}` term, and the
//! retarded two-particle sum over time separations `d >= 1`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Matrix2, Vector4};
#[allow(unused_imports)]
use num_traits::Float;

use crate::lippmann_schwinger::{comb_index, epsilon_extrapolate};
use crate::spectral::{bz_nodes, dirac_walk_matrix, spectral_mode, wrap_phase, Band, Dispersion, DEFAULT_NODES};
use crate::thirring::{check_momentum, pair_velocity, w_vector, ThirringChannel, ThirringParams};
use crate::{Error, Result, C64, I};

/// Free evolution seen from the interaction picture at integer time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionPicture {
    pub dispersion: Dispersion,
    pub chi: f64,
    pub t: i64,
}

pub fn interaction_hamiltonian_picture(params: &ThirringParams, t: i64) -> InteractionPicture {
    InteractionPicture {
        dispersion: params.dispersion,
        chi: params.chi,
        t,
    }
}

impl InteractionPicture {
    /// Phase `e^{-i s omega(k) t}` picked up by a single mode.
    pub fn mode_phase(&self, k: f64, band: Band) -> C64 {
        C64::from_polar(1.0, -band.sign() * self.dispersion.omega(k) * self.t as f64)
    }

    /// Plane-wave factor of the field operator, `e^{i(kx - s omega(k) t)}`.
    pub fn field_phase(&self, x: i64, k: f64, band: Band) -> C64 {
        C64::from_polar(1.0, k * x as f64) * self.mode_phase(k, band)
    }

    /// Amplitude of `H_I(t)` between two-particle free states, relative to `t = 0`.
    pub fn pair_phase(&self, out: &ThirringChannel, inc: &ThirringChannel) -> C64 {
        C64::from_polar(1.0, (out.omega - inc.omega) * self.t as f64)
    }
}

/// Retarded one-particle contraction at lattice and time displacement `(dx, dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorEval {
    pub dx: i64,
    pub dt: i64,
    pub block: Matrix2<C64>,
}

/// `theta(dt) int dk/2pi sum_s |u^s_k><u^s_k| e^{i(k dx - s omega(k) dt)}`.
pub fn retarded_propagator(d: &Dispersion, dx: i64, dt: i64) -> PropagatorEval {
    let mut block = Matrix2::zeros();
    if dt >= 0 {
        let n = DEFAULT_NODES.max((2 * (dx.unsigned_abs() + dt as u64) + 2).next_power_of_two() as usize);
        for k in bz_nodes(n) {
            let mut m = Matrix2::zeros();
            for band in [Band::Plus, Band::Minus] {
                let mode = spectral_mode(d, k, band);
                let ph = C64::from_polar(1.0, k * dx as f64 - mode.energy * dt as f64);
                m += mode.vector * mode.vector.adjoint() * ph;
            }
            block += m;
        }
        block /= C64::new(n as f64, 0.0);
    }
    PropagatorEval { dx, dt, block }
}

/// Same kernel from powers of the Bloch matrix, used where eigenvectors degenerate.
pub fn retarded_propagator_bloch(d: &Dispersion, dx: i64, dt: i64) -> PropagatorEval {
    let mut block = Matrix2::zeros();
    if dt >= 0 {
        let n = DEFAULT_NODES.max((2 * (dx.unsigned_abs() + dt as u64) + 2).next_power_of_two() as usize);
        for k in bz_nodes(n) {
            let m = dirac_walk_matrix(d, k).entries;
            let mut pw = Matrix2::identity();
            for _ in 0..dt {
                pw *= m;
            }
            block += pw * C64::from_polar(1.0, k * dx as f64);
        }
        block /= C64::new(n as f64, 0.0);
    }
    PropagatorEval { dx, dt, block }
}

/// Antisymmetrised product of the two external legs,
/// `u1_up u2_dn - u2_up u1_dn` with `u1 = u^{s1}_{p+k}`, `u2 = u^{s2}_{p-k}`.
pub fn leg_factor(d: &Dispersion, ch: &ThirringChannel) -> f64 {
    let a = d.alpha(ch.s1, ch.p + ch.k);
    let b = d.alpha(ch.s2, ch.p - ch.k);
    a[0] * b[1] - b[0] * a[1]
}

fn on_shell(out: &ThirringChannel, inc: &ThirringChannel) -> bool {
    wrap_phase(out.p - inc.p).abs() < 1e-12
}

fn shell_ok(out: &ThirringChannel, inc: &ThirringChannel) -> bool {
    on_shell(out, inc) && comb_index(inc.omega, out.omega).is_some()
}

/// First-order coefficient of `delta(k - k')`: the four external-leg
/// contractions summed, times `i chi`, over the pair group velocity.
pub fn first_order_amplitude(params: &ThirringParams, inc: &ThirringChannel, out: &ThirringChannel) -> Result<C64> {
    check_momentum(inc.p)?;
    if !shell_ok(out, inc) || params.chi == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let d = &params.dispersion;
    let (a1, a2) = (d.alpha(inc.s1, inc.p + inc.k), d.alpha(inc.s2, inc.p - inc.k));
    let (b1, b2) = (d.alpha(out.s1, out.p + out.k), d.alpha(out.s2, out.p - out.k));
    // Vertex psi^dag_up psi^dag_dn psi_dn psi_up: both orderings on each side.
    let contractions = b1[0] * b2[1] * a1[0] * a2[1] - b1[0] * b2[1] * a2[0] * a1[1]
        - b2[0] * b1[1] * a1[0] * a2[1]
        + b2[0] * b1[1] * a2[0] * a1[1];
    let v = pair_velocity(d, inc.p, inc.k, inc.s1, inc.s2);
    Ok(I * params.chi * contractions / v)
}

/// `<w_out| G2(d) |w_in>` for `d = 1..=steps`, where
/// `G2(d) = sum_x e^{-2ipx} K(x, d) (x) K(x, d)` and `K` is the retarded kernel.
pub fn pair_propagator_series(d: &Dispersion, p: f64, w_out: &Vector4<C64>, w_in: &Vector4<C64>, steps: usize) -> Vec<C64> {
    let width = 2 * steps + 3;
    let c = (steps + 1) as i64;
    // K(x, d) stored as [K_uu, K_ud, K_du, K_dd].
    let mut cur = vec![[C64::new(0.0, 0.0); 4]; width];
    let mut nxt = cur.clone();
    cur[c as usize] = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    let nu = d.nu;
    let mi = C64::new(0.0, -d.mu);
    let phase: Vec<C64> = (0..width)
        .map(|i| C64::from_polar(1.0, -2.0 * p * (i as i64 - c) as f64))
        .collect();
    let wo = [w_out[0].conj(), w_out[1].conj(), w_out[2].conj(), w_out[3].conj()];
    let wi = [w_in[0], w_in[1], w_in[2], w_in[3]];
    let antisym = wi[0] == C64::new(0.0, 0.0)
        && wi[3] == C64::new(0.0, 0.0)
        && wi[1] == -wi[2]
        && wo[0] == C64::new(0.0, 0.0)
        && wo[3] == C64::new(0.0, 0.0)
        && wo[1] == -wo[2];
    let pair_weight = wo[1] * wi[1] * 2.0;
    let mut out = Vec::with_capacity(steps);
    // Live window; entries far outside the light cone underflow and are dropped.
    let (mut lo, mut hi) = (c as usize, c as usize);
    for _ in 1..=steps {
        lo -= 1;
        hi += 1;
        for i in lo..=hi {
            let up = &cur[i + 1];
            let here = &cur[i];
            let dn = &cur[i - 1];
            nxt[i] = [
                up[0] * nu + here[2] * mi,
                up[1] * nu + here[3] * mi,
                dn[2] * nu + here[0] * mi,
                dn[3] * nu + here[1] * mi,
            ];
        }
        core::mem::swap(&mut cur, &mut nxt);
        while hi > lo && negligible(&cur[lo]) {
            cur[lo] = [C64::new(0.0, 0.0); 4];
            nxt[lo] = cur[lo];
            lo += 1;
        }
        while hi > lo && negligible(&cur[hi]) {
            cur[hi] = [C64::new(0.0, 0.0); 4];
            nxt[hi] = cur[hi];
            hi -= 1;
        }
        let mut acc = C64::new(0.0, 0.0);
        if antisym {
            // K J K^T = det(K) J for the 2x2 antisymmetric J.
            for i in lo..=hi {
                let k = &cur[i];
                acc += (k[0] * k[3] - k[1] * k[2]) * phase[i];
            }
            out.push(acc * pair_weight);
            continue;
        }
        for i in lo..=hi {
            let k = &cur[i];
            // (K W K^T)_{ab} with W_{cd} = w_in[2c + d].
            let kw = [
                k[0] * wi[0] + k[1] * wi[2],
                k[0] * wi[1] + k[1] * wi[3],
                k[2] * wi[0] + k[3] * wi[2],
                k[2] * wi[1] + k[3] * wi[3],
            ];
            let s = wo[0] * (kw[0] * k[0] + kw[1] * k[1])
                + wo[1] * (kw[0] * k[2] + kw[1] * k[3])
                + wo[2] * (kw[2] * k[0] + kw[3] * k[1])
                + wo[3] * (kw[2] * k[2] + kw[3] * k[3]);
            acc += s * phase[i];
        }
        out.push(acc);
    }
    out
}

fn negligible(k: &[C64; 4]) -> bool {
    k.iter().all(|z| z.norm_sqr() < 1e-200)
}

/// Controls for the damped time sums.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSumOptions {
    /// Damping `e^{-eps d}` schedule, strictly decreasing.
    pub eps_schedule: Vec<f64>,
    /// Bound on the neglected tail of the smallest-eps sum.
    pub tail_tolerance: f64,
    /// Hard cap on the number of time steps.
    pub max_steps: usize,
    /// Shrink the schedule so its first entry is at most `0.1 |d omega / dk|`.
    pub velocity_scaled: bool,
}

impl Default for TimeSumOptions {
    fn default() -> Self {
        Self {
            eps_schedule: (0..5).map(|j| 0.04 / f64::from(1u32 << j)).collect(),
            tail_tolerance: 1e-12,
            max_steps: 100_000,
            velocity_scaled: true,
        }
    }
}

/// Which contraction pattern a Dyson term comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionPattern {
    /// External legs only (first order).
    ExternalLegs,
    /// Both vertices at the same time step.
    EqualTime,
    /// Vertices separated by `d >= 1` steps, joined by two retarded kernels.
    Retarded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DysonTerm {
    pub order: u32,
    pub pattern: ContractionPattern,
    pub value: C64,
}

/// Second-order result; `coefficient` is `value / (i chi)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DysonSecondOrder {
    pub value: C64,
    pub coefficient: C64,
    pub terms: [DysonTerm; 2],
    pub steps: usize,
    pub tail_bound: f64,
    pub error_estimate: f64,
}

/// Steps needed so that the damped tail beyond `D` is below `tol`.
pub fn steps_for(eps: f64, scale: f64, tol: f64) -> usize {
    let denom = 1.0 - (-eps).exp();
    ((scale / (tol * denom)).ln() / eps).ceil().max(1.0) as usize
}

/// Damped sums `sum_{d=1}^{D} e^{(i E - eps) d} g(d)` for each eps, then extrapolated.
pub fn damped_time_sum(series: &[C64], energy: f64, eps_schedule: &[f64]) -> Result<(C64, f64)> {
    let mut vals = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let step = C64::from_polar((-eps).exp(), energy);
        let mut ph = step;
        let mut acc = C64::new(0.0, 0.0);
        for g in series {
            acc += ph * g;
            ph *= step;
        }
        vals.push(acc);
    }
    if vals.len() == 1 {
        return Ok((vals[0], f64::NAN));
    }
    let ex = epsilon_extrapolate(&vals, eps_schedule)?;
    Ok((ex.value, ex.error_estimate))
}

/// Order-`chi^2` amplitude between two pair channels on the same shell.
pub fn second_order_amplitude(
    params: &ThirringParams,
    inc: &ThirringChannel,
    out: &ThirringChannel,
    opts: &TimeSumOptions,
) -> Result<DysonSecondOrder> {
    check_momentum(inc.p)?;
    let zero = C64::new(0.0, 0.0);
    let d = &params.dispersion;
    let w_in = w_vector(d, inc.p, inc.k, inc.s1, inc.s2);
    let w_out = w_vector(d, out.p, out.k, out.s1, out.s2);
    if !shell_ok(out, inc) {
        return Ok(DysonSecondOrder {
            value: zero,
            coefficient: zero,
            terms: [
                DysonTerm { order: 2, pattern: ContractionPattern::EqualTime, value: zero },
                DysonTerm { order: 2, pattern: ContractionPattern::Retarded, value: zero },
            ],
            steps: 0,
            tail_bound: 0.0,
            error_estimate: 0.0,
        });
    }
    let v = pair_velocity(d, inc.p, inc.k, inc.s1, inc.s2);
    let mut schedule = opts.eps_schedule.clone();
    if opts.velocity_scaled {
        if let Some(&first) = schedule.first() {
            let scale = (0.1 * v.abs() / first).min(1.0);
            schedule.iter_mut().for_each(|e| *e *= scale);
        }
    }
    let eps_min = schedule.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = w_in.norm() * w_out.norm();
    let want = steps_for(eps_min, scale.max(1e-300), opts.tail_tolerance);
    let steps = want.min(opts.max_steps);
    let tail = scale * (-eps_min * (steps as f64 + 1.0)).exp() / (1.0 - (-eps_min).exp());
    if tail > 1e-10 {
        return Err(Error::TimeSumTruncation { steps, tail });
    }
    let series = pair_propagator_series(d, inc.p, &w_out, &w_in, steps);
    let (retarded, err) = damped_time_sum(&series, inc.omega, &schedule)?;
    let equal_time = (w_out.adjoint() * w_in)[(0, 0)] * 0.5;
    let ic2 = (I * params.chi) * (I * params.chi);
    let coefficient = (equal_time + retarded) / v;
    Ok(DysonSecondOrder {
        value: coefficient * ic2,
        coefficient,
        terms: [
            DysonTerm {
                order: 2,
                pattern: ContractionPattern::EqualTime,
                value: equal_time / v * ic2,
            },
            DysonTerm {
                order: 2,
                pattern: ContractionPattern::Retarded,
                value: retarded / v * ic2,
            },
        ],
        steps,
        tail_bound: tail,
        error_estimate: err,
    })
}

/// Compose `sum_m a_m lambda^m` with `lambda = e^{i chi} - 1`; returns the
/// coefficients of `chi^0 .. chi^order`.
pub fn lambda_chi_reconcile(lambda_coeffs: &[C64], order: usize) -> Vec<C64> {
    let n = order + 1;
    // lambda(chi) = sum_{j>=1} (i chi)^j / j!
    let mut lam = vec![C64::new(0.0, 0.0); n];
    let mut fact = 1.0;
    let mut ipow = C64::new(1.0, 0.0);
    for (j, slot) in lam.iter_mut().enumerate().skip(1) {
        fact *= j as f64;
        ipow *= I;
        *slot = ipow / fact;
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    let mut power = vec![C64::new(0.0, 0.0); n];
    power[0] = C64::new(1.0, 0.0);
    for (m, a) in lambda_coeffs.iter().enumerate().take(n) {
        if m > 0 {
            let mut next = vec![C64::new(0.0, 0.0); n];
            for (i, pi) in power.iter().enumerate() {
                if pi.norm() == 0.0 {
                    continue;
                }
                for (j, lj) in lam.iter().enumerate() {
                    if i + j < n {
                        next[i + j] += pi * lj;
                    }
                }
            }
            power = next;
        }
        for (o, pw) in out.iter_mut().zip(power.iter()) {
            *o += a * pw;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::walk_kernel_table;
    use crate::thirring::{channel, xy_factors};
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    #[test]
    fn picture_phases() {
        let pr = ThirringParams::new(0.8, 0.5).unwrap();
        let h0 = interaction_hamiltonian_picture(&pr, 0);
        assert_eq!(h0.mode_phase(0.3, Band::Plus), C64::new(1.0, 0.0));
        let h = interaction_hamiltonian_picture(&pr, 3);
        let expect = C64::from_polar(1.0, -3.0 * pr.dispersion.omega(0.3));
        assert!((h.mode_phase(0.3, Band::Plus) - expect).norm() < 1e-15);
        let (a, b) = (interaction_hamiltonian_picture(&pr, 2), interaction_hamiltonian_picture(&pr, 5));
        let ab = interaction_hamiltonian_picture(&pr, 7);
        let lhs = a.mode_phase(1.1, Band::Minus) * b.mode_phase(1.1, Band::Minus);
        assert!((lhs - ab.mode_phase(1.1, Band::Minus)).norm() < 1e-14);
    }

    #[test]
    fn propagator_basic_values() {
        let d = Dispersion::new(0.8).unwrap();
        assert_eq!(retarded_propagator(&d, 0, -1).block, Matrix2::zeros());
        let id = retarded_propagator(&d, 0, 0).block;
        assert!((id - Matrix2::identity()).norm() < 1e-13);
        let table = walk_kernel_table(&d, 1);
        let p = retarded_propagator(&d, 0, 1).block;
        assert!((p - table[1][1]).norm() < 1e-13);
        assert!((p[(0, 1)] - C64::new(0.0, -0.6)).norm() < 1e-13);
    }

    #[test]
    fn propagator_light_cone() {
        let d = Dispersion::new(0.6).unwrap();
        for dt in 0..5 {
            for dx in -7..=7i64 {
                let b = retarded_propagator(&d, dx, dt).block;
                if dx.abs() > dt {
                    assert!(b.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn first_order_matches_xy() {
        let pr = ThirringParams::new(0.8, 0.3).unwrap();
        let ch = channel(&pr, 0.3, 0.7, Band::Plus, Band::Plus).unwrap();
        let a = first_order_amplitude(&pr, &ch, &ch).unwrap();
        let f = xy_factors(&pr, 0.3, 0.7).unwrap();
        assert!((a - I * 0.3 * f.first_order()).norm() < 1e-14);
        let um = channel(&pr, 0.3, 0.7 - PI, Band::Minus, Band::Minus).unwrap();
        let b = first_order_amplitude(&pr, &ch, &um).unwrap();
        assert!((a + b).norm() < 1e-14);
        let off = channel(&pr, 0.3, 0.9, Band::Plus, Band::Plus).unwrap();
        assert_eq!(first_order_amplitude(&pr, &ch, &off).unwrap(), C64::new(0.0, 0.0));
        let free = ThirringParams::new(0.8, 0.0).unwrap();
        assert_eq!(first_order_amplitude(&free, &ch, &ch).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn reconcile_elementary_series() {
        let c = lambda_chi_reconcile(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], 3);
        assert!((c[1] - I).norm() < 1e-15);
        assert!((c[2] - C64::new(-0.5, 0.0)).norm() < 1e-15);
        assert!((c[3] - C64::new(0.0, -1.0 / 6.0)).norm() < 1e-15);
        let a1 = C64::new(0.3, -0.2);
        let c = lambda_chi_reconcile(&[C64::new(0.0, 0.0), a1], 2);
        assert!((c[1] - a1 * I).norm() < 1e-15);
        assert!((c[2] + a1 * 0.5).norm() < 1e-15);
        let a2 = C64::new(-1.1, 0.4);
        let c = lambda_chi_reconcile(&[C64::new(0.0, 0.0), a1, a2], 2);
        assert!((c[2] - (-a1 * 0.5 - a2)).norm() < 1e-15);
    }

    #[test]
    fn pair_series_matches_tensor_kernel() {
        let d = Dispersion::new(0.7).unwrap();
        let p = 0.4;
        let w_in = w_vector(&d, p, 0.6, Band::Plus, Band::Plus);
        let w_out = w_vector(&d, p, 0.6, Band::Plus, Band::Minus);
        let generic = crate::thirring::pair_vector(&d, p, 0.6, Band::Plus, Band::Minus);
        check_series(&d, p, &w_out, &w_in);
        check_series(&d, p, &generic, &w_in);
        check_series(&d, p, &generic, &generic);
    }

    fn check_series(d: &Dispersion, p: f64, w_out: &Vector4<C64>, w_in: &Vector4<C64>) {
        let series = pair_propagator_series(d, p, w_out, w_in, 6);
        let table = walk_kernel_table(d, 6);
        for (t, row) in table.iter().enumerate().skip(1) {
            let mut acc = C64::new(0.0, 0.0);
            for (i, k) in row.iter().enumerate() {
                let x = i as f64 - t as f64;
                let kk = Matrix4Kron::kron(k, k);
                acc += (w_out.adjoint() * kk * w_in)[(0, 0)] * C64::from_polar(1.0, -2.0 * p * x);
            }
            assert_relative_eq!((acc - series[t - 1]).norm(), 0.0, epsilon = 1e-13);
        }
    }

    struct Matrix4Kron;
    impl Matrix4Kron {
        fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> nalgebra::Matrix4<C64> {
            nalgebra::Matrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
        }
    }
}
