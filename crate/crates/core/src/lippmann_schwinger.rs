//! Finite-rank Lippmann-Schwinger machinery for `U = U0 V`.
//!
//! The interaction kernel is `W = U0^dag U - I`. Everything is restricted to the
//! support `S` of `W`, where the free part enters only through the block
//! `K(z) = P_S G0(z) U0 P_S` with `G0(z) = (z - U0)^{-1}`.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::spectral::{
    bz_nodes, spectral_mode, wrap_phase, Band, DiracWalk, SpectralFreeEvolution, DEFAULT_NODES,
};
use crate::{Error, Result, C64};

/// Shell tolerance for quasi-energy conservation, radians per step.
pub const SHELL_TOLERANCE: f64 = 1e-9;

/// Default regularisation schedule `1e-2 * 2^-j`, `j = 0..=4`.
pub fn default_eps_schedule() -> Vec<f64> {
    (0..5).map(|j| 1e-2 / f64::from(1u32 << j)).collect()
}

/// Where the on-site phase profile `f(x)` is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteProfile {
    Finite(Vec<(i64, f64)>),
    /// The same value on every site of the infinite lattice.
    Everywhere(f64),
}

/// `V_chi = sum_x e^{-i chi f(x)} |x><x|` tensored with the identity on the internal space.
#[derive(Debug, Clone, PartialEq)]
pub struct OnSitePhase {
    pub chi: f64,
    pub profile: SiteProfile,
}

impl OnSitePhase {
    pub fn single_site(chi: f64, site: i64) -> Self {
        Self {
            chi,
            profile: SiteProfile::Finite(alloc::vec![(site, 1.0)]),
        }
    }
}

/// `W` restricted to its support. Rows and columns are indexed by
/// `site_index * internal_dim + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteRankInteraction {
    pub sites: Vec<i64>,
    pub internal_dim: usize,
    pub block: DMatrix<C64>,
}

impl FiniteRankInteraction {
    pub fn from_block(sites: Vec<i64>, internal_dim: usize, block: DMatrix<C64>) -> Result<Self> {
        let n = sites.len() * internal_dim;
        if block.nrows() != n || block.ncols() != n {
            return Err(Error::Domain {
                name: "block",
                value: block.nrows() as f64,
                allowed: "sites * internal_dim square",
            });
        }
        Ok(Self {
            sites,
            internal_dim,
            block,
        })
    }

    pub fn dim(&self) -> usize {
        self.block.nrows()
    }

    /// Numerical rank (singular values above `1e-14` of the largest, or absolute).
    pub fn rank(&self) -> usize {
        if self.dim() == 0 {
            return 0;
        }
        let sv = self.block.clone().singular_values();
        sv.iter().filter(|s| **s > 1e-14).count()
    }

    /// `<x, a| W |x', b>` on the full lattice.
    pub fn element(&self, x: i64, a: usize, xp: i64, b: usize) -> C64 {
        let d = self.internal_dim;
        let find = |s: i64| self.sites.iter().position(|t| *t == s);
        match (find(x), find(xp)) {
            (Some(i), Some(j)) if a < d && b < d => self.block[(i * d + a, j * d + b)],
            _ => C64::new(0.0, 0.0),
        }
    }
}

/// `W = U0^dag (U0 V) - I = V - I` for an on-site phase.
pub fn w_operator<E: SpectralFreeEvolution>(u0: &E, v: &OnSitePhase) -> Result<FiniteRankInteraction> {
    let profile = match &v.profile {
        SiteProfile::Finite(p) => p,
        SiteProfile::Everywhere(f) => {
            return Err(Error::UnsupportedInteraction(alloc::format!(
                "constant profile f = {f} on every site"
            )))
        }
    };
    let d = u0.internal_dim();
    let mut sites: Vec<(i64, f64)> = Vec::new();
    for &(x, f) in profile {
        if f == 0.0 {
            continue;
        }
        match sites.iter_mut().find(|(s, _)| *s == x) {
            Some(slot) => slot.1 += f,
            None => sites.push((x, f)),
        }
    }
    sites.sort_by_key(|(x, _)| *x);
    let n = sites.len() * d;
    let mut block = DMatrix::zeros(n, n);
    for (i, &(_, f)) in sites.iter().enumerate() {
        let w = C64::from_polar(1.0, -v.chi * f) - 1.0;
        for a in 0..d {
            block[(i * d + a, i * d + a)] = w;
        }
    }
    FiniteRankInteraction::from_block(sites.into_iter().map(|(x, _)| x).collect(), d, block)
}

/// Node count that resolves a pole at distance `|ln |z||` from the unit circle.
pub fn nodes_for<E: SpectralFreeEvolution>(u0: &E, z: C64) -> usize {
    let eps = z.norm().ln().abs().max(1e-12);
    let want = (40.0 * u0.max_group_velocity().max(1e-3) / eps).min((1u64 << 22) as f64) as usize;
    want.max(DEFAULT_NODES).next_power_of_two()
}

/// `P_S G0(z) U0 P_S` by zone quadrature of `(z M(k)^dag - I)^{-1}` with `n` nodes.
pub fn kernel_block_with<E: SpectralFreeEvolution>(
    u0: &E,
    sites: &[i64],
    z: C64,
    n: usize,
) -> Result<DMatrix<C64>> {
    let d = u0.internal_dim();
    let m = sites.len();
    if m == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let lo = sites.iter().min().copied().unwrap_or(0);
    let hi = sites.iter().max().copied().unwrap_or(0);
    let span = (hi - lo) as usize;
    // Fourier moments for displacements -span..=span.
    let mut moments: Vec<DMatrix<C64>> = (0..=2 * span).map(|_| DMatrix::zeros(d, d)).collect();
    let ident = DMatrix::<C64>::identity(d, d);
    for (node, k) in bz_nodes(n).enumerate() {
        let a = u0.bloch(k).adjoint() * z - &ident;
        let b = a.try_inverse().ok_or(Error::Pole { k })?;
        if b.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Quadrature { node, k });
        }
        let step = C64::from_polar(1.0, k);
        let mut ph = C64::from_polar(1.0, -k * span as f64);
        for mom in moments.iter_mut() {
            *mom += &b * ph;
            ph *= step;
        }
    }
    let scale = C64::new(1.0 / n as f64, 0.0);
    let mut out = DMatrix::zeros(m * d, m * d);
    for (i, &x) in sites.iter().enumerate() {
        for (j, &xp) in sites.iter().enumerate() {
            let idx = (x - xp + span as i64) as usize;
            let blk = &moments[idx] * scale;
            out.view_mut((i * d, j * d), (d, d)).copy_from(&blk);
        }
    }
    Ok(out)
}

/// [`kernel_block_with`] using [`nodes_for`].
pub fn kernel_block<E: SpectralFreeEvolution>(u0: &E, sites: &[i64], z: C64) -> Result<DMatrix<C64>> {
    kernel_block_with(u0, sites, z, nodes_for(u0, z))
}

/// A T-matrix block on the interaction support.
#[derive(Debug, Clone, PartialEq)]
pub struct TMatrixEval {
    pub z: C64,
    pub value: DMatrix<C64>,
    pub n_terms: usize,
    pub converged: bool,
    /// Norm of the last Born term (zero for the closed solve).
    pub residual: f64,
    /// `|| T - W - W K T ||`.
    pub fixed_point_residual: f64,
}

fn fixed_point_residual(w: &DMatrix<C64>, k: &DMatrix<C64>, t: &DMatrix<C64>) -> f64 {
    (t - w - w * k * t).norm()
}

/// Born series from a precomputed kernel block.
pub fn born_from_kernel(w: &DMatrix<C64>, k: &DMatrix<C64>, z: C64, tol: f64, max_n: usize) -> Result<TMatrixEval> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            name: "tol",
            value: tol,
            allowed: "tol > 0",
        });
    }
    let wk = w * k;
    let mut term = w.clone();
    let mut sum = term.clone();
    let mut n_terms = 1;
    let mut last = term.norm();
    let mut converged = last < tol;
    while !converged && n_terms <= max_n {
        term = &wk * term;
        sum += &term;
        n_terms += 1;
        last = term.norm();
        converged = last < tol;
        if !last.is_finite() {
            break;
        }
    }
    let fp = fixed_point_residual(w, k, &sum);
    Ok(TMatrixEval {
        z,
        value: sum,
        n_terms,
        converged,
        residual: last,
        fixed_point_residual: fp,
    })
}

/// Dense solve of `(I - W K) T = W`.
pub fn closed_from_kernel(w: &DMatrix<C64>, k: &DMatrix<C64>, z: C64) -> Result<TMatrixEval> {
    let n = w.nrows();
    if n == 0 || w.norm() == 0.0 {
        return Ok(TMatrixEval {
            z,
            value: DMatrix::zeros(n, n),
            n_terms: 0,
            converged: true,
            residual: 0.0,
            fixed_point_residual: 0.0,
        });
    }
    let a = DMatrix::<C64>::identity(n, n) - w * k;
    let sv = a.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < 1e13) {
        return Err(Error::SingularKernel { condition });
    }
    let t = a
        .lu()
        .solve(w)
        .ok_or(Error::SingularKernel { condition })?;
    let fp = fixed_point_residual(w, k, &t);
    Ok(TMatrixEval {
        z,
        value: t,
        n_terms: 0,
        converged: true,
        residual: 0.0,
        fixed_point_residual: fp,
    })
}

/// `(W G0(z) U0)^n W` on the support.
pub fn born_term<E: SpectralFreeEvolution>(
    w: &FiniteRankInteraction,
    u0: &E,
    z: C64,
    n: usize,
) -> Result<DMatrix<C64>> {
    let k = kernel_block(u0, &w.sites, z)?;
    let wk = &w.block * &k;
    let mut term = w.block.clone();
    for _ in 0..n {
        term = &wk * term;
    }
    Ok(term)
}

/// Sum Born terms until the last one drops below `tol` or `max_n` is reached.
/// Non-convergence is reported through `converged = false`.
pub fn t_matrix_born<E: SpectralFreeEvolution>(
    w: &FiniteRankInteraction,
    u0: &E,
    z: C64,
    tol: f64,
    max_n: usize,
) -> Result<TMatrixEval> {
    let k = kernel_block(u0, &w.sites, z)?;
    born_from_kernel(&w.block, &k, z, tol, max_n)
}

pub fn t_matrix_closed<E: SpectralFreeEvolution>(
    w: &FiniteRankInteraction,
    u0: &E,
    z: C64,
) -> Result<TMatrixEval> {
    let k = kernel_block(u0, &w.sites, z)?;
    closed_from_kernel(&w.block, &k, z)
}

/// Spectral radius of the Born kernel `W K` on the support.
pub fn born_spectral_radius(w: &DMatrix<C64>, k: &DMatrix<C64>) -> f64 {
    let wk = w * k;
    if wk.nrows() == 0 {
        return 0.0;
    }
    match wk.clone().schur().eigenvalues() {
        Some(ev) => ev.iter().map(|e| e.norm()).fold(0.0, f64::max),
        None => f64::NAN,
    }
}

/// Limit `eps -> 0` of a sampled sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolated {
    pub value: C64,
    /// Difference between the two highest extrapolation orders.
    pub error_estimate: f64,
}

/// Neville value at zero of the polynomial through `(x_i, y_i)`.
pub fn neville_at_zero(x: &[f64], y: &[C64]) -> C64 {
    let mut p: Vec<C64> = y.to_vec();
    let n = x.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (p[i + 1] * x[i] - p[i] * x[i + m]) / (x[i] - x[i + m]);
        }
    }
    p[0]
}

/// Polynomial (Richardson) extrapolation to `eps = 0`, degree `len - 1` capped at 4.
pub fn epsilon_extrapolate(values: &[C64], eps: &[f64]) -> Result<Extrapolated> {
    if values.len() != eps.len() || values.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: values.len().min(eps.len()),
        });
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) || eps[eps.len() - 1] <= 0.0 {
        return Err(Error::Domain {
            name: "eps",
            value: eps[eps.len() - 1],
            allowed: "strictly decreasing positive schedule",
        });
    }
    let take = values.len().min(5);
    let x = &eps[eps.len() - take..];
    let y = &values[values.len() - take..];
    // Estimates of increasing order, always anchored at the smallest eps.
    let orders: Vec<C64> = (1..=take)
        .map(|m| neville_at_zero(&x[take - m..], &y[take - m..]))
        .collect();
    let diffs: Vec<f64> = orders.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let best = orders[take - 1];
    let err = diffs[diffs.len() - 1];
    let scale = 1.0 + best.norm();
    let steps: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let growing = |d: &[f64]| d.len() >= 2 && d.windows(2).all(|w| w[1] > w[0]);
    if (growing(&diffs) || growing(&steps)) && err > 1e-6 * scale {
        return Err(Error::Extrapolation {
            first: diffs[0],
            last: err,
        });
    }
    Ok(Extrapolated {
        value: best,
        error_estimate: err,
    })
}

/// Prefactor convention of a recorded coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Convention {
    /// Multiplies `2 pi delta_{2pi}(omega' - omega)` in quasi-energy.
    Discrete,
    /// Multiplies `-2 pi i delta(E' - E)` with `T~ = (i / tau) T`.
    Continuous { tau: f64 },
}

/// Label of an asymptotic channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelLabel {
    Single { k: f64, band: Band },
    Pair { p: f64, k: f64, s1: i8, s2: i8 },
}

/// One improper matrix element of `S - I`, stripped of its delta factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeRecord {
    pub in_channel: ChannelLabel,
    pub out_channel: ChannelLabel,
    /// `l` with `omega_out - omega_in = 2 pi l`.
    pub comb_index: i64,
    pub coefficient: C64,
    pub convention: Convention,
    pub error_estimate: f64,
    /// Set when the epsilon limit did not settle to `1e-6`.
    pub flagged: bool,
}

impl AmplitudeRecord {
    /// Express the coefficient in the other convention.
    pub fn with_convention(mut self, convention: Convention) -> Self {
        let to_plain = match self.convention {
            Convention::Discrete => 1.0,
            Convention::Continuous { tau } => tau,
        };
        let from_plain = match convention {
            Convention::Discrete => 1.0,
            Convention::Continuous { tau } => 1.0 / tau,
        };
        self.coefficient *= to_plain * from_plain;
        self.convention = convention;
        self
    }
}

/// Comb index if `e_out - e_in` lies on `2 pi Z` within the shell tolerance.
pub fn comb_index(e_in: f64, e_out: f64) -> Option<i64> {
    let diff = e_out - e_in;
    if wrap_phase(diff).abs() > SHELL_TOLERANCE {
        return None;
    }
    Some((diff / TAU).round() as i64)
}

/// Plane-wave overlap `sum_{x,x'} e^{-ik'x} <u'| T_{x x'} |u> e^{ikx'}`.
pub fn plane_wave_element(
    t: &DMatrix<C64>,
    sites: &[i64],
    d: usize,
    k_in: f64,
    u_in: &[C64],
    k_out: f64,
    u_out: &[C64],
) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (i, &x) in sites.iter().enumerate() {
        let bra = C64::from_polar(1.0, -k_out * x as f64);
        for (j, &xp) in sites.iter().enumerate() {
            let ket = C64::from_polar(1.0, k_in * xp as f64);
            for a in 0..d {
                for b in 0..d {
                    acc += bra * u_out[a].conj() * t[(i * d + a, j * d + b)] * u_in[b] * ket;
                }
            }
        }
    }
    acc
}

/// `<k', s'| S - I |k, s>` for the Dirac walk with plane waves normalised to
/// `delta(k - k')`. The coefficient multiplies `2 pi delta_{2pi}(omega' - omega)`
/// in the discrete convention; dividing it by `|d omega/dk|` of the outgoing
/// mode gives the one-dimensional reflection or transmission deficit.
pub fn s_matrix_element(
    w: &FiniteRankInteraction,
    u0: &DiracWalk,
    k_in: f64,
    band_in: Band,
    k_out: f64,
    band_out: Band,
    eps_schedule: &[f64],
) -> Result<AmplitudeRecord> {
    let disp = &u0.dispersion;
    let m_in = spectral_mode(disp, k_in, band_in);
    let m_out = spectral_mode(disp, k_out, band_out);
    let mut record = AmplitudeRecord {
        in_channel: ChannelLabel::Single {
            k: m_in.k,
            band: band_in,
        },
        out_channel: ChannelLabel::Single {
            k: m_out.k,
            band: band_out,
        },
        comb_index: 0,
        coefficient: C64::new(0.0, 0.0),
        convention: Convention::Discrete,
        error_estimate: 0.0,
        flagged: false,
    };
    let Some(l) = comb_index(m_in.energy, m_out.energy) else {
        return Ok(record);
    };
    record.comb_index = l;
    if w.block.norm() == 0.0 {
        return Ok(record);
    }
    let u_in = [m_in.vector[0], m_in.vector[1]];
    let u_out = [m_out.vector[0], m_out.vector[1]];
    let mut samples = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let z = C64::from_polar(eps.exp(), -m_in.energy);
        let k = kernel_block(u0, &w.sites, z)?;
        let t = closed_from_kernel(&w.block, &k, z)?;
        samples.push(plane_wave_element(
            &t.value,
            &w.sites,
            w.internal_dim,
            m_in.k,
            &u_in,
            m_out.k,
            &u_out,
        ));
    }
    match epsilon_extrapolate(&samples, eps_schedule) {
        Ok(ex) => {
            record.coefficient = ex.value;
            record.error_estimate = ex.error_estimate;
            record.flagged = ex.error_estimate > 1e-6;
        }
        Err(Error::Extrapolation { last, .. }) => {
            record.coefficient = samples[samples.len() - 1];
            record.error_estimate = last;
            record.flagged = true;
        }
        Err(e) => return Err(e),
    }
    Ok(record)
}

/// Transmission and reflection amplitudes `(t, r)` of a plus- or minus-band
/// mode scattered by `w`, from forward and backward S-matrix elements.
pub fn transmission_reflection_amplitudes(
    w: &FiniteRankInteraction,
    u0: &DiracWalk,
    k: f64,
    band: Band,
    eps_schedule: &[f64],
) -> Result<(C64, C64, bool)> {
    let v = u0.dispersion.group_velocity(k).abs();
    let fwd = s_matrix_element(w, u0, k, band, k, band, eps_schedule)?;
    let bwd = s_matrix_element(w, u0, k, band, -k, band, eps_schedule)?;
    Ok((
        1.0 + fwd.coefficient / v,
        bwd.coefficient / v,
        fwd.flagged || bwd.flagged,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn walk(nu: f64) -> DiracWalk {
        DiracWalk::new(nu).unwrap()
    }

    #[test]
    fn w_for_zero_coupling_vanishes() {
        let w = w_operator(&walk(0.6), &OnSitePhase::single_site(0.0, 0)).unwrap();
        assert_eq!(w.rank(), 0);
        assert_eq!(w.block.norm(), 0.0);
    }

    #[test]
    fn w_single_site() {
        let chi = 0.7;
        let w = w_operator(&walk(0.6), &OnSitePhase::single_site(chi, 0)).unwrap();
        let expect = C64::from_polar(1.0, -chi) - 1.0;
        assert_eq!(w.sites, alloc::vec![0]);
        assert_relative_eq!((w.block[(0, 0)] - expect).norm(), 0.0);
        assert_relative_eq!((w.block[(1, 1)] - expect).norm(), 0.0);
        assert_eq!(w.block[(0, 1)].norm(), 0.0);
        assert_eq!(w.rank(), 2);
    }

    #[test]
    fn w_two_sites_and_infinite_profile() {
        let v = OnSitePhase {
            chi: 0.4,
            profile: SiteProfile::Finite(alloc::vec![(0, 1.0), (1, 1.0), (5, 0.0)]),
        };
        let w = w_operator(&walk(0.6), &v).unwrap();
        assert_eq!(w.sites, alloc::vec![0, 1]);
        assert_eq!(w.rank(), 4);
        assert_eq!(w.element(5, 0, 5, 0).norm(), 0.0);
        let inf = OnSitePhase {
            chi: 0.4,
            profile: SiteProfile::Everywhere(1.0),
        };
        assert!(matches!(
            w_operator(&walk(0.6), &inf),
            Err(Error::UnsupportedInteraction(_))
        ));
    }

    #[test]
    fn kernel_matches_geometric_series_far_from_circle() {
        // |z| = 3: G0 U0 = sum_{d>=1} z^{-d} U0^d, truncated exactly in real space.
        let u0 = walk(0.8);
        let z = C64::from_polar(3.0, 0.4);
        let k = kernel_block(&u0, &[0, 2], z).unwrap();
        let table = crate::spectral::walk_kernel_table(&u0.dispersion, 60);
        let mut oracle = DMatrix::<C64>::zeros(4, 4);
        for (d, row) in table.iter().enumerate().skip(1) {
            let zd = z.powi(-(d as i32));
            for (i, x) in [0i64, 2].iter().enumerate() {
                for (j, xp) in [0i64, 2].iter().enumerate() {
                    let dx = x - xp;
                    if dx.unsigned_abs() as usize > d {
                        continue;
                    }
                    let kx = row[(dx + d as i64) as usize];
                    for a in 0..2 {
                        for b in 0..2 {
                            oracle[(2 * i + a, 2 * j + b)] += zd * kx[(a, b)];
                        }
                    }
                }
            }
        }
        assert!((k - oracle).norm() < 1e-12);
    }

    #[test]
    fn born_rank_one_structure() {
        let u0 = walk(0.7);
        let lambda = C64::new(0.1, -0.2);
        let c = DMatrix::from_diagonal_element(2, 2, C64::new(1.0, 0.0));
        let w = FiniteRankInteraction::from_block(alloc::vec![0], 2, c.clone() * lambda).unwrap();
        let z = C64::from_polar(1.05, -0.4);
        let k = kernel_block(&u0, &[0], z).unwrap();
        let t1 = born_term(&w, &u0, z, 1).unwrap();
        assert!((t1 - &c * &k * &c * lambda * lambda).norm() < 1e-14);
        assert_eq!(born_term(&w, &u0, z, 0).unwrap(), w.block);
    }

    #[test]
    fn born_ratio_tracks_spectral_radius() {
        let u0 = walk(0.7);
        let block = DMatrix::from_fn(4, 4, |i, j| C64::new(0.05 * (i as f64 + 1.0), 0.03 * j as f64 - 0.02));
        let w = FiniteRankInteraction::from_block(alloc::vec![0, 1], 2, block).unwrap();
        let z = C64::from_polar(1.02, 0.3);
        let k = kernel_block(&u0, &w.sites, z).unwrap();
        let rho = born_spectral_radius(&w.block, &k);
        let a = born_term(&w, &u0, z, 60).unwrap().norm();
        let b = born_term(&w, &u0, z, 61).unwrap().norm();
        assert_relative_eq!(b / a, rho, max_relative = 1e-3);
    }

    #[test]
    fn born_and_closed_agree() {
        let u0 = walk(0.6);
        let w = w_operator(&u0, &OnSitePhase::single_site(0.1, 0)).unwrap();
        let z = C64::from_polar(1.01, -1.3);
        let kk = kernel_block(&u0, &w.sites, z).unwrap();
        assert!(born_spectral_radius(&w.block, &kk) < 0.8);
        let born = t_matrix_born(&w, &u0, z, 1e-15, 500).unwrap();
        let closed = t_matrix_closed(&w, &u0, z).unwrap();
        assert!(born.converged);
        assert!((born.value - &closed.value).norm() < 1e-10);
        assert!(closed.fixed_point_residual / closed.value.norm() < 1e-12);
    }

    #[test]
    fn zero_interaction_gives_zero_t() {
        let u0 = walk(0.6);
        let w = w_operator(&u0, &OnSitePhase::single_site(0.0, 0)).unwrap();
        let z = C64::from_polar(1.01, 0.2);
        let born = t_matrix_born(&w, &u0, z, 1e-12, 10).unwrap();
        assert!(born.converged);
        assert_eq!(born.n_terms, 1);
        assert_eq!(t_matrix_closed(&w, &u0, z).unwrap().value.norm(), 0.0);
    }

    #[test]
    fn rank_one_closed_form() {
        let lambda = C64::new(-0.3, 0.4);
        let g = C64::new(0.2, -0.7);
        let t = closed_from_kernel(
            &DMatrix::from_element(1, 1, lambda),
            &DMatrix::from_element(1, 1, g),
            C64::new(0.0, 0.0),
        )
        .unwrap();
        assert_relative_eq!((t.value[(0, 0)] - lambda / (1.0 - lambda * g)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_kernel_reported() {
        let w = DMatrix::from_element(1, 1, C64::new(2.0, 0.0));
        let k = DMatrix::from_element(1, 1, C64::new(0.5, 0.0));
        assert!(matches!(
            closed_from_kernel(&w, &k, C64::new(0.0, 0.0)),
            Err(Error::SingularKernel { .. })
        ));
    }

    #[test]
    fn extrapolation_basics() {
        let eps = [0.04, 0.02, 0.01];
        let c = C64::new(1.0, -2.0);
        let e = epsilon_extrapolate(&[c, c, c], &eps).unwrap();
        assert_relative_eq!((e.value - c).norm(), 0.0);
        let lin: Vec<C64> = eps.iter().map(|x| C64::new(3.0, 1.0) + C64::new(0.5, 2.0) * *x).collect();
        let e = epsilon_extrapolate(&lin, &eps).unwrap();
        assert!((e.value - C64::new(3.0, 1.0)).norm() < 1e-13);
        let eps = [1e-2, 5e-3, 2.5e-3];
        let v: Vec<C64> = eps.iter().map(|x| C64::new(1.0 / (x.exp() - 0.5), 0.0)).collect();
        let e = epsilon_extrapolate(&v, &eps).unwrap();
        // Degree-2 remainder: eps0 eps1 eps2 / prod(e^eps - 0.5) to leading order.
        assert!((e.value - 2.0).norm() < 1.1e-6);
        let eps4 = [2e-2, 1e-2, 5e-3, 2.5e-3];
        let v4: Vec<C64> = eps4.iter().map(|x| C64::new(1.0 / (x.exp() - 0.5), 0.0)).collect();
        assert!((epsilon_extrapolate(&v4, &eps4).unwrap().value - 2.0).norm() < 1e-7);
        assert!(epsilon_extrapolate(&v[..2], &eps[..2]).is_err());
        assert!(epsilon_extrapolate(&v, &[1e-3, 2e-3, 3e-3]).is_err());
    }

    #[test]
    fn extrapolation_flags_divergence() {
        let eps = [0.04, 0.02, 0.01, 0.005];
        let v: Vec<C64> = [1.0, -3.0, 9.0, -27.0].iter().map(|x| C64::new(*x, 0.0)).collect();
        assert!(matches!(
            epsilon_extrapolate(&v, &eps),
            Err(Error::Extrapolation { .. })
        ));
    }

    #[test]
    fn off_shell_is_zero() {
        let u0 = walk(0.8);
        let w = w_operator(&u0, &OnSitePhase::single_site(1.0, 0)).unwrap();
        let r = s_matrix_element(&w, &u0, 0.5, Band::Plus, 0.9, Band::Plus, &default_eps_schedule()).unwrap();
        assert_eq!(r.coefficient.norm(), 0.0);
        let r = s_matrix_element(&w, &u0, 0.5, Band::Plus, 0.5, Band::Minus, &default_eps_schedule()).unwrap();
        assert_eq!(r.coefficient.norm(), 0.0);
    }

    #[test]
    fn single_channel_unitarity_at_massless_point() {
        let u0 = walk(1.0);
        let chi = 0.9;
        let w = w_operator(&u0, &OnSitePhase::single_site(chi, 0)).unwrap();
        for (k, band) in [(0.6, Band::Plus), (-1.2, Band::Plus), (0.6, Band::Minus)] {
            let r = s_matrix_element(&w, &u0, k, band, k, band, &default_eps_schedule()).unwrap();
            let c = r.coefficient / u0.dispersion.group_velocity(k).abs();
            assert!(((1.0 + c).norm() - 1.0).abs() < 1e-6, "k={k} c={c}");
            assert!((1.0 + c - C64::from_polar(1.0, -chi)).norm() < 1e-6);
        }
    }

    #[test]
    fn two_channel_flux_conservation() {
        let u0 = walk(0.8);
        let w = w_operator(&u0, &OnSitePhase::single_site(1.0, 0)).unwrap();
        let (t, r, flagged) =
            transmission_reflection_amplitudes(&w, &u0, 0.5, Band::Plus, &default_eps_schedule()).unwrap();
        assert!(!flagged);
        assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn convention_round_trip() {
        let rec = AmplitudeRecord {
            in_channel: ChannelLabel::Single { k: 0.1, band: Band::Plus },
            out_channel: ChannelLabel::Single { k: 0.1, band: Band::Plus },
            comb_index: 0,
            coefficient: C64::new(0.3, -0.1),
            convention: Convention::Discrete,
            error_estimate: 0.0,
            flagged: false,
        };
        let c = rec.with_convention(Convention::Continuous { tau: 0.25 });
        assert_relative_eq!((c.coefficient - C64::new(1.2, -0.4)).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(c.with_convention(Convention::Discrete).coefficient, rec.coefficient);
    }
}
