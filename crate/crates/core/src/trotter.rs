//! Trotterized versus continuous-time scattering on a hopping ring.
//!
//! The free Hamiltonian is `H0 = J (2 - S - S^dag)` on an `N`-site ring, so every
//! function of `H0` is circulant and its block on the potential support is a
//! short Fourier sum. All T-matrices live on that support.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::lippmann_schwinger::{
    born_from_kernel, closed_from_kernel, comb_index, AmplitudeRecord, ChannelLabel, Convention, TMatrixEval,
};
use crate::spectral::Band;
use crate::{Error, Result, C64, I};

/// `a1` in the bound `|W~ G~0| <= gamma + a1 tau |V| + a2 tau^2 |V|^2`.
pub const A1: f64 = (3.0 * PI + 4.0) / (4.0 * PI);
pub const A2: f64 = (PI + 2.0) / (4.0 * PI);
/// Relative margin `delta / omega_M` in the comb-collapse condition.
pub const COMB_MARGIN: f64 = 0.1;

/// Single particle on a ring with a finitely supported on-site potential,
/// probed at `z = omega(k) + i eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel {
    pub sites: usize,
    pub hopping: f64,
    pub potential: Vec<(usize, f64)>,
    pub k: f64,
    pub eps: f64,
    /// `|| G0(z) V ||` at the probe energy.
    pub gamma: f64,
}

impl ContinuousModel {
    pub fn new(sites: usize, hopping: f64, potential: Vec<(usize, f64)>, k: f64, eps: f64) -> Result<Self> {
        if sites < 3 {
            return Err(Error::Domain {
                name: "sites",
                value: sites as f64,
                allowed: ">= 3",
            });
        }
        if !(hopping > 0.0 && hopping.is_finite()) {
            return Err(Error::Domain {
                name: "hopping",
                value: hopping,
                allowed: "(0, inf)",
            });
        }
        if !(eps > 0.0) {
            return Err(Error::Domain {
                name: "eps",
                value: eps,
                allowed: "(0, inf)",
            });
        }
        if potential.iter().any(|&(x, v)| x >= sites || !v.is_finite()) {
            return Err(Error::UnsupportedInteraction(alloc::format!(
                "potential must sit on ring sites 0..{sites} with finite values"
            )));
        }
        let mut m = Self {
            sites,
            hopping,
            potential,
            k,
            eps,
            gamma: 0.0,
        };
        m.gamma = m.gamma_at(m.energy())?;
        Ok(m)
    }

    /// The default sweep model: 128 sites, `J = 1`, two-site potential.
    pub fn toy() -> Self {
        Self::new(128, 1.0, alloc::vec![(60, 0.3), (61, 0.2)], 0.9, 0.8).expect("toy model parameters are valid")
    }

    pub fn omega(&self, k: f64) -> f64 {
        2.0 * self.hopping * (1.0 - k.cos())
    }

    pub fn lattice_momenta(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.sites).map(move |m| TAU * m as f64 / self.sites as f64)
    }

    pub fn omega_max(&self) -> f64 {
        self.lattice_momenta().map(|k| self.omega(k)).fold(0.0, f64::max)
    }

    /// Operator norm of the diagonal potential.
    pub fn v_norm(&self) -> f64 {
        self.potential.iter().map(|p| p.1.abs()).fold(0.0, f64::max)
    }

    pub fn energy(&self) -> C64 {
        C64::new(self.omega(self.k), self.eps)
    }

    pub fn support(&self) -> Vec<usize> {
        self.potential.iter().map(|p| p.0).collect()
    }

    pub fn v_block(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.potential.len(),
            self.potential.iter().map(|p| C64::new(p.1, 0.0)),
        ))
    }

    /// Support block of `g(H0)`: `(1/N) sum_m e^{i k_m (x - y)} g(omega_m)`.
    pub fn spectral_block<F>(&self, mut g: F) -> Result<DMatrix<C64>>
    where
        F: FnMut(f64) -> Result<C64>,
    {
        let s = self.support();
        let mut out = DMatrix::zeros(s.len(), s.len());
        for k in self.lattice_momenta() {
            let gv = g(self.omega(k))?;
            for (i, &x) in s.iter().enumerate() {
                for (j, &y) in s.iter().enumerate() {
                    out[(i, j)] += gv * C64::from_polar(1.0, k * (x as f64 - y as f64));
                }
            }
        }
        Ok(out / C64::new(self.sites as f64, 0.0))
    }

    /// `(z - H0)^{-1}` on the support.
    pub fn green_block(&self, z: C64) -> Result<DMatrix<C64>> {
        self.spectral_block(|w| {
            let d = z - w;
            if d.norm() < 1e-14 {
                return Err(Error::Pole { k: w });
            }
            Ok(1.0 / d)
        })
    }

    /// `|| G0(z) V ||` from the support block of `G0^dag G0`.
    pub fn gamma_at(&self, z: C64) -> Result<f64> {
        let a = self.spectral_block(|w| {
            let d = (z - w).norm_sqr();
            if d < 1e-28 {
                return Err(Error::Pole { k: w });
            }
            Ok(C64::new(1.0 / d, 0.0))
        })?;
        let v = self.v_block();
        Ok(top_singular(&(&v * a * &v)).sqrt())
    }

    fn require_gamma(&self, z: C64) -> Result<f64> {
        let g = self.gamma_at(z)?;
        if !(g < 1.0) {
            return Err(Error::AssumptionViolation(alloc::format!(
                "|G0 V| = {g:.4} must be below 1"
            )));
        }
        Ok(g)
    }
}

fn top_singular(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Trotterized model `U = e^{-i H0 tau} e^{-i V tau}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub model: ContinuousModel,
    pub tau: f64,
}

impl DiscreteModel {
    pub fn new(model: ContinuousModel, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain {
                name: "tau",
                value: tau,
                allowed: "(0, inf)",
            });
        }
        Ok(Self { model, tau })
    }

    /// `G~0(z) = -i tau (e^{-i z tau} - U0)^{-1} U0` on the support.
    pub fn green_tilde_block(&self, z: C64) -> Result<DMatrix<C64>> {
        self.model.spectral_block(|w| green_discrete_multiplier(self.tau, z, w))
    }

    /// `W~ = (i / tau)(e^{-i V tau} - I)` on the support.
    pub fn w_tilde_block(&self) -> DMatrix<C64> {
        let d = w_tilde(self).direct;
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
    }

    /// `|| W~ G~0(z) ||` from the support block of `G~0 G~0^dag`.
    pub fn wg_norm(&self, z: C64) -> Result<f64> {
        let a = self
            .model
            .spectral_block(|w| green_discrete_multiplier(self.tau, z, w).map(|g| C64::new(g.norm_sqr(), 0.0)))?;
        let wt = self.w_tilde_block();
        Ok(top_singular(&(&wt * a * wt.adjoint())).sqrt())
    }

    /// Largest step with `tau (omega_M + delta) < 2 pi`.
    pub fn comb_limit(&self) -> f64 {
        let wm = self.model.omega_max();
        TAU / (wm * (1.0 + COMB_MARGIN))
    }
}

/// `T(c)(z)` on the support by the closed solve, with `z = omega(k) + i eps`.
pub fn t_continuous(model: &ContinuousModel, k: f64, eps: f64) -> Result<TMatrixEval> {
    let z = C64::new(model.omega(k), eps);
    model.require_gamma(z)?;
    closed_from_kernel(&model.v_block(), &model.green_block(z)?, z)
}

/// Born-series evaluation of [`t_continuous`].
pub fn t_continuous_born(model: &ContinuousModel, k: f64, eps: f64, tol: f64, max_n: usize) -> Result<TMatrixEval> {
    let z = C64::new(model.omega(k), eps);
    model.require_gamma(z)?;
    born_from_kernel(&model.v_block(), &model.green_block(z)?, z, tol, max_n)
}

/// `T~(tau)(z) = (I - W~ G~0)^{-1} W~` on the support.
pub fn t_discrete(dm: &DiscreteModel, k: f64, eps: f64) -> Result<TMatrixEval> {
    let z = C64::new(dm.model.omega(k), eps);
    closed_from_kernel(&dm.w_tilde_block(), &dm.green_tilde_block(z)?, z)
}

/// `sum_{x,y in S} e^{-i k' x} B_{xy} e^{i k y}`.
pub fn plane_element(model: &ContinuousModel, block: &DMatrix<C64>, k_out: f64, k_in: f64) -> C64 {
    let s = model.support();
    let mut acc = C64::new(0.0, 0.0);
    for (i, &x) in s.iter().enumerate() {
        for (j, &y) in s.iter().enumerate() {
            acc += C64::from_polar(1.0, k_in * y as f64 - k_out * x as f64) * block[(i, j)];
        }
    }
    acc
}

/// Spectral multiplier `-i tau / (e^{-i (z - omega) tau} - 1)` of `G~0`.
pub fn green_discrete_multiplier(tau: f64, z: C64, omega: f64) -> Result<C64> {
    let den = (-I * (z - omega) * tau).exp() - 1.0;
    if den.norm() < 1e-14 {
        return Err(Error::Pole { k: omega });
    }
    Ok(-I * tau / den)
}

/// Multipliers of `G~0(z)` over the ring spectrum.
pub fn green_discrete(dm: &DiscreteModel, z: C64) -> Result<Vec<C64>> {
    if !(dm.tau < dm.comb_limit()) {
        return Err(Error::Domain {
            name: "tau",
            value: dm.tau,
            allowed: "tau (omega_M + delta) < 2 pi",
        });
    }
    dm.model
        .lattice_momenta()
        .map(|k| green_discrete_multiplier(dm.tau, z, dm.model.omega(k)))
        .collect()
}

/// `f(x) = 1/x - cot x`, odd and holomorphic for `|x| < pi`, `f(0) = 0`.
pub fn f_bernoulli(x: C64) -> C64 {
    if x.norm() < 1e-3 {
        let x2 = x * x;
        return x * (1.0 / 3.0 + x2 * (1.0 / 45.0 + x2 * (2.0 / 945.0)));
    }
    1.0 / x - x.cos() / x.sin()
}

/// Real branch of [`f_bernoulli`] with the domain check.
pub fn f_real(x: f64) -> Result<f64> {
    if !(x.abs() < PI) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            allowed: "|x| < pi",
        });
    }
    Ok(f_bernoulli(C64::new(x, 0.0)).re)
}

/// `G~0 = G0 + i tau / 2 - (tau / 2) F` per spectral point.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliSplit {
    pub tau: f64,
    pub z: C64,
    pub omegas: Vec<f64>,
    pub g0: Vec<C64>,
    pub constant: C64,
    pub f_part: Vec<C64>,
}

impl BernoulliSplit {
    pub fn reconstruct(&self) -> Vec<C64> {
        self.g0
            .iter()
            .zip(&self.f_part)
            .map(|(g, f)| g + self.constant - f * (0.5 * self.tau))
            .collect()
    }

    /// `max |F|` over the grid.
    pub fn f_max(&self) -> f64 {
        self.f_part.iter().map(|f| f.norm()).fold(0.0, f64::max)
    }
}

pub fn bernoulli_split(tau: f64, z: C64, omegas: &[f64]) -> Result<BernoulliSplit> {
    let mut g0 = Vec::with_capacity(omegas.len());
    let mut f_part = Vec::with_capacity(omegas.len());
    for &w in omegas {
        let x = (z - w) * (0.5 * tau);
        if !(x.norm() < PI) {
            return Err(Error::Domain {
                name: "(z - omega) tau / 2",
                value: x.norm(),
                allowed: "|x| < pi",
            });
        }
        if (z - w).norm() < 1e-14 {
            return Err(Error::Pole { k: w });
        }
        g0.push(1.0 / (z - w));
        f_part.push(f_bernoulli(x));
    }
    Ok(BernoulliSplit {
        tau,
        z,
        omegas: omegas.to_vec(),
        g0,
        constant: I * (0.5 * tau),
        f_part,
    })
}

/// Largest `|f|` on `[0, x_max]`, sampled on a uniform grid.
pub fn f_grid_max(x_max: f64, samples: usize) -> Result<f64> {
    let n = samples.max(2);
    let mut best = 0.0f64;
    for i in 0..n {
        let x = x_max * i as f64 / (n - 1) as f64;
        best = best.max(f_real(x)?.abs());
    }
    Ok(best)
}

/// `q(y) = (-i - y + i e^{-iy}) / y^2`, `q(0) = -i/2`.
pub fn q_factor(y: f64) -> C64 {
    if y.abs() < 1e-2 {
        return q_series(y, 8);
    }
    (-I - y + I * C64::new(0.0, -y).exp()) / (y * y)
}

/// Taylor form `sum_{n>=2} i (-i)^n y^{n-2} / n!`, first `terms` terms.
pub fn q_series(y: f64, terms: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    // i (-i)^2 / 2!
    let mut c = I * (-I) * (-I) / 2.0;
    let mut yp = 1.0;
    for n in 2..2 + terms {
        acc += c * yp;
        c *= -I / (n + 1) as f64;
        yp *= y;
    }
    acc
}

/// `W~ = V + tau Q V^2`, by direct exponentiation and by the `q` series.
#[derive(Debug, Clone, PartialEq)]
pub struct WTilde {
    pub sites: Vec<usize>,
    pub direct: Vec<C64>,
    pub v_part: Vec<f64>,
    pub q_part: Vec<C64>,
    pub series: Vec<C64>,
}

impl WTilde {
    pub fn discrepancy(&self) -> f64 {
        self.direct
            .iter()
            .zip(&self.series)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn q_max(&self) -> f64 {
        self.q_part.iter().map(|q| q.norm()).fold(0.0, f64::max)
    }
}

pub fn w_tilde(dm: &DiscreteModel) -> WTilde {
    let tau = dm.tau;
    let mut out = WTilde {
        sites: dm.model.support(),
        direct: Vec::new(),
        v_part: Vec::new(),
        q_part: Vec::new(),
        series: Vec::new(),
    };
    for &(_, v) in &dm.model.potential {
        out.direct.push(I / tau * (C64::new(0.0, -v * tau).exp() - 1.0));
        let y = v * tau;
        // Converges for all y; 40 terms cover |y| < 1 far below 1e-12.
        let q = q_series(y, 40);
        out.v_part.push(v);
        out.q_part.push(q);
        out.series.push(C64::new(v, 0.0) + q * (tau * v * v));
    }
    out
}

/// `m* = min((sqrt(2 - gamma) - 1) / |V|, pi / omega_M)`.
pub fn m_star(gamma: f64, v_norm: f64, omega_max: f64) -> f64 {
    let first = if v_norm > 0.0 {
        ((2.0 - gamma).sqrt() - 1.0) / v_norm
    } else {
        f64::INFINITY
    };
    first.min(PI / omega_max)
}

/// Constants controlling `|W~ G~0|` at a given step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub tau: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub gamma_double_prime: f64,
    pub m_star: f64,
    /// `f(omega_M tau / 2)`.
    pub f_bound: f64,
    pub q_bound: f64,
    /// `gamma + a1 tau |V| + a2 tau^2 |V|^2`.
    pub bound_chain: f64,
    /// `|| W~ G~0 ||` at the probe energy.
    pub measured: f64,
    /// `tau <= m*`, which certifies `|W~ G~0| < 1`.
    pub verdict: bool,
}

pub fn tau_threshold(dm: &DiscreteModel) -> Result<BoundReport> {
    let m = &dm.model;
    let gamma = m.require_gamma(m.energy())?;
    let v = m.v_norm();
    let wm = m.omega_max();
    let tau = dm.tau;
    let f_bound = f_real(0.5 * wm * tau)?;
    let q_bound = 0.5;
    Ok(BoundReport {
        tau,
        gamma,
        gamma_prime: 0.5 * v * (1.0 + f_bound + gamma * q_bound),
        gamma_double_prime: 0.5 * v * v * q_bound * (1.0 + f_bound),
        m_star: m_star(gamma, v, wm),
        f_bound,
        q_bound,
        bound_chain: gamma + A1 * tau * v + A2 * tau * tau * v * v,
        measured: dm.wg_norm(m.energy())?,
        verdict: tau <= m_star(gamma, v, wm),
    })
}

/// On-shell `T~(tau) - T(c)` with the first-order predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct TDifference {
    pub tau: f64,
    pub difference: DMatrix<C64>,
    pub difference_norm: f64,
    /// `<k'| T~ - T |k>`.
    pub element: C64,
    /// `-i tau <k'| T V |k>`.
    pub first_order_prediction: C64,
    /// `tau || T V ||`.
    pub prediction_norm: f64,
    /// `-2 pi i <k'| T~ - T |k>`, the continuous-convention coefficient.
    pub difference_coefficient: C64,
    /// `-2 pi tau <k'| V^2 |k>`.
    pub quadratic_prediction: C64,
    /// `false` when `tau > m*`; the numbers are still computed.
    pub certified: bool,
}

pub fn t_difference(dm: &DiscreteModel, k_out: f64, k_in: f64, eps: f64) -> Result<TDifference> {
    let m = &dm.model;
    let t = t_continuous(m, k_in, eps)?.value;
    let tt = t_discrete(dm, k_in, eps)?.value;
    let diff = &tt - &t;
    let v = m.v_block();
    let tv = &t * &v;
    let gamma = m.gamma_at(C64::new(m.omega(k_in), eps))?;
    let element = plane_element(m, &diff, k_out, k_in);
    Ok(TDifference {
        tau: dm.tau,
        difference_norm: top_singular(&diff),
        element,
        first_order_prediction: -I * dm.tau * plane_element(m, &tv, k_out, k_in),
        prediction_norm: dm.tau * top_singular(&tv),
        difference_coefficient: -I * TAU * element,
        quadratic_prediction: -TAU * dm.tau * plane_element(m, &(&v * &v), k_out, k_in),
        certified: dm.tau <= m_star(gamma, m.v_norm(), m.omega_max()),
        difference: diff,
    })
}

/// Least-squares fit of `log d` against `log tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub slope: f64,
    pub intercept: f64,
    /// `e^{intercept}`, the fitted `c` in `d = c tau^slope`.
    pub prefactor: f64,
    pub points: Vec<(f64, f64)>,
    /// Grid points dropped for lying outside `(0, m*]`.
    pub excluded: Vec<f64>,
}

/// Slope and intercept of a log-log line through `(tau, d)` points.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let valid: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, d)| *t > 0.0 && *d > 0.0 && t.is_finite() && d.is_finite())
        .map(|(t, d)| (t.ln(), d.ln()))
        .collect();
    if valid.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: valid.len(),
        });
    }
    let n = valid.len() as f64;
    let mx = valid.iter().map(|p| p.0).sum::<f64>() / n;
    let my = valid.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = valid.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = valid.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `|| T~(tau) - T(c) ||` over a step grid inside `(0, m*]`, with its log-log slope.
pub fn convergence_sweep(model: &ContinuousModel, taus: &[f64], k: f64, eps: f64) -> Result<SlopeReport> {
    let gamma = model.require_gamma(C64::new(model.omega(k), eps))?;
    let ms = m_star(gamma, model.v_norm(), model.omega_max());
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for &tau in taus {
        if !(tau > 0.0 && tau <= ms * (1.0 + 1e-12)) {
            excluded.push(tau);
            continue;
        }
        let dm = DiscreteModel::new(model.clone(), tau)?;
        let d = t_difference(&dm, k, k, eps)?;
        points.push((tau, d.difference_norm));
    }
    let (slope, intercept) = fit_loglog(&points)?;
    Ok(SlopeReport {
        slope,
        intercept,
        prefactor: intercept.exp(),
        points,
        excluded,
    })
}

/// Secondary comb channels among ring modes at quasi-energies `omega tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombReport {
    pub tau: f64,
    pub limit: f64,
    /// On-shell pairs with comb index `l != 0`.
    pub secondary: Vec<AmplitudeRecord>,
}

impl CombReport {
    pub fn collapsed(&self) -> bool {
        self.secondary.is_empty()
    }
}

pub fn comb_collapse(dm: &DiscreteModel) -> CombReport {
    let m = &dm.model;
    let modes: Vec<(f64, f64)> = m.lattice_momenta().map(|k| (k, m.omega(k) * dm.tau)).collect();
    let mut secondary = Vec::new();
    for &(k, e) in &modes {
        for &(kp, ep) in &modes {
            if let Some(l) = comb_index(e, ep) {
                if l != 0 {
                    secondary.push(AmplitudeRecord {
                        in_channel: ChannelLabel::Single { k, band: Band::Plus },
                        out_channel: ChannelLabel::Single { k: kp, band: Band::Plus },
                        comb_index: l,
                        coefficient: C64::new(0.0, 0.0),
                        convention: Convention::Continuous { tau: dm.tau },
                        error_estimate: 0.0,
                        flagged: false,
                    });
                }
            }
        }
    }
    CombReport {
        tau: dm.tau,
        limit: dm.comb_limit(),
        secondary,
    }
}
