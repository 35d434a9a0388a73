//! Two-particle sector of the Thirring automaton in centre-of-mass coordinates.
//!
//! Two fermions on the Dirac walk interact through an on-site phase `e^{i chi}`
//! applied when they share a site. At fixed total quasi-momentum `2p` the
//! relative coordinate `y = x1 - x2` evolves as one particle in a point
//! potential with a four-dimensional internal space, ordered
//! `(up up, up dn, dn up, dn dn)`. The free relative step is
//! `M(p + k) (x) M(p - k)` in momentum space and `W = lambda |0><0| (x) I4` with
//! `lambda = e^{i chi} - 1`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
#[allow(unused_imports)]
use num_traits::Float;

use crate::lippmann_schwinger::{
    default_eps_schedule, epsilon_extrapolate, kernel_block, AmplitudeRecord, ChannelLabel,
    Convention, FiniteRankInteraction,
};
use crate::spectral::{
    bz_nodes, dirac_walk_matrix, wrap_momentum, wrap_phase, Band, Dispersion, SpectralFreeEvolution,
};
use crate::{Error, Result, C64};

/// Scan resolution for root enumeration.
pub const ROOT_SCAN_NODES: usize = 2048;

/// Coupling and walk parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThirringParams {
    pub dispersion: Dispersion,
    pub chi: f64,
    pub lambda: C64,
}

impl ThirringParams {
    pub fn new(nu: f64, chi: f64) -> Result<Self> {
        let dispersion = Dispersion::new(nu)?;
        if !(chi > -PI && chi <= PI) {
            return Err(Error::Domain {
                name: "chi",
                value: chi,
                allowed: "(-pi, pi]",
            });
        }
        Ok(Self {
            dispersion,
            chi,
            lambda: C64::from_polar(1.0, chi) - 1.0,
        })
    }

    fn require_massive(&self) -> Result<()> {
        if self.dispersion.nu >= 1.0 {
            return Err(Error::Domain {
                name: "nu",
                value: self.dispersion.nu,
                allowed: "[0, 1)",
            });
        }
        Ok(())
    }
}

/// `(k1, k2) -> (p, k)` with `k1 = p + k`, `k2 = p - k`.
pub fn com_transform(k1: f64, k2: f64) -> (f64, f64) {
    let (k1, k2) = (wrap_momentum(k1), wrap_momentum(k2));
    (0.5 * (k1 + k2), 0.5 * (k1 - k2))
}

pub fn com_inverse(p: f64, k: f64) -> (f64, f64) {
    (wrap_momentum(p + k), wrap_momentum(p - k))
}

/// Reject `p` on the excluded set `n pi / 2`.
pub fn check_momentum(p: f64) -> Result<()> {
    let r = p / FRAC_PI_2;
    if (r - r.round()).abs() < 1e-9 {
        return Err(Error::DegenerateMomentum { p });
    }
    Ok(())
}

/// A two-particle channel `(p, k, s1, s2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThirringChannel {
    pub p: f64,
    pub k: f64,
    pub s1: Band,
    pub s2: Band,
    pub omega: f64,
}

/// `s1 omega(p + k) + s2 omega(p - k)`.
pub fn pair_energy(d: &Dispersion, p: f64, k: f64, s1: Band, s2: Band) -> f64 {
    s1.sign() * d.omega(p + k) + s2.sign() * d.omega(p - k)
}

/// `d/dk` of [`pair_energy`].
pub fn pair_velocity(d: &Dispersion, p: f64, k: f64, s1: Band, s2: Band) -> f64 {
    s1.sign() * d.group_velocity(p + k) - s2.sign() * d.group_velocity(p - k)
}

pub fn channel(params: &ThirringParams, p: f64, k: f64, s1: Band, s2: Band) -> Result<ThirringChannel> {
    check_momentum(p)?;
    Ok(ThirringChannel {
        p,
        k,
        s1,
        s2,
        omega: pair_energy(&params.dispersion, p, k, s1, s2),
    })
}

impl ThirringChannel {
    pub fn label(&self) -> ChannelLabel {
        ChannelLabel::Pair {
            p: self.p,
            k: self.k,
            s1: self.s1.as_i8(),
            s2: self.s2.as_i8(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XYFactors {
    pub x: f64,
    pub y: f64,
}

impl XYFactors {
    /// First-order coefficient `(y - x) / (2 (x + y))`.
    pub fn first_order(&self) -> f64 {
        0.5 * (self.y - self.x) / (self.x + self.y)
    }

    /// `<w|Gamma|w> / <w|w>` on the antisymmetric direction, `-x / (x + y)`.
    pub fn gamma_eigenvalue(&self) -> f64 {
        -self.x / (self.x + self.y)
    }

    /// `d omega^{++} / dk = 2 (y^2 - x^2)`.
    pub fn velocity(&self) -> f64 {
        2.0 * (self.y * self.y - self.x * self.x)
    }
}

/// `x = alpha_{+,up}(p+k) alpha_{+,dn}(p-k)`, `y = alpha_{+,dn}(p+k) alpha_{+,up}(p-k)`.
pub fn xy_factors(params: &ThirringParams, p: f64, k: f64) -> Result<XYFactors> {
    params.require_massive()?;
    check_momentum(p)?;
    let d = &params.dispersion;
    let a = d.alpha(Band::Plus, p + k);
    let b = d.alpha(Band::Plus, p - k);
    Ok(XYFactors {
        x: a[0] * b[1],
        y: a[1] * b[0],
    })
}

/// `u_{s1}(p+k) (x) u_{s2}(p-k)`.
pub fn pair_vector(d: &Dispersion, p: f64, k: f64, s1: Band, s2: Band) -> Vector4<C64> {
    let a = d.alpha(s1, p + k);
    let b = d.alpha(s2, p - k);
    Vector4::new(
        C64::new(a[0] * b[0], 0.0),
        C64::new(a[0] * b[1], 0.0),
        C64::new(a[1] * b[0], 0.0),
        C64::new(a[1] * b[1], 0.0),
    )
}

/// Antisymmetrised pair state `(u1 (x) u2 - u2 (x) u1) / sqrt 2`.
pub fn w_vector(d: &Dispersion, p: f64, k: f64, s1: Band, s2: Band) -> Vector4<C64> {
    let a = d.alpha(s1, p + k);
    let b = d.alpha(s2, p - k);
    let c = (a[0] * b[1] - b[0] * a[1]) * FRAC_1_SQRT_2;
    // equal-spin entries cancel identically
    Vector4::new(C64::new(0.0, 0.0), C64::new(c, 0.0), C64::new(-c, 0.0), C64::new(0.0, 0.0))
}

/// Free relative-coordinate walk at fixed `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThirringCom {
    pub dispersion: Dispersion,
    pub p: f64,
}

fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

impl ThirringCom {
    pub fn bloch4(&self, k: f64) -> Matrix4<C64> {
        let a = dirac_walk_matrix(&self.dispersion, self.p + k).entries;
        let b = dirac_walk_matrix(&self.dispersion, self.p - k).entries;
        kron2(&a, &b)
    }
}

impl SpectralFreeEvolution for ThirringCom {
    fn internal_dim(&self) -> usize {
        4
    }

    fn bloch(&self, k: f64) -> DMatrix<C64> {
        let m = self.bloch4(k);
        DMatrix::from_fn(4, 4, |i, j| m[(i, j)])
    }

    fn max_group_velocity(&self) -> f64 {
        2.0 * self.dispersion.max_group_velocity()
    }
}

/// `W = lambda |0><0| (x) I4` in the relative coordinate.
pub fn contact_interaction(params: &ThirringParams) -> FiniteRankInteraction {
    FiniteRankInteraction {
        sites: alloc::vec![0],
        internal_dim: 4,
        block: DMatrix::from_diagonal_element(4, 4, params.lambda),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMethod {
    Residue,
    Quadrature,
}

/// `Gamma(z) = int dk/2pi (z M(p+k)^dag (x) M(p-k)^dag - I)^{-1}` in the limit
/// `z -> e^{-i omega}` from outside the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMatrix {
    pub z: C64,
    pub block: Matrix4<C64>,
    pub method: GammaMethod,
}

/// A root `(k, s, s')` of `e^{-i omega} = e^{-i omega^{ss'}_{p,k}}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellRoot {
    pub k: f64,
    pub s1: Band,
    pub s2: Band,
    pub velocity: f64,
    pub selected: bool,
}

/// Every root on the zone, with the `sin 2k` selection applied.
pub fn enumerate_roots(d: &Dispersion, p: f64, omega: f64) -> Result<Vec<ShellRoot>> {
    let omega = wrap_phase(omega);
    let mut roots = Vec::new();
    let h = TAU / ROOT_SCAN_NODES as f64;
    for s1 in [Band::Plus, Band::Minus] {
        for s2 in [Band::Plus, Band::Minus] {
            let f = |k: f64| wrap_phase(omega - pair_energy(d, p, k, s1, s2));
            let mut push = |k: f64| {
                let k = wrap_momentum(k);
                if roots
                    .iter()
                    .any(|r: &ShellRoot| r.s1 == s1 && r.s2 == s2 && wrap_momentum(r.k - k).abs() < 1e-9)
                {
                    return;
                }
                let sel = if omega >= 0.0 {
                    (2.0 * k).sin() >= 0.0
                } else {
                    (2.0 * k).sin() < 0.0
                };
                roots.push(ShellRoot {
                    k,
                    s1,
                    s2,
                    velocity: pair_velocity(d, p, k, s1, s2),
                    selected: sel,
                });
            };
            let mut ka = -PI;
            let mut fa = f(ka);
            for j in 1..=ROOT_SCAN_NODES {
                let kb = -PI + h * j as f64;
                let fb = f(kb);
                if fa == 0.0 {
                    push(ka);
                } else if fa * fb < 0.0 && (fa - fb).abs() < PI {
                    let (mut lo, mut hi, mut flo) = (ka, kb, fa);
                    while hi - lo > 1e-13 {
                        let mid = 0.5 * (lo + hi);
                        let fm = f(mid);
                        if fm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if (flo < 0.0) == (fm < 0.0) {
                            lo = mid;
                            flo = fm;
                        } else {
                            hi = mid;
                        }
                    }
                    push(0.5 * (lo + hi));
                }
                ka = kb;
                fa = fb;
            }
        }
    }
    if roots.is_empty() {
        return Err(Error::RootEnumeration {
            s1: 0,
            s2: 0,
            omega,
        });
    }
    Ok(roots)
}

/// The diagonal remainder of the residue evaluation.
pub fn remainder_matrix(p: f64, omega: f64) -> Matrix4<C64> {
    let omega = wrap_phase(omega);
    let one = C64::new(1.0, 0.0);
    let hp = omega + 2.0 * p;
    let hm = omega - 2.0 * p;
    Matrix4::from_diagonal(&Vector4::new(
        (C64::from_polar(1.0, -hp) - one).inv(),
        C64::new(0.0, 0.0),
        -one,
        (C64::from_polar(1.0, -hm) - one).inv(),
    ))
}

pub fn gamma_residue(d: &Dispersion, p: f64, omega: f64) -> Result<GammaMatrix> {
    check_momentum(p)?;
    let roots = enumerate_roots(d, p, omega)?;
    let mut block = remainder_matrix(p, omega);
    for r in roots.iter().filter(|r| r.selected) {
        if r.velocity.abs() < 1e-8 {
            return Err(Error::StationaryPoint {
                k: r.k,
                slope: r.velocity,
            });
        }
        let v = pair_vector(d, p, r.k, r.s1, r.s2);
        block += v * v.transpose() / C64::new(r.velocity, 0.0);
    }
    Ok(GammaMatrix {
        z: C64::from_polar(1.0, -omega),
        block,
        method: GammaMethod::Residue,
    })
}

/// Regularised zone integral at `z = e^{-i omega + eps}`, extrapolated to `eps = 0`.
pub fn gamma_quadrature(d: &Dispersion, p: f64, omega: f64, eps_schedule: &[f64]) -> Result<GammaMatrix> {
    check_momentum(p)?;
    let walk = ThirringCom { dispersion: *d, p };
    let mut samples: Vec<Matrix4<C64>> = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let z = C64::from_polar(eps.exp(), -omega);
        let k = kernel_block(&walk, &[0], z)?;
        samples.push(Matrix4::from_fn(|i, j| k[(i, j)]));
    }
    let mut block = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let v: Vec<C64> = samples.iter().map(|m| m[(i, j)]).collect();
            block[(i, j)] = epsilon_extrapolate(&v, eps_schedule)?.value;
        }
    }
    Ok(GammaMatrix {
        z: C64::from_polar(1.0, -omega),
        block,
        method: GammaMethod::Quadrature,
    })
}

/// Gamma at the on-shell point `e^{-i omega_target}`. Independent of `chi`.
pub fn gamma_matrix(params: &ThirringParams, p: f64, omega_target: f64, method: GammaMethod) -> Result<GammaMatrix> {
    match method {
        GammaMethod::Residue => gamma_residue(&params.dispersion, p, omega_target),
        GammaMethod::Quadrature => gamma_quadrature(&params.dispersion, p, omega_target, &default_eps_schedule()),
    }
}

/// Closed-form T on `span(up dn, dn up)` at the `++` shell point.
pub fn t_closed_thirring(params: &ThirringParams, p: f64, k: f64) -> Result<Matrix2<C64>> {
    let XYFactors { x, y } = xy_factors(params, p, k)?;
    let l = params.lambda;
    let l1 = l + 1.0;
    let den = l1 * l1 * x * x - y * y;
    if den.norm() < 1e-12 {
        return Err(Error::ResonancePole {
            denominator: den.norm(),
        });
    }
    let diag = l1 * x * x - y * y;
    let off = -l * x * y;
    Ok(Matrix2::new(diag, off, off, diag) * (l / den))
}

fn check_pp_branch(k: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2).contains(&k) {
        return Err(Error::Domain {
            name: "k",
            value: k,
            allowed: "[0, pi/2]",
        });
    }
    Ok(())
}

/// Closed-form `++ -> ++` coefficient `lambda (y - x) / (2 ((lambda + 1) x + y))`.
pub fn amplitude_pp_value(params: &ThirringParams, p: f64, k: f64) -> Result<C64> {
    check_pp_branch(k)?;
    let XYFactors { x, y } = xy_factors(params, p, k)?;
    if y == x {
        // The antisymmetric pair state vanishes.
        return Ok(C64::new(0.0, 0.0));
    }
    let l = params.lambda;
    let den = (l + 1.0) * x + y;
    if den.norm() < 1e-12 {
        return Err(Error::ResonancePole {
            denominator: den.norm(),
        });
    }
    Ok(l * (y - x) / (den * 2.0))
}

fn pair_record(out: ThirringChannel, inc: ThirringChannel, c: C64) -> AmplitudeRecord {
    AmplitudeRecord {
        in_channel: inc.label(),
        out_channel: out.label(),
        comb_index: ((out.omega - inc.omega) / TAU).round() as i64,
        coefficient: c,
        convention: Convention::Discrete,
        error_estimate: 0.0,
        flagged: false,
    }
}

/// `<Psi^{++}_{p,k}| S - I |Psi^{++}_{p,k'}>` stripped of `delta(k - k')`.
pub fn amplitude_pp(params: &ThirringParams, p: f64, k: f64) -> Result<AmplitudeRecord> {
    let c = amplitude_pp_value(params, p, k)?;
    let ch = channel(params, p, k, Band::Plus, Band::Plus)?;
    Ok(pair_record(ch, ch, c))
}

/// The `++ -> ++`, `++ -> --` (Umklapp, `k -> k - pi`) and `-- -> --` coefficients.
pub fn umklapp_amplitudes(params: &ThirringParams, p: f64, k: f64) -> Result<[AmplitudeRecord; 3]> {
    let c = amplitude_pp_value(params, p, k)?;
    let pp = channel(params, p, k, Band::Plus, Band::Plus)?;
    let mm = channel(params, p, k - PI, Band::Minus, Band::Minus)?;
    Ok([
        pair_record(pp, pp, c),
        pair_record(mm, pp, -c),
        pair_record(mm, mm, c),
    ])
}

/// `<w_out| T |w_in> / (d omega / dk)` with `T = lambda (I - lambda Gamma)^{-1}`
/// built from a residue Gamma, for arbitrary pair channels on the same shell.
pub fn amplitude_from_gamma(
    params: &ThirringParams,
    gamma: &Matrix4<C64>,
    out: &ThirringChannel,
    inc: &ThirringChannel,
) -> Result<C64> {
    let d = &params.dispersion;
    let l = params.lambda;
    let a = Matrix4::<C64>::identity() - gamma * l;
    let t = a
        .try_inverse()
        .ok_or(Error::SingularKernel { condition: f64::INFINITY })?
        * l;
    let wo = w_vector(d, out.p, out.k, out.s1, out.s2);
    let wi = w_vector(d, inc.p, inc.k, inc.s1, inc.s2);
    let v = pair_velocity(d, inc.p, inc.k, inc.s1, inc.s2);
    Ok((wo.adjoint() * t * wi)[(0, 0)] / v)
}

/// Partial sums of the Born series for a pair amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct BornTrace {
    /// `lambda^{n+1} <w|Gamma^n|w'> / (d omega / dk)`.
    pub terms: Vec<C64>,
    /// Running sums of `terms`.
    pub partial_sums: Vec<C64>,
    /// `|term_{n+1} / term_n|` for the last pair of terms.
    pub ratio: f64,
}

/// Born series `sum_n lambda^{n+1} <w_out|Gamma^n|w_in>` on the `++` shell of `(p, k)`,
/// normalised by the pair group velocity.
pub fn born_series_thirring(params: &ThirringParams, p: f64, k: f64, n_max: usize) -> Result<BornTrace> {
    born_series_between(
        params,
        &channel(params, p, k, Band::Plus, Band::Plus)?,
        &channel(params, p, k, Band::Plus, Band::Plus)?,
        n_max,
    )
}

pub fn born_series_between(
    params: &ThirringParams,
    out: &ThirringChannel,
    inc: &ThirringChannel,
    n_max: usize,
) -> Result<BornTrace> {
    params.require_massive()?;
    if n_max < 1 {
        return Err(Error::Domain {
            name: "n_max",
            value: n_max as f64,
            allowed: "n_max >= 1",
        });
    }
    let d = &params.dispersion;
    // Fermion pairs live in the exchange-antisymmetric line; iterating the full
    // block lets roundoff seed the symmetric sector, whose eigenvalues can be large.
    let a = Vector4::new(
        C64::new(0.0, 0.0),
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::new(-FRAC_1_SQRT_2, 0.0),
        C64::new(0.0, 0.0),
    );
    let proj = a * a.adjoint();
    let gamma = proj * gamma_residue(d, inc.p, inc.omega)?.block * proj;
    let wo = w_vector(d, out.p, out.k, out.s1, out.s2);
    let mut v = w_vector(d, inc.p, inc.k, inc.s1, inc.s2);
    let vel = pair_velocity(d, inc.p, inc.k, inc.s1, inc.s2);
    let mut lp = params.lambda;
    let mut terms = Vec::with_capacity(n_max + 1);
    let mut partial_sums = Vec::with_capacity(n_max + 1);
    let mut acc = C64::new(0.0, 0.0);
    for _ in 0..=n_max {
        let t = lp * (wo.adjoint() * v)[(0, 0)] / vel;
        acc += t;
        terms.push(t);
        partial_sums.push(acc);
        v = gamma * v;
        lp *= params.lambda;
    }
    let n = terms.len();
    let ratio = if terms[n - 2].norm() > 0.0 {
        terms[n - 1].norm() / terms[n - 2].norm()
    } else {
        0.0
    };
    Ok(BornTrace {
        terms,
        partial_sums,
        ratio,
    })
}

/// Predicted geometric ratio `|lambda x / (x + y)|` of the `++` Born series.
pub fn born_ratio(params: &ThirringParams, p: f64, k: f64) -> Result<f64> {
    let f = xy_factors(params, p, k)?;
    Ok((params.lambda * f.gamma_eigenvalue()).norm())
}

/// Pair quasi-energies on the zone grid, used to check shell reachability.
pub fn pair_band_range(d: &Dispersion, p: f64, s1: Band, s2: Band) -> (f64, f64) {
    bz_nodes(ROOT_SCAN_NODES).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
        let e = pair_energy(d, p, k, s1, s2);
        (lo.min(e), hi.max(e))
    })
}
