//! Dirac-walk dispersion, Bloch matrices, free resolvents and Brillouin-zone
//! quadrature.
//!
//! Plane waves are `<x|k> = e^{ikx}`. With this convention one free step acts
//! in real space as
//!
//! ```text
//! (U0 psi)_up(x) = nu psi_up(x+1) - i mu psi_dn(x)
//! (U0 psi)_dn(x) = nu psi_dn(x-1) - i mu psi_up(x)
//! ```
//!
//! and in momentum space as the Bloch matrix `[[nu e^{ik}, -i mu], [-i mu, nu e^{-ik}]]`.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix2, Vector2};
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, C64};

/// Default number of Brillouin-zone nodes.
pub const DEFAULT_NODES: usize = 2048;

/// Map a quasi-momentum into `(-pi, pi]`.
pub fn wrap_momentum(k: f64) -> f64 {
    let mut r = k % TAU;
    if r < 0.0 {
        r += TAU;
    }
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wrap an angle (quasi-energy) into `(-pi, pi]`.
pub fn wrap_phase(w: f64) -> f64 {
    wrap_momentum(w)
}

/// Band index of the two-band walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Plus,
    Minus,
}

impl Band {
    pub fn sign(self) -> f64 {
        match self {
            Band::Plus => 1.0,
            Band::Minus => -1.0,
        }
    }

    pub fn from_sign(s: i8) -> Self {
        if s >= 0 {
            Band::Plus
        } else {
            Band::Minus
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Band::Plus => 1,
            Band::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Band::Plus => Band::Minus,
            Band::Minus => Band::Plus,
        }
    }
}

/// `omega(k) = arccos(nu cos k)` together with the mass `mu = sqrt(1 - nu^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub nu: f64,
    pub mu: f64,
}

pub fn make_dispersion(nu: f64) -> Result<Dispersion> {
    Dispersion::new(nu)
}

impl Dispersion {
    pub fn new(nu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::Domain {
                name: "nu",
                value: nu,
                allowed: "[0, 1]",
            });
        }
        Ok(Self {
            nu,
            mu: (1.0 - nu * nu).max(0.0).sqrt(),
        })
    }

    /// Principal branch, range `[0, pi]`.
    pub fn omega(&self, k: f64) -> f64 {
        (self.nu * k.cos()).clamp(-1.0, 1.0).acos()
    }

    /// `d omega / dk`. At `nu = 1` this is `sign(sin k)`.
    pub fn group_velocity(&self, k: f64) -> f64 {
        let s = self.omega(k).sin();
        let num = self.nu * k.sin();
        if s > 1e-300 {
            num / s
        } else if num == 0.0 {
            0.0
        } else {
            num.signum()
        }
    }

    /// Largest `|d omega / dk|` over the zone, which equals `nu`.
    pub fn max_group_velocity(&self) -> f64 {
        self.nu
    }

    /// `g_s(k) = s sin omega(k) + nu sin k`.
    pub fn g(&self, band: Band, k: f64) -> f64 {
        band.sign() * self.omega(k).sin() + self.nu * k.sin()
    }

    /// Components `(alpha_{s,up}, alpha_{s,dn})` of the normalised eigenvector.
    pub fn alpha(&self, band: Band, k: f64) -> [f64; 2] {
        let k = wrap_momentum(k);
        if self.mu == 0.0 {
            // Diagonal walk: the up component carries e^{ik}, which is the
            // minus band for k >= 0.
            let up_is_plus = k < 0.0;
            return match (band, up_is_plus) {
                (Band::Plus, true) | (Band::Minus, false) => [1.0, 0.0],
                _ => [0.0, 1.0],
            };
        }
        let g = self.g(band, k);
        let n = (self.mu * self.mu + g * g).sqrt();
        [self.mu / n, g / n]
    }
}

/// Single-step walk operator at fixed quasi-momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochMatrix {
    pub k: f64,
    pub entries: Matrix2<C64>,
}

impl BlochMatrix {
    pub fn unitarity_residual(&self) -> f64 {
        (self.entries.adjoint() * self.entries - Matrix2::identity()).norm()
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn determinant(&self) -> C64 {
        self.entries.determinant()
    }
}

pub fn dirac_walk_matrix(d: &Dispersion, k: f64) -> BlochMatrix {
    let k = wrap_momentum(k);
    let mi = C64::new(0.0, -d.mu);
    BlochMatrix {
        k,
        entries: Matrix2::new(
            C64::from_polar(d.nu, k),
            mi,
            mi,
            C64::from_polar(d.nu, -k),
        ),
    }
}

/// Eigenmode of the Bloch matrix with eigenvalue `e^{-i energy}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMode {
    pub k: f64,
    pub band: Band,
    pub energy: f64,
    pub vector: Vector2<C64>,
}

impl SpectralMode {
    pub fn eigenvalue(&self) -> C64 {
        C64::from_polar(1.0, -self.energy)
    }
}

pub fn spectral_mode(d: &Dispersion, k: f64, band: Band) -> SpectralMode {
    let k = wrap_momentum(k);
    let [a, b] = d.alpha(band, k);
    SpectralMode {
        k,
        band,
        energy: band.sign() * d.omega(k),
        vector: Vector2::new(C64::new(a, 0.0), C64::new(b, 0.0)),
    }
}

/// Both modes at `k`, plus band first.
pub fn dirac_eigensystem(d: &Dispersion, k: f64) -> (SpectralMode, SpectralMode) {
    (
        spectral_mode(d, k, Band::Plus),
        spectral_mode(d, k, Band::Minus),
    )
}

/// A translation-invariant free step with a finite internal space.
pub trait SpectralFreeEvolution: Sync {
    fn internal_dim(&self) -> usize;

    /// Momentum-space single-step unitary.
    fn bloch(&self, k: f64) -> DMatrix<C64>;

    /// Upper bound on the group velocity of every band.
    fn max_group_velocity(&self) -> f64;
}

/// The one-particle Dirac walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracWalk {
    pub dispersion: Dispersion,
}

impl DiracWalk {
    pub fn new(nu: f64) -> Result<Self> {
        Ok(Self {
            dispersion: Dispersion::new(nu)?,
        })
    }
}

impl SpectralFreeEvolution for DiracWalk {
    fn internal_dim(&self) -> usize {
        2
    }

    fn bloch(&self, k: f64) -> DMatrix<C64> {
        let m = dirac_walk_matrix(&self.dispersion, k).entries;
        DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
    }

    fn max_group_velocity(&self) -> f64 {
        self.dispersion.max_group_velocity()
    }
}

/// `G0(z) = (z - U0)^{-1}`, acting mode by mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeResolvent {
    pub z: C64,
}

impl FreeResolvent {
    pub fn multiplier(&self, mode: &SpectralMode) -> C64 {
        (self.z - mode.eigenvalue()).inv()
    }

    /// Multiplier of `G0(z) U0`, i.e. `1 / (z e^{i E} - 1)`.
    pub fn multiplier_times_step(&self, mode: &SpectralMode) -> C64 {
        (self.z * C64::from_polar(1.0, mode.energy) - 1.0).inv()
    }
}

/// Build the free resolvent, rejecting `z` that sits on the spectrum at a grid node.
pub fn resolvent_free(d: &Dispersion, z: C64, n: usize) -> Result<FreeResolvent> {
    for k in bz_nodes(n) {
        for band in [Band::Plus, Band::Minus] {
            let e = C64::from_polar(1.0, -band.sign() * d.omega(k));
            if (z - e).norm() < 1e-14 {
                return Err(Error::Pole { k });
            }
        }
    }
    Ok(FreeResolvent { z })
}

/// Midpoint nodes of a uniform periodic grid on `(-pi, pi]`.
pub fn bz_nodes(n: usize) -> impl Iterator<Item = f64> + Clone {
    let h = TAU / n as f64;
    (0..n).map(move |j| -PI + h * (j as f64 + 0.5))
}

/// `int dk/(2 pi) f(k)` by the periodic trapezoid rule.
pub fn quadrature_bz<F>(mut integrand: F, n: usize) -> Result<DMatrix<C64>>
where
    F: FnMut(f64) -> DMatrix<C64>,
{
    if n < 16 {
        return Err(Error::Domain {
            name: "n",
            value: n as f64,
            allowed: "n >= 16",
        });
    }
    let mut acc: Option<DMatrix<C64>> = None;
    for (j, k) in bz_nodes(n).enumerate() {
        let v = integrand(k);
        if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Quadrature { node: j, k });
        }
        match acc.as_mut() {
            Some(a) => *a += v,
            None => acc = Some(v),
        }
    }
    let mut acc = acc.unwrap_or_else(|| DMatrix::zeros(0, 0));
    acc /= C64::new(n as f64, 0.0);
    Ok(acc)
}

/// Scalar convenience wrapper around [`quadrature_bz`].
pub fn quadrature_bz_scalar<F>(mut integrand: F, n: usize) -> Result<C64>
where
    F: FnMut(f64) -> C64,
{
    let m = quadrature_bz(|k| DMatrix::from_element(1, 1, integrand(k)), n)?;
    Ok(m[(0, 0)])
}

/// Real-space propagator table `K(x, d)` of the Dirac walk for `d = 0..=depth`.
///
/// `K(x, d) = int dk/2pi e^{ikx} M(k)^d`, built by iterating the local update,
/// so that `M(k)^d = sum_x K(x, d) e^{-ikx}`. Row `d` holds sites `-d..=d`.
pub fn walk_kernel_table(d: &Dispersion, depth: usize) -> Vec<Vec<Matrix2<C64>>> {
    let mut rows: Vec<Vec<Matrix2<C64>>> = Vec::with_capacity(depth + 1);
    rows.push(alloc::vec![Matrix2::identity()]);
    let nu = C64::new(d.nu, 0.0);
    let mi = C64::new(0.0, -d.mu);
    for t in 1..=depth {
        let prev = &rows[t - 1];
        let width = 2 * t + 1;
        let mut next = alloc::vec![Matrix2::zeros(); width];
        let get = |x: i64| -> Option<&Matrix2<C64>> {
            let i = x + (t as i64 - 1);
            if i < 0 || i as usize >= prev.len() {
                None
            } else {
                Some(&prev[i as usize])
            }
        };
        for (i, slot) in next.iter_mut().enumerate() {
            let x = i as i64 - t as i64;
            let mut m = Matrix2::zeros();
            if let Some(p) = get(x + 1) {
                for c in 0..2 {
                    m[(0, c)] += nu * p[(0, c)];
                }
            }
            if let Some(p) = get(x - 1) {
                for c in 0..2 {
                    m[(1, c)] += nu * p[(1, c)];
                }
            }
            if let Some(p) = get(x) {
                for c in 0..2 {
                    m[(0, c)] += mi * p[(1, c)];
                    m[(1, c)] += mi * p[(0, c)];
                }
            }
            *slot = m;
        }
        rows.push(next);
    }
    rows
}
