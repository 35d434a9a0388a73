//! Direct wave-packet scattering on a finite ring.
//!
//! Sites are labelled by the coordinate `y = i - L/2`, so the interaction sits
//! in the middle of the buffer and the ring seam is as far from it as possible.
//! A step applies the local phase and then the banded free walk.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use dtscatter_core::lippmann_schwinger::{comb_index, ChannelLabel, OnSitePhase, SiteProfile};
use dtscatter_core::spectral::{wrap_momentum, Band, DiracWalk, Dispersion, SpectralFreeEvolution};
use dtscatter_core::thirring::{pair_energy, pair_vector, pair_velocity, ThirringCom};
use dtscatter_core::C64;
use nalgebra::{DMatrix, DVector};
use rustfft::{Fft, FftPlanner};

/// Sites within this distance of the seam count as boundary leakage.
pub const BOUNDARY_WIDTH: usize = 16;
/// Leakage above this raises the contamination flag.
pub const LEAKAGE_LIMIT: f64 = 1e-6;
/// Largest amplitude allowed in the interaction region before and after the sandwich.
pub const TRAVERSAL_LIMIT: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum WavepacketError {
    #[error("packet geometry: {0}")]
    Geometry(String),
    #[error("packet still overlaps the interaction region (amplitude {amplitude:.3e})")]
    Inconclusive { amplitude: f64 },
    #[error(transparent)]
    Core(#[from] dtscatter_core::Error),
}

pub type Result<T> = std::result::Result<T, WavepacketError>;

/// Amplitudes stored site-major: `amplitudes[i * dim + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub amplitudes: Vec<C64>,
    pub dim: usize,
    pub extent: usize,
}

impl LatticeState {
    pub fn zeros(extent: usize, dim: usize) -> Self {
        Self {
            amplitudes: vec![C64::new(0.0, 0.0); extent * dim],
            dim,
            extent,
        }
    }

    /// Single-site, single-component state at coordinate `y`.
    pub fn localized(extent: usize, dim: usize, y: i64, component: usize) -> Self {
        let mut s = Self::zeros(extent, dim);
        let i = s.index(y);
        s.amplitudes[i * dim + component] = C64::new(1.0, 0.0);
        s
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Buffer index of coordinate `y`, wrapped onto the ring.
    pub fn index(&self, y: i64) -> usize {
        (y + (self.extent / 2) as i64).rem_euclid(self.extent as i64) as usize
    }

    pub fn coordinate(&self, i: usize) -> i64 {
        i as i64 - (self.extent / 2) as i64
    }

    pub fn site_mass(&self, i: usize) -> f64 {
        self.amplitudes[i * self.dim..(i + 1) * self.dim]
            .iter()
            .map(|a| a.norm_sqr())
            .sum()
    }

    /// Probability within [`BOUNDARY_WIDTH`] sites of the seam.
    pub fn boundary_mass(&self) -> f64 {
        let w = BOUNDARY_WIDTH.min(self.extent / 2);
        (0..w).chain(self.extent - w..self.extent).map(|i| self.site_mass(i)).sum()
    }

    /// Lowest and highest occupied coordinates.
    pub fn support(&self, threshold: f64) -> Option<(i64, i64)> {
        let occupied: Vec<i64> = (0..self.extent)
            .filter(|&i| self.site_mass(i) > threshold)
            .map(|i| self.coordinate(i))
            .collect();
        Some((*occupied.iter().min()?, *occupied.iter().max()?))
    }

    /// Largest amplitude within `radius` of any of `sites`.
    pub fn max_amplitude_near(&self, sites: &[i64], radius: i64) -> f64 {
        let mut best = 0.0f64;
        for &s in sites {
            for y in s - radius..=s + radius {
                best = best.max(self.site_mass(self.index(y)).sqrt());
            }
        }
        best
    }

    /// `site,component,re,im` rows.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "site,component,re,im")?;
        for i in 0..self.extent {
            for a in 0..self.dim {
                let z = self.amplitudes[i * self.dim + a];
                writeln!(w, "{},{},{},{}", self.coordinate(i), a, z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// Discrete dynamics on the ring.
#[derive(Debug, Clone, PartialEq)]
pub enum WalkModel {
    /// Dirac walk with an on-site phase `e^{-i chi f(y)}`.
    Single { dispersion: Dispersion, phase: OnSitePhase },
    /// Relative coordinate of two Thirring particles at fixed `p`; phase `e^{i chi}` at `y = 0`.
    ThirringCom { dispersion: Dispersion, p: f64, chi: f64 },
}

impl WalkModel {
    pub fn single_site(nu: f64, chi: f64) -> Result<Self> {
        Ok(Self::Single {
            dispersion: Dispersion::new(nu)?,
            phase: OnSitePhase::single_site(chi, 0),
        })
    }

    pub fn thirring(nu: f64, p: f64, chi: f64) -> Result<Self> {
        dtscatter_core::thirring::check_momentum(p)?;
        Ok(Self::ThirringCom {
            dispersion: Dispersion::new(nu)?,
            p,
            chi,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Single { .. } => 2,
            Self::ThirringCom { .. } => 4,
        }
    }

    pub fn dispersion(&self) -> &Dispersion {
        match self {
            Self::Single { dispersion, .. } | Self::ThirringCom { dispersion, .. } => dispersion,
        }
    }

    /// The same walk with the interaction switched off.
    pub fn free(&self) -> Self {
        match self {
            Self::Single { dispersion, phase } => Self::Single {
                dispersion: *dispersion,
                phase: OnSitePhase {
                    chi: 0.0,
                    profile: phase.profile.clone(),
                },
            },
            Self::ThirringCom { dispersion, p, .. } => Self::ThirringCom {
                dispersion: *dispersion,
                p: *p,
                chi: 0.0,
            },
        }
    }

    pub fn bloch(&self, k: f64) -> DMatrix<C64> {
        match self {
            Self::Single { dispersion, .. } => DiracWalk { dispersion: *dispersion }.bloch(k),
            Self::ThirringCom { dispersion, p, .. } => ThirringCom {
                dispersion: *dispersion,
                p: *p,
            }
            .bloch(k),
        }
    }

    /// `(y, phase)` pairs of the local interaction.
    pub fn phases(&self) -> Vec<(i64, C64)> {
        match self {
            Self::Single { phase, .. } => match &phase.profile {
                SiteProfile::Finite(sites) => sites
                    .iter()
                    .filter(|(_, f)| *f != 0.0 && phase.chi != 0.0)
                    .map(|&(y, f)| (y, C64::from_polar(1.0, -phase.chi * f)))
                    .collect(),
                SiteProfile::Everywhere(f) => vec![(i64::MIN, C64::from_polar(1.0, -phase.chi * f))],
            },
            Self::ThirringCom { chi, .. } if *chi != 0.0 => vec![(0, C64::from_polar(1.0, *chi))],
            Self::ThirringCom { .. } => Vec::new(),
        }
    }

    pub fn interaction_sites(&self) -> Vec<i64> {
        match self {
            Self::Single { phase, .. } => match &phase.profile {
                SiteProfile::Finite(sites) => sites.iter().map(|s| s.0).collect(),
                SiteProfile::Everywhere(_) => Vec::new(),
            },
            Self::ThirringCom { .. } => vec![0],
        }
    }

    /// Band (or band-pair) eigenvector at relative momentum `k`.
    pub fn channel_vector(&self, channel: PacketChannel, k: f64) -> Vec<C64> {
        match (self, channel) {
            (Self::Single { dispersion, .. }, PacketChannel::Band(s)) => {
                let a = dispersion.alpha(s, k);
                vec![C64::new(a[0], 0.0), C64::new(a[1], 0.0)]
            }
            (Self::ThirringCom { dispersion, p, .. }, PacketChannel::Pair { s1, s2 }) => {
                pair_vector(dispersion, *p, k, s1, s2).iter().copied().collect()
            }
            _ => panic!("channel {channel:?} does not belong to this model"),
        }
    }

    pub fn channel_energy(&self, channel: PacketChannel, k: f64) -> f64 {
        match (self, channel) {
            (Self::Single { dispersion, .. }, PacketChannel::Band(s)) => s.sign() * dispersion.omega(k),
            (Self::ThirringCom { dispersion, p, .. }, PacketChannel::Pair { s1, s2 }) => {
                pair_energy(dispersion, *p, k, s1, s2)
            }
            _ => panic!("channel {channel:?} does not belong to this model"),
        }
    }

    pub fn channel_velocity(&self, channel: PacketChannel, k: f64) -> f64 {
        match (self, channel) {
            (Self::Single { dispersion, .. }, PacketChannel::Band(s)) => s.sign() * dispersion.group_velocity(k),
            (Self::ThirringCom { dispersion, p, .. }, PacketChannel::Pair { s1, s2 }) => {
                pair_velocity(dispersion, *p, k, s1, s2)
            }
            _ => panic!("channel {channel:?} does not belong to this model"),
        }
    }

    pub fn channels(&self) -> Vec<PacketChannel> {
        match self {
            Self::Single { .. } => vec![PacketChannel::Band(Band::Plus), PacketChannel::Band(Band::Minus)],
            Self::ThirringCom { .. } => {
                let b = [Band::Plus, Band::Minus];
                b.iter()
                    .flat_map(|&s1| b.iter().map(move |&s2| PacketChannel::Pair { s1, s2 }))
                    .collect()
            }
        }
    }

    fn label(&self, channel: PacketChannel, k: f64) -> ChannelLabel {
        match (self, channel) {
            (Self::ThirringCom { p, .. }, PacketChannel::Pair { s1, s2 }) => ChannelLabel::Pair {
                p: *p,
                k,
                s1: s1.as_i8(),
                s2: s2.as_i8(),
            },
            (_, PacketChannel::Band(band)) => ChannelLabel::Single { k, band },
            (_, c) => panic!("channel {c:?} does not belong to this model"),
        }
    }

    fn check_state(&self, state: &LatticeState) {
        assert_eq!(state.dim, self.dim(), "state and model disagree on the internal dimension");
    }
}

/// Which asymptotic channel a packet is built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketChannel {
    Band(Band),
    /// Antisymmetrised pair `(s1 at p + k, s2 at p - k)`.
    Pair { s1: Band, s2: Band },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacketSpec {
    pub k0: f64,
    pub sigma_x: f64,
    pub x0: i64,
    pub channel: PacketChannel,
}

impl GaussianPacketSpec {
    pub fn validate(&self, extent: usize) -> Result<()> {
        if self.sigma_x.is_nan() || self.sigma_x < 8.0 {
            return Err(WavepacketError::Geometry(format!(
                "sigma_x = {} is below 8 sites",
                self.sigma_x
            )));
        }
        let half = (extent / 2) as f64;
        let reach = self.x0.unsigned_abs() as f64 + 4.0 * self.sigma_x;
        // [L/8, 7L/8] in buffer indices is |y| <= 3L/8.
        if reach > 0.75 * half {
            return Err(WavepacketError::Geometry(format!(
                "packet at {} with width {} leaves [L/8, 7L/8] of a ring of {extent}",
                self.x0, self.sigma_x
            )));
        }
        Ok(())
    }
}

/// `e^{-(y - x0)^2 / 4 sigma^2} e^{i k0 y} u(k0)`, antisymmetrised for pairs, normalized.
pub fn build_packet(model: &WalkModel, spec: &GaussianPacketSpec, extent: usize) -> Result<LatticeState> {
    spec.validate(extent)?;
    let dim = model.dim();
    let mut state = LatticeState::zeros(extent, dim);
    let u = model.channel_vector(spec.channel, spec.k0);
    let envelope = |y: i64| {
        let d = (y - spec.x0) as f64;
        C64::from_polar((-d * d / (4.0 * spec.sigma_x * spec.sigma_x)).exp(), spec.k0 * y as f64)
    };
    for i in 0..extent {
        let y = state.coordinate(i);
        let g = envelope(y);
        for (slot, ua) in state.amplitudes[i * dim..(i + 1) * dim].iter_mut().zip(&u) {
            *slot = g * ua;
        }
    }
    if let PacketChannel::Pair { .. } = spec.channel {
        // Exchange acts as y -> -y together with swapping the two internal factors.
        let direct = state.clone();
        for i in 0..extent {
            let j = state.index(-state.coordinate(i));
            for a in 0..dim {
                let swapped = (a % 2) * 2 + a / 2;
                state.amplitudes[i * dim + a] = direct.amplitudes[i * dim + a] - direct.amplitudes[j * dim + swapped];
            }
        }
    }
    state.normalize();
    Ok(state)
}

/// FFT helper; `k_m = 2 pi m / L` with the `y`-origin phase folded in.
pub struct Spectral {
    extent: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(extent: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            extent,
            forward: planner.plan_fft_forward(extent),
            inverse: planner.plan_fft_inverse(extent),
        }
    }

    pub fn momentum(&self, m: usize) -> f64 {
        wrap_momentum(2.0 * PI * m as f64 / self.extent as f64)
    }

    /// `phi(k_m) = sum_y e^{-i k_m y} psi(y)`, one vector per component.
    pub fn to_momentum(&self, state: &LatticeState) -> Vec<Vec<C64>> {
        let (l, dim) = (self.extent, state.dim);
        (0..dim)
            .map(|a| {
                let mut buf: Vec<C64> = (0..l).map(|i| state.amplitudes[i * dim + a]).collect();
                self.forward.process(&mut buf);
                // buffer index i = y + L/2 contributes e^{-i k (y + L/2)} = (-1)^m e^{-i k y}
                for (m, z) in buf.iter_mut().enumerate() {
                    if l % 2 == 0 && m % 2 == 1 {
                        *z = -*z;
                    }
                }
                buf
            })
            .collect()
    }

    pub fn from_momentum(&self, mom: &[Vec<C64>]) -> LatticeState {
        let (l, dim) = (self.extent, mom.len());
        let mut state = LatticeState::zeros(l, dim);
        for (a, comp) in mom.iter().enumerate() {
            let mut buf = comp.clone();
            for (m, z) in buf.iter_mut().enumerate() {
                if l % 2 == 0 && m % 2 == 1 {
                    *z = -*z;
                }
            }
            self.inverse.process(&mut buf);
            for (i, z) in buf.into_iter().enumerate() {
                state.amplitudes[i * dim + a] = z / l as f64;
            }
        }
        state
    }

    /// `U0^{steps}` (or `U0^{-steps}`) applied diagonally in momentum space.
    pub fn free_evolve(&self, model: &WalkModel, state: &LatticeState, steps: u32, backward: bool) -> LatticeState {
        let mut mom = self.to_momentum(state);
        let dim = state.dim;
        for m in 0..self.extent {
            let mut b = model.bloch(self.momentum(m));
            if backward {
                b = b.adjoint();
            }
            let bp = b.pow(steps);
            let v = DVector::from_iterator(dim, mom.iter().map(|c| c[m]));
            let out = bp * v;
            for a in 0..dim {
                mom[a][m] = out[a];
            }
        }
        self.from_momentum(&mom)
    }

    /// Keep only the `channel` component at every momentum.
    pub fn project(&self, model: &WalkModel, state: &LatticeState, channel: PacketChannel) -> LatticeState {
        let mut mom = self.to_momentum(state);
        for m in 0..self.extent {
            let u = model.channel_vector(channel, self.momentum(m));
            let c: C64 = u.iter().zip(&mom).map(|(ua, comp)| ua.conj() * comp[m]).sum();
            for (comp, ua) in mom.iter_mut().zip(&u) {
                comp[m] = ua * c;
            }
        }
        self.from_momentum(&mom)
    }
}

/// One step: interaction phase, then the free walk.
pub fn step(state: &LatticeState, model: &WalkModel) -> LatticeState {
    model.check_state(state);
    let mut phased = state.clone();
    apply_phase(&mut phased, model);
    let mut out = LatticeState::zeros(state.extent, state.dim);
    free_step(&phased, model, &mut out);
    out
}

fn apply_phase(state: &mut LatticeState, model: &WalkModel) {
    let dim = state.dim;
    for (y, ph) in model.phases() {
        if y == i64::MIN {
            state.amplitudes.iter_mut().for_each(|a| *a *= ph);
            continue;
        }
        let i = state.index(y);
        for a in 0..dim {
            state.amplitudes[i * dim + a] *= ph;
        }
    }
}

fn free_step(src: &LatticeState, model: &WalkModel, dst: &mut LatticeState) {
    let l = src.extent;
    let up = |i: usize| (i + 1) % l;
    let dn = |i: usize| (i + l - 1) % l;
    let d = model.dispersion();
    let (nu, mi) = (d.nu, C64::new(0.0, -d.mu));
    match model {
        WalkModel::Single { .. } => {
            let s = &src.amplitudes;
            for i in 0..l {
                dst.amplitudes[2 * i] = s[2 * up(i)] * nu + s[2 * i + 1] * mi;
                dst.amplitudes[2 * i + 1] = s[2 * dn(i) + 1] * nu + s[2 * i] * mi;
            }
        }
        WalkModel::ThirringCom { p, .. } => {
            let (ep, em) = (C64::from_polar(nu, *p), C64::from_polar(nu, -*p));
            let s = &src.amplitudes;
            // Particle 1 sees M(p + k): shifts y by +1 on its up component.
            let mut mid = vec![C64::new(0.0, 0.0); 4 * l];
            for i in 0..l {
                for b in 0..2 {
                    mid[4 * i + b] = s[4 * up(i) + b] * ep + s[4 * i + 2 + b] * mi;
                    mid[4 * i + 2 + b] = s[4 * dn(i) + 2 + b] * em + s[4 * i + b] * mi;
                }
            }
            // Particle 2 sees M(p - k): the shifts are reversed.
            let o = &mut dst.amplitudes;
            for i in 0..l {
                for a in 0..2 {
                    let (c0, c1) = (4 * i + 2 * a, 4 * i + 2 * a + 1);
                    o[c0] = mid[4 * dn(i) + 2 * a] * ep + mid[c1] * mi;
                    o[c1] = mid[4 * up(i) + 2 * a + 1] * em + mid[c0] * mi;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: LatticeState,
    pub steps: usize,
    /// Largest boundary mass seen along the way.
    pub leakage: f64,
    pub contaminated: bool,
}

pub fn evolve(state: &LatticeState, model: &WalkModel, steps: usize) -> Evolution {
    model.check_state(state);
    let mut cur = state.clone();
    let mut next = LatticeState::zeros(state.extent, state.dim);
    let mut leakage = cur.boundary_mass();
    for _ in 0..steps {
        apply_phase(&mut cur, model);
        free_step(&cur, model, &mut next);
        std::mem::swap(&mut cur, &mut next);
        leakage = leakage.max(cur.boundary_mass());
    }
    Evolution {
        state: cur,
        steps,
        leakage,
        contaminated: leakage > LEAKAGE_LIMIT,
    }
}

/// Steps for the packet centre to clear the interaction by `10 sigma` plus the check radius.
pub fn traversal_steps(model: &WalkModel, spec: &GaussianPacketSpec) -> usize {
    let v = model.channel_velocity(spec.channel, spec.k0).abs();
    let reach = spec.x0.unsigned_abs() as f64 + 10.0 * spec.sigma_x + BOUNDARY_WIDTH as f64;
    (reach / v.max(1e-3)).ceil() as usize
}

/// One measured out-channel overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredBin {
    pub label: ChannelLabel,
    pub comb_index: i64,
    /// `<out packet| S |in packet>`, minus one for the incoming channel itself.
    pub amplitude: C64,
}

#[derive(Debug, Clone)]
pub struct SMatrixMeasurement {
    pub steps: usize,
    pub incoming: LatticeState,
    /// `S |in>` in the free picture.
    pub outgoing: LatticeState,
    pub bins: Vec<MeasuredBin>,
    pub leakage: f64,
    pub contaminated: bool,
}

impl SMatrixMeasurement {
    pub fn bin(&self, label_k: f64) -> Option<&MeasuredBin> {
        self.bins.iter().find(|b| match b.label {
            ChannelLabel::Single { k, .. } | ChannelLabel::Pair { k, .. } => (k - label_k).abs() < 1e-12,
        })
    }
}

/// Band-projected packet used as an asymptote.
pub fn asymptote(model: &WalkModel, spec: &GaussianPacketSpec, extent: usize, fft: &Spectral) -> Result<LatticeState> {
    let raw = build_packet(model, spec, extent)?;
    let mut s = fft.project(model, &raw, spec.channel);
    s.normalize();
    Ok(s)
}

/// `S ~ U0^{-T} U^{2T} U0^{-T}` on the in-asymptote, overlapped with the
/// on-shell out-channels: the incoming one, its mirror at `-k0` (single
/// particle) and the Umklapp partner at `k0 - pi` (pairs).
pub fn extract_smatrix(model: &WalkModel, spec: &GaussianPacketSpec, extent: usize, steps: usize) -> Result<SMatrixMeasurement> {
    let fft = Spectral::new(extent);
    let free = model.free();
    let incoming = asymptote(model, spec, extent, &fft)?;
    let sites = model.interaction_sites();
    let t = u32::try_from(steps).map_err(|_| WavepacketError::Geometry(format!("{steps} steps")))?;
    let early = fft.free_evolve(&free, &incoming, t, true);
    let amplitude = early.max_amplitude_near(&sites, BOUNDARY_WIDTH as i64);
    if amplitude > TRAVERSAL_LIMIT {
        return Err(WavepacketError::Inconclusive { amplitude });
    }
    let run = evolve(&early, model, 2 * steps);
    let amplitude = run.state.max_amplitude_near(&sites, BOUNDARY_WIDTH as i64);
    if amplitude > TRAVERSAL_LIMIT {
        return Err(WavepacketError::Inconclusive { amplitude });
    }
    let outgoing = fft.free_evolve(&free, &run.state, t, true);

    let e_in = model.channel_energy(spec.channel, spec.k0);
    let mut targets = vec![(spec.channel, spec.k0)];
    match spec.channel {
        PacketChannel::Band(b) => targets.push((PacketChannel::Band(b), -spec.k0)),
        PacketChannel::Pair { s1, s2 } => targets.push((
            PacketChannel::Pair {
                s1: s1.flip(),
                s2: s2.flip(),
            },
            wrap_momentum(spec.k0 - PI),
        )),
    }
    let mut bins = Vec::new();
    for (channel, k) in targets {
        let e_out = model.channel_energy(channel, k);
        let Some(l) = comb_index(e_in, e_out) else { continue };
        let target = asymptote(model, &GaussianPacketSpec { k0: k, channel, ..*spec }, extent, &fft)?;
        let mut amplitude = target.inner(&outgoing);
        if channel == spec.channel && k == spec.k0 {
            amplitude -= 1.0;
        }
        bins.push(MeasuredBin {
            label: model.label(channel, k),
            comb_index: l,
            amplitude,
        });
    }
    Ok(SMatrixMeasurement {
        steps,
        incoming,
        outgoing,
        bins,
        leakage: run.leakage,
        contaminated: run.contaminated,
    })
}

/// Forward / backward probabilities by the sign of each band's group velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionReport {
    pub transmission: f64,
    pub reflection: f64,
    /// Weight at zero velocity plus any norm deficit.
    pub leakage: f64,
}

pub fn transmission_reflection(model: &WalkModel, out_state: &LatticeState, incoming: PacketChannel, k0: f64) -> TransmissionReport {
    let fft = Spectral::new(out_state.extent);
    let mom = fft.to_momentum(out_state);
    let dir = model.channel_velocity(incoming, k0).signum();
    let l = out_state.extent as f64;
    let (mut fwd, mut bwd) = (0.0, 0.0);
    for m in 0..out_state.extent {
        let k = fft.momentum(m);
        for ch in model.channels() {
            let u = model.channel_vector(ch, k);
            let c: C64 = u.iter().zip(&mom).map(|(ua, comp)| ua.conj() * comp[m]).sum();
            let w = c.norm_sqr() / l;
            let v = model.channel_velocity(ch, k);
            if v * dir > 0.0 {
                fwd += w;
            } else if v * dir < 0.0 {
                bwd += w;
            }
        }
    }
    TransmissionReport {
        transmission: fwd,
        reflection: bwd,
        leakage: 1.0 - fwd - bwd,
    }
}
