//! Correlated Ricean delay-Doppler channel generation for a fluid-antenna
//! receiver fed by a multi-element satellite transmitter.
//!
//! A frame is a tensor over (port, transmit element, Doppler bin, delay bin).
//! The LoS path sits at delay bin 0 and Doppler bin `los_doppler_bin`; every
//! scattered path occupies its own bin with delay bin >= 1, so each occupied
//! bin carries exactly one rotating phasor and frame energy is invariant in
//! the frame index.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::bessel::bessel_j0;
use crate::error::{bail, Result};
use crate::linalg::{cholesky, CMatrix, ZERO};

/// RNG stream used for scatterer draws.
const SCATTERER_STREAM: u64 = 1;

/// Seeded generator for one purpose; different streams are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fluid-antenna port geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FasGeometry {
    pub n_ports: usize,
    /// Port spacing in wavelengths.
    pub spacing_over_lambda: f64,
    /// Elevation angle of arrival, radians.
    pub elevation_rad: f64,
    /// Diagonal loading added before the Cholesky factorisation.
    pub loading_eps: f64,
}

impl FasGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.n_ports < 1 {
            bail!(Config, "n_ports must be >= 1");
        }
        if !(self.spacing_over_lambda > 0.0) || !self.spacing_over_lambda.is_finite() {
            bail!(Config, "spacing_over_lambda must be positive");
        }
        if !(0.0..=PI / 2.0).contains(&self.elevation_rad) {
            bail!(Config, "elevation_rad must lie in [0, pi/2]");
        }
        if !(self.loading_eps > 0.0) || !self.loading_eps.is_finite() {
            bail!(Config, "loading_eps must be positive");
        }
        Ok(())
    }
}

/// Delay-Doppler grid and frame timing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_tx: usize,
    pub n_doppler: usize,
    pub n_delay: usize,
    pub frame_duration_s: f64,
    /// Physical Doppler per integer Doppler bin, Hz.
    pub doppler_res_hz: f64,
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tx < 1 || self.n_doppler < 1 || self.n_delay < 1 {
            bail!(Config, "grid counts must be >= 1");
        }
        if !(self.frame_duration_s > 0.0) || !self.frame_duration_s.is_finite() {
            bail!(Config, "frame_duration_s must be positive");
        }
        if !(self.doppler_res_hz > 0.0) || !self.doppler_res_hz.is_finite() {
            bail!(Config, "doppler_res_hz must be positive");
        }
        Ok(())
    }

    /// Number of delay-Doppler bins, `n_delay * n_doppler`.
    pub fn n_bins(&self) -> usize {
        self.n_delay * self.n_doppler
    }

    /// Doppler resolution that makes the median Doppler bin complete one
    /// phase rotation every `frames_per_rotation` frames.
    pub fn median_bin_doppler_res(n_doppler: usize, frame_duration_s: f64, frames_per_rotation: f64) -> f64 {
        let median_bin = (n_doppler.max(2) - 1) as f64 / 2.0;
        1.0 / (frames_per_rotation * median_bin * frame_duration_s)
    }
}

/// One scattered path.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredPath {
    pub delay_bin: usize,
    pub doppler_bin: usize,
    pub power: f64,
    /// Receive-side spatial vector, one entry per port.
    pub rx_vector: Vec<Complex64>,
    /// Per-transmit-element gains.
    pub tx_gains: Vec<Complex64>,
}

/// LoS parameters plus the scattered paths of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererSet {
    pub rice_kappa: f64,
    pub los_doppler_bin: usize,
    pub paths: Vec<ScatteredPath>,
}

/// Transmit gain of the beamformed LoS path (isotropic elements).
pub const LOS_TX_GAIN: f64 = 1.0;

/// Real FAS correlation matrix together with its loaded Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub entries: CMatrix,
    /// Lower-triangular `L` with `L L^H = entries + eps I`.
    pub sqrt_factor: CMatrix,
}

impl CorrelationMatrix {
    /// LoS receive signature `b_n`: first column of the Cholesky factor.
    pub fn los_signature(&self) -> Vec<Complex64> {
        self.sqrt_factor.column(0)
    }
}

/// How port variation is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GenerationMode {
    /// Per-path receive vectors `L z_p` across ports.
    Correlated,
    /// Reference-port (port 0) coefficients replicated with the plane-wave
    /// phase ramp, so ports differ only by a deterministic phase.
    #[default]
    PhaseRamp,
}

/// Shape of a channel tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorShape {
    pub n_ports: usize,
    pub n_tx: usize,
    pub n_doppler: usize,
    pub n_delay: usize,
}

impl TensorShape {
    pub fn new(geom: &FasGeometry, cfg: &GridConfig) -> Self {
        TensorShape {
            n_ports: geom.n_ports,
            n_tx: cfg.n_tx,
            n_doppler: cfg.n_doppler,
            n_delay: cfg.n_delay,
        }
    }

    pub fn len(&self) -> usize {
        self.n_ports * self.port_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in one port slice.
    pub fn port_len(&self) -> usize {
        self.n_tx * self.n_doppler * self.n_delay
    }

    #[inline]
    pub fn index(&self, port: usize, tx: usize, doppler: usize, delay: usize) -> usize {
        ((port * self.n_tx + tx) * self.n_doppler + doppler) * self.n_delay + delay
    }
}

/// One frame of the delay-Doppler channel, laid out (port, tx, Doppler, delay)
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub shape: TensorShape,
    pub data: Vec<Complex64>,
    pub frame_index: usize,
}

impl ChannelTensor {
    pub fn zeros(shape: TensorShape, frame_index: usize) -> Self {
        ChannelTensor {
            shape,
            data: vec![ZERO; shape.len()],
            frame_index,
        }
    }

    pub fn from_vec(shape: TensorShape, data: Vec<Complex64>, frame_index: usize) -> Result<Self> {
        if data.len() != shape.len() {
            bail!(Argument, "tensor data length {} != {}", data.len(), shape.len());
        }
        Ok(ChannelTensor {
            shape,
            data,
            frame_index,
        })
    }

    #[inline]
    pub fn get(&self, port: usize, tx: usize, doppler: usize, delay: usize) -> Complex64 {
        self.data[self.shape.index(port, tx, doppler, delay)]
    }

    pub fn port_slice(&self, port: usize) -> &[Complex64] {
        let n = self.shape.port_len();
        &self.data[port * n..(port + 1) * n]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn port_energy(&self, port: usize) -> f64 {
        self.port_slice(port).iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Bessel-law spatial correlation between ports and its loaded square root.
pub fn build_fas_correlation(geom: &FasGeometry) -> Result<CorrelationMatrix> {
    geom.validate()?;
    let n = geom.n_ports;
    let arg = 2.0 * PI * geom.spacing_over_lambda * libm::sin(geom.elevation_rad);
    // Entries depend only on |n - n'|.
    let mut lags = Vec::with_capacity(n);
    for lag in 0..n {
        lags.push(bessel_j0(arg * lag as f64)?);
    }
    let entries = CMatrix::from_fn(n, n, |i, j| Complex64::new(lags[i.abs_diff(j)], 0.0));
    let mut loaded = entries.clone();
    for i in 0..n {
        loaded[(i, i)] += geom.loading_eps;
    }
    let sqrt_factor = cholesky(&loaded)?;
    Ok(CorrelationMatrix { entries, sqrt_factor })
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = libm::sqrt(variance / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Draws the LoS Doppler bin and `n_paths` scattered paths on distinct bins.
///
/// Scattered paths avoid delay bin 0, which is reserved for the LoS tap.
/// Powers are exponential draws normalised to sum to one. Receive vectors
/// have `n_ports` entries of variance 1/2; transmit gains have variance 1/2.
pub fn draw_scatterers(
    cfg: &GridConfig,
    n_ports: usize,
    n_paths: usize,
    kappa: f64,
    seed: u64,
) -> Result<ScattererSet> {
    cfg.validate()?;
    if !(kappa >= 0.0) || !kappa.is_finite() {
        bail!(Config, "rice kappa must be finite and >= 0");
    }
    let available = (cfg.n_delay - 1) * cfg.n_doppler;
    if n_paths > available {
        bail!(
            Config,
            "cannot place {} scattered paths on {} distinct non-LoS bins",
            n_paths,
            available
        );
    }
    let mut rng = stream_rng(seed, SCATTERER_STREAM);
    let los_doppler_bin = rng.random_range(0..cfg.n_doppler);

    let mut occupied = vec![false; cfg.n_bins()];
    let mut paths = Vec::with_capacity(n_paths);
    let mut raw_power = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let (delay_bin, doppler_bin) = loop {
            let d = rng.random_range(1..cfg.n_delay);
            let n = rng.random_range(0..cfg.n_doppler);
            if !occupied[d * cfg.n_doppler + n] {
                occupied[d * cfg.n_doppler + n] = true;
                break (d, n);
            }
        };
        let power: f64 = Exp1.sample(&mut rng);
        raw_power.push(power.max(f64::MIN_POSITIVE));
        let rx_vector = (0..n_ports).map(|_| complex_gaussian(&mut rng, 0.5)).collect();
        let tx_gains = (0..cfg.n_tx).map(|_| complex_gaussian(&mut rng, 0.5)).collect();
        paths.push(ScatteredPath {
            delay_bin,
            doppler_bin,
            power: 0.0,
            rx_vector,
            tx_gains,
        });
    }
    let total: f64 = raw_power.iter().sum();
    for (p, raw) in paths.iter_mut().zip(raw_power) {
        p.power = raw / total;
    }
    Ok(ScattererSet {
        rice_kappa: kappa,
        los_doppler_bin,
        paths,
    })
}

fn doppler_phasor(bin: usize, q: usize, cfg: &GridConfig) -> Complex64 {
    // Reduce cycles mod 1 before scaling by 2 pi to keep precision at large q.
    let cycles = bin as f64 * cfg.doppler_res_hz * cfg.frame_duration_s * q as f64;
    let frac = cycles - libm::floor(cycles);
    let (s, c) = libm::sincos(2.0 * PI * frac);
    Complex64::new(c, s)
}

/// Per-port plane-wave phase progression `exp(-j 2 pi n (d/lambda) sin(theta))`.
pub fn port_phasors(geom: &FasGeometry) -> Vec<Complex64> {
    let step = 2.0 * PI * geom.spacing_over_lambda * libm::sin(geom.elevation_rad);
    (0..geom.n_ports)
        .map(|n| {
            let (s, c) = libm::sincos(-step * n as f64);
            Complex64::new(c, s)
        })
        .collect()
}

fn check_consistency(
    geom: &FasGeometry,
    cfg: &GridConfig,
    scat: &ScattererSet,
    corr: &CorrelationMatrix,
) -> Result<()> {
    geom.validate()?;
    cfg.validate()?;
    if corr.sqrt_factor.rows() != geom.n_ports || corr.sqrt_factor.cols() != geom.n_ports {
        bail!(Argument, "correlation factor does not match port count");
    }
    if scat.los_doppler_bin >= cfg.n_doppler {
        bail!(Argument, "LoS Doppler bin outside grid");
    }
    if !(scat.rice_kappa >= 0.0) {
        bail!(Argument, "rice kappa must be >= 0");
    }
    for (i, p) in scat.paths.iter().enumerate() {
        if p.delay_bin >= cfg.n_delay || p.doppler_bin >= cfg.n_doppler {
            bail!(Argument, "path {} lies outside the grid", i);
        }
        if p.rx_vector.len() != geom.n_ports || p.tx_gains.len() != cfg.n_tx {
            bail!(Argument, "path {} spatial vectors have wrong length", i);
        }
        if !(p.power > 0.0) {
            bail!(Argument, "path {} power must be positive", i);
        }
    }
    Ok(())
}

/// Generates frame `q`.
pub fn generate_frame(
    q: usize,
    geom: &FasGeometry,
    cfg: &GridConfig,
    scat: &ScattererSet,
    corr: &CorrelationMatrix,
    mode: GenerationMode,
) -> Result<ChannelTensor> {
    check_consistency(geom, cfg, scat, corr)?;
    let shape = TensorShape::new(geom, cfg);
    let mut h = ChannelTensor::zeros(shape, q);
    let kappa = scat.rice_kappa;
    let los_amp = if kappa.is_infinite() {
        1.0
    } else {
        libm::sqrt(kappa / (kappa + 1.0))
    };
    let nlos_amp = libm::sqrt(1.0 / (kappa + 1.0));
    let l = &corr.sqrt_factor;

    // Receive-side coefficient of each contribution per port.
    let rx_los: Vec<Complex64> = match mode {
        GenerationMode::Correlated => corr.los_signature(),
        GenerationMode::PhaseRamp => {
            let b_ref = l[(0, 0)];
            port_phasors(geom).into_iter().map(|phi| b_ref * phi).collect()
        }
    };
    let ramp = port_phasors(geom);

    let los_rot = doppler_phasor(scat.los_doppler_bin, q, cfg) * (los_amp * LOS_TX_GAIN);
    for (port, b) in rx_los.iter().enumerate() {
        let v = los_rot * b;
        for tx in 0..cfg.n_tx {
            let idx = shape.index(port, tx, scat.los_doppler_bin, 0);
            h.data[idx] += v;
        }
    }

    for path in &scat.paths {
        let rot = doppler_phasor(path.doppler_bin, q, cfg) * (nlos_amp * libm::sqrt(path.power));
        let rx: Vec<Complex64> = match mode {
            GenerationMode::Correlated => (0..geom.n_ports)
                .map(|n| (0..=n).map(|k| l[(n, k)] * path.rx_vector[k]).sum())
                .collect(),
            GenerationMode::PhaseRamp => {
                let reference = l[(0, 0)] * path.rx_vector[0];
                ramp.iter().map(|phi| reference * phi).collect()
            }
        };
        for (port, r) in rx.iter().enumerate() {
            let v = rot * r;
            for (tx, g) in path.tx_gains.iter().enumerate() {
                let idx = shape.index(port, tx, path.doppler_bin, path.delay_bin);
                h.data[idx] += v * g;
            }
        }
    }
    Ok(h)
}

/// Full simulation parameters for a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceParams {
    pub geometry: FasGeometry,
    pub grid: GridConfig,
    pub n_paths: usize,
    pub rice_kappa: f64,
    pub mode: GenerationMode,
}

/// One scatterer draw plus everything needed to render any frame of it.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceGenerator {
    pub params: SequenceParams,
    pub correlation: CorrelationMatrix,
    pub scatterers: ScattererSet,
}

impl SequenceGenerator {
    pub fn new(params: &SequenceParams, seed: u64) -> Result<Self> {
        let correlation = build_fas_correlation(&params.geometry)?;
        let scatterers = draw_scatterers(
            &params.grid,
            params.geometry.n_ports,
            params.n_paths,
            params.rice_kappa,
            seed,
        )?;
        Ok(SequenceGenerator {
            params: params.clone(),
            correlation,
            scatterers,
        })
    }

    pub fn frame(&self, q: usize) -> Result<ChannelTensor> {
        let p = &self.params;
        generate_frame(q, &p.geometry, &p.grid, &self.scatterers, &self.correlation, p.mode)
    }
}

/// Frames `0..n_frames` from one scatterer draw.
pub fn generate_sequence(n_frames: usize, params: &SequenceParams, seed: u64) -> Result<Vec<ChannelTensor>> {
    if n_frames < 1 {
        bail!(Argument, "n_frames must be >= 1");
    }
    let generator = SequenceGenerator::new(params, seed)?;
    (0..n_frames).map(|q| generator.frame(q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n_ports: usize, theta: f64) -> FasGeometry {
        FasGeometry {
            n_ports,
            spacing_over_lambda: 0.1,
            elevation_rad: theta,
            loading_eps: 1e-6,
        }
    }

    fn grid() -> GridConfig {
        GridConfig {
            n_tx: 3,
            n_doppler: 4,
            n_delay: 5,
            frame_duration_s: 1e-3,
            doppler_res_hz: 25.0,
        }
    }

    #[test]
    fn correlation_diagonal_is_one() {
        let c = build_fas_correlation(&geom(6, 0.7)).unwrap();
        for i in 0..6 {
            assert_eq!(c.entries[(i, i)].re, 1.0);
        }
    }

    #[test]
    fn broadside_elevation_gives_all_ones() {
        let c = build_fas_correlation(&geom(4, 0.0)).unwrap();
        assert!(c.entries.as_slice().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn two_port_off_diagonal() {
        let c = build_fas_correlation(&geom(2, PI / 2.0)).unwrap();
        assert!((c.entries[(0, 1)].re - 0.903_712_642_1).abs() < 1e-9);
    }

    #[test]
    fn tiny_loading_on_singular_matrix_fails() {
        let mut g = geom(4, 0.0);
        g.loading_eps = 1e-300;
        assert!(matches!(build_fas_correlation(&g), Err(crate::Error::Numerical(_))));
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(geom(0, 0.1).validate().is_err());
        assert!(geom(2, 2.0).validate().is_err());
        let mut g = geom(2, 0.1);
        g.spacing_over_lambda = 0.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn no_paths_means_los_only() {
        let s = draw_scatterers(&grid(), 4, 0, 3.0, 9).unwrap();
        assert!(s.paths.is_empty());
        assert!(s.los_doppler_bin < 4);
    }

    #[test]
    fn powers_normalised_and_bins_distinct() {
        let s = draw_scatterers(&grid(), 4, 10, 3.0, 9).unwrap();
        let total: f64 = s.paths.iter().map(|p| p.power).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut bins: Vec<_> = s.paths.iter().map(|p| (p.delay_bin, p.doppler_bin)).collect();
        bins.sort();
        bins.dedup();
        assert_eq!(bins.len(), 10);
        assert!(s.paths.iter().all(|p| p.delay_bin >= 1));
    }

    #[test]
    fn too_many_paths_is_a_config_error() {
        let g = grid();
        assert!(draw_scatterers(&g, 2, (g.n_delay - 1) * g.n_doppler, 1.0, 0).is_ok());
        assert!(matches!(
            draw_scatterers(&g, 2, g.n_bins(), 1.0, 0),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn draws_are_deterministic() {
        let a = draw_scatterers(&grid(), 4, 6, 1.0, 1234).unwrap();
        let b = draw_scatterers(&grid(), 4, 6, 1.0, 1234).unwrap();
        assert_eq!(a, b);
        let c = draw_scatterers(&grid(), 4, 6, 1.0, 1235).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn los_limit_puts_energy_in_los_bin() {
        let g = geom(5, 0.6);
        let cfg = grid();
        let corr = build_fas_correlation(&g).unwrap();
        let mut scat = draw_scatterers(&cfg, 5, 0, 1e12, 3).unwrap();
        scat.los_doppler_bin = 2;
        let h = generate_frame(7, &g, &cfg, &scat, &corr, GenerationMode::Correlated).unwrap();
        let b = corr.los_signature();
        for port in 0..5 {
            for tx in 0..cfg.n_tx {
                let v = h.get(port, tx, 2, 0).norm_sqr();
                let want = b[port].norm_sqr();
                assert!((v - want).abs() <= 1e-6 * want);
            }
            let total = h.port_energy(port);
            let los: f64 = (0..cfg.n_tx).map(|tx| h.get(port, tx, 2, 0).norm_sqr()).sum();
            assert_eq!(total, los);
        }
    }

    #[test]
    fn successive_frames_only_rotate() {
        let g = geom(3, 0.4);
        let cfg = grid();
        let corr = build_fas_correlation(&g).unwrap();
        let scat = draw_scatterers(&cfg, 3, 8, 2.0, 77).unwrap();
        for mode in [GenerationMode::Correlated, GenerationMode::PhaseRamp] {
            let a = generate_frame(4, &g, &cfg, &scat, &corr, mode).unwrap();
            let b = generate_frame(5, &g, &cfg, &scat, &corr, mode).unwrap();
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x.norm() - y.norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_ramp_at_broadside_has_identical_ports() {
        let g = geom(4, 0.0);
        let cfg = grid();
        let corr = build_fas_correlation(&g).unwrap();
        let scat = draw_scatterers(&cfg, 4, 5, 1.0, 5).unwrap();
        let h = generate_frame(3, &g, &cfg, &scat, &corr, GenerationMode::PhaseRamp).unwrap();
        for port in 1..4 {
            assert_eq!(h.port_slice(port), h.port_slice(0));
        }
    }

    #[test]
    fn phase_ramp_ports_are_ramped_copies() {
        let g = geom(6, 0.9);
        let cfg = grid();
        let corr = build_fas_correlation(&g).unwrap();
        let scat = draw_scatterers(&cfg, 6, 7, 4.0, 11).unwrap();
        let h = generate_frame(13, &g, &cfg, &scat, &corr, GenerationMode::PhaseRamp).unwrap();
        let ramp = port_phasors(&g);
        for (port, phi) in ramp.iter().enumerate() {
            for (a, r) in h.port_slice(port).iter().zip(h.port_slice(0)) {
                assert!((a - r * phi).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn inconsistent_scatterers_rejected() {
        let g = geom(3, 0.4);
        let cfg = grid();
        let corr = build_fas_correlation(&g).unwrap();
        let mut scat = draw_scatterers(&cfg, 3, 2, 2.0, 1).unwrap();
        scat.paths[0].delay_bin = cfg.n_delay;
        assert!(generate_frame(0, &g, &cfg, &scat, &corr, GenerationMode::Correlated).is_err());
    }

    #[test]
    fn single_frame_sequence_matches_generate_frame() {
        let params = SequenceParams {
            geometry: geom(3, 0.4),
            grid: grid(),
            n_paths: 4,
            rice_kappa: 5.0,
            mode: GenerationMode::Correlated,
        };
        let seq = generate_sequence(1, &params, 42).unwrap();
        let corr = build_fas_correlation(&params.geometry).unwrap();
        let scat = draw_scatterers(&params.grid, 3, 4, 5.0, 42).unwrap();
        let f0 = generate_frame(0, &params.geometry, &params.grid, &scat, &corr, params.mode).unwrap();
        assert_eq!(seq, vec![f0]);
        assert!(generate_sequence(0, &params, 42).is_err());
    }

    #[test]
    fn sequence_energy_is_constant() {
        let params = SequenceParams {
            geometry: geom(4, 0.3),
            grid: grid(),
            n_paths: 9,
            rice_kappa: 1.5,
            mode: GenerationMode::Correlated,
        };
        let seq = generate_sequence(40, &params, 8).unwrap();
        let e0 = seq[0].energy();
        for f in &seq {
            assert!((f.energy() - e0).abs() <= 1e-9 * e0);
        }
        assert_eq!(seq, generate_sequence(40, &params, 8).unwrap());
    }

    #[test]
    fn median_bin_doppler_res_gives_requested_period() {
        let res = GridConfig::median_bin_doppler_res(32, 1e-3, 35.0);
        let cycles_per_frame = 15.5 * res * 1e-3;
        assert!((1.0 / cycles_per_frame - 35.0).abs() < 1e-9);
    }
}
