//! Reference-port selection, separable PCA compression and the three-step
//! reconstruction back to a full port tensor.
//!
//! Layout conventions:
//! * a reference matrix is `n_tx x (n_delay * n_doppler)` with column
//!   `delay * n_doppler + doppler`;
//! * a code matrix is vectorised column-major, `vec[j * r_s + i] = C[i, j]`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::{port_phasors, ChannelTensor, FasGeometry, GridConfig, TensorShape};
use crate::error::{bail, Result};
use crate::linalg::{hermitian_eigen, CMatrix, ZERO};

/// Relative slack on the energy threshold so that rounding in the
/// eigenvalue sums cannot push the rank past the numerical rank.
const THRESHOLD_SLACK: f64 = 1e-12;

/// Default retained-energy fraction.
pub const DEFAULT_ENERGY_THRESHOLD: f64 = 0.90;

/// Reference-port channel of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RefMatrix {
    pub data: CMatrix,
    pub frame_index: usize,
}

/// Column of bin `(delay, doppler)` in a reference matrix.
#[inline]
pub fn bin_column(delay: usize, doppler: usize, n_doppler: usize) -> usize {
    delay * n_doppler + doppler
}

/// Copies port `port` of `tensor` into a reference matrix.
pub fn extract_reference(tensor: &ChannelTensor, port: usize) -> Result<RefMatrix> {
    let s = tensor.shape;
    if port >= s.n_ports {
        bail!(Argument, "port {} out of range ({} ports)", port, s.n_ports);
    }
    let mut data = CMatrix::zeros(s.n_tx, s.n_delay * s.n_doppler);
    for tx in 0..s.n_tx {
        for doppler in 0..s.n_doppler {
            for delay in 0..s.n_delay {
                data[(tx, bin_column(delay, doppler, s.n_doppler))] = tensor.get(port, tx, doppler, delay);
            }
        }
    }
    Ok(RefMatrix {
        data,
        frame_index: tensor.frame_index,
    })
}

/// Running per-port energy totals for reference-port selection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PortEnergy {
    shape: Option<TensorShape>,
    totals: Vec<f64>,
}

impl PortEnergy {
    pub fn add(&mut self, frame: &ChannelTensor) -> Result<()> {
        match self.shape {
            None => {
                self.shape = Some(frame.shape);
                self.totals = vec![0.0; frame.shape.n_ports];
            }
            Some(s) if s != frame.shape => bail!(Argument, "training frames have inconsistent shapes"),
            Some(_) => {}
        }
        for (port, e) in self.totals.iter_mut().enumerate() {
            *e += frame.port_energy(port);
        }
        Ok(())
    }

    /// Port with the highest total; lowest index wins ties.
    pub fn best(&self) -> Result<usize> {
        if self.shape.is_none() {
            bail!(Argument, "reference-port selection needs at least one frame");
        }
        let mut best = 0;
        for port in 1..self.totals.len() {
            if self.totals[port] > self.totals[best] {
                best = port;
            }
        }
        Ok(best)
    }
}

/// Port with the highest mean energy over `train`; lowest index wins ties.
pub fn select_reference_port(train: &[ChannelTensor]) -> Result<usize> {
    let mut acc = PortEnergy::default();
    for frame in train {
        acc.add(frame)?;
    }
    acc.best()
}

/// Truncated spatial and delay-Doppler eigenbases.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    /// `n_tx x r_s`, orthonormal columns.
    pub a_s: CMatrix,
    /// `n_bins x r_d`, orthonormal columns.
    pub a_d: CMatrix,
    /// All eigenvalues of the spatial covariance, descending.
    pub eig_s: Vec<f64>,
    /// All eigenvalues of the delay-Doppler covariance, descending.
    pub eig_d: Vec<f64>,
    pub energy_threshold: f64,
}

impl PcaBasis {
    pub fn r_s(&self) -> usize {
        self.a_s.cols()
    }

    pub fn r_d(&self) -> usize {
        self.a_d.cols()
    }

    pub fn n_tx(&self) -> usize {
        self.a_s.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.a_d.rows()
    }

    pub fn code_len(&self) -> usize {
        self.r_s() * self.r_d()
    }

    pub fn retained_ratio_s(&self) -> f64 {
        retained_ratio(&self.eig_s, self.r_s())
    }

    pub fn retained_ratio_d(&self) -> f64 {
        retained_ratio(&self.eig_d, self.r_d())
    }
}

fn retained_ratio(eig: &[f64], r: usize) -> f64 {
    let total: f64 = eig.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    eig[..r].iter().sum::<f64>() / total
}

/// Smallest `r` whose leading eigenvalues reach `threshold` of the total.
pub fn rank_for_threshold(eig_desc: &[f64], threshold: f64) -> Result<usize> {
    let total: f64 = eig_desc.iter().sum();
    if !(total > 0.0) {
        bail!(UndefinedReference, "covariance has zero total energy");
    }
    let target = threshold * total * (1.0 - THRESHOLD_SLACK);
    let mut cum = 0.0;
    for (i, v) in eig_desc.iter().enumerate() {
        cum += v;
        if cum >= target {
            return Ok(i + 1);
        }
    }
    Ok(eig_desc.len())
}

/// Eigen-decomposition of a PSD covariance that is only known on `support`
/// (all rows/columns outside it are exactly zero). Returns the full
/// descending eigenvalue list of length `dim` and the leading eigenvectors
/// embedded into `dim`-space, as many as `support.len()`.
fn supported_eigen(reduced: &CMatrix, support: &[usize], dim: usize) -> Result<(Vec<f64>, CMatrix)> {
    let eig = hermitian_eigen(reduced)?;
    let mut values: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    values.resize(dim, 0.0);
    let k = support.len();
    let mut vectors = CMatrix::zeros(dim, k);
    for (ri, &row) in support.iter().enumerate() {
        for c in 0..k {
            vectors[(row, c)] = eig.vectors[(ri, c)];
        }
    }
    Ok((values, vectors))
}

fn leading_columns(m: &CMatrix, r: usize) -> CMatrix {
    CMatrix::from_fn(m.rows(), r, |i, j| m[(i, j)])
}

/// Fits the separable PCA basis on reference matrices.
///
/// `R_s = mean(H H^H)` and `R_d = mean(H^H H)`. Bins that carry no energy
/// in any training frame have identically zero rows and columns in `R_d`;
/// those contribute zero eigenvalues and are excluded from the dense
/// eigensolve.
pub fn fit_pca(train_refs: &[RefMatrix], threshold: f64) -> Result<PcaBasis> {
    let first = match train_refs.first() {
        Some(f) => &f.data,
        None => bail!(Argument, "PCA fit needs at least one training frame"),
    };
    if !(threshold > 0.0 && threshold <= 1.0) {
        bail!(Argument, "energy threshold must lie in (0, 1], got {}", threshold);
    }
    let (n_tx, n_bins) = (first.rows(), first.cols());
    if train_refs
        .iter()
        .any(|r| r.data.rows() != n_tx || r.data.cols() != n_bins)
    {
        bail!(Argument, "training reference matrices have inconsistent shapes");
    }
    let inv_n = 1.0 / train_refs.len() as f64;

    // Support of both covariances from their diagonals.
    let mut row_energy = vec![0.0; n_tx];
    let mut col_energy = vec![0.0; n_bins];
    for r in train_refs {
        for i in 0..n_tx {
            for (j, v) in r.data.row(i).iter().enumerate() {
                let e = v.norm_sqr();
                row_energy[i] += e;
                col_energy[j] += e;
            }
        }
    }
    let row_support: Vec<usize> = (0..n_tx).filter(|&i| row_energy[i] > 0.0).collect();
    let col_support: Vec<usize> = (0..n_bins).filter(|&j| col_energy[j] > 0.0).collect();
    if col_support.is_empty() {
        bail!(UndefinedReference, "training set has zero energy");
    }

    let mut r_s = CMatrix::zeros(row_support.len(), row_support.len());
    let mut r_d = CMatrix::zeros(col_support.len(), col_support.len());
    for r in train_refs {
        let sub = CMatrix::from_fn(row_support.len(), col_support.len(), |i, j| {
            r.data[(row_support[i], col_support[j])]
        });
        r_s.add_assign(&sub.mul_adjoint(&sub)?)?;
        r_d.add_assign(&sub.adjoint_mul(&sub)?)?;
    }
    r_s.scale(inv_n);
    r_d.scale(inv_n);

    let (eig_s, vec_s) = supported_eigen(&r_s, &row_support, n_tx)?;
    let (eig_d, vec_d) = supported_eigen(&r_d, &col_support, n_bins)?;
    let rank_s = rank_for_threshold(&eig_s, threshold)?.min(row_support.len());
    let rank_d = rank_for_threshold(&eig_d, threshold)?.min(col_support.len());

    Ok(PcaBasis {
        a_s: leading_columns(&vec_s, rank_s),
        a_d: leading_columns(&vec_d, rank_d),
        eig_s,
        eig_d,
        energy_threshold: threshold,
    })
}

/// Compressed coefficients of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Code {
    pub matrix: CMatrix,
    pub frame_index: usize,
}

impl Code {
    /// Column-major vectorisation.
    pub fn vec(&self) -> Vec<Complex64> {
        let (r, c) = (self.matrix.rows(), self.matrix.cols());
        let mut out = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                out.push(self.matrix[(i, j)]);
            }
        }
        out
    }

    /// Inverse of [`Code::vec`].
    pub fn from_vec(v: &[Complex64], r_s: usize, r_d: usize, frame_index: usize) -> Result<Code> {
        if v.len() != r_s * r_d {
            bail!(Argument, "code vector length {} != {}x{}", v.len(), r_s, r_d);
        }
        let matrix = CMatrix::from_fn(r_s, r_d, |i, j| v[j * r_s + i]);
        Ok(Code { matrix, frame_index })
    }
}

/// `C = A_s^H H_ref A_d`.
pub fn compress(reference: &RefMatrix, basis: &PcaBasis) -> Result<Code> {
    if reference.data.rows() != basis.n_tx() || reference.data.cols() != basis.n_bins() {
        bail!(
            Argument,
            "reference matrix {}x{} does not match basis {}x{}",
            reference.data.rows(),
            reference.data.cols(),
            basis.n_tx(),
            basis.n_bins()
        );
    }
    let left = basis.a_s.adjoint_mul(&reference.data)?;
    let matrix = left.matmul(&basis.a_d)?;
    Ok(Code {
        matrix,
        frame_index: reference.frame_index,
    })
}

/// `H_ref = A_s C A_d^H`.
pub fn reconstruct_ref(code: &Code, basis: &PcaBasis) -> Result<RefMatrix> {
    if code.matrix.rows() != basis.r_s() || code.matrix.cols() != basis.r_d() {
        bail!(
            Argument,
            "code {}x{} does not match basis ranks {}x{}",
            code.matrix.rows(),
            code.matrix.cols(),
            basis.r_s(),
            basis.r_d()
        );
    }
    let left = basis.a_s.matmul(&code.matrix)?;
    let data = left.mul_adjoint(&basis.a_d)?;
    Ok(RefMatrix {
        data,
        frame_index: code.frame_index,
    })
}

/// Per-port unit phasors of the plane-wave ramp.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRamp {
    pub phasors: Vec<Complex64>,
}

pub fn make_phase_ramp(geom: &FasGeometry) -> PhaseRamp {
    PhaseRamp {
        phasors: port_phasors(geom),
    }
}

impl PhaseRamp {
    /// The ramp re-referenced so that `port` carries phase zero.
    pub fn rebased(&self, port: usize) -> Result<PhaseRamp> {
        let base = match self.phasors.get(port) {
            Some(b) => b.conj(),
            None => bail!(Argument, "port {} out of range", port),
        };
        Ok(PhaseRamp {
            phasors: self.phasors.iter().map(|p| p * base).collect(),
        })
    }
}

/// Rebuilds the full tensor: port `n` equals the reference times `phasors[n]`.
pub fn replicate_ports(reference: &RefMatrix, ramp: &PhaseRamp, cfg: &GridConfig) -> Result<ChannelTensor> {
    if reference.data.rows() != cfg.n_tx || reference.data.cols() != cfg.n_bins() {
        bail!(Argument, "reference matrix does not match the grid");
    }
    let shape = TensorShape {
        n_ports: ramp.phasors.len(),
        n_tx: cfg.n_tx,
        n_doppler: cfg.n_doppler,
        n_delay: cfg.n_delay,
    };
    let mut out = ChannelTensor::zeros(shape, reference.frame_index);
    for (port, phi) in ramp.phasors.iter().enumerate() {
        for tx in 0..cfg.n_tx {
            for doppler in 0..cfg.n_doppler {
                for delay in 0..cfg.n_delay {
                    let v = reference.data[(tx, bin_column(delay, doppler, cfg.n_doppler))];
                    out.data[shape.index(port, tx, doppler, delay)] = v * phi;
                }
            }
        }
    }
    Ok(out)
}

/// First-difference encoding of successive code vectors; the first vector
/// is kept as is.
pub fn delta_encode(codes: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(codes.len());
    let mut prev: Option<&Vec<Complex64>> = None;
    for c in codes {
        out.push(match prev {
            None => c.clone(),
            Some(p) => c.iter().zip(p).map(|(a, b)| a - b).collect(),
        });
        prev = Some(c);
    }
    out
}

/// Inverse of [`delta_encode`].
pub fn delta_decode(deltas: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(deltas.len());
    for d in deltas {
        let next = match out.last() {
            None => d.clone(),
            Some(p) => d.iter().zip(p).map(|(a, b)| a + b).collect(),
        };
        out.push(next);
    }
    out
}

/// Cumulative sum of `deltas` starting from `start`.
pub fn integrate_deltas(start: &[Complex64], deltas: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut cur = start.to_vec();
    deltas
        .iter()
        .map(|d| {
            for (c, x) in cur.iter_mut().zip(d) {
                *c += x;
            }
            cur.clone()
        })
        .collect()
}

/// Convenience: zero code for a basis.
pub fn zero_code(basis: &PcaBasis, frame_index: usize) -> Code {
    Code {
        matrix: CMatrix::from_fn(basis.r_s(), basis.r_d(), |_, _| ZERO),
        frame_index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_fas_correlation, draw_scatterers, generate_frame, GenerationMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_refs(n: usize, rows: usize, cols: usize, seed: u64) -> Vec<RefMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|q| RefMatrix {
                data: CMatrix::from_fn(rows, cols, |_, _| {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                }),
                frame_index: q,
            })
            .collect()
    }

    fn tensor_with_port_scale(scale_port: usize, scale: f64) -> ChannelTensor {
        let shape = TensorShape {
            n_ports: 3,
            n_tx: 2,
            n_doppler: 2,
            n_delay: 2,
        };
        let mut t = ChannelTensor::zeros(shape, 0);
        for (i, v) in t.data.iter_mut().enumerate() {
            *v = Complex64::new(1.0 + (i % 8) as f64, 0.5);
        }
        let n = shape.port_len();
        for v in &mut t.data[scale_port * n..(scale_port + 1) * n] {
            *v *= scale;
        }
        t
    }

    #[test]
    fn reference_port_prefers_strongest() {
        let t = tensor_with_port_scale(2, 10.0);
        assert_eq!(select_reference_port(&[t.clone(), t]).unwrap(), 2);
    }

    #[test]
    fn reference_port_ties_go_to_first() {
        let t = tensor_with_port_scale(1, 1.0);
        assert_eq!(select_reference_port(&[t]).unwrap(), 0);
        assert!(select_reference_port(&[]).is_err());
    }

    #[test]
    fn rank_one_training_set() {
        let u = CMatrix::from_vec(
            3,
            1,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(-1.0, 1.0),
            ],
        )
        .unwrap();
        let v = CMatrix::from_vec(1, 5, (0..5).map(|k| Complex64::new(k as f64, 1.0)).collect()).unwrap();
        let h = u.matmul(&v).unwrap();
        let refs: Vec<_> = (0..4)
            .map(|q| RefMatrix {
                data: h.clone(),
                frame_index: q,
            })
            .collect();
        let basis = fit_pca(&refs, 0.9).unwrap();
        assert_eq!((basis.r_s(), basis.r_d()), (1, 1));
        assert!((basis.retained_ratio_s() - 1.0).abs() < 1e-12);
        assert!((basis.retained_ratio_d() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_threshold_round_trips() {
        let refs = random_refs(6, 3, 5, 1);
        let basis = fit_pca(&refs, 1.0).unwrap();
        assert_eq!((basis.r_s(), basis.r_d()), (3, 5));
        for r in &refs {
            let code = compress(r, &basis).unwrap();
            assert!((code.matrix.energy() - r.data.energy()).abs() <= 1e-10 * r.data.energy());
            let back = reconstruct_ref(&code, &basis).unwrap();
            assert!(back.data.max_abs_diff(&r.data) < 1e-10);
        }
    }

    #[test]
    fn basis_is_orthonormal_and_sorted() {
        let refs = random_refs(10, 4, 8, 2);
        let basis = fit_pca(&refs, 0.9).unwrap();
        let gs = basis.a_s.adjoint_mul(&basis.a_s).unwrap();
        let gd = basis.a_d.adjoint_mul(&basis.a_d).unwrap();
        assert!(gs.max_abs_diff(&CMatrix::identity(basis.r_s())) < 1e-10);
        assert!(gd.max_abs_diff(&CMatrix::identity(basis.r_d())) < 1e-10);
        assert!(basis.eig_s.windows(2).all(|w| w[0] >= w[1]));
        assert!(basis.eig_d.windows(2).all(|w| w[0] >= w[1]));
        assert!(basis.eig_d.iter().all(|&v| v >= 0.0));
        assert!(basis.retained_ratio_s() >= 0.9 - 1e-12);
        assert!(basis.retained_ratio_d() >= 0.9 - 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_pca(&[], 0.9).is_err());
        let refs = random_refs(2, 2, 2, 3);
        assert!(fit_pca(&refs, 0.0).is_err());
        assert!(fit_pca(&refs, 1.5).is_err());
        let zero = vec![RefMatrix {
            data: CMatrix::zeros(2, 3),
            frame_index: 0,
        }];
        assert!(matches!(fit_pca(&zero, 0.9), Err(crate::Error::UndefinedReference(_))));
    }

    #[test]
    fn zero_reference_gives_zero_code_and_back() {
        let refs = random_refs(5, 3, 6, 4);
        let basis = fit_pca(&refs, 0.9).unwrap();
        let z = RefMatrix {
            data: CMatrix::zeros(3, 6),
            frame_index: 0,
        };
        let code = compress(&z, &basis).unwrap();
        assert_eq!(code, zero_code(&basis, 0));
        let back = reconstruct_ref(&code, &basis).unwrap();
        assert_eq!(back.data, CMatrix::zeros(3, 6));
    }

    #[test]
    fn shape_mismatch_is_an_argument_error() {
        let refs = random_refs(5, 3, 6, 4);
        let basis = fit_pca(&refs, 0.9).unwrap();
        let bad = RefMatrix {
            data: CMatrix::zeros(3, 5),
            frame_index: 0,
        };
        assert!(matches!(compress(&bad, &basis), Err(crate::Error::Argument(_))));
        let bad_code = Code {
            matrix: CMatrix::zeros(basis.r_s() + 1, basis.r_d()),
            frame_index: 0,
        };
        assert!(matches!(
            reconstruct_ref(&bad_code, &basis),
            Err(crate::Error::Argument(_))
        ));
    }

    #[test]
    fn vectorisation_is_column_major() {
        let m = CMatrix::from_fn(2, 3, |i, j| Complex64::new((10 * i + j) as f64, 0.0));
        let code = Code {
            matrix: m,
            frame_index: 0,
        };
        let v: Vec<f64> = code.vec().iter().map(|c| c.re).collect();
        assert_eq!(v, vec![0.0, 10.0, 1.0, 11.0, 2.0, 12.0]);
        assert_eq!(Code::from_vec(&code.vec(), 2, 3, 0).unwrap(), code);
    }

    #[test]
    fn reference_column_order_is_delay_major() {
        let shape = TensorShape {
            n_ports: 1,
            n_tx: 1,
            n_doppler: 3,
            n_delay: 2,
        };
        let mut t = ChannelTensor::zeros(shape, 0);
        t.data[shape.index(0, 0, 2, 1)] = Complex64::new(7.0, 0.0);
        let r = extract_reference(&t, 0).unwrap();
        assert_eq!(r.data[(0, 3 + 2)], Complex64::new(7.0, 0.0));
    }

    #[test]
    fn phase_ramp_values() {
        let geom = FasGeometry {
            n_ports: 2,
            spacing_over_lambda: 0.1,
            elevation_rad: core::f64::consts::FRAC_PI_2,
            loading_eps: 1e-6,
        };
        let ramp = make_phase_ramp(&geom);
        assert_eq!(ramp.phasors[0], Complex64::new(1.0, 0.0));
        assert!((ramp.phasors[1].arg() + 0.2 * core::f64::consts::PI).abs() < 1e-12);
        let flat = make_phase_ramp(&FasGeometry {
            elevation_rad: 0.0,
            ..geom
        });
        assert!(flat.phasors.iter().all(|p| *p == Complex64::new(1.0, 0.0)));
        for p in &ramp.phasors {
            assert!((p.norm() - 1.0).abs() <= 1e-15);
        }
        let rebased = ramp.rebased(1).unwrap();
        assert!((rebased.phasors[1] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn replicate_round_trip_on_phase_ramp_frames() {
        let geom = FasGeometry {
            n_ports: 5,
            spacing_over_lambda: 0.15,
            elevation_rad: 0.8,
            loading_eps: 1e-6,
        };
        let cfg = GridConfig {
            n_tx: 3,
            n_doppler: 4,
            n_delay: 6,
            frame_duration_s: 1e-3,
            doppler_res_hz: 30.0,
        };
        let corr = build_fas_correlation(&geom).unwrap();
        let scat = draw_scatterers(&cfg, 5, 7, 3.0, 17).unwrap();
        let ramp = make_phase_ramp(&geom);
        for q in 0..4 {
            let h = generate_frame(q, &geom, &cfg, &scat, &corr, GenerationMode::PhaseRamp).unwrap();
            let r = extract_reference(&h, 0).unwrap();
            let back = replicate_ports(&r, &ramp, &cfg).unwrap();
            assert_eq!(back.port_slice(0), h.port_slice(0));
            let err = back
                .data
                .iter()
                .zip(&h.data)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-10);
            for port in 1..5 {
                for (a, b) in back.port_slice(port).iter().zip(back.port_slice(0)) {
                    assert!((a.norm() - b.norm()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn delta_encoding_round_trips() {
        let codes: Vec<Vec<Complex64>> = (0..5)
            .map(|k| vec![Complex64::new(k as f64, 1.0), Complex64::new(0.5, -(k as f64))])
            .collect();
        let d = delta_encode(&codes);
        assert_eq!(delta_decode(&d), codes);
        assert_eq!(integrate_deltas(&codes[1], &d[2..]), codes[2..].to_vec());
    }
}
