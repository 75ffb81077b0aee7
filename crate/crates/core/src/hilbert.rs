//! Truncated qubit ⊗ cavity Hilbert space.
//!
//! Basis ordering is fixed across the crate: the composite index is
//! `2n + s`, where `n` is the Fock level and `s = 0` is the excited qubit
//! state |e⟩, `s = 1` the ground state |g⟩. With this ordering σz|e⟩ = +|e⟩.
//!
//! The cavity ladder is hard-truncated at `n_max` (a†|n_max⟩ = 0). The
//! product aa† is the exception: it is built as the diagonal N + 1 so that
//! the Casimir operator stays strictly positive on every retained level.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Qubit label of the composite basis.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Qubit {
    Excited = 0,
    Ground = 1,
}

/// Highest retained Fock level of the cavity.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockTruncation {
    n_max: usize,
}

impl FockTruncation {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidTruncation(n_max));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of retained Fock levels, `n_max + 1`.
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    /// Composite dimension `2 (n_max + 1)`.
    pub fn dim(&self) -> usize {
        2 * self.levels()
    }

    pub fn index(&self, n: usize, qubit: Qubit) -> usize {
        debug_assert!(n <= self.n_max);
        2 * n + qubit as usize
    }

    /// Inverse of [`index`](Self::index).
    pub fn label(&self, index: usize) -> (usize, Qubit) {
        let q = if index.is_multiple_of(2) {
            Qubit::Excited
        } else {
            Qubit::Ground
        };
        (index / 2, q)
    }
}

impl TryFrom<usize> for FockTruncation {
    type Error = Error;

    fn try_from(n_max: usize) -> Result<Self> {
        Self::new(n_max)
    }
}

impl From<FockTruncation> for usize {
    fn from(t: FockTruncation) -> usize {
        t.n_max
    }
}

/// Dense square complex matrix on the composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    entries: Array2<C64>,
}

impl OperatorMatrix {
    pub fn from_array(entries: Array2<C64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: c,
            });
        }
        Ok(Self { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: Array2::zeros((dim, dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: Array2::eye(dim),
        }
    }

    pub fn from_diagonal(diag: impl IntoIterator<Item = C64>) -> Self {
        let diag: Vec<C64> = diag.into_iter().collect();
        let mut m = Array2::zeros((diag.len(), diag.len()));
        for (i, d) in diag.into_iter().enumerate() {
            m[[i, i]] = d;
        }
        Self { entries: m }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[[row, col]]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.t().mapv(|z| z.conj()),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            entries: self.entries.mapv(|z| z.conj()),
        }
    }

    pub fn dot(&self, rhs: &Self) -> Self {
        Self {
            entries: self.entries.dot(&rhs.entries),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self {
            entries: &self.entries + &rhs.entries,
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self {
            entries: &self.entries - &rhs.entries,
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            entries: self.entries.mapv(|z| z * factor),
        }
    }

    /// `[self, rhs] = self·rhs − rhs·self`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        self.dot(rhs).sub(&rhs.dot(self))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint())
            .entries
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn apply(&self, v: &Array1<C64>) -> Array1<C64> {
        self.entries.dot(v)
    }

    /// Restriction to the Fock levels `0..=n_max - drop_top` (both qubit
    /// states kept). Used to remove hard-cutoff edge effects.
    pub fn project_interior(&self, trunc: FockTruncation, drop_top: usize) -> Self {
        let keep_levels = trunc.levels().saturating_sub(drop_top);
        let k = 2 * keep_levels;
        Self {
            entries: self.entries.slice(s![..k, ..k]).to_owned(),
        }
    }

    /// Compressed-row copy for fast repeated matrix–vector products.
    pub fn to_sparse(&self) -> SparseOperator {
        let dim = self.dim();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..dim {
            for c in 0..dim {
                let v = self.entries[[r, c]];
                if v != ZERO {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseOperator {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// CSR form of an [`OperatorMatrix`]; exact copy of its nonzero entries.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out += factor · self · x`
    pub fn apply_add(&self, factor: C64, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o += factor * acc;
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            vals: self.vals.iter().map(|z| z.conj()).collect(),
            ..self.clone()
        }
    }
}

/// Ladder, Pauli and helper operators on the composite space.
#[derive(Clone, Debug)]
pub struct StandardOperators {
    pub a: OperatorMatrix,
    pub a_dagger: OperatorMatrix,
    pub sigma_z: OperatorMatrix,
    pub sigma_plus: OperatorMatrix,
    pub sigma_minus: OperatorMatrix,
    pub identity: OperatorMatrix,
    /// a†a
    pub number: OperatorMatrix,
    /// aa† taken as N + 1 on every retained level.
    pub number_plus_one: OperatorMatrix,
}

pub fn build_standard_operators(trunc: FockTruncation) -> StandardOperators {
    let dim = trunc.dim();
    let mut a = Array2::<C64>::zeros((dim, dim));
    let mut sp = Array2::<C64>::zeros((dim, dim));
    for n in 1..trunc.levels() {
        let amp = C64::from((n as f64).sqrt());
        for q in [Qubit::Excited, Qubit::Ground] {
            a[[trunc.index(n - 1, q), trunc.index(n, q)]] = amp;
        }
    }
    for n in 0..trunc.levels() {
        sp[[
            trunc.index(n, Qubit::Excited),
            trunc.index(n, Qubit::Ground),
        ]] = ONE;
    }
    let a = OperatorMatrix { entries: a };
    let sigma_plus = OperatorMatrix { entries: sp };
    let diag = |f: &dyn Fn(usize, Qubit) -> f64| {
        OperatorMatrix::from_diagonal((0..dim).map(|i| {
            let (n, q) = trunc.label(i);
            C64::from(f(n, q))
        }))
    };
    StandardOperators {
        a_dagger: a.adjoint(),
        sigma_minus: sigma_plus.adjoint(),
        sigma_z: diag(&|_, q| if q == Qubit::Excited { 1.0 } else { -1.0 }),
        identity: OperatorMatrix::identity(dim),
        number: diag(&|n, _| n as f64),
        number_plus_one: diag(&|n, _| n as f64 + 1.0),
        a,
        sigma_plus,
    }
}

/// Casimir operator C = aa† + ½(1 − σz) with the normalized ladder pair.
#[derive(Clone, Debug)]
pub struct CasimirLadder {
    pub c: OperatorMatrix,
    pub c_inverse: OperatorMatrix,
    /// b = a σ− C^(−1/2)
    pub b: OperatorMatrix,
    pub b_dagger: OperatorMatrix,
}

pub fn build_casimir_ladder(trunc: FockTruncation) -> Result<CasimirLadder> {
    let ops = build_standard_operators(trunc);
    let half_one_minus_sz = ops.identity.sub(&ops.sigma_z).scale(C64::from(0.5));
    let c = ops.number_plus_one.add(&half_one_minus_sz);
    let dim = c.dim();
    let mut inv_sqrt = Vec::with_capacity(dim);
    let mut inv = Vec::with_capacity(dim);
    for i in 0..dim {
        let v = c.get(i, i).re;
        if v <= 0.0 {
            return Err(Error::NonPositiveCasimir { index: i, value: v });
        }
        inv_sqrt.push(C64::from(1.0 / v.sqrt()));
        inv.push(C64::from(1.0 / v));
    }
    let b = ops
        .a
        .dot(&ops.sigma_minus)
        .dot(&OperatorMatrix::from_diagonal(inv_sqrt));
    Ok(CasimirLadder {
        b_dagger: b.adjoint(),
        b,
        c_inverse: OperatorMatrix::from_diagonal(inv),
        c,
    })
}

/// Interior-projected residuals of the SU(1,1) commutation relations.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct CommutatorResiduals {
    /// ‖[σz, b] + 2b‖
    pub sigma_z_b: f64,
    /// ‖[σz, b†] − 2b†‖
    pub sigma_z_b_dagger: f64,
    /// ‖[b, b†] − (C⁻¹ − 1)σz‖
    pub b_b_dagger: f64,
}

impl CommutatorResiduals {
    pub fn max(&self) -> f64 {
        self.sigma_z_b
            .max(self.sigma_z_b_dagger)
            .max(self.b_b_dagger)
    }
}

/// Frobenius norms of the three commutator defects. `drop_top` Fock levels
/// are removed before taking the norm (0 keeps the full truncated space).
pub fn commutator_residuals(trunc: FockTruncation, drop_top: usize) -> Result<CommutatorResiduals> {
    let ops = build_standard_operators(trunc);
    let lad = build_casimir_ladder(trunc)?;
    let two = C64::from(2.0);
    let r1 = ops.sigma_z.commutator(&lad.b).add(&lad.b.scale(two));
    let r2 = ops
        .sigma_z
        .commutator(&lad.b_dagger)
        .sub(&lad.b_dagger.scale(two));
    let rhs3 = lad.c_inverse.sub(&ops.identity).dot(&ops.sigma_z);
    let r3 = lad.b.commutator(&lad.b_dagger).sub(&rhs3);
    let norm = |m: OperatorMatrix| m.project_interior(trunc, drop_top).frobenius_norm();
    Ok(CommutatorResiduals {
        sigma_z_b: norm(r1),
        sigma_z_b_dagger: norm(r2),
        b_b_dagger: norm(r3),
    })
}

/// Cavity preparation for [`prepare_state`].
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CavityPrep {
    Vacuum,
    Fock { n: usize },
    Coherent { mean_photons: f64 },
}

/// Amplitude vector over the composite basis plus the log of every norm
/// factor removed so far.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeState {
    pub amplitudes: Array1<C64>,
    pub log_norm_accumulated: f64,
}

impl CompositeState {
    pub fn new(amplitudes: Array1<C64>) -> Self {
        Self {
            amplitudes,
            log_norm_accumulated: 0.0,
        }
    }

    pub fn basis(trunc: FockTruncation, n: usize, qubit: Qubit) -> Self {
        let mut v = Array1::zeros(trunc.dim());
        v[trunc.index(n, qubit)] = ONE;
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn raw_norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// log of the norm the state would have without any rescaling.
    pub fn log_norm(&self) -> f64 {
        self.log_norm_accumulated + self.raw_norm().ln()
    }

    /// Rescale to unit raw norm, folding the factor into the log-norm.
    pub fn renormalize(&mut self) -> Result<()> {
        let n = self.raw_norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm(n));
        }
        self.amplitudes.mapv_inplace(|z| z / n);
        self.log_norm_accumulated += n.ln();
        Ok(())
    }

    fn norm_sqr_checked(&self) -> Result<f64> {
        let n2 = self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::ZeroNorm(n2.sqrt()));
        }
        Ok(n2)
    }
}

/// Point in the Bloch ball.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n, self.z / n)
    }

    /// Angle to `other` in radians.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let c = self.dot(other) / (self.norm() * other.norm());
        c.clamp(-1.0, 1.0).acos()
    }
}

/// ⟨ψ|op|ψ⟩ / ⟨ψ|ψ⟩.
pub fn expectation(op: &OperatorMatrix, state: &CompositeState) -> Result<C64> {
    if op.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: state.dim(),
        });
    }
    let n2 = state.norm_sqr_checked()?;
    let v = op.apply(&state.amplitudes);
    let num = state
        .amplitudes
        .iter()
        .zip(v.iter())
        .map(|(p, q)| p.conj() * q)
        .sum::<C64>();
    Ok(num / n2)
}

/// Per-sample observables read straight from the amplitudes.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Observables {
    pub bloch: BlochVector,
    pub photon_number: f64,
    /// Population of the two highest Fock levels.
    pub leakage: f64,
}

pub fn observables(state: &CompositeState) -> Result<Observables> {
    let n2 = state.norm_sqr_checked()?;
    let amps = state.amplitudes.as_slice().expect("contiguous state");
    let levels = amps.len() / 2;
    let mut pe = 0.0;
    let mut pg = 0.0;
    let mut coh = ZERO;
    let mut photons = 0.0;
    let mut top = 0.0;
    for n in 0..levels {
        let e = amps[2 * n];
        let g = amps[2 * n + 1];
        let p = e.norm_sqr() + g.norm_sqr();
        pe += e.norm_sqr();
        pg += g.norm_sqr();
        coh += e.conj() * g;
        photons += n as f64 * p;
        if n + 2 >= levels {
            top += p;
        }
    }
    Ok(Observables {
        bloch: BlochVector::new(2.0 * coh.re / n2, 2.0 * coh.im / n2, (pe - pg) / n2),
        photon_number: photons / n2,
        leakage: top / n2,
    })
}

pub fn bloch_vector(state: &CompositeState) -> Result<BlochVector> {
    observables(state).map(|o| o.bloch)
}

/// cos(θ/2)|e⟩ + e^{iφ} sin(θ/2)|g⟩ tensored with the cavity preparation.
pub fn prepare_state(
    theta: f64,
    phi: f64,
    cavity: CavityPrep,
    trunc: FockTruncation,
) -> Result<CompositeState> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(crate::error::invalid(
            "theta",
            format!("{theta} not in [0, pi]"),
        ));
    }
    if !phi.is_finite() {
        return Err(crate::error::invalid("phi", "must be finite"));
    }
    let cavity_amps = cavity_amplitudes(cavity, trunc)?;
    let ce = C64::from((theta / 2.0).cos());
    let cg = C64::from_polar((theta / 2.0).sin(), phi);
    let mut v = Array1::zeros(trunc.dim());
    for (n, c) in cavity_amps.iter().enumerate() {
        v[trunc.index(n, Qubit::Excited)] = ce * c;
        v[trunc.index(n, Qubit::Ground)] = cg * c;
    }
    let mut state = CompositeState::new(v);
    state.renormalize()?;
    state.log_norm_accumulated = 0.0;
    Ok(state)
}

fn cavity_amplitudes(cavity: CavityPrep, trunc: FockTruncation) -> Result<Vec<C64>> {
    let mut amps = vec![ZERO; trunc.levels()];
    match cavity {
        CavityPrep::Vacuum => amps[0] = ONE,
        CavityPrep::Fock { n } => {
            if n > trunc.n_max() {
                return Err(crate::error::invalid(
                    "cavity.n",
                    format!("Fock level {n} exceeds n_max = {}", trunc.n_max()),
                ));
            }
            amps[n] = ONE;
        }
        CavityPrep::Coherent { mean_photons } => {
            if !(mean_photons >= 0.0) || !mean_photons.is_finite() {
                return Err(crate::error::invalid(
                    "cavity.mean_photons",
                    format!("{mean_photons} must be finite and >= 0"),
                ));
            }
            let alpha = mean_photons.sqrt();
            let mut c = (-mean_photons / 2.0).exp();
            let mut kept = 0.0;
            for (n, slot) in amps.iter_mut().enumerate() {
                if n > 0 {
                    c *= alpha / (n as f64).sqrt();
                }
                *slot = C64::from(c);
                kept += c * c;
            }
            let lost = 1.0 - kept;
            if lost > 1e-6 {
                return Err(Error::CoherentTruncation {
                    mean_photons,
                    n_max: trunc.n_max(),
                    lost,
                });
            }
        }
    }
    Ok(amps)
}
