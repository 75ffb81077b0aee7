//! Adaptive Dormand–Prince 5(4) integration of dψ/dt = −i H(t) ψ.
//!
//! H(t) is generally non-Hermitian, so the raw norm of ψ can grow or decay
//! exponentially. Whenever it leaves `[1/r, r]` (r = `renormalize_threshold`)
//! the state is rescaled to unit norm and the factor is folded into
//! `log_norm_accumulated`. Step control measures the local error relative
//! to the current state norm, which makes the accepted step sequence
//! independent of such rescalings.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::drive::{DriveSpec, ModelParams};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{Form, Generator, HamiltonianBuilder};
use crate::hilbert::{observables, BlochVector, CompositeState};

/// Population of the top two Fock levels above which a trajectory is
/// no longer trusted.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

/// `rel_tol` and `abs_tol` are targets for the global error of a run; the
/// per-step controller works this much tighter so that accumulated local
/// errors over a few thousand steps stay within them.
const LOCAL_TOL_FACTOR: f64 = 0.1;

const ZERO: C64 = C64::new(0.0, 0.0);
const MINUS_I: C64 = C64::new(0.0, -1.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    /// Absolute error floor, measured in units of the current state norm.
    pub abs_tol: f64,
    pub max_step: Option<f64>,
    pub initial_step: Option<f64>,
    pub renormalize_threshold: f64,
    pub sample_times: Vec<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: None,
            initial_step: None,
            renormalize_threshold: 1e3,
            sample_times: vec![0.0],
        }
    }
}

impl IntegratorConfig {
    /// `n_points` evenly spaced samples on `[0, t_end]`.
    pub fn with_linspace(self, t_end: f64, n_points: usize) -> Self {
        Self {
            sample_times: linspace(t_end, n_points),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(invalid("integrator.rel_tol", "must be > 0"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(invalid("integrator.abs_tol", "must be > 0"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(invalid("integrator.max_step", "must be > 0"));
            }
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(invalid("integrator.initial_step", "must be > 0"));
            }
        }
        if !(self.renormalize_threshold > 1.0) {
            return Err(invalid("integrator.renormalize_threshold", "must be > 1"));
        }
        if self.sample_times.is_empty() {
            return Err(invalid("integrator.sample_times", "must not be empty"));
        }
        if !(self.sample_times[0] >= 0.0) {
            return Err(invalid("integrator.sample_times", "must start at t >= 0"));
        }
        if self.sample_times.windows(2).any(|w| !(w[1] > w[0]))
            || self.sample_times.iter().any(|t| !t.is_finite())
        {
            return Err(invalid(
                "integrator.sample_times",
                "must be finite and strictly increasing",
            ));
        }
        Ok(())
    }
}

pub fn linspace(t_end: f64, n_points: usize) -> Vec<f64> {
    match n_points {
        0 => vec![],
        1 => vec![0.0],
        n => (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect(),
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// How the absolute part of the error scale is formed.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ErrorScale {
    /// `abs_tol` as given.
    Absolute,
    /// `abs_tol · ‖y‖`; for linear problems the step sequence is then
    /// invariant under rescaling of `y`.
    RelativeToNorm,
}

#[derive(Copy, Clone, Debug)]
pub struct StepOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub error_scale: ErrorScale,
}

/// Embedded RK stepper over a complex vector. `rhs(t, y, dy)` writes dy/dt.
pub struct Stepper<F> {
    rhs: F,
    t: f64,
    y: Vec<C64>,
    h: Option<f64>,
    k: [Vec<C64>; 7],
    scratch: Vec<C64>,
    y_new: Vec<C64>,
    opts: StepOptions,
    accepted: usize,
    rejected: usize,
}

impl<F> Stepper<F>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    pub fn new(mut rhs: F, t0: f64, y0: Vec<C64>, opts: StepOptions) -> Self {
        let n = y0.len();
        let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![ZERO; n]);
        rhs(t0, &y0, &mut k[0]);
        Self {
            rhs,
            t: t0,
            y: y0,
            h: opts.initial_step,
            k,
            scratch: vec![ZERO; n],
            y_new: vec![ZERO; n],
            opts,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[C64] {
        &self.y
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Multiply the state by `factor`. Only valid for right-hand sides
    /// that are linear in `y`: the cached derivative is scaled along.
    pub fn rescale(&mut self, factor: f64) {
        self.y.iter_mut().for_each(|z| *z *= factor);
        self.k[0].iter_mut().for_each(|z| *z *= factor);
    }

    fn initial_guess(&mut self, span: f64) -> f64 {
        let d0 = norm(&self.y);
        let d1 = norm(&self.k[0]);
        let scale = self.opts.rel_tol * d0 + self.opts.abs_tol;
        let h = if d1 > 1e-300 {
            0.01 * (scale / self.opts.rel_tol).max(d0) / d1
        } else {
            1e-3
        };
        h.min(span.abs()).min(self.opts.max_step).max(1e-10)
    }

    /// Take one accepted step toward `target` without passing it.
    pub fn step_toward(&mut self, target: f64) -> Result<()> {
        let span = target - self.t;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_guess(span),
        }
        .min(self.opts.max_step);
        let n = self.y.len();
        loop {
            let mut last = false;
            if h >= span.abs() {
                h = span.abs();
                last = true;
            }
            let floor = 1e-14_f64.max(1e-13 * self.t.abs());
            if !last && h < floor {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let hs = dir * h;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = ZERO;
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += self.k[j][i] * *a;
                        }
                    }
                    self.scratch[i] = self.y[i] + acc * hs;
                }
                let (head, tail) = self.k.split_at_mut(s);
                let _ = head;
                (self.rhs)(self.t + C[s] * hs, &self.scratch, &mut tail[0]);
            }
            // 5th-order solution is the last stage argument.
            self.y_new.copy_from_slice(&self.scratch);
            let y_norm = match self.opts.error_scale {
                ErrorScale::Absolute => 1.0,
                ErrorScale::RelativeToNorm => norm(&self.y),
            };
            let atol = LOCAL_TOL_FACTOR * self.opts.abs_tol * y_norm;
            let rtol = LOCAL_TOL_FACTOR * self.opts.rel_tol;
            let mut err2 = 0.0;
            for i in 0..n {
                let mut e = ZERO;
                for (j, c) in E.iter().enumerate() {
                    if *c != 0.0 {
                        e += self.k[j][i] * *c;
                    }
                }
                let sc = atol + rtol * self.y[i].norm().max(self.y_new[i].norm());
                err2 += (e * hs).norm_sqr() / (sc * sc);
            }
            let err = (err2 / n as f64).sqrt();
            if err.is_nan() {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            if err <= 1.0 {
                self.t = if last { target } else { self.t + hs };
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                self.accepted += 1;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // keep the pre-truncation step size when the last step was cut short
                let grown = (h * fac).min(self.opts.max_step);
                self.h = Some(if last {
                    self.h.unwrap_or(grown).max(grown)
                } else {
                    grown
                });
                return Ok(());
            }
            self.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            self.h = Some(h);
        }
    }

    /// Integrate until `t == target` exactly.
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        while self.t != target {
            self.step_toward(target)?;
        }
        Ok(())
    }
}

type Rhs<'g> = Box<dyn FnMut(f64, &[C64], &mut [C64]) + 'g>;

/// Schrödinger-equation integrator with norm bookkeeping.
pub struct Evolver<'g, G: Generator> {
    stepper: Stepper<Rhs<'g>>,
    log_norm_accumulated: f64,
    threshold: f64,
    renormalizations: usize,
    diagonal: Option<Vec<f64>>,
    _gen: std::marker::PhantomData<&'g G>,
}

impl<'g, G: Generator> Evolver<'g, G> {
    pub fn new(
        generator: &'g G,
        state0: &CompositeState,
        config: &IntegratorConfig,
    ) -> Result<Self> {
        config.validate()?;
        if state0.dim() != generator.dim() {
            return Err(Error::DimensionMismatch {
                expected: generator.dim(),
                got: state0.dim(),
            });
        }
        let diagonal = generator.static_diagonal().map(<[f64]>::to_vec);
        let mut lab = vec![ZERO; generator.dim()];
        let frame = diagonal.clone();
        // In the rotating frame y = e^{iDt} ψ and dy/dt = −i e^{iDt} (H − D) e^{−iDt} y.
        let rhs = move |t: f64, y: &[C64], dy: &mut [C64]| match &frame {
            None => {
                generator.apply(t, y, dy);
                dy.iter_mut().for_each(|z| *z *= MINUS_I);
            }
            Some(d) => {
                for ((l, y), d) in lab.iter_mut().zip(y).zip(d) {
                    *l = y * C64::cis(-d * t);
                }
                generator.apply_remainder(t, &lab, dy);
                for (z, d) in dy.iter_mut().zip(d) {
                    *z *= MINUS_I * C64::cis(d * t);
                }
            }
        };
        let opts = StepOptions {
            rel_tol: config.rel_tol,
            abs_tol: config.abs_tol,
            max_step: config.max_step.unwrap_or(f64::INFINITY),
            initial_step: config.initial_step,
            error_scale: ErrorScale::RelativeToNorm,
        };
        let y0 = state0.amplitudes.to_vec();
        Ok(Self {
            stepper: Stepper::new(Box::new(rhs), 0.0, y0, opts),
            log_norm_accumulated: state0.log_norm_accumulated,
            threshold: config.renormalize_threshold,
            renormalizations: 0,
            diagonal,
            _gen: std::marker::PhantomData,
        })
    }

    pub fn t(&self) -> f64 {
        self.stepper.t()
    }

    pub fn renormalizations(&self) -> usize {
        self.renormalizations
    }

    pub fn accepted_steps(&self) -> usize {
        self.stepper.accepted_steps()
    }

    pub fn state(&self) -> CompositeState {
        let y = self.stepper.y();
        let amplitudes = match &self.diagonal {
            None => y.to_vec(),
            Some(d) => {
                let t = self.stepper.t();
                y.iter().zip(d).map(|(y, d)| y * C64::cis(-d * t)).collect()
            }
        };
        CompositeState {
            amplitudes: amplitudes.into(),
            log_norm_accumulated: self.log_norm_accumulated,
        }
    }

    /// Rescale the state to unit raw norm.
    pub fn renormalize(&mut self) -> Result<()> {
        let n = norm(self.stepper.y());
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm(n));
        }
        self.stepper.rescale(1.0 / n);
        self.log_norm_accumulated += n.ln();
        self.renormalizations += 1;
        Ok(())
    }

    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        while self.stepper.t() != target {
            self.stepper.step_toward(target)?;
            let n = norm(self.stepper.y());
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::ZeroNorm(n));
            }
            if n > self.threshold || n < 1.0 / self.threshold {
                self.renormalize()?;
            }
        }
        Ok(())
    }
}

/// Sampled observables of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub bloch: Vec<BlochVector>,
    pub photon_expectation: Vec<f64>,
    pub log_norm: Vec<f64>,
    pub leakage: Vec<f64>,
    pub trusted: bool,
    pub drive_meta: DriveSpec,
    pub params_meta: ModelParams,
    pub form: Form,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sigma_z(&self) -> Vec<f64> {
        self.bloch.iter().map(|b| b.z).collect()
    }

    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().cloned().fold(0.0, f64::max)
    }

    /// Keep every `stride`-th sample plus the last one.
    pub fn decimated(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let n = self.len();
        let idx: Vec<usize> = (0..n).filter(|i| i % stride == 0 || *i + 1 == n).collect();
        let pick = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            times: pick(&self.times),
            bloch: idx.iter().map(|&i| self.bloch[i]).collect(),
            photon_expectation: pick(&self.photon_expectation),
            log_norm: pick(&self.log_norm),
            leakage: pick(&self.leakage),
            ..self.clone()
        }
    }
}

/// Integrate from t = 0 and record observables at every sample time.
pub fn evolve(
    state0: &CompositeState,
    builder: &HamiltonianBuilder,
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    let mut ev = Evolver::new(builder, state0, config)?;
    let n = config.sample_times.len();
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(n),
        bloch: Vec::with_capacity(n),
        photon_expectation: Vec::with_capacity(n),
        log_norm: Vec::with_capacity(n),
        leakage: Vec::with_capacity(n),
        trusted: true,
        drive_meta: *builder.drive(),
        params_meta: *builder.params(),
        form: builder.form(),
    };
    for &t in &config.sample_times {
        ev.advance_to(t)?;
        let st = ev.state();
        let obs = observables(&st)?;
        rec.times.push(t);
        rec.bloch.push(obs.bloch);
        rec.photon_expectation.push(obs.photon_number);
        rec.log_norm.push(st.log_norm());
        rec.leakage.push(obs.leakage);
        if !(obs.leakage < LEAKAGE_LIMIT) {
            rec.trusted = false;
        }
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::{QubitTerm, SignConvention};
    use crate::hilbert::{
        build_standard_operators, prepare_state, CavityPrep, FockTruncation, Qubit,
    };
    use std::f64::consts::PI;

    fn cfg(t_end: f64, n: usize) -> IntegratorConfig {
        IntegratorConfig::default().with_linspace(t_end, n)
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1.0, 5).validate().is_ok());
        let mut c = cfg(1.0, 5);
        c.sample_times = vec![0.0, 0.5, 0.5];
        assert!(c.validate().is_err());
        c.sample_times = vec![-1.0, 0.0];
        assert!(c.validate().is_err());
        let c = IntegratorConfig {
            rel_tol: 0.0,
            ..cfg(1.0, 2)
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let p = ModelParams::new(0.0, 0.0, 3).unwrap();
        let b = HamiltonianBuilder::new(p, DriveSpec::constant(0.0), Form::FullRabi).unwrap();
        let s0 = prepare_state(1.0, 0.5, CavityPrep::Fock { n: 1 }, p.trunc()).unwrap();
        let rec = evolve(&s0, &b, &cfg(10.0, 11)).unwrap();
        let b0 = rec.bloch[0];
        for b in &rec.bloch {
            assert_eq!(*b, b0);
        }
    }

    #[test]
    fn two_level_rabi_oscillation() {
        // n_max = 1: (a + a†) restricted to {|0>,|1>} is σx on the cavity,
        // so H = g σx⊗σx rotates |e,0> into |g,1> and ⟨σz⟩ = cos(2gt).
        let g = 0.7;
        let p = ModelParams::new(0.0, 0.0, 1).unwrap();
        let b = HamiltonianBuilder::new(p, DriveSpec::constant(g), Form::FullRabi).unwrap();
        let s0 = CompositeState::basis(p.trunc(), 0, Qubit::Excited);
        let t_end = 5.0 * PI / g;
        let rec = evolve(&s0, &b, &cfg(t_end, 501)).unwrap();
        for (t, z) in rec.times.iter().zip(rec.sigma_z()) {
            assert!((z - (2.0 * g * t).cos()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn forced_renormalization_does_not_change_observables() {
        let p = ModelParams::new(5.0, 5.0, 12)
            .unwrap()
            .with_qubit_term(QubitTerm::Half);
        let d = DriveSpec::circular(0.3, 10.0, SignConvention::ExpPlus);
        let b = HamiltonianBuilder::new(p, d, Form::FullRabi).unwrap();
        let s0 = prepare_state(
            0.8,
            0.3,
            CavityPrep::Coherent { mean_photons: 1.5 },
            p.trunc(),
        )
        .unwrap();
        let c = cfg(4.0, 41);
        let ops = build_standard_operators(p.trunc());
        let run = |force: bool| {
            let mut ev = Evolver::new(&b, &s0, &c).unwrap();
            let mut out = Vec::new();
            for (k, &t) in c.sample_times.iter().enumerate() {
                ev.advance_to(t).unwrap();
                if force && k % 7 == 3 {
                    ev.renormalize().unwrap();
                }
                let st = ev.state();
                out.push((
                    crate::hilbert::expectation(&ops.sigma_z, &st).unwrap().re,
                    st.log_norm(),
                ));
            }
            out
        };
        let plain = run(false);
        let forced = run(true);
        for (a, b) in plain.iter().zip(&forced) {
            assert!((a.0 - b.0).abs() < 1e-12);
            assert!((a.1 - b.1).abs() < 1e-10);
        }
    }

    #[test]
    fn norm_growth_is_logged() {
        // anti-Hermitian coupling shifts the norm; renormalization must fire
        let p = ModelParams::new(1.0, 1.0, 6).unwrap();
        // ωg = 0 and φx = φy = π/2 give the constant coupling g = 0.8i
        let d = DriveSpec::elliptical(0.8, 0.0, 1.0, PI / 2.0, PI / 2.0, SignConvention::ExpPlus);
        let b = HamiltonianBuilder::new(p, d, Form::FullRabi).unwrap();
        let s0 = prepare_state(PI / 2.0, 0.0, CavityPrep::Vacuum, p.trunc()).unwrap();
        let c = IntegratorConfig {
            renormalize_threshold: 1.5,
            ..cfg(3.0, 4)
        };
        let mut ev = Evolver::new(&b, &s0, &c).unwrap();
        ev.advance_to(3.0).unwrap();
        assert!(ev.renormalizations() > 0);
        let st = ev.state();
        assert!(st.raw_norm() < 1.5 && st.raw_norm() > 1.0 / 1.5);
        assert!(st.log_norm().abs() > 2f64.ln());
        let rec = evolve(&s0, &b, &c).unwrap();
        assert!((rec.log_norm[3] - st.log_norm()).abs() < 1e-6);
    }

    #[test]
    fn time_reversal_hermitian() {
        let p = ModelParams::new(1.0, 0.7, 14).unwrap();
        let b = HamiltonianBuilder::new(p, DriveSpec::constant(0.4), Form::FullRabi).unwrap();
        let s0 = prepare_state(
            1.2,
            0.4,
            CavityPrep::Coherent { mean_photons: 0.5 },
            p.trunc(),
        )
        .unwrap();
        let c = cfg(10.0, 2);
        let mut ev = Evolver::new(&b, &s0, &c).unwrap();
        ev.advance_to(10.0).unwrap();
        ev.advance_to(0.0).unwrap();
        let back = ev.state();
        let err = back
            .amplitudes
            .iter()
            .zip(s0.amplitudes.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 100.0 * c.rel_tol, "err={err}");
    }

    /// Hides the diagonal split so the lab-frame path is exercised.
    struct LabFrame<'a>(&'a HamiltonianBuilder);

    impl Generator for LabFrame<'_> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
            self.0.apply(t, psi, out)
        }
    }

    #[test]
    fn rotating_frame_matches_lab_frame() {
        let p = ModelParams::new(5.0, 5.0, 16)
            .unwrap()
            .with_qubit_term(QubitTerm::Half);
        let d = DriveSpec::elliptical(0.3, 10.0, 0.6, 0.4, -0.2, SignConvention::ExpPlus);
        let b = HamiltonianBuilder::new(p, d, Form::FullRabi).unwrap();
        assert!(b.static_diagonal().is_some());
        let s0 = prepare_state(
            0.9,
            0.3,
            CavityPrep::Coherent { mean_photons: 1.5 },
            p.trunc(),
        )
        .unwrap();
        let c = IntegratorConfig {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            ..IntegratorConfig::default()
        };
        let lab = LabFrame(&b);
        let mut e1 = Evolver::new(&b, &s0, &c).unwrap();
        let mut e2 = Evolver::new(&lab, &s0, &c).unwrap();
        for t in [0.7, 3.1, 6.0] {
            e1.advance_to(t).unwrap();
            e2.advance_to(t).unwrap();
            let (a, z) = (e1.state(), e2.state());
            let scale = z.raw_norm() * (z.log_norm_accumulated).exp();
            let err = a
                .amplitudes
                .iter()
                .zip(z.amplitudes.iter())
                .map(|(x, y)| {
                    (x * a.log_norm_accumulated.exp() - y * z.log_norm_accumulated.exp()).norm_sqr()
                })
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-8 * scale, "t={t} err={err}");
        }
        assert!(e1.accepted_steps() < e2.accepted_steps());
    }

    #[test]
    fn leakage_flag() {
        let tr = FockTruncation::new(3).unwrap();
        let p = ModelParams {
            omega_0: 1.0,
            omega_q: 1.0,
            n_max: tr,
            qubit_term: QubitTerm::AsPrinted,
        };
        let b = HamiltonianBuilder::new(p, DriveSpec::constant(0.5), Form::FullRabi).unwrap();
        let s0 = CompositeState::basis(tr, 2, Qubit::Ground);
        let rec = evolve(&s0, &b, &cfg(1.0, 3)).unwrap();
        assert!(!rec.trusted);
        assert!(rec.max_leakage() > LEAKAGE_LIMIT);
    }

    #[test]
    fn step_underflow_is_reported() {
        let mut st = Stepper::new(
            |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = y[0] * y[0] * 1e6,
            0.0,
            vec![C64::new(1.0, 0.0)],
            StepOptions {
                rel_tol: 1e-9,
                abs_tol: 1e-12,
                max_step: 1.0,
                initial_step: None,
                error_scale: ErrorScale::Absolute,
            },
        );
        assert!(matches!(
            st.advance_to(1.0),
            Err(Error::StepUnderflow { .. })
        ));
    }

    #[test]
    fn decimation_keeps_last_sample() {
        let p = ModelParams::new(0.0, 0.0, 1).unwrap();
        let b = HamiltonianBuilder::new(p, DriveSpec::constant(0.0), Form::FullRabi).unwrap();
        let s0 = CompositeState::basis(p.trunc(), 0, Qubit::Excited);
        let rec = evolve(&s0, &b, &cfg(1.0, 10)).unwrap();
        let d = rec.decimated(4);
        assert_eq!(
            d.times,
            vec![rec.times[0], rec.times[4], rec.times[8], rec.times[9]]
        );
    }
}
