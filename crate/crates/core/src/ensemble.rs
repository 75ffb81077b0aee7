//! Seeded ensembles of full-model trajectories.
//!
//! Initial qubit states are drawn uniformly over the Bloch sphere and the
//! cavity mean photon number uniformly over a range. Each sample owns an
//! independent ChaCha8 stream (stream id = sample index), so the samples
//! and all aggregates are identical for any worker count.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::instanton_sigma_z;
use crate::drive::{DriveSpec, ModelParams};
use crate::error::{invalid, Result};
use crate::hamiltonian::{Form, HamiltonianBuilder};
use crate::hilbert::{prepare_state, CavityPrep};
use crate::integrator::{evolve, IntegratorConfig, TrajectoryRecord};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
pub const RNG_NAME: &str = "chacha8-stream-per-sample/v1";

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityPrepKind {
    #[default]
    Coherent,
    /// Fock level nearest to the sampled mean.
    FockRounded,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub n_samples: usize,
    pub seed: u64,
    pub cavity_mean_range: [f64; 2],
    pub cavity_prep_kind: CavityPrepKind,
    pub drive: DriveSpec,
    pub params: ModelParams,
    pub integrator: IntegratorConfig,
    pub convergence_threshold: f64,
    /// How many trajectories (lowest sample indices first) to keep in full.
    pub keep_trajectories: usize,
}

impl EnsembleSpec {
    /// Defaults: 1000 samples, cavity mean in [0, 5], coherent cavity,
    /// threshold −0.99, 401 samples over t ∈ [0, 8/g0].
    pub fn new(params: ModelParams, drive: DriveSpec) -> Self {
        let t_end = if drive.g0 > 0.0 { 8.0 / drive.g0 } else { 1.0 };
        Self {
            n_samples: 1000,
            seed: 0,
            cavity_mean_range: [0.0, 5.0],
            cavity_prep_kind: CavityPrepKind::Coherent,
            drive,
            params,
            integrator: IntegratorConfig::default().with_linspace(t_end, 401),
            convergence_threshold: -0.99,
            keep_trajectories: 0,
        }
    }

    pub fn t_end(&self) -> f64 {
        *self.integrator.sample_times.last().unwrap_or(&0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 {
            return Err(invalid("ensemble.n_samples", "must be >= 1"));
        }
        let [lo, hi] = self.cavity_mean_range;
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return Err(invalid(
                "ensemble.cavity_mean_range",
                format!("need 0 <= lo <= hi, got [{lo}, {hi}]"),
            ));
        }
        if !(-1.0..=1.0).contains(&self.convergence_threshold) {
            return Err(invalid(
                "ensemble.convergence_threshold",
                "must lie in [-1, 1]",
            ));
        }
        self.params.validate()?;
        self.drive.validate()?;
        self.integrator.validate()
    }

    /// Truncation advice: n_max ≥ hi + 10√hi.
    pub fn warnings(&self) -> Vec<String> {
        let hi = self.cavity_mean_range[1];
        let need = hi + 10.0 * hi.sqrt();
        let n_max = self.params.trunc().n_max();
        if (n_max as f64) < need {
            vec![format!(
                "n_max = {n_max} is below the recommended {need:.1} for cavity means up to {hi}"
            )]
        } else {
            vec![]
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct InitialCondition {
    pub index: usize,
    pub theta: f64,
    pub phi: f64,
    pub cavity_mean: f64,
}

fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// cos θ uniform on [−1, 1], φ uniform on [0, 2π), mean uniform on [lo, hi].
pub fn sample_initial_conditions(spec: &EnsembleSpec) -> Vec<InitialCondition> {
    let [lo, hi] = spec.cavity_mean_range;
    (0..spec.n_samples)
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(index as u64);
            let cos_theta = 1.0 - 2.0 * unit_uniform(&mut rng);
            let phi = 2.0 * std::f64::consts::PI * unit_uniform(&mut rng);
            let cavity_mean = lo + (hi - lo) * unit_uniform(&mut rng);
            InitialCondition {
                index,
                theta: cos_theta.clamp(-1.0, 1.0).acos(),
                phi,
                cavity_mean,
            }
        })
        .collect()
}

/// First time ⟨σz⟩ drops to `threshold`, linearly interpolated between samples.
pub fn time_to_threshold(times: &[f64], sigma_z: &[f64], threshold: f64) -> Option<f64> {
    let i = sigma_z.iter().position(|&z| z <= threshold)?;
    if i == 0 {
        return Some(times[0]);
    }
    let (z0, z1) = (sigma_z[i - 1], sigma_z[i]);
    let (t0, t1) = (times[i - 1], times[i]);
    Some(t0 + (threshold - z0) / (z1 - z0) * (t1 - t0))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub rms_residual: f64,
}

/// Least-squares fit of σz(0)(1 − 2 tanh(αt)) over α ∈ (0, upper].
pub fn fit_alpha_series(times: &[f64], sigma_z: &[f64], upper: f64) -> Result<AlphaFit> {
    if times.len() != sigma_z.len() || times.len() < 2 {
        return Err(invalid(
            "record",
            "need at least two samples with matching lengths",
        ));
    }
    if !(upper > 0.0) {
        return Err(invalid("alpha upper bound", format!("{upper} must be > 0")));
    }
    let z0 = sigma_z[0];
    let sse = |a: f64| -> f64 {
        times
            .iter()
            .zip(sigma_z)
            .map(|(&t, &z)| {
                let r = z - instanton_sigma_z(z0, a, t);
                r * r
            })
            .sum()
    };
    // coarse scan, then golden section around the best bracket
    let n_grid = 400;
    let step = upper / n_grid as f64;
    let mut best = (0usize, f64::INFINITY);
    for k in 1..=n_grid {
        let v = sse(k as f64 * step);
        if v < best.1 {
            best = (k, v);
        }
    }
    let mut a = ((best.0 as f64 - 1.0) * step).max(f64::MIN_POSITIVE);
    let mut b = ((best.0 as f64 + 1.0) * step).min(upper);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    while (b - a) > 1e-13 * (1.0 + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sse(d);
        }
    }
    let alpha = 0.5 * (a + b);
    Ok(AlphaFit {
        alpha,
        rms_residual: (sse(alpha) / times.len() as f64).sqrt(),
    })
}

/// Fit the instanton rate to a simulated trajectory, α ∈ (0, 10 g0].
pub fn fit_alpha(record: &TrajectoryRecord) -> Result<AlphaFit> {
    if record.len() < 20 {
        return Err(invalid(
            "record",
            format!("{} samples; at least 20 required", record.len()),
        ));
    }
    fit_alpha_series(
        &record.times,
        &record.sigma_z(),
        10.0 * record.drive_meta.g0,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryOutcome {
    pub index: usize,
    pub theta: f64,
    pub phi: f64,
    pub cavity_mean: f64,
    pub time_to_threshold: Option<f64>,
    pub final_sigma_z: Option<f64>,
    /// Reduced ground-state population ρ_gg = (1 − z)/2 at t_end.
    pub final_ground_fidelity: Option<f64>,
    pub max_leakage: Option<f64>,
    pub trusted: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceOutcome {
    pub time_to_threshold: Option<f64>,
    pub final_sigma_z: f64,
    pub trusted: bool,
    pub fit: AlphaFit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub schema_version: u32,
    pub rng: &'static str,
    pub n_samples: usize,
    pub seed: u64,
    pub convergence_threshold: f64,
    pub t_end: f64,
    pub n_trusted: usize,
    pub n_untrusted: usize,
    pub n_converged: usize,
    /// Converged / trusted.
    pub fraction_converged: f64,
    /// Over converged trusted trajectories.
    pub max_time_to_threshold: Option<f64>,
    pub median_time_to_threshold: Option<f64>,
    /// Excited-state, vacuum-cavity trajectory used as the outer bound.
    pub reference: ReferenceOutcome,
    /// Trusted trajectories reaching the threshold later than the reference
    /// (or never, when the reference does).
    pub envelope_violations: usize,
    /// Largest (t − t_ref)/t_ref among violations; `None` if there are none
    /// or a violator never converged.
    pub max_violation_excess: Option<f64>,
    pub unbounded_violations: usize,
    pub warnings: Vec<String>,
    pub trajectories: Vec<TrajectoryOutcome>,
}

pub struct EnsembleRun {
    pub summary: EnsembleSummary,
    pub reference: TrajectoryRecord,
    /// (sample index, record) for the retained trajectories.
    pub retained: Vec<(usize, TrajectoryRecord)>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn run_one(
    ic: &InitialCondition,
    spec: &EnsembleSpec,
    builder: &HamiltonianBuilder,
) -> (TrajectoryOutcome, Option<TrajectoryRecord>) {
    let cavity = match spec.cavity_prep_kind {
        CavityPrepKind::Coherent => CavityPrep::Coherent {
            mean_photons: ic.cavity_mean,
        },
        CavityPrepKind::FockRounded => CavityPrep::Fock {
            n: ic.cavity_mean.round() as usize,
        },
    };
    let mut out = TrajectoryOutcome {
        index: ic.index,
        theta: ic.theta,
        phi: ic.phi,
        cavity_mean: ic.cavity_mean,
        time_to_threshold: None,
        final_sigma_z: None,
        final_ground_fidelity: None,
        max_leakage: None,
        trusted: false,
        error: None,
    };
    let rec = prepare_state(ic.theta, ic.phi, cavity, spec.params.trunc())
        .and_then(|s0| evolve(&s0, builder, &spec.integrator));
    match rec {
        Ok(rec) => {
            let sz = rec.sigma_z();
            let last = *sz.last().expect("non-empty record");
            out.time_to_threshold = time_to_threshold(&rec.times, &sz, spec.convergence_threshold);
            out.final_sigma_z = Some(last);
            out.final_ground_fidelity = Some((1.0 - last) / 2.0);
            out.max_leakage = Some(rec.max_leakage());
            out.trusted = rec.trusted;
            (out, Some(rec))
        }
        Err(e) => {
            out.error = Some(e.to_string());
            (out, None)
        }
    }
}

/// Run every sample on a pool of `workers` threads. Results are stored by
/// sample index, so the output does not depend on `workers`.
pub fn run_ensemble(spec: &EnsembleSpec, workers: usize) -> Result<EnsembleRun> {
    spec.validate()?;
    let builder = HamiltonianBuilder::new(spec.params, spec.drive, Form::FullRabi)?;
    let samples = sample_initial_conditions(spec);

    let s0 = prepare_state(0.0, 0.0, CavityPrep::Vacuum, spec.params.trunc())?;
    let reference = evolve(&s0, &builder, &spec.integrator)?;
    let ref_sz = reference.sigma_z();
    let ref_t = time_to_threshold(&reference.times, &ref_sz, spec.convergence_threshold);
    let fit = fit_alpha_series(
        &reference.times,
        &ref_sz,
        10.0 * spec.drive.g0.max(f64::MIN_POSITIVE),
    )?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    let keep = spec.keep_trajectories;
    let results: Vec<(TrajectoryOutcome, Option<TrajectoryRecord>)> = pool.install(|| {
        samples
            .par_iter()
            .map(|ic| {
                let (o, r) = run_one(ic, spec, &builder);
                (o, if ic.index < keep { r } else { None })
            })
            .collect()
    });

    let mut trajectories = Vec::with_capacity(results.len());
    let mut retained = Vec::new();
    for (o, r) in results {
        if let Some(r) = r {
            retained.push((o.index, r));
        }
        trajectories.push(o);
    }

    let trusted: Vec<&TrajectoryOutcome> = trajectories.iter().filter(|o| o.trusted).collect();
    let converged: Vec<f64> = trusted.iter().filter_map(|o| o.time_to_threshold).collect();
    let n_trusted = trusted.len();
    let mut envelope_violations = 0;
    let mut unbounded_violations = 0;
    let mut max_excess: Option<f64> = None;
    if let Some(tr) = ref_t {
        for o in &trusted {
            match o.time_to_threshold {
                Some(t) if t > tr => {
                    envelope_violations += 1;
                    let ex = if tr > 0.0 {
                        (t - tr) / tr
                    } else {
                        f64::INFINITY
                    };
                    max_excess = Some(max_excess.map_or(ex, |m: f64| m.max(ex)));
                }
                Some(_) => {}
                None => {
                    envelope_violations += 1;
                    unbounded_violations += 1;
                }
            }
        }
    }
    let summary = EnsembleSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        rng: RNG_NAME,
        n_samples: spec.n_samples,
        seed: spec.seed,
        convergence_threshold: spec.convergence_threshold,
        t_end: spec.t_end(),
        n_trusted,
        n_untrusted: trajectories.len() - n_trusted,
        n_converged: converged.len(),
        fraction_converged: if n_trusted > 0 {
            converged.len() as f64 / n_trusted as f64
        } else {
            0.0
        },
        max_time_to_threshold: converged.iter().cloned().reduce(f64::max),
        median_time_to_threshold: median(converged),
        reference: ReferenceOutcome {
            time_to_threshold: ref_t,
            final_sigma_z: *ref_sz.last().expect("non-empty record"),
            trusted: reference.trusted,
            fit,
        },
        envelope_violations,
        max_violation_excess: if unbounded_violations > 0 {
            None
        } else {
            max_excess
        },
        unbounded_violations,
        warnings: spec.warnings(),
        trajectories,
    };
    Ok(EnsembleRun {
        summary,
        reference,
        retained,
    })
}
