//! Closed-form results for the resonant anti-Jaynes–Cummings dynamics.
//!
//! Wei–Norman coefficients of the SU(1,1) propagator, the tanh instanton
//! for ⟨σz⟩, the auxiliary φ⁴ field with its potentials and Euclidean
//! action, and the generalized Riccati flow of the elliptical drive.
//!
//! The rate `alpha` is a free parameter everywhere in this module. The
//! natural identification with the drive is α = g0; the ensemble harness
//! fits it from simulations instead of assuming that mapping.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::hamiltonian::CouplingVector;
use crate::hilbert::BlochVector;
use crate::integrator::{ErrorScale, StepOptions, Stepper};

const I: C64 = C64::new(0.0, 1.0);

/// Wei–Norman coefficients sampled at `times`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeiNormanCoefficients {
    pub alpha: f64,
    pub omega_0: f64,
    pub times: Vec<f64>,
    pub f0: Vec<C64>,
    pub f1: Vec<C64>,
    pub f2: Vec<C64>,
    pub f3: Vec<C64>,
}

/// f0 = ω0 t, f1 = f2 = i tanh(αt), f3 = ½ log(cosh²(αt)).
pub fn wei_norman_evaluate(
    alpha: f64,
    omega_0: f64,
    times: &[f64],
) -> Result<WeiNormanCoefficients> {
    if !(alpha >= 0.0) {
        return Err(invalid("alpha", format!("{alpha} must be >= 0")));
    }
    let f1: Vec<C64> = times.iter().map(|&t| I * (alpha * t).tanh()).collect();
    Ok(WeiNormanCoefficients {
        alpha,
        omega_0,
        times: times.to_vec(),
        f0: times.iter().map(|&t| C64::from(omega_0 * t)).collect(),
        f2: f1.clone(),
        f1,
        f3: times
            .iter()
            .map(|&t| {
                let c = (alpha * t).cosh();
                C64::from(0.5 * (c * c).ln())
            })
            .collect(),
    })
}

/// Maximum over interior sample points and over the four equations of
/// |central difference − right-hand side| for
///
/// ```text
/// f0' = ω0,  f1' = iα(1 + f1²),  f2' = iα(1 + f1 f2),  f3' = −iα f2.
/// ```
pub fn wei_norman_ode_residual(c: &WeiNormanCoefficients) -> f64 {
    let t = &c.times;
    let a = c.alpha;
    let mut worst = 0.0_f64;
    for i in 1..t.len().saturating_sub(1) {
        let hm = t[i] - t[i - 1];
        let hp = t[i + 1] - t[i];
        let d = |f: &[C64]| {
            (f[i + 1] * (hm * hm) - f[i - 1] * (hp * hp) + f[i] * (hp * hp - hm * hm))
                / (hm * hp * (hm + hp))
        };
        let r0 = (d(&c.f0) - c.omega_0).norm();
        let r1 = (d(&c.f1) - I * a * (1.0 + c.f1[i] * c.f1[i])).norm();
        let r2 = (d(&c.f2) - I * a * (1.0 + c.f1[i] * c.f2[i])).norm();
        let r3 = (d(&c.f3) + I * a * c.f2[i]).norm();
        worst = worst.max(r0).max(r1).max(r2).max(r3);
    }
    worst
}

/// ⟨σz⟩(t) = σz(0) (1 − 2 tanh(αt)).
pub fn instanton_sigma_z(sigma_z0: f64, alpha: f64, t: f64) -> f64 {
    sigma_z0 * (1.0 - 2.0 * (alpha * t).tanh())
}

/// Solution of ẋ = α(1 − x²): x(t) = tanh(αt + atanh(x0)).
pub fn auxiliary_flow(x0: f64, alpha: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(x0.abs() <= 1.0) {
        return Err(invalid("x0", format!("|{x0}| > 1")));
    }
    if x0.abs() == 1.0 {
        return Ok(vec![x0; times.len()]);
    }
    let shift = x0.atanh();
    Ok(times.iter().map(|&t| (alpha * t + shift).tanh()).collect())
}

/// Gradient-flow potential U(x) = −α(x − x³/3), so that ẋ = −U'(x).
pub fn potential_u(alpha: f64, x: f64) -> f64 {
    -alpha * (x - x * x * x / 3.0)
}

/// Euclidean double well V(x) = α²/2 (1 − x²)².
pub fn potential_v(alpha: f64, x: f64) -> f64 {
    let w = 1.0 - x * x;
    0.5 * alpha * alpha * w * w
}

/// Bloch coordinates of polar angle θ: (population x = sin²(θ/2), z = cos θ).
pub fn bloch_coordinates(theta: f64) -> (f64, f64) {
    let s = (theta / 2.0).sin();
    (s * s, theta.cos())
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct EuclideanAction {
    /// 4α/3
    pub closed_form: f64,
    /// ∫₋₁¹ √(2V(x)) dx by adaptive quadrature.
    pub quadrature: f64,
}

pub fn euclidean_action(alpha: f64) -> Result<EuclideanAction> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("{alpha} must be > 0")));
    }
    let f = |x: f64| (2.0 * potential_v(alpha, x)).sqrt();
    Ok(EuclideanAction {
        closed_form: 4.0 * alpha / 3.0,
        quadrature: adaptive_simpson(&f, -1.0, 1.0, 1e-13 * alpha, 50),
    })
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// Right-hand side of ḟ1 = iαz(1 + f1²) − 2i(αx + iαy) f1.
pub fn riccati_rhs(alpha: &CouplingVector, f1: C64) -> C64 {
    I * alpha.z * (1.0 + f1 * f1) - 2.0 * I * alpha.transverse() * f1
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub value: C64,
    /// ∂ḟ1/∂f1 at the root.
    pub eigenvalue: C64,
    pub stability: Stability,
}

fn classify(alpha: &CouplingVector, f: C64) -> FixedPoint {
    let eigenvalue = 2.0 * I * alpha.z * f - 2.0 * I * alpha.transverse();
    let tol = 1e-12 * alpha.norm();
    let stability = if eigenvalue.re < -tol {
        Stability::Stable
    } else if eigenvalue.re > tol {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    FixedPoint {
        value: f,
        eigenvalue,
        stability,
    }
}

/// Roots of αz f² − 2(αx + iαy) f + αz = 0, each with its linear stability.
/// A double root is returned once; αz = 0 leaves the single root f = 0.
pub fn riccati_fixed_points(alpha: &CouplingVector) -> Vec<FixedPoint> {
    let beta = alpha.transverse();
    if alpha.z == 0.0 {
        return vec![classify(alpha, C64::new(0.0, 0.0))];
    }
    let disc = (beta * beta - alpha.z * alpha.z).sqrt();
    // larger-magnitude root first, the other from the product of roots (= 1)
    let q = if (beta + disc).norm() >= (beta - disc).norm() {
        beta + disc
    } else {
        beta - disc
    };
    let r1 = q / alpha.z;
    let r2 = alpha.z / q;
    if (r1 - r2).norm() <= 1e-14 * (1.0 + r1.norm()) {
        return vec![classify(alpha, r1)];
    }
    vec![classify(alpha, r1), classify(alpha, r2)]
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RiccatiOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// |f1| above which the trajectory is stopped at a movable pole.
    pub pole_cutoff: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            pole_cutoff: 1e8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiTrajectory {
    /// Sample times actually reached; shorter than requested after a pole.
    pub times: Vec<f64>,
    pub values: Vec<C64>,
    /// Time at which |f1| first exceeded the cutoff.
    pub pole_at: Option<f64>,
}

/// Integrate the generalized Riccati flow from t = `times[0]`.
pub fn riccati_evolve(
    alpha: &CouplingVector,
    f1_0: C64,
    times: &[f64],
    opts: RiccatiOptions,
) -> Result<RiccatiTrajectory> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times", "must be strictly increasing"));
    }
    let mut out = RiccatiTrajectory {
        times: Vec::new(),
        values: Vec::new(),
        pole_at: None,
    };
    let Some(&t0) = times.first() else {
        return Ok(out);
    };
    let a = *alpha;
    let rhs = move |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = riccati_rhs(&a, y[0]);
    let step_opts = StepOptions {
        rel_tol: opts.rel_tol,
        abs_tol: opts.abs_tol,
        max_step: f64::INFINITY,
        initial_step: None,
        error_scale: ErrorScale::Absolute,
    };
    let mut st = Stepper::new(rhs, t0, vec![f1_0], step_opts);
    for &t in times {
        while st.t() != t {
            st.step_toward(t)?;
            if !(st.y()[0].norm() <= opts.pole_cutoff) {
                out.pole_at = Some(st.t());
                return Ok(out);
            }
        }
        out.times.push(t);
        out.values.push(st.y()[0]);
    }
    Ok(out)
}

/// Late-time Bloch direction −α/|α|.
pub fn attractor_direction(alpha: &CouplingVector) -> BlochVector {
    let n = alpha.norm();
    BlochVector::new(-alpha.x / n, -alpha.y / n, -alpha.z / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::linspace;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(t_end: f64, h: f64) -> Vec<f64> {
        let n = (t_end / h).round() as usize;
        (0..=n).map(|k| k as f64 * h).collect()
    }

    #[test]
    fn wei_norman_initial_values_vanish() {
        let c = wei_norman_evaluate(0.7, 3.0, &[0.0]).unwrap();
        for f in [&c.f0, &c.f1, &c.f2, &c.f3] {
            assert_eq!(f[0], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn wei_norman_saturation_and_f3() {
        let c = wei_norman_evaluate(1.0, 1.0, &[1.0, 40.0]).unwrap();
        assert!((c.f1[1] - I).norm() < 1e-15);
        assert!((c.f3[0].re - 0.433_780_830_483_027).abs() < 1e-12);
        assert!((c.f3[0].re - 1f64.cosh().ln()).abs() < 1e-15);
        assert_eq!(c.f1, c.f2);
    }

    #[test]
    fn wei_norman_solves_its_odes() {
        for alpha in [0.1, 1.0, 5.0] {
            let c = wei_norman_evaluate(alpha, 5.0, &grid(3.0, 1e-4)).unwrap();
            let r = wei_norman_ode_residual(&c);
            assert!(r < 1e-6, "alpha={alpha}: {r}");
        }
    }

    #[test]
    fn wei_norman_residual_detects_wrong_functions() {
        let times = grid(1.0, 1e-3);
        let zero = vec![C64::new(0.0, 0.0); times.len()];
        let c = WeiNormanCoefficients {
            alpha: 0.8,
            omega_0: 2.0,
            f0: times.iter().map(|&t| C64::from(2.0 * t)).collect(),
            f1: zero.clone(),
            f2: zero.clone(),
            f3: zero,
            times,
        };
        assert!((wei_norman_ode_residual(&c) - 0.8).abs() < 1e-12);
        let c0 = wei_norman_evaluate(0.0, 2.0, &c.times).unwrap();
        assert!(c0.f1.iter().chain(&c0.f3).all(|z| *z == C64::new(0.0, 0.0)));
        assert!(wei_norman_ode_residual(&c0) < 1e-9);
    }

    #[test]
    fn instanton_examples() {
        assert_eq!(instanton_sigma_z(1.0, 0.3, 0.0), 1.0);
        assert!((instanton_sigma_z(1.0, 0.3, 1e3) + 1.0).abs() < 1e-15);
        assert!(instanton_sigma_z(1.0, 1.0, 0.5f64.atanh()).abs() < 1e-15);
        assert!((0.5f64.atanh() - 0.549_306_144_334_054_9).abs() < 1e-15);
    }

    #[test]
    fn auxiliary_flow_examples() {
        let t = linspace(5.0, 51);
        let x = auxiliary_flow(0.0, 1.0, &t).unwrap();
        for (ti, xi) in t.iter().zip(&x) {
            assert_eq!(*xi, ti.tanh());
        }
        assert!(auxiliary_flow(1.0, 2.0, &t)
            .unwrap()
            .iter()
            .all(|&v| v == 1.0));
        assert!(auxiliary_flow(-1.0, 2.0, &t)
            .unwrap()
            .iter()
            .all(|&v| v == -1.0));
        assert!(auxiliary_flow(1.2, 2.0, &t).is_err());
    }

    #[test]
    fn auxiliary_flow_obeys_gradient_equation() {
        let h = 1e-4;
        let t = grid(4.0, h);
        let x = auxiliary_flow(0.0, 1.0, &t).unwrap();
        let mut worst = 0.0_f64;
        for i in 1..t.len() - 1 {
            let dx = (x[i + 1] - x[i - 1]) / (2.0 * h);
            worst = worst.max((dx - (1.0 - x[i] * x[i])).abs());
            // −U'(x) by central difference in x
            let du = (potential_u(1.0, x[i] + 1e-5) - potential_u(1.0, x[i] - 1e-5)) / 2e-5;
            worst = worst.max((dx + du).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn double_well_has_minima_at_fixed_points() {
        for a in [0.3, 2.0] {
            assert_eq!(potential_v(a, 1.0), 0.0);
            assert_eq!(potential_v(a, -1.0), 0.0);
            assert!((potential_v(a, 0.0) - a * a / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn affine_map_between_instanton_and_auxiliary_field() {
        let t = linspace(10.0, 401);
        for alpha in [0.05, 0.7, 3.0] {
            let x = auxiliary_flow(0.0, alpha, &t).unwrap();
            for (ti, xi) in t.iter().zip(&x) {
                assert_eq!(instanton_sigma_z(1.0, alpha, *ti), 1.0 - 2.0 * xi);
            }
        }
    }

    #[test]
    fn bloch_coordinate_identities() {
        for k in 0..=200 {
            let theta = std::f64::consts::PI * k as f64 / 200.0;
            let (x, z) = bloch_coordinates(theta);
            assert!((x - (1.0 - z) / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn action_examples() {
        assert_eq!(euclidean_action(3.0).unwrap().closed_form, 4.0);
        assert_eq!(euclidean_action(0.75).unwrap().closed_form, 1.0);
        assert!(euclidean_action(0.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a: f64 = rng.random_range(1e-3..=10.0);
            let s = euclidean_action(a).unwrap();
            assert!((s.closed_form - s.quadrature).abs() < 1e-10, "{s:?}");
        }
    }

    #[test]
    fn fixed_point_examples() {
        let fp = riccati_fixed_points(&CouplingVector::axial(1.0).unwrap());
        assert_eq!(fp.len(), 2);
        let vals: Vec<C64> = fp.iter().map(|f| f.value).collect();
        assert!(vals.iter().any(|v| (v - I).norm() < 1e-15));
        assert!(vals.iter().any(|v| (v + I).norm() < 1e-15));
        let stable: Vec<_> = fp
            .iter()
            .filter(|f| f.stability == Stability::Stable)
            .collect();
        assert_eq!(stable.len(), 1);
        assert!((stable[0].value - I).norm() < 1e-15);

        let fp = riccati_fixed_points(&CouplingVector::new(1.0, 0.0, 1.0).unwrap());
        assert_eq!(fp.len(), 1);
        assert!((fp[0].value - 1.0).norm() < 1e-15);
        assert_eq!(fp[0].stability, Stability::Marginal);

        let fp = riccati_fixed_points(&CouplingVector::new(0.4, -0.3, 0.0).unwrap());
        assert_eq!(fp.len(), 1);
        assert_eq!(fp[0].value, C64::new(0.0, 0.0));
    }

    proptest! {
        #[test]
        fn fixed_points_zero_the_flow(x in -5.0..5.0f64, y in -5.0..5.0f64, z in -5.0..5.0f64) {
            prop_assume!(x.abs() + y.abs() + z.abs() > 1e-3);
            let a = CouplingVector::new(x, y, z).unwrap();
            for fp in riccati_fixed_points(&a) {
                let scale = a.norm() * (1.0 + fp.value.norm_sqr());
                prop_assert!(riccati_rhs(&a, fp.value).norm() < 1e-12 * scale.max(1.0));
            }
        }

        #[test]
        fn attractor_is_unit(x in -5.0..5.0f64, y in -5.0..5.0f64, z in -5.0..5.0f64) {
            prop_assume!(x.abs() + y.abs() + z.abs() > 1e-6);
            let d = attractor_direction(&CouplingVector::new(x, y, z).unwrap());
            prop_assert!((d.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn riccati_axial_reduces_to_tanh() {
        let alpha = 0.7;
        let a = CouplingVector::axial(alpha).unwrap();
        let t = linspace(10.0 / alpha, 201);
        let tr = riccati_evolve(&a, C64::new(0.0, 0.0), &t, RiccatiOptions::default()).unwrap();
        assert!(tr.pole_at.is_none());
        let wn = wei_norman_evaluate(alpha, 0.0, &t).unwrap();
        for (got, want) in tr.values.iter().zip(&wn.f1) {
            assert!((got - want).norm() < 1e-8);
        }
        let st = riccati_evolve(&a, I, &t, RiccatiOptions::default()).unwrap();
        assert!(st.values.iter().all(|v| (v - I).norm() < 1e-12));
    }

    #[test]
    fn riccati_pole_is_flagged() {
        // f(0) = −2i lies beyond the unstable root −i; it runs off to a pole.
        let a = CouplingVector::axial(1.0).unwrap();
        let t = linspace(5.0, 51);
        let tr = riccati_evolve(&a, C64::new(0.0, -2.0), &t, RiccatiOptions::default()).unwrap();
        let pole = tr.pole_at.expect("pole");
        // closed form i tanh(t + atanh(-2)) with complex atanh: pole at t = atanh(1/2)
        assert!((pole - 0.5f64.atanh()).abs() < 1e-3, "{pole}");
        assert!(tr.times.len() < t.len());
    }

    #[test]
    fn attractor_examples() {
        let d = attractor_direction(&CouplingVector::axial(1.0).unwrap());
        assert_eq!((d.x, d.y, d.z), (0.0, 0.0, -1.0));
        let d = attractor_direction(&CouplingVector::new(1.0, 0.0, 1.0).unwrap());
        let s = 1.0 / 2f64.sqrt();
        assert!((d.x + s).abs() < 1e-15 && d.y == 0.0 && (d.z + s).abs() < 1e-15);
    }
}
