//! Rabi, Jaynes–Cummings and anti-Jaynes–Cummings Hamiltonians.
//!
//! Every form is stored as `bare + g(t) · interaction`, with both pieces
//! built once. Integrators call [`Generator::apply`] and never rebuild
//! matrices.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::drive::{DriveKind, DriveSpec, ModelParams};
use crate::error::{invalid, Result};
use crate::hilbert::{build_standard_operators, OperatorMatrix, SparseOperator, StandardOperators};

/// Right-hand side of dψ/dt = −i H(t) ψ, exposed as the product H(t)ψ.
pub trait Generator: Sync {
    fn dim(&self) -> usize;

    /// `out = H(t) · psi`
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]);

    /// Real, time-independent diagonal part D of H, if the generator has one
    /// worth splitting off. The integrator then works in the frame rotating
    /// with D, which removes its fast phases from the step-size control.
    fn static_diagonal(&self) -> Option<&[f64]> {
        None
    }

    /// `out = (H(t) − D) · psi`
    fn apply_remainder(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        self.apply(t, psi, out);
        if let Some(d) = self.static_diagonal() {
            for ((o, p), d) in out.iter_mut().zip(psi).zip(d) {
                *o -= p * d;
            }
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    FullRabi,
    Jc,
    AntiJc,
}

#[derive(Clone, Debug)]
pub struct HamiltonianBuilder {
    params: ModelParams,
    drive: DriveSpec,
    form: Form,
    bare: OperatorMatrix,
    interaction: OperatorMatrix,
    bare_sparse: SparseOperator,
    interaction_sparse: SparseOperator,
    bare_diagonal: Option<Vec<f64>>,
}

impl HamiltonianBuilder {
    pub fn new(params: ModelParams, drive: DriveSpec, form: Form) -> Result<Self> {
        params.validate()?;
        drive.validate()?;
        let ops = build_standard_operators(params.trunc());
        let (bare, interaction) = assemble(&ops, &params, form);
        Ok(Self {
            bare_diagonal: real_diagonal(&bare),
            bare_sparse: bare.to_sparse(),
            interaction_sparse: interaction.to_sparse(),
            params,
            drive,
            form,
            bare,
            interaction,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn drive(&self) -> &DriveSpec {
        &self.drive
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn bare(&self) -> &OperatorMatrix {
        &self.bare
    }

    pub fn interaction(&self) -> &OperatorMatrix {
        &self.interaction
    }

    /// Coupling multiplying the interaction matrix at time `t`. The frame-
    /// reduced forms use the constant amplitude g0.
    pub fn coupling(&self, t: f64) -> C64 {
        match self.form {
            Form::FullRabi => self.drive.evaluate(t),
            Form::Jc | Form::AntiJc => C64::from(self.drive.g0),
        }
    }

    /// True when H(t) is Hermitian for every t.
    pub fn is_hermitian(&self) -> bool {
        match self.form {
            Form::Jc | Form::AntiJc => true,
            Form::FullRabi => self.drive.kind == DriveKind::Constant || self.drive.g0 == 0.0,
        }
    }

    pub fn build(&self, t: f64) -> OperatorMatrix {
        build_hamiltonian(self, t)
    }
}

impl Generator for HamiltonianBuilder {
    fn dim(&self) -> usize {
        self.bare.dim()
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        self.bare_sparse.apply_add(C64::new(1.0, 0.0), psi, out);
        let g = self.coupling(t);
        if g != C64::new(0.0, 0.0) {
            self.interaction_sparse.apply_add(g, psi, out);
        }
    }

    fn static_diagonal(&self) -> Option<&[f64]> {
        self.bare_diagonal.as_deref()
    }

    fn apply_remainder(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        if self.bare_diagonal.is_none() {
            self.apply(t, psi, out);
            return;
        }
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        let g = self.coupling(t);
        if g != C64::new(0.0, 0.0) {
            self.interaction_sparse.apply_add(g, psi, out);
        }
    }
}

fn real_diagonal(m: &OperatorMatrix) -> Option<Vec<f64>> {
    let e = m.entries();
    for ((i, j), z) in e.indexed_iter() {
        if (i != j && *z != C64::new(0.0, 0.0)) || (i == j && z.im != 0.0) {
            return None;
        }
    }
    Some(e.diag().iter().map(|z| z.re).collect())
}

fn assemble(
    ops: &StandardOperators,
    p: &ModelParams,
    form: Form,
) -> (OperatorMatrix, OperatorMatrix) {
    let w0 = C64::from(p.omega_0);
    let wq = C64::from(p.omega_q * p.qubit_term.coefficient());
    let qubit = ops.sigma_z.scale(wq);
    match form {
        Form::FullRabi => {
            let bare = ops.number.scale(w0).add(&qubit);
            let v = ops
                .a_dagger
                .add(&ops.a)
                .dot(&ops.sigma_plus.add(&ops.sigma_minus));
            (bare, v)
        }
        Form::Jc => {
            let bare = ops.number.scale(w0).add(&qubit);
            let v = ops
                .a_dagger
                .dot(&ops.sigma_minus)
                .add(&ops.a.dot(&ops.sigma_plus));
            (bare, v)
        }
        Form::AntiJc => {
            let bare = ops.number_plus_one.scale(w0).add(&qubit);
            let v = ops
                .a
                .dot(&ops.sigma_minus)
                .add(&ops.a_dagger.dot(&ops.sigma_plus));
            (bare, v)
        }
    }
}

pub fn build_hamiltonian(builder: &HamiltonianBuilder, t: f64) -> OperatorMatrix {
    builder
        .bare
        .add(&builder.interaction.scale(builder.coupling(t)))
}

/// Effective coupling direction of the elliptical drive, g0·(η cosΦ, η sinΦ, 1).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CouplingVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if x == 0.0 && y == 0.0 && z == 0.0 {
            return Err(invalid("coupling_vector", "all components are zero"));
        }
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(invalid("coupling_vector", "components must be finite"));
        }
        Ok(Self { x, y, z })
    }

    /// Axial coupling (0, 0, α).
    pub fn axial(alpha: f64) -> Result<Self> {
        Self::new(0.0, 0.0, alpha)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// αx + iαy
    pub fn transverse(&self) -> C64 {
        C64::new(self.x, self.y)
    }
}

pub fn effective_coupling_vector(g0: f64, eta: f64, orientation: f64) -> Result<CouplingVector> {
    if !(g0 > 0.0) {
        return Err(invalid("g0", format!("{g0} must be > 0")));
    }
    CouplingVector::new(
        g0 * eta * orientation.cos(),
        g0 * eta * orientation.sin(),
        g0,
    )
}
