//! Complex time-dependent coupling g(t) and model parameters.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hilbert::FockTruncation;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// g(t) = g0 e^{−iωg t}
    #[default]
    ExpMinus,
    /// g(t) = g0 e^{+iωg t}
    ExpPlus,
}

impl SignConvention {
    pub fn flipped(self) -> Self {
        match self {
            Self::ExpMinus => Self::ExpPlus,
            Self::ExpPlus => Self::ExpMinus,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveKind {
    Constant,
    CircularPt,
    Elliptical,
}

/// Parametrization of the coupling. `omega_g`, the phases and `eta` are
/// ignored by the constant drive; the phases and `eta` only matter for the
/// elliptical drive.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub kind: DriveKind,
    pub g0: f64,
    #[serde(default)]
    pub omega_g: f64,
    #[serde(default)]
    pub phi_x: f64,
    #[serde(default)]
    pub phi_y: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default)]
    pub sign_convention: SignConvention,
}

fn one() -> f64 {
    1.0
}

impl DriveSpec {
    pub fn constant(g0: f64) -> Self {
        Self {
            kind: DriveKind::Constant,
            g0,
            omega_g: 0.0,
            phi_x: 0.0,
            phi_y: 0.0,
            eta: 1.0,
            sign_convention: SignConvention::ExpMinus,
        }
    }

    pub fn circular(g0: f64, omega_g: f64, sign_convention: SignConvention) -> Self {
        Self {
            kind: DriveKind::CircularPt,
            omega_g,
            sign_convention,
            ..Self::constant(g0)
        }
    }

    pub fn elliptical(
        g0: f64,
        omega_g: f64,
        eta: f64,
        phi_x: f64,
        phi_y: f64,
        sign_convention: SignConvention,
    ) -> Self {
        Self {
            kind: DriveKind::Elliptical,
            g0,
            omega_g,
            eta,
            phi_x,
            phi_y,
            sign_convention,
        }
    }

    /// Zero coupling is accepted so that undriven reference runs can share
    /// the same code path; negative or non-finite values are not.
    pub fn validate(&self) -> Result<()> {
        if !(self.g0 >= 0.0) || !self.g0.is_finite() {
            return Err(invalid(
                "drive.g0",
                format!("{} must be finite and >= 0", self.g0),
            ));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(invalid(
                "drive.eta",
                format!("{} must be finite and >= 0", self.eta),
            ));
        }
        for (name, v) in [
            ("drive.omega_g", self.omega_g),
            ("drive.phi_x", self.phi_x),
            ("drive.phi_y", self.phi_y),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// Ellipse orientation Φ = (φx − φy)/2.
    pub fn orientation(&self) -> f64 {
        (self.phi_x - self.phi_y) / 2.0
    }

    pub fn with_sign_convention(self, sign_convention: SignConvention) -> Self {
        Self {
            sign_convention,
            ..self
        }
    }

    pub fn evaluate(&self, t: f64) -> C64 {
        evaluate_drive(self, t)
    }
}

pub fn evaluate_drive(spec: &DriveSpec, t: f64) -> C64 {
    let wt = spec.omega_g * t;
    match spec.kind {
        DriveKind::Constant => C64::from(spec.g0),
        DriveKind::CircularPt => {
            let sign = match spec.sign_convention {
                SignConvention::ExpMinus => -1.0,
                SignConvention::ExpPlus => 1.0,
            };
            C64::from_polar(spec.g0, sign * wt)
        }
        DriveKind::Elliptical => {
            let g = C64::new(
                spec.g0 * (wt + spec.phi_x).cos(),
                spec.g0 * spec.eta * (wt + spec.phi_y).sin(),
            );
            match spec.sign_convention {
                SignConvention::ExpPlus => g,
                SignConvention::ExpMinus => g.conj(),
            }
        }
    }
}

/// How the qubit term enters the bare Hamiltonian.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitTerm {
    /// ωq σz, level splitting 2ωq.
    #[default]
    AsPrinted,
    /// ½ ωq σz, level splitting ωq.
    Half,
}

impl QubitTerm {
    pub fn coefficient(self) -> f64 {
        match self {
            Self::AsPrinted => 1.0,
            Self::Half => 0.5,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub omega_0: f64,
    pub omega_q: f64,
    pub n_max: FockTruncation,
    #[serde(default)]
    pub qubit_term: QubitTerm,
}

impl ModelParams {
    pub fn new(omega_0: f64, omega_q: f64, n_max: usize) -> Result<Self> {
        let p = Self {
            omega_0,
            omega_q,
            n_max: FockTruncation::new(n_max)?,
            qubit_term: QubitTerm::AsPrinted,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_qubit_term(self, qubit_term: QubitTerm) -> Self {
        Self { qubit_term, ..self }
    }

    pub fn trunc(&self) -> FockTruncation {
        self.n_max
    }

    /// Frequencies must be finite and non-negative. Zero is allowed for
    /// degenerate test Hamiltonians; physical runs use positive values.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("model.omega_0", self.omega_0),
            ("model.omega_q", self.omega_q),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Resonance {
    /// Difference frequency that makes the co-rotating terms stationary.
    Jc,
    /// Sum frequency that makes the counter-rotating terms stationary.
    AntiJc,
}

pub fn resonance_frequency(params: &ModelParams, target: Resonance) -> f64 {
    match target {
        Resonance::AntiJc => params.omega_0 + params.omega_q,
        Resonance::Jc => params.omega_0 - params.omega_q,
    }
}
