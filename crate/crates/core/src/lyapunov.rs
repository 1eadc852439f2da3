//! Sum- and max-separable Lyapunov functions built from weight certificates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::certify::{CertKind, WeightCertificate};
use crate::error::{check_dim, Error, Result};
use crate::norm::{NormKind, WeightedNorm};
use crate::scalar::Scalar;
use crate::simulate::{check_envelope, integrate, EnvelopeReport};
use crate::system::{SystemModel, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LyapunovForm {
    /// `Σ v_i |x_i - x*_i|`
    StateSum,
    /// `Σ v_i |f_i(x)|`
    FlowSum,
    /// `max_i |x_i - x*_i| / w_i`
    StateMax,
    /// `max_i |f_i(x)| / w_i`
    FlowMax,
}

impl LyapunovForm {
    pub const ALL: [LyapunovForm; 4] = [LyapunovForm::StateSum, LyapunovForm::FlowSum, LyapunovForm::StateMax, LyapunovForm::FlowMax];

    pub fn norm_kind(self) -> NormKind {
        match self {
            LyapunovForm::StateSum | LyapunovForm::FlowSum => NormKind::L1,
            LyapunovForm::StateMax | LyapunovForm::FlowMax => NormKind::Linf,
        }
    }

    pub fn cert_kind(self) -> CertKind {
        CertKind::from_norm(self.norm_kind())
    }

    pub fn is_state(self) -> bool {
        matches!(self, LyapunovForm::StateSum | LyapunovForm::StateMax)
    }

    /// The two forms a certificate kind supports.
    pub fn for_kind(kind: CertKind) -> [LyapunovForm; 2] {
        match kind {
            CertKind::SumL1 => [LyapunovForm::StateSum, LyapunovForm::FlowSum],
            CertKind::MaxLinf => [LyapunovForm::StateMax, LyapunovForm::FlowMax],
        }
    }
}

impl fmt::Display for LyapunovForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LyapunovForm::StateSum => "STATE_SUM",
            LyapunovForm::FlowSum => "FLOW_SUM",
            LyapunovForm::StateMax => "STATE_MAX",
            LyapunovForm::FlowMax => "FLOW_MAX",
        })
    }
}

#[derive(Clone, Debug)]
pub struct LyapunovFunction<T: Scalar> {
    form: LyapunovForm,
    norm: WeightedNorm<T>,
    equilibrium: Option<Vec<T>>,
    model: Option<SystemModel<T>>,
}

impl<T: Scalar> LyapunovFunction<T> {
    /// Evaluator from raw weights. State forms need `equilibrium`, flow forms need `model`.
    pub fn new(form: LyapunovForm, weights: Vec<T>, equilibrium: Option<Vec<T>>, model: Option<SystemModel<T>>) -> Result<Self> {
        let norm = WeightedNorm::new(form.norm_kind(), weights)?;
        if form.is_state() {
            let eq = equilibrium.as_ref().ok_or_else(|| Error::MissingEquilibrium(format!("{form} needs the equilibrium")))?;
            check_dim(norm.dim(), eq.len())?;
        } else {
            let m = model.as_ref().ok_or_else(|| crate::error::invalid("model", format!("{form} needs the vector field")))?;
            check_dim(norm.dim(), m.dim())?;
        }
        Ok(Self { form, norm, equilibrium, model })
    }

    /// Builds the form from a certificate. Sum forms need a SUM_L1 certificate
    /// and max forms a MAX_LINF one; the equilibrium defaults to the one stored
    /// in the certificate, then the model's known equilibrium.
    pub fn build(cert: &WeightCertificate<T>, form: LyapunovForm, model: &SystemModel<T>, equilibrium: Option<&[T]>) -> Result<Self> {
        if cert.kind != form.cert_kind() {
            return Err(Error::KindFormMismatch { kind: cert.kind.to_string(), form: form.to_string() });
        }
        if !cert.is_usable() {
            return Err(Error::UnusableCertificate(format!("status {} does not justify a Lyapunov function", cert.status)));
        }
        let eq = if form.is_state() {
            let eq = equilibrium.map(<[T]>::to_vec).or_else(|| cert.equilibrium.clone()).or_else(|| model.known_equilibrium().map(<[T]>::to_vec));
            Some(eq.ok_or_else(|| Error::MissingEquilibrium(format!("{form} needs the equilibrium")))?)
        } else {
            None
        };
        Self::new(form, cert.weights.clone(), eq, Some(model.clone()))
    }

    pub fn form(&self) -> LyapunovForm {
        self.form
    }

    pub fn weights(&self) -> &[T] {
        self.norm.weights()
    }

    pub fn equilibrium(&self) -> Option<&[T]> {
        self.equilibrium.as_deref()
    }

    /// Value at `x`; flow forms evaluate `f(0, x)`.
    pub fn eval(&self, x: &[T]) -> Result<T> {
        self.eval_at(T::zero(), x)
    }

    /// Value at `(t, x)`; only flow forms on time-varying models depend on `t`.
    pub fn eval_at(&self, t: T, x: &[T]) -> Result<T> {
        check_dim(self.norm.dim(), x.len())?;
        match (&self.equilibrium, &self.model) {
            (Some(eq), _) if self.form.is_state() => self.norm.dist(x, eq),
            (_, Some(m)) => self.norm.eval(&m.field(t, x)),
            _ => unreachable!("constructor guarantees the needed data"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecreaseReport<T> {
    pub form: LyapunovForm,
    pub initial: T,
    pub last: T,
    /// Largest `V(t_{k+1}) - V(t_k)`, absolute.
    pub max_upward_jump: T,
    /// `max(V(x0), 1e-9)`.
    pub scale: T,
    /// Grid points outside the model's truncation box (reported, not fatal).
    pub excursions: usize,
    pub passed: bool,
    /// Trajectory with `values` filled in.
    pub trajectory: Trajectory<T>,
}

impl<T: Scalar> DecreaseReport<T> {
    pub fn relative_jump(&self) -> T {
        self.max_upward_jump / self.scale
    }

    /// Exponential envelope `V(t) ≤ e^{ct}·V(0)·(1 + 1e-4)` along the stored values.
    pub fn envelope(&self, c: T) -> EnvelopeReport {
        check_envelope(&self.trajectory.times, self.trajectory.values.as_ref().expect("values present"), c)
    }
}

/// Integrates from `x0` and checks that `V` never rises by more than
/// `1e-6·max(V(x0), 1e-9)` between grid times and ends below where it started.
pub fn decrease_along<T: Scalar>(v: &LyapunovFunction<T>, model: &SystemModel<T>, x0: &[T], horizon: T, step: T) -> Result<DecreaseReport<T>> {
    if !model.domain().in_domain(x0) {
        return Err(Error::InvalidDomain("initial state lies outside the model domain".into()));
    }
    let mut traj = integrate(model, x0, T::zero(), horizon, step)?;
    let values: Vec<T> = traj.times.iter().zip(&traj.states).map(|(&t, x)| v.eval_at(t, x)).collect::<Result<_>>()?;
    let initial = values[0];
    let last = values[values.len() - 1];
    let max_upward_jump = values.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max);
    let scale = initial.max(T::lit(1e-9));
    let excursions = traj.states.iter().filter(|x| !model.domain().in_truncation(x)).count();
    let passed = max_upward_jump <= T::lit(1e-6) * scale && (last < initial || initial == T::zero());
    traj.values = Some(values);
    Ok(DecreaseReport { form: v.form, initial, last, max_upward_jump, scale, excursions, passed, trajectory: traj })
}
