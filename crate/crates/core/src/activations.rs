//! Activation functions.
//!
//! Every hidden neuron applies the same elementwise nonlinearity `φ`. Two of
//! the kinds carry a scalar shape parameter: the negative slope `α` of the
//! leaky ReLU and the negative-asymptote slope `β` of the LELU,
//!
//! ```text
//! LELU(x, β) = x                          for x > 0
//!            = exp((1 − β) x) − 1 + β x   for x ≤ 0
//! ```
//!
//! which is C1 at the origin and has slopes bounded in `[β, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default evaluation interval for [`flexibility_score`].
pub const FLEX_DOMAIN: (f64, f64) = (-10.0, 10.0);

/// Default sample count for numeric slope scans.
pub const FLEX_SAMPLES: usize = 100_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Lu,
    Tanh,
    Relu,
    LeakyRelu,
    Elu,
    Silu,
    Softplus,
    Lelu,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 8] = [
        ActivationKind::Lu,
        ActivationKind::Tanh,
        ActivationKind::Relu,
        ActivationKind::LeakyRelu,
        ActivationKind::Elu,
        ActivationKind::Silu,
        ActivationKind::Softplus,
        ActivationKind::Lelu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Lu => "lu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu => "leaky_relu",
            ActivationKind::Elu => "elu",
            ActivationKind::Silu => "silu",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Lelu => "lelu",
        }
    }

    /// Whether the kind has a shape parameter (`α` or `β`).
    pub fn is_parametric(self) -> bool {
        matches!(self, ActivationKind::LeakyRelu | ActivationKind::Lelu)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidActivation(format!("unknown activation kind '{s}'")))
    }
}

/// An activation kind together with its shape parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawActivationSpec")]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    #[serde(default)]
    pub param: f64,
    #[serde(default)]
    pub trainable: bool,
}

#[derive(Deserialize)]
struct RawActivationSpec {
    kind: ActivationKind,
    #[serde(default)]
    param: f64,
    #[serde(default)]
    trainable: bool,
}

impl TryFrom<RawActivationSpec> for ActivationSpec {
    type Error = Error;

    fn try_from(raw: RawActivationSpec) -> Result<Self> {
        ActivationSpec::new(raw.kind, raw.param, raw.trainable)
    }
}

impl ActivationSpec {
    pub fn new(kind: ActivationKind, param: f64, trainable: bool) -> Result<Self> {
        let spec = ActivationSpec { kind, param, trainable };
        spec.validate()?;
        Ok(spec)
    }

    /// A kind without a shape parameter.
    pub fn plain(kind: ActivationKind) -> Self {
        ActivationSpec { kind, param: 0.0, trainable: false }
    }

    pub fn lelu(beta: f64) -> Self {
        ActivationSpec { kind: ActivationKind::Lelu, param: beta, trainable: false }
    }

    pub fn leaky_relu(alpha: f64) -> Self {
        ActivationSpec { kind: ActivationKind::LeakyRelu, param: alpha, trainable: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_parametric() {
            if !(self.param.is_finite() && (0.0..1.0).contains(&self.param)) {
                return Err(Error::InvalidActivation(format!(
                    "{} parameter must lie in [0, 1), got {}",
                    self.kind, self.param
                )));
            }
        } else if self.trainable {
            return Err(Error::InvalidActivation(format!(
                "{} has no trainable parameter",
                self.kind
            )));
        }
        Ok(())
    }

    /// Same kind with a different shape parameter (used for per-layer `β`).
    pub fn with_param(self, param: f64) -> Self {
        ActivationSpec { param, ..self }
    }

    /// Short label such as `lelu(0.3)` or `relu`.
    pub fn label(&self) -> String {
        if self.kind.is_parametric() {
            format!("{}({})", self.kind, self.param)
        } else {
            self.kind.name().to_string()
        }
    }

    /// φ(x).
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Lu => x,
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    self.param * x
                }
            }
            ActivationKind::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            ActivationKind::Silu => x * sigmoid(x),
            ActivationKind::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            ActivationKind::Lelu => {
                if x > 0.0 {
                    x
                } else {
                    ((1.0 - self.param) * x).exp_m1() + self.param * x
                }
            }
        }
    }

    /// φ′(x). ReLU and leaky ReLU take the right-hand slope at the kink.
    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Lu => 1.0,
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::LeakyRelu => {
                if x >= 0.0 {
                    1.0
                } else {
                    self.param
                }
            }
            ActivationKind::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            ActivationKind::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            ActivationKind::Softplus => sigmoid(x),
            ActivationKind::Lelu => {
                if x > 0.0 {
                    1.0
                } else {
                    let k = 1.0 - self.param;
                    k * (k * x).exp() + self.param
                }
            }
        }
    }

    /// ∂φ/∂param, defined for leaky ReLU and LELU only.
    pub fn param_derivative(&self, x: f64) -> Result<f64> {
        match self.kind {
            ActivationKind::LeakyRelu => Ok(if x > 0.0 { 0.0 } else { x }),
            ActivationKind::Lelu => Ok(if x > 0.0 {
                0.0
            } else {
                -x * ((1.0 - self.param) * x).exp_m1()
            }),
            kind => Err(Error::InvalidActivation(format!("{kind} has no shape parameter"))),
        }
    }
}

impl fmt::Display for ActivationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// η(φ) together with the slope extrema it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlexibilityScore {
    pub eta: f64,
    pub min_slope: f64,
    pub max_slope: f64,
}

impl FlexibilityScore {
    fn from_slopes(min_slope: f64, max_slope: f64) -> Self {
        FlexibilityScore { eta: 1.0 - min_slope / max_slope, min_slope, max_slope }
    }
}

/// Flexibility score `η = 1 − min(φ′)/max(φ′)`.
///
/// Kinds with known slope bounds use the infimum/supremum over the real line
/// and ignore `domain`. SiLU has no convenient closed form, so its slopes are
/// scanned over `samples` uniformly spaced points of `domain`.
pub fn flexibility_score(spec: &ActivationSpec, domain: (f64, f64), samples: usize) -> FlexibilityScore {
    match spec.kind {
        ActivationKind::Lu => FlexibilityScore::from_slopes(1.0, 1.0),
        ActivationKind::Tanh
        | ActivationKind::Relu
        | ActivationKind::Elu
        | ActivationKind::Softplus => FlexibilityScore::from_slopes(0.0, 1.0),
        ActivationKind::LeakyRelu | ActivationKind::Lelu => {
            FlexibilityScore::from_slopes(spec.param, 1.0)
        }
        ActivationKind::Silu => {
            let (lo, hi) = domain;
            assert!(hi > lo && samples >= 2, "degenerate flexibility domain");
            let step = (hi - lo) / (samples - 1) as f64;
            let (min, max) = (0..samples)
                .map(|i| spec.derivative(lo + i as f64 * step))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), d| (mn.min(d), mx.max(d)));
            FlexibilityScore::from_slopes(min, max)
        }
    }
}
