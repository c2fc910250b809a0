use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Privacy parameters in one of the supported accounting notions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrivacyBudget {
    ApproxDp { epsilon: f64, delta: f64 },
    Rdp { alpha: f64, epsilon: f64 },
    Zcdp { rho: f64 },
    Tcdp { rho: f64, omega: f64 },
}

impl PrivacyBudget {
    /// Checks the parameter ranges of the variant.
    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            PrivacyBudget::ApproxDp { epsilon, delta } => epsilon >= 0.0 && (0.0..=1.0).contains(&delta),
            PrivacyBudget::Rdp { alpha, epsilon } => alpha > 1.0 && epsilon >= 0.0,
            PrivacyBudget::Zcdp { rho } => rho > 0.0,
            PrivacyBudget::Tcdp { rho, omega } => rho > 0.0 && omega > 1.0,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(format!("out-of-range budget {self}")))
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PrivacyBudget::ApproxDp { .. } => "approx_dp",
            PrivacyBudget::Rdp { .. } => "rdp",
            PrivacyBudget::Zcdp { .. } => "zcdp",
            PrivacyBudget::Tcdp { .. } => "tcdp",
        }
    }

    /// The RDP guarantee implied at order `alpha`, if any.
    pub fn rdp_at(&self, alpha: f64) -> Option<f64> {
        match *self {
            PrivacyBudget::Rdp { alpha: a, epsilon } if a == alpha => Some(epsilon),
            PrivacyBudget::Zcdp { rho } if alpha > 1.0 => Some(alpha * rho),
            PrivacyBudget::Tcdp { rho, omega } if alpha > 1.0 && alpha < omega => Some(alpha * rho),
            _ => None,
        }
    }
}

impl fmt::Display for PrivacyBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrivacyBudget::ApproxDp { epsilon, delta } => write!(f, "({epsilon}, {delta})-DP"),
            PrivacyBudget::Rdp { alpha, epsilon } => write!(f, "({alpha}, {epsilon})-RDP"),
            PrivacyBudget::Zcdp { rho } => write!(f, "{rho}-zCDP"),
            PrivacyBudget::Tcdp { rho, omega } => write!(f, "({rho}, {omega})-tCDP"),
        }
    }
}
