//! The fixed set of checks an experiment can request.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    LaplaceSuperprocess,
    LaplaceImmigration,
    SkewIdentity,
    ScAxiom,
    Occupation,
    Stationary,
    NearBirth,
    MomentFlow,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: CheckName,
    /// The identity being checked.
    pub anchor: &'static str,
    pub summary: &'static str,
}

pub const CATALOG: [CatalogEntry; 8] = [
    CatalogEntry {
        name: CheckName::LaplaceSuperprocess,
        anchor: "E exp(-X_t(f)) = exp(-mu(V_t f))",
        summary: "particle superprocess Laplace value against the cumulant flow",
    },
    CatalogEntry {
        name: CheckName::LaplaceImmigration,
        anchor: "E exp(-Y_t(f)) = exp(-mu(V_t f) - J_t(f))",
        summary: "immigration process Laplace value against the SC-semigroup",
    },
    CatalogEntry {
        name: CheckName::SkewIdentity,
        anchor: "J_{r+t}(f) = J_r(V_t f) + J_t(f)",
        summary: "skew convolution identity of the homogeneous SC-semigroup",
    },
    CatalogEntry {
        name: CheckName::ScAxiom,
        anchor: "J_{r,t}(f) = J_{r,s}(V_{t-s} f) + J_{s,t}(f)",
        summary: "inhomogeneous SC-semigroup axiom on (r, s, t) triples",
    },
    CatalogEntry {
        name: CheckName::Occupation,
        anchor: "E exp(-Y_t(f) - int_0^t Y_s(g) ds) = exp(-mu(u_t) - int_0^t S_r(kappa, f, g) dr)",
        summary: "joint Laplace value of the state and its weighted occupation time",
    },
    CatalogEntry {
        name: CheckName::Stationary,
        anchor: "E exp(-Y(f)) = exp(-lim_t J_t(f))",
        summary: "stationary immigration law against the long-time limit",
    },
    CatalogEntry {
        name: CheckName::NearBirth,
        anchor: "w_t(E) -> 0 and w_t / w_t(E) -> delta_x as t -> 0+",
        summary: "clusters just after birth are small and sit at the birth site",
    },
    CatalogEntry {
        name: CheckName::MomentFlow,
        anchor: "E X_t(f) = mu(exp(t(Q - b)) f)",
        summary: "first moment of the particle superprocess",
    },
];

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::LaplaceSuperprocess => "laplace_superprocess",
            CheckName::LaplaceImmigration => "laplace_immigration",
            CheckName::SkewIdentity => "skew_identity",
            CheckName::ScAxiom => "sc_axiom",
            CheckName::Occupation => "occupation",
            CheckName::Stationary => "stationary",
            CheckName::NearBirth => "near_birth",
            CheckName::MomentFlow => "moment_flow",
        }
    }

    pub fn entry(self) -> &'static CatalogEntry {
        CATALOG.iter().find(|e| e.name == self).expect("every check is catalogued")
    }

    /// Whether the check reads a functional target.
    pub fn needs_target(self) -> bool {
        self != CheckName::NearBirth
    }

    pub fn needs_immigration(self) -> bool {
        matches!(self, CheckName::LaplaceImmigration | CheckName::SkewIdentity | CheckName::Stationary)
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line per entry.
pub fn render_catalog() -> String {
    CATALOG.iter().map(|e| format!("{:<22}{}\n", e.name.as_str(), e.anchor)).collect()
}
