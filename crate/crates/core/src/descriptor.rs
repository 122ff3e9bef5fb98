//! Serializable descriptions of maps and potentials, as they appear in
//! experiment configuration files.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::expr::Expr;
use crate::map::IntervalMap;
use crate::potential::{cohomology_reduce, Potential};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapDescriptor {
    Intermittent {
        alpha: f64,
    },
    Doubling,
    Tent,
    Logistic,
    Chebyshev,
    Piecewise {
        ambient: (f64, f64),
        branches: Vec<BranchDescriptor>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDescriptor {
    pub domain: (f64, f64),
    pub expr: String,
}

impl MapDescriptor {
    /// Problems detectable without building the map.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        match self {
            MapDescriptor::Intermittent { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    errors.push(format!("map: alpha outside (0,1) (got {alpha})"));
                }
            }
            MapDescriptor::Piecewise { ambient, branches } => {
                if !(ambient.0 < ambient.1) {
                    errors.push(format!("map: empty ambient interval {ambient:?}"));
                }
                if branches.is_empty() {
                    errors.push("map: piecewise map needs at least one branch".into());
                }
                for (i, b) in branches.iter().enumerate() {
                    if !(b.domain.0 < b.domain.1) {
                        errors.push(format!("map: branch {i} has empty domain {:?}", b.domain));
                    }
                    if let Err(e) = Expr::parse(&b.expr) {
                        errors.push(format!("map: branch {i}: {e}"));
                    }
                }
            }
            _ => {}
        }
        errors
    }

    pub fn build(&self) -> Result<IntervalMap> {
        match self {
            MapDescriptor::Intermittent { alpha } => IntervalMap::intermittent(*alpha),
            MapDescriptor::Doubling => IntervalMap::builtin("doubling"),
            MapDescriptor::Tent => IntervalMap::builtin("tent"),
            MapDescriptor::Logistic => IntervalMap::builtin("logistic"),
            MapDescriptor::Chebyshev => IntervalMap::builtin("chebyshev"),
            MapDescriptor::Piecewise { ambient, branches } => {
                let pieces: Vec<((f64, f64), &str)> = branches
                    .iter()
                    .map(|b| (b.domain, b.expr.as_str()))
                    .collect();
                IntervalMap::piecewise(*ambient, &pieces, "piecewise")
            }
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialDescriptor {
    Constant {
        c: f64,
    },
    Cosine {
        #[serde(default = "one")]
        amp: f64,
        #[serde(default = "one")]
        freq: f64,
    },
    /// −t log|Df|. The Hölder exponent defaults to the map's regularity.
    Geometric {
        t: f64,
        #[serde(default)]
        alpha: Option<f64>,
    },
    DistancePower {
        #[serde(rename = "C")]
        c: f64,
        alpha: f64,
        points: Vec<f64>,
    },
    Expr {
        expr: String,
        alpha: f64,
    },
    /// The cohomologous potential (1/n) S_n(base).
    Reduced {
        base: Box<PotentialDescriptor>,
        n: usize,
    },
}

fn check_exponent(alpha: f64, errors: &mut Vec<String>) {
    if !(alpha > 0.0 && alpha <= 1.0) {
        errors.push(format!("potential: alpha outside (0,1] (got {alpha})"));
    }
}

impl PotentialDescriptor {
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        match self {
            PotentialDescriptor::Geometric { alpha: Some(a), .. } => {
                check_exponent(*a, &mut errors)
            }
            PotentialDescriptor::DistancePower { alpha, points, .. } => {
                check_exponent(*alpha, &mut errors);
                if points.is_empty() {
                    errors.push("potential: distance_power needs at least one point".into());
                }
            }
            PotentialDescriptor::Expr { expr, alpha } => {
                check_exponent(*alpha, &mut errors);
                if let Err(e) = Expr::parse(expr) {
                    errors.push(format!("potential: {e}"));
                }
            }
            PotentialDescriptor::Reduced { base, n } => {
                errors.extend(base.validate());
                if *n == 0 {
                    errors.push("potential: reduction needs n ≥ 1".into());
                }
            }
            _ => {}
        }
        errors
    }

    pub fn build(&self, map: &IntervalMap) -> Result<Potential> {
        let p = match self {
            PotentialDescriptor::Constant { c } => Potential::constant(*c),
            PotentialDescriptor::Cosine { amp, freq } => Potential::cosine(*amp, *freq),
            PotentialDescriptor::Geometric { t, alpha } => {
                Potential::geometric(map, *t, alpha.unwrap_or(map.regularity()))?
            }
            PotentialDescriptor::DistancePower { c, alpha, points } => {
                Potential::distance_power(*c, *alpha, points.clone())?
            }
            PotentialDescriptor::Expr { expr, alpha } => Potential::expression(expr, *alpha)?,
            PotentialDescriptor::Reduced { base, n } => {
                cohomology_reduce(map, &base.build(map)?, *n)?.0
            }
        };
        Ok(p.with_domain(map.ambient()))
    }
}
