//! Dispatch of a validated configuration to the library operations.

use std::path::PathBuf;

use serde_json::{json, Value};
use thermo_core::analysis::{hyperbolicity_check, kink_detect, lyapunov_bounds, pressure_scan};
use thermo_core::imfs::{
    baseline_integral, build_imfs, imfs_freeness_check, imfs_pressure_lower_bound, slack_constant,
    ImfsElement, ImfsSystem,
};
use thermo_core::operator::{
    build_operator, correlation_decay_rate, correlation_sum, entropy_and_integral,
    equilibrium_measure, leading_eigen, mixing_rate, pressure_operator,
};
use thermo_core::potential::holder_modulus;
use thermo_core::pullback::{distortion_constant, empirical_distortion, shrinking_fit};
use thermo_core::tree::{build_tree_with_budget, max_backward_birkhoff, tree_pressure};
use thermo_core::{Error, IntervalMap, Potential, PotentialDescriptor};

use crate::config::{Command, ConfigError, ExperimentConfig, Format};
use crate::emit::{to_json_bytes, write_atomic, Cell, Table, SCHEMA};

/// Grid used to estimate the Hölder constant of φ when none is configured.
const HOLDER_GRID: usize = 1025;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Compute(#[from] Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 for invalid input, 3 for exhausted budgets or iterations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Compute(e) => match e {
                Error::Precondition(_) | Error::Domain(_) | Error::Parse(_) => 2,
                Error::Budget { .. } | Error::Convergence { .. } => 3,
                _ => 1,
            },
            RunError::Io(_) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, details): (&str, Vec<String>) = match self {
            RunError::Config(ConfigError::Invalid(errs)) => ("config", errs.clone()),
            RunError::Config(ConfigError::Malformed(_)) => ("config", Vec::new()),
            RunError::Compute(e) => (e.kind(), Vec::new()),
            RunError::Io(_) => ("io", Vec::new()),
        };
        json!({
            "schema": SCHEMA,
            "error": {"kind": kind, "message": self.to_string(), "details": details, "exit_code": self.exit_code()},
        })
    }
}

/// A command's result in both shapes.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub json: Value,
    pub table: Option<Table>,
}

impl Outcome {
    pub fn render(&self, format: Format) -> std::io::Result<Vec<u8>> {
        match (format, &self.table) {
            (Format::Csv, Some(t)) => Ok(t.render().into_bytes()),
            _ => to_json_bytes(&self.json),
        }
    }
}

fn val<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result types serialize")
}

fn header(
    cfg: &ExperimentConfig,
    map: &IntervalMap,
    phi: &Potential,
) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(cfg.command.name()));
    m.insert("map".into(), json!(map.label()));
    m.insert("potential".into(), json!(phi.label()));
    m
}

fn merge(mut head: serde_json::Map<String, Value>, body: Value) -> Value {
    if let Value::Object(fields) = body {
        head.extend(fields);
    }
    Value::Object(head)
}

/// Runs the configured command. The config must already be validated.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let map = cfg.map.build()?;
    let phi = cfg.phi().build(&map)?;
    let head = header(cfg, &map, &phi);
    let (lo, hi) = map.ambient();
    let outcome = match cfg.command {
        Command::PressureTree => {
            let tree =
                build_tree_with_budget(&map, &phi, cfg.x0(), cfg.depth(), cfg.node_budget())?;
            let estimate = if tree.depth >= 4 {
                Some(tree_pressure(&tree)?)
            } else {
                None
            };
            let (max_avg, argmax) = max_backward_birkhoff(&tree);
            let levels: Vec<Value> = (0..=tree.depth)
                .map(|k| json!({"level": k, "log_z": tree.log_z[k], "leaf_count": tree.counts[k]}))
                .collect();
            let table = Table {
                header: vec!["level", "log_Z", "leaf_count"],
                rows: (1..=tree.depth)
                    .map(|k| {
                        vec![
                            Cell::Int(k as u64),
                            Cell::Float(tree.log_z[k]),
                            Cell::Int(tree.counts[k] as u64),
                        ]
                    })
                    .collect(),
            };
            Outcome {
                json: merge(
                    head,
                    json!({
                        "base": tree.base,
                        "requested_base": tree.requested_base,
                        "nudged": tree.nudged(),
                        "depth": tree.depth,
                        "pressure": estimate,
                        "max_backward_birkhoff": {"value": max_avg, "leaf": argmax},
                        "levels": levels,
                    }),
                ),
                table: Some(table),
            }
        }
        Command::PressureUlam => {
            let k = cfg.cells();
            let estimate = pressure_operator(&map, &phi, k)?;
            let op = build_operator(&map, &phi, k)?;
            let eig = leading_eigen(&op)?;
            let eq = equilibrium_measure(&op, &eig);
            let equilibrium = match entropy_and_integral(&map, &phi, &eq.weights, estimate.value) {
                Ok((h, integral)) => {
                    json!({"entropy": h, "integral": integral, "invariance_defect": eq.invariance_defect})
                }
                Err(e) => {
                    json!({"error": e.to_string(), "invariance_defect": eq.invariance_defect})
                }
            };
            let table = Table {
                header: vec![
                    "cells",
                    "log_lambda",
                    "coarse_log_lambda",
                    "residual",
                    "iterations",
                ],
                rows: vec![vec![
                    Cell::Int(k as u64),
                    Cell::Float(estimate.value),
                    Cell::Float(estimate.coarse_value.unwrap_or(f64::NAN)),
                    Cell::Float(estimate.residual),
                    Cell::Int(eig.iterations as u64),
                ]],
            };
            Outcome {
                json: merge(
                    head,
                    json!({
                        "cells": k,
                        "pressure": estimate,
                        "lambda": eig.lambda,
                        "iterations": eig.iterations,
                        "primitive": op.primitive,
                        "equilibrium": equilibrium,
                    }),
                ),
                table: Some(table),
            }
        }
        Command::Hyperbolicity => {
            let report = hyperbolicity_check(
                &map,
                &phi,
                cfg.depth(),
                cfg.cells(),
                cfg.max_period(),
                cfg.grid(),
            )?;
            Outcome {
                json: merge(head, val(&report)),
                table: None,
            }
        }
        Command::Scan => {
            let psi = cfg.psi.as_ref().expect("validated").build(&map)?;
            let t = cfg.t_points();
            let curve = pressure_scan(&map, &phi, &psi, &t, cfg.cells())?;
            let kinks = if t.len() >= 7 {
                kink_detect(&curve)?
            } else {
                Vec::new()
            };
            let table = Table {
                header: vec!["t", "P", "dP", "d2P"],
                rows: (0..t.len())
                    .map(|i| {
                        vec![
                            Cell::Float(curve.t[i]),
                            Cell::Float(curve.values[i]),
                            Cell::Float(curve.dp[i]),
                            Cell::Float(curve.d2p[i]),
                        ]
                    })
                    .collect(),
            };
            Outcome {
                json: merge(
                    head,
                    json!({
                        "psi": psi.label(),
                        "cells": cfg.cells(),
                        "t": curve.t,
                        "values": curve.values,
                        "dp": curve.dp,
                        "d2p": curve.d2p,
                        "convex": curve.convex,
                        "min_second_difference": curve.min_second_difference,
                        "residuals": curve.estimates.iter().map(|e| e.residual).collect::<Vec<_>>(),
                        "kinks": kinks,
                    }),
                ),
                table: Some(table),
            }
        }
        Command::Shrinking => {
            let center = cfg.center.unwrap_or(0.5 * (lo + hi));
            let fit = shrinking_fit(&map, center, cfg.rho(), cfg.n_max())?;
            let table = Table {
                header: vec!["n", "max_diam"],
                rows: fit
                    .max_diams
                    .iter()
                    .map(|&(n, d)| vec![Cell::Int(n as u64), Cell::Float(d)])
                    .collect(),
            };
            Outcome {
                json: merge(
                    head,
                    json!({"center": center, "rho": cfg.rho(), "fit": fit}),
                ),
                table: Some(table),
            }
        }
        Command::Distortion => {
            let center = cfg.center.unwrap_or(0.5 * (lo + hi));
            let n = cfg.n();
            let empirical = empirical_distortion(&map, &phi, center, cfg.rho(), n)?;
            let (c0, beta) = match (cfg.c0, cfg.beta) {
                (Some(c0), Some(beta)) => (c0, beta),
                (c0, beta) => {
                    let fit = shrinking_fit(&map, center, cfg.rho(), n.max(6))?;
                    (c0.unwrap_or(fit.c_hat), beta.unwrap_or(fit.beta_hat))
                }
            };
            let c_star = match cfg.c_star {
                Some(c) => c,
                None => holder_modulus(&phi, HOLDER_GRID)?,
            };
            let alpha = phi.holder_exponent();
            let (constant, note) = match distortion_constant(c_star, c0, alpha, beta) {
                Ok(c) => (Some(c), None),
                Err(e @ Error::Divergence(_)) => (None, Some(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            Outcome {
                json: merge(
                    head,
                    json!({
                        "center": center,
                        "rho": cfg.rho(),
                        "n": n,
                        "empirical": empirical,
                        "constant": constant,
                        "inputs": {"c_star": c_star, "c0": c0, "alpha": alpha, "beta": beta},
                        "bounded": constant.map(|c| empirical <= c),
                        "note": note,
                    }),
                ),
                table: None,
            }
        }
        Command::Imfs => {
            let b0 = cfg.b0.expect("validated");
            let system = match (&cfg.times, &cfg.words) {
                (Some(times), _) => build_imfs(&map, &phi, b0, times)?,
                (None, Some(words)) => ImfsSystem {
                    elements: words
                        .iter()
                        .map(|w| ImfsElement::from_word(&map, &phi, b0, w.clone()))
                        .collect::<Result<_, _>>()?,
                    warnings: Vec::new(),
                },
                (None, None) => unreachable!("validated"),
            };
            let x0 = cfg.x0.unwrap_or(0.5 * (b0.0 + b0.1));
            let freeness = imfs_freeness_check(
                &map,
                &system.elements,
                x0,
                cfg.max_word_len(),
                cfg.time_budget(),
            )?;
            let integral = cfg
                .integral
                .unwrap_or_else(|| baseline_integral(&system.elements));
            let d = slack_constant(&system.elements, integral);
            let bound = imfs_pressure_lower_bound(&system.elements, integral, d)?;
            Outcome {
                json: merge(
                    head,
                    json!({
                        "b0": b0,
                        "elements": system.elements,
                        "warnings": system.warnings,
                        "freeness": freeness,
                        "integral": integral,
                        "slack": d,
                        "lower_bound": bound,
                        "lower_bound_valid": freeness.free,
                    }),
                ),
                table: None,
            }
        }
        Command::Lyapunov => {
            let b = lyapunov_bounds(&map, cfg.max_period(), cfg.cells())?;
            Outcome {
                json: merge(head, val(&b)),
                table: None,
            }
        }
        Command::Mixing => {
            let op = build_operator(&map, &phi, cfg.cells())?;
            let eig = leading_eigen(&op)?;
            let rate = mixing_rate(&op, &eig);
            let eq = equilibrium_measure(&op, &eig);
            let default_obs = PotentialDescriptor::Cosine {
                amp: 1.0,
                freq: 1.0,
            };
            let (a, b) = cfg
                .observables
                .clone()
                .unwrap_or((default_obs.clone(), default_obs));
            let (psi1, psi2) = (a.build(&map)?, b.build(&map)?);
            let corr = correlation_sum(&map, &psi1, &psi2, &eq.weights, cfg.n())?;
            Outcome {
                json: merge(
                    head,
                    json!({
                        "cells": cfg.cells(),
                        "mixing": rate,
                        "observables": [psi1.label(), psi2.label()],
                        "correlations": corr,
                        "decay_rate": correlation_decay_rate(&corr),
                    }),
                ),
                table: None,
            }
        }
    };
    Ok(outcome)
}

/// Validates, executes and writes the result to the configured path (or
/// stdout). Returns the path written, if any.
pub fn run(cfg: &ExperimentConfig) -> Result<Option<PathBuf>, RunError> {
    cfg.check()?;
    let outcome = execute(cfg)?;
    let bytes = outcome.render(cfg.format())?;
    match &cfg.output {
        Some(path) => {
            write_atomic(path, &bytes)?;
            Ok(Some(path.clone()))
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()?;
            Ok(None)
        }
    }
}
