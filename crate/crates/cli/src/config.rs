//! Experiment configuration files.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thermo_core::descriptor::{MapDescriptor, PotentialDescriptor};
use thermo_core::operator::MIN_CELLS;
use thermo_core::tree::DEFAULT_NODE_BUDGET;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PressureTree,
    PressureUlam,
    Hyperbolicity,
    Scan,
    Shrinking,
    Distortion,
    Imfs,
    Lyapunov,
    Mixing,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PressureTree => "pressure-tree",
            Command::PressureUlam => "pressure-ulam",
            Command::Hyperbolicity => "hyperbolicity",
            Command::Scan => "scan",
            Command::Shrinking => "shrinking",
            Command::Distortion => "distortion",
            Command::Imfs => "imfs",
            Command::Lyapunov => "lyapunov",
            Command::Mixing => "mixing",
        }
    }

    /// Commands with a tabular result.
    fn has_csv(self) -> bool {
        matches!(
            self,
            Command::PressureTree | Command::PressureUlam | Command::Scan | Command::Shrinking
        )
    }

    fn default_format(self) -> Format {
        if self.has_csv() && self != Command::PressureUlam {
            Format::Csv
        } else {
            Format::Json
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Inclusive arithmetic grid start, start + step, ..., up to stop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        if !(self.step > 0.0) || !(self.stop >= self.start) {
            return Vec::new();
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=count)
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub map: MapDescriptor,
    /// φ; defaults to the zero potential.
    pub potential: Option<PotentialDescriptor>,
    /// Direction ψ of a pressure scan.
    pub psi: Option<PotentialDescriptor>,
    /// Observable pair for correlation sums; defaults to cosine(1,1) twice.
    pub observables: Option<(PotentialDescriptor, PotentialDescriptor)>,
    pub x0: Option<f64>,
    pub depth: Option<usize>,
    pub cells: Option<usize>,
    pub max_period: Option<usize>,
    pub grid: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub t_range: Option<Range>,
    pub center: Option<f64>,
    pub rho: Option<f64>,
    pub n_max: Option<usize>,
    pub n: Option<usize>,
    pub c_star: Option<f64>,
    pub c0: Option<f64>,
    pub beta: Option<f64>,
    pub b0: Option<(f64, f64)>,
    pub times: Option<Vec<usize>>,
    /// Explicit IMFS elements as branch words; replaces `times`.
    pub words: Option<Vec<Vec<usize>>>,
    pub max_word_len: Option<usize>,
    pub time_budget: Option<usize>,
    pub integral: Option<f64>,
    pub node_budget: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// Parses and validates; validation reports every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg = ExperimentConfig::from_json(text)?;
    cfg.check()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Deserializes without validating, so that overrides can be applied first.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let errors = self.validate();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn phi(&self) -> PotentialDescriptor {
        self.potential
            .clone()
            .unwrap_or(PotentialDescriptor::Constant { c: 0.0 })
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(self.command.default_format())
    }

    pub fn x0(&self) -> f64 {
        self.x0.unwrap_or(0.3)
    }
    pub fn depth(&self) -> usize {
        self.depth.unwrap_or(16)
    }
    pub fn cells(&self) -> usize {
        self.cells.unwrap_or(1024)
    }
    pub fn max_period(&self) -> usize {
        self.max_period.unwrap_or(6)
    }
    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(257)
    }
    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(0.1)
    }
    pub fn n_max(&self) -> usize {
        self.n_max.unwrap_or(14)
    }
    pub fn n(&self) -> usize {
        self.n.unwrap_or(if self.command == Command::Mixing {
            10
        } else {
            12
        })
    }
    pub fn max_word_len(&self) -> usize {
        self.max_word_len.unwrap_or(8)
    }
    pub fn time_budget(&self) -> usize {
        self.time_budget.unwrap_or(8)
    }
    pub fn node_budget(&self) -> usize {
        self.node_budget.unwrap_or(DEFAULT_NODE_BUDGET)
    }

    pub fn t_points(&self) -> Vec<f64> {
        match (&self.t_grid, &self.t_range) {
            (Some(g), _) => g.clone(),
            (None, Some(r)) => r.points(),
            (None, None) => Vec::new(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errors = self.map.validate();
        let ambient = if errors.is_empty() {
            match self.map.build() {
                Ok(m) => Some(m.ambient()),
                Err(e) => {
                    errors.push(format!("map: {e}"));
                    None
                }
            }
        } else {
            None
        };
        let inside = |x: f64| ambient.is_none_or(|(a, b)| x >= a && x <= b);
        if let Some(p) = &self.potential {
            errors.extend(p.validate());
        }
        if let Some(p) = &self.psi {
            errors.extend(p.validate().into_iter().map(|e| format!("psi: {e}")));
        }
        if let Some((a, b)) = &self.observables {
            errors.extend(
                a.validate()
                    .into_iter()
                    .chain(b.validate())
                    .map(|e| format!("observables: {e}")),
            );
        }
        if self.depth == Some(0) {
            errors.push("depth ≥ 1 required".into());
        }
        if self.cells.is_some_and(|k| k < MIN_CELLS) {
            errors.push(format!("cells ≥ {MIN_CELLS} required"));
        }
        if self.max_period == Some(0) {
            errors.push("max_period ≥ 1 required".into());
        }
        if self.grid.is_some_and(|g| g < 2) {
            errors.push("grid ≥ 2 required".into());
        }
        if self.node_budget == Some(0) {
            errors.push("node_budget ≥ 1 required".into());
        }
        if let Some(x) = self.x0 {
            if !inside(x) {
                errors.push(format!("x0 = {x} outside the ambient interval"));
            }
        }
        if let Some(c) = self.center {
            if !inside(c) {
                errors.push(format!("center = {c} outside the ambient interval"));
            }
        }
        if self.rho.is_some_and(|r| !(r > 0.0)) {
            errors.push("rho > 0 required".into());
        }
        if self.n == Some(0) {
            errors.push("n ≥ 1 required".into());
        }
        if self.format == Some(Format::Csv) && !self.command.has_csv() {
            errors.push(format!("{} writes json only", self.command.name()));
        }

        match self.command {
            Command::Scan => {
                if self.psi.is_none() {
                    errors.push("scan needs a psi potential".into());
                }
                if self.t_grid.is_some() && self.t_range.is_some() {
                    errors.push("give t_grid or t_range, not both".into());
                }
                let t = self.t_points();
                if t.len() < 5 {
                    errors.push(format!(
                        "scan needs a t grid with ≥ 5 points (got {})",
                        t.len()
                    ));
                }
                if t.windows(2).any(|w| !(w[0] < w[1])) {
                    errors.push("t grid must be strictly increasing".into());
                }
            }
            Command::Shrinking => {
                if self.n_max.is_some_and(|n| n < 6) {
                    errors.push("n_max ≥ 6 required".into());
                }
            }
            Command::Distortion => {
                if self.c_star.is_some_and(|c| !(c >= 0.0)) {
                    errors.push("c_star ≥ 0 required".into());
                }
                if self.c0.is_some_and(|c| !(c > 0.0)) {
                    errors.push("c0 > 0 required".into());
                }
                if self.beta.is_some_and(|b| !(b > 0.0)) {
                    errors.push("beta > 0 required".into());
                }
            }
            Command::Imfs => {
                match self.b0 {
                    None => errors.push("imfs needs b0".into()),
                    Some((lo, hi)) => {
                        if !(lo < hi) || !inside(lo) || !inside(hi) {
                            errors.push(format!("b0 = [{lo}, {hi}] must be a non-empty interval inside the ambient one"));
                        }
                        if let Some(x) = self.x0 {
                            if x < lo || x > hi {
                                errors.push(format!("x0 = {x} outside b0"));
                            }
                        }
                    }
                }
                match (&self.times, &self.words) {
                    (None, None) => errors.push("imfs needs times or words".into()),
                    (Some(_), Some(_)) => errors.push("give times or words, not both".into()),
                    (None, Some(w)) => {
                        if w.is_empty() || w.iter().any(|w| w.is_empty()) {
                            errors.push("words must be non-empty".into());
                        }
                    }
                    (Some(t), None)
                        if t.is_empty() || t[0] == 0 || t.windows(2).any(|w| w[0] >= w[1]) =>
                    {
                        errors.push("times must be positive and strictly increasing".into())
                    }
                    _ => {}
                }
                if self.max_word_len == Some(0) || self.time_budget == Some(0) {
                    errors.push("max_word_len and time_budget must be ≥ 1".into());
                }
            }
            _ => {}
        }
        errors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_tree_config() {
        let cfg = parse_config(
            r#"{"command":"pressure-tree","map":{"kind":"doubling"},"potential":{"kind":"constant","c":0},"depth":10}"#,
        )
        .unwrap();
        assert_eq!(cfg.command, Command::PressureTree);
        assert_eq!(cfg.depth(), 10);
        assert_eq!(cfg.format(), Format::Csv);
    }

    #[test]
    fn bad_alpha_is_reported() {
        let err = parse_config(
            r#"{"command":"pressure-tree","map":{"kind":"intermittent","alpha":1.5}}"#,
        )
        .unwrap_err();
        let ConfigError::Invalid(errors) = err else {
            panic!("{err:?}")
        };
        assert_eq!(errors.len(), 1);
        assert!(errors[0].contains("alpha outside (0,1)"));
    }

    #[test]
    fn zero_depth_is_reported() {
        let err =
            parse_config(r#"{"command":"pressure-tree","map":{"kind":"doubling"},"depth":0}"#)
                .unwrap_err();
        assert_eq!(err, ConfigError::Invalid(vec!["depth ≥ 1 required".into()]));
    }

    #[test]
    fn all_errors_are_collected() {
        let err = parse_config(
            r#"{"command":"scan","map":{"kind":"intermittent","alpha":2},"depth":0,"cells":4,"t_grid":[0,1,2]}"#,
        )
        .unwrap_err();
        let ConfigError::Invalid(errors) = err else {
            panic!("{err:?}")
        };
        assert_eq!(errors.len(), 5, "{errors:?}");
    }

    #[test]
    fn unknown_keys_and_kinds_are_malformed() {
        for text in [
            r#"{"command":"pressure-tree","map":{"kind":"doubling"},"dept":3}"#,
            r#"{"command":"pressure-tree","map":{"kind":"henon"}}"#,
            r#"{"command":"fly","map":{"kind":"doubling"}}"#,
            r#"{"command":"pressure-tree","map":{"kind":"doubling"},"potential":{"kind":"expr","expr":"x"}}"#,
            "not json",
        ] {
            assert!(
                matches!(parse_config(text), Err(ConfigError::Malformed(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn ranges_are_inclusive() {
        let r = Range {
            start: 0.0,
            stop: 1.6,
            step: 0.05,
        };
        let p = r.points();
        assert_eq!(p.len(), 33);
        assert!((p[32] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn json_only_commands_refuse_csv() {
        let err =
            parse_config(r#"{"command":"lyapunov","map":{"kind":"doubling"},"format":"csv"}"#)
                .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }
}
