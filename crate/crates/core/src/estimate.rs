use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TreeSlope,
    OperatorEig,
}

/// A pressure value together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub value: f64,
    pub method: Method,
    /// Tree depth or number of operator cells.
    pub resolution: usize,
    /// Eigen-pair residual, or rms residual of the slope fit.
    pub residual: f64,
    /// log Z_k per level, or the power-iteration growth-rate history.
    pub trace: Vec<f64>,
    /// (1/n) log Z_n for trees; the value at half resolution for operators.
    pub coarse_value: Option<f64>,
}
