//! JSON-facing descriptions of models and projections. Unknown keys are
//! rejected.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectral_model::{
    build_distributed_model, build_pointwise_model, projection_indicator, projection_sine, ModelConfig, NoiseKind,
    ProjectionVector,
};

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Heat-type operator `−(−Δ)^m` on `(0,1)^d` with diagonal noise.
    Distributed {
        #[serde(default = "one")]
        d: u32,
        #[serde(default = "one")]
        m: u32,
        modes: usize,
        alpha: f64,
        hurst: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        loadings: Option<Vec<f64>>,
    },
    /// Heat equation on `(0,1)` with noise at the point `y`.
    Pointwise {
        y: f64,
        modes: usize,
        alpha: f64,
        hurst: f64,
    },
    Custom {
        alpha: f64,
        hurst: f64,
        eigenvalues: Vec<f64>,
        loadings: Vec<f64>,
        noise: NoiseKind,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<ModelConfig> {
        match self {
            ModelSpec::Distributed {
                d,
                m,
                modes,
                alpha,
                hurst,
                loadings,
            } => build_distributed_model(*d, *m, *modes, *alpha, *hurst, loadings.clone()),
            ModelSpec::Pointwise { y, modes, alpha, hurst } => build_pointwise_model(*y, *modes, *alpha, *hurst),
            ModelSpec::Custom {
                alpha,
                hurst,
                eigenvalues,
                loadings,
                noise,
            } => ModelConfig::new(*alpha, *hurst, eigenvalues.clone(), loadings.clone(), *noise, "custom"),
        }
    }

    pub fn hurst(&self) -> f64 {
        match self {
            ModelSpec::Distributed { hurst, .. }
            | ModelSpec::Pointwise { hurst, .. }
            | ModelSpec::Custom { hurst, .. } => *hurst,
        }
    }

    pub fn with_hurst(&self, h: f64) -> Self {
        let mut s = self.clone();
        match &mut s {
            ModelSpec::Distributed { hurst, .. }
            | ModelSpec::Pointwise { hurst, .. }
            | ModelSpec::Custom { hurst, .. } => *hurst = h,
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProjectionSpec {
    /// Indicator of the window `[a, b]`.
    Indicator {
        a: f64,
        b: f64,
    },
    /// `sin(jπξ)`.
    Sine {
        mode: usize,
    },
    Coefficients {
        values: Vec<f64>,
    },
}

impl ProjectionSpec {
    pub fn build(&self, modes: usize) -> Result<ProjectionVector> {
        match self {
            ProjectionSpec::Indicator { a, b } => projection_indicator(*a, *b, modes),
            ProjectionSpec::Sine { mode } => projection_sine(*mode, modes),
            ProjectionSpec::Coefficients { values } => ProjectionVector::new(values.clone(), "coefficients"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_specs_parse_and_build() {
        let s: ModelSpec = serde_json::from_str(r#"{"type":"distributed","modes":3,"alpha":1.0,"hurst":0.6}"#).unwrap();
        let m = s.build().unwrap();
        assert_eq!(m.modes(), 3);
        assert_eq!(m.noise_kind(), NoiseKind::Diagonal);
        let s: ModelSpec =
            serde_json::from_str(r#"{"type":"pointwise","y":0.5,"modes":4,"alpha":2.0,"hurst":0.3}"#).unwrap();
        assert_eq!(s.build().unwrap().noise_kind(), NoiseKind::RankOne);
        let s: ModelSpec = serde_json::from_str(
            r#"{"type":"custom","alpha":1.0,"hurst":0.5,"eigenvalues":[1.0],"loadings":[1.0],"noise":"diagonal"}"#,
        )
        .unwrap();
        assert_eq!(s.build().unwrap().eigenvalues(), &[1.0]);
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: std::result::Result<ModelSpec, _> =
            serde_json::from_str(r#"{"type":"distributed","modes":3,"alpha":1.0,"hurst":0.6,"hurts":0.5}"#);
        assert!(r.is_err());
        let r: std::result::Result<ProjectionSpec, _> = serde_json::from_str(r#"{"type":"sine","mode":2,"extra":1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn projection_specs_build() {
        let p: ProjectionSpec = serde_json::from_str(r#"{"type":"indicator","a":0.0,"b":0.5}"#).unwrap();
        assert_eq!(p.build(6).unwrap().len(), 6);
        let p: ProjectionSpec = serde_json::from_str(r#"{"type":"sine","mode":4}"#).unwrap();
        assert!(p.build(3).is_err());
    }
}
