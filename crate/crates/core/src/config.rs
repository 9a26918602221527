//! Declarative problem configurations (TOML).
//!
//! Experiment problems are described by small structured-text files naming
//! coefficients from a fixed registry, so that runs are reproducible and
//! diff-able. The same schema backs the `cascade`, `shjb` and `isaacs`
//! subcommands.

use std::sync::Arc;

use serde::Deserialize;

use crate::cascade::{FrozenProblem, ProblemClass};
use crate::cone::{make_lower_bounding, make_upper_bounding, Generator};
use crate::isaacs::GameSpec;
use crate::path::SampledPath;
use crate::shjb::{DriverClass, ShjbProblem};
use crate::{Error, Result};

/// Terminal functional registry shared by problem kinds.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TerminalSpec {
    Const { value: f64 },
    /// `ω_T · e1`, optionally scaled.
    Linear {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `|ω_T·e1|²`, optionally scaled.
    Square {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `tanh(ω_T · e1)` — a bounded smooth default.
    Tanh,
    /// `cos(ω_T · e1)`.
    Cos,
    /// Running supremum of `|ω|`, capped.
    SupAbs {
        #[serde(default = "one")]
        cap: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl TerminalSpec {
    pub fn build(&self) -> Arc<dyn Fn(&SampledPath) -> f64 + Send + Sync> {
        match self.clone() {
            TerminalSpec::Const { value } => Arc::new(move |_| value),
            TerminalSpec::Linear { scale } => Arc::new(move |p| scale * p.knot_value(p.n_knots() - 1)[0]),
            TerminalSpec::Square { scale } => Arc::new(move |p| {
                let v = p.knot_value(p.n_knots() - 1)[0];
                scale * v * v
            }),
            TerminalSpec::Tanh => Arc::new(|p| p.knot_value(p.n_knots() - 1)[0].tanh()),
            TerminalSpec::Cos => Arc::new(|p| p.knot_value(p.n_knots() - 1)[0].cos()),
            TerminalSpec::SupAbs { cap } => Arc::new(move |p| p.sup_norm(p.t_end()).unwrap_or(0.0).min(cap)),
        }
    }
}

/// Generator registry of the cascade pipeline.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Zero,
    Heat,
    UpperBounding,
    LowerBounding,
    /// `½ σ² γ + drift·z` with path-frozen modulation `σ(1 + κ tanh ω_t)`.
    FrozenDiffusion {
        sigma: f64,
        #[serde(default)]
        drift: f64,
        #[serde(default)]
        kappa: f64,
    },
}

impl GeneratorSpec {
    pub fn build(&self, bound_l: f64, c0: f64) -> Arc<dyn Fn(&SampledPath) -> Generator + Send + Sync> {
        match self.clone() {
            GeneratorSpec::Zero => Arc::new(|_| Generator::zero()),
            GeneratorSpec::Heat => Arc::new(|_| Generator::heat()),
            GeneratorSpec::UpperBounding => Arc::new(move |_| make_upper_bounding(bound_l, c0)),
            GeneratorSpec::LowerBounding => Arc::new(move |_| make_lower_bounding(bound_l, c0)),
            GeneratorSpec::FrozenDiffusion { sigma, drift, kappa } => Arc::new(move |frozen| {
                let anchor = frozen.knot_value(frozen.n_knots() - 1)[0];
                let s = sigma * (1.0 + kappa * anchor.tanh());
                let half_s2 = 0.5 * s * s;
                Generator::new(
                    "frozen-diffusion",
                    0.0,
                    drift.abs(),
                    half_s2,
                    move |_, _, _, z, g| half_s2 * g.trace() + drift * z[0],
                )
            }),
        }
    }
}

/// Cascade problem file.
#[derive(Debug, Clone, Deserialize)]
pub struct CascadeProblemConfig {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "default_class")]
    pub class: String,
    #[serde(default = "one_usize")]
    pub dim: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "C0", default)]
    pub c0: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    pub generator: GeneratorSpec,
    pub terminal: TerminalSpec,
}

fn default_label() -> String {
    "problem".into()
}
fn default_class() -> String {
    "markovian-features".into()
}
fn one_usize() -> usize {
    1
}

impl CascadeProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<FrozenProblem> {
        let class = match self.class.as_str() {
            "markovian-features" => ProblemClass::MarkovianFeatures,
            "full-path" => ProblemClass::FullPath,
            other => return Err(Error::Parse(format!("unknown problem class {other:?}"))),
        };
        if !(self.l > 0.0) || self.c0 < 0.0 || !(self.horizon > 0.0) {
            return Err(Error::Config("problem bounds must be positive".into()));
        }
        let gen = self.generator.build(self.l, self.c0);
        let term = self.terminal.build();
        FrozenProblem::new(
            self.label.clone(),
            class,
            self.dim,
            self.l,
            self.c0,
            self.horizon,
            move |p| gen(p),
            move |p| term(p),
        )
    }
}

/// Coefficient registry of the stochastic control pipeline.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ShjbCoef {
    Zero,
    Const { value: f64 },
    /// The control itself, `α·e1`.
    Control,
    /// Current path value `ω_r · e1`.
    PathValue,
    /// `|ω_r · e1|`.
    PathAbs,
}

impl ShjbCoef {
    fn build_vec(&self) -> Arc<dyn Fn(f64, &SampledPath, &[f64], &[f64]) -> Vec<f64> + Send + Sync> {
        match self.clone() {
            ShjbCoef::Zero => Arc::new(|_, _, _, _| vec![0.0]),
            ShjbCoef::Const { value } => Arc::new(move |_, _, _, _| vec![value]),
            ShjbCoef::Control => Arc::new(|_, _, _, a| vec![a[0]]),
            ShjbCoef::PathValue => Arc::new(|r, w, _, _| vec![w.eval1(r.min(w.t_end())).unwrap_or(0.0)]),
            ShjbCoef::PathAbs => Arc::new(|r, w, _, _| vec![w.eval1(r.min(w.t_end())).unwrap_or(0.0).abs()]),
        }
    }

    fn build_scalar(&self) -> Arc<dyn Fn(f64, &SampledPath, &[f64], &[f64]) -> f64 + Send + Sync> {
        let v = self.build_vec();
        Arc::new(move |r, w, x, a| v(r, w, x, a)[0])
    }
}

/// Terminal data registry of the stochastic control pipeline.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ShjbTerminal {
    Zero,
    Const { value: f64 },
    /// `x · e1`.
    LinearState,
    /// `x·e1 + ω_T·e1`.
    StatePlusTerminal,
}

impl ShjbTerminal {
    fn build(&self) -> Arc<dyn Fn(&SampledPath, &[f64]) -> f64 + Send + Sync> {
        match self.clone() {
            ShjbTerminal::Zero => Arc::new(|_, _| 0.0),
            ShjbTerminal::Const { value } => Arc::new(move |_, _| value),
            ShjbTerminal::LinearState => Arc::new(|_, x| x[0]),
            ShjbTerminal::StatePlusTerminal => Arc::new(|w, x| x[0] + w.eval1(w.t_end()).unwrap_or(0.0)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ShjbDriverConfig {
    #[serde(default)]
    pub fy: f64,
}

/// Stochastic control problem file.
#[derive(Debug, Clone, Deserialize)]
pub struct ShjbProblemConfig {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(rename = "L", default = "one")]
    pub l: f64,
    pub controls: Vec<Vec<f64>>,
    pub b: ShjbCoef,
    pub sigma: ShjbCoef,
    pub f0: ShjbCoef,
    #[serde(default)]
    pub driver: Option<ShjbDriverConfig>,
    pub g: ShjbTerminal,
}

impl ShjbProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<ShjbProblem> {
        let b = self.b.build_vec();
        let sigma = self.sigma.build_vec();
        let f0 = self.f0.build_scalar();
        let g = self.g.build();
        let fy = self.driver.as_ref().map(|d| d.fy).unwrap_or(0.0);
        ShjbProblem::new(
            self.label.clone(),
            1,
            1,
            self.horizon,
            self.l,
            self.controls.clone(),
            move |r, w, x, a| b(r, w, x, a),
            move |r, w, x, a| sigma(r, w, x, a),
            move |r, w, x, a| f0(r, w, x, a),
            DriverClass::Affine { fy },
            move |w, x| g(w, x),
        )
    }
}

/// Zero-sum game file.
#[derive(Debug, Clone, Deserialize)]
pub struct IsaacsGameConfig {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(rename = "L", default = "one")]
    pub l: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    /// Running payoff matrix `r[α][β]`.
    pub payoff: Vec<Vec<f64>>,
    #[serde(default)]
    pub terminal: Option<TerminalSpec>,
}

impl IsaacsGameConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<GameSpec> {
        let base = GameSpec::matrix_game(self.payoff.clone(), self.sigma, self.horizon, self.l)?;
        match &self.terminal {
            None => Ok(base),
            Some(term) => {
                let xi = term.build();
                let payoff = self.payoff.clone();
                let sigma = self.sigma;
                GameSpec::new(
                    self.label.clone(),
                    (0..payoff.len()).map(|i| vec![i as f64]).collect(),
                    (0..payoff[0].len()).map(|j| vec![j as f64]).collect(),
                    self.horizon,
                    self.l,
                    move |_, _, _, _| sigma,
                    move |_, _, _, _, a, b| payoff[a[0] as usize][b[0] as usize],
                    move |p| xi(p),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cascade_config_round_trips_from_toml() {
        let text = r#"
            label = "heat-square"
            class = "markovian-features"
            dim = 1
            L = 0.5
            C0 = 0.0
            horizon = 1.0

            [generator]
            type = "heat"

            [terminal]
            type = "square"
        "#;
        let cfg = CascadeProblemConfig::parse(text).unwrap();
        let problem = cfg.build().unwrap();
        assert_eq!(problem.dim, 1);
        assert_eq!(problem.bound_l, 0.5);
        let z = SampledPath::from_knots_1d(0.0, 1.0, &[(0.0, 0.0), (1.0, 1.5)]).unwrap();
        assert!((problem.terminal_value(&z) - 2.25).abs() < 1e-12);
    }

    #[test]
    fn parse_error_carries_position_information() {
        let bad = "label = \nnope";
        let err = CascadeProblemConfig::parse(bad).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line"), "diagnostic should carry a line: {msg}");
    }

    #[test]
    fn shjb_config_builds_the_drift_control_problem() {
        let text = r#"
            label = "drift"
            horizon = 1.0
            L = 1.0
            controls = [[-1.0], [1.0]]

            [b]
            type = "control"

            [sigma]
            type = "zero"

            [f0]
            type = "zero"

            [g]
            type = "linear-state"
        "#;
        let cfg = ShjbProblemConfig::parse(text).unwrap();
        let p = cfg.build().unwrap();
        assert_eq!(p.controls.len(), 2);
    }

    #[test]
    fn isaacs_config_builds_a_matrix_game() {
        let text = r#"
            horizon = 1.0
            L = 1.0
            sigma = 1.0
            payoff = [[1.0, 2.0], [0.0, 3.0]]
        "#;
        let cfg = IsaacsGameConfig::parse(text).unwrap();
        let g = cfg.build().unwrap();
        assert_eq!(g.u_set.len(), 2);
        assert_eq!(g.v_set.len(), 2);
    }
}
