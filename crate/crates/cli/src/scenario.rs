//! Scenario configuration: a TOML file with one section per pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const BUNDLED: [(&str, &str); 2] = [
    ("flat-biharmonic", include_str!("../scenarios/flat-biharmonic.toml")),
    ("curved-sine", include_str!("../scenarios/curved-sine.toml")),
];

pub const STAGES: [&str; 6] = ["flatten", "solve", "reflect", "carleman", "three-spheres", "sucp"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Nodes per unit side of the solve (and pull-back) grid.
    pub mesh: usize,
    #[serde(default = "all_stages")]
    pub stages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub boundary: BoundarySpec,
    pub material: MaterialSpec,
    #[serde(default)]
    pub solution: SolutionSpec,
    #[serde(default)]
    pub weight: WeightSpec,
    pub three_spheres: ThreeSpheresSpec,
    pub sucp: SucpSpec,
}

fn all_stages() -> Vec<String> {
    STAGES.iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// Graph `g(x)` (may use `r0`); flat when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    pub r0: f64,
    pub m0: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "default_flatten_mesh")]
    pub flatten_mesh: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_closure_tol")]
    pub closure_tol: f64,
}

fn one() -> f64 {
    1.0
}
fn default_flatten_mesh() -> usize {
    129
}
fn default_probes() -> usize {
    17
}
fn default_closure_tol() -> f64 {
    5e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub lambda: String,
    pub mu: String,
    pub thickness: f64,
    /// Convexity constants; derived from constant moduli when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSpec {
    /// Outer data for the flat problem.
    #[serde(default = "default_outer")]
    pub outer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<String>,
    /// `outer` solves the equation, so the solver should reproduce it.
    #[serde(default)]
    pub exact: bool,
}

fn default_outer() -> String {
    "y^2".into()
}

impl Default for SolutionSpec {
    fn default() -> Self {
        SolutionSpec { outer: default_outer(), forcing: None, exact: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub epsilon: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_samples: usize,
    #[serde(default = "default_tau_bar")]
    pub tau_bar: f64,
    #[serde(default = "one")]
    pub r_tilde0: f64,
    pub carleman_mesh: usize,
}

fn default_tau_bar() -> f64 {
    3.0
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec { epsilon: 0.5, tau_min: 3.0, tau_max: 12.0, tau_samples: 19, tau_bar: 3.0, r_tilde0: 1.0, carleman_mesh: 257 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeSpheresSpec {
    /// `(r, R, R0)` for flat boundaries, `(r1, r2, R0)` for curved ones.
    pub radii: Vec<[f64; 3]>,
    pub ceiling: f64,
    #[serde(default = "default_c_exp")]
    pub c_exp_grid: Vec<f64>,
    /// Quadrature spacing for pulled-back fields.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

fn default_c_exp() -> Vec<f64> {
    platecont_core::threespheres::C_EXP_GRID.to_vec()
}
fn default_spacing() -> f64 {
    1.0 / 64.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SucpSpec {
    /// `(r1, r2, r0)`.
    pub radii: [f64; 3],
    /// Flat boundaries only; curved ones use `R0/(2K)` from the map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default = "default_profile_points")]
    pub profile_points: usize,
}

fn default_profile_points() -> usize {
    20
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl Scenario {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let sc: Scenario = toml::from_str(src).map_err(|e| ConfigError(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    /// A bundled scenario name or a path to a TOML file.
    pub fn load(name_or_path: &str) -> Result<Self, ConfigError> {
        if let Some((_, src)) = BUNDLED.iter().find(|(n, _)| *n == name_or_path) {
            return Self::parse(src);
        }
        let path = Path::new(name_or_path);
        let src = std::fs::read_to_string(path).map_err(|e| {
            ConfigError(format!(
                "cannot read scenario '{name_or_path}': {e} (bundled: {})",
                BUNDLED.iter().map(|b| b.0).collect::<Vec<_>>().join(", ")
            ))
        })?;
        Self::parse(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn is_flat(&self) -> bool {
        self.boundary.graph.is_none()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        if self.name.is_empty() {
            return bad("name must not be empty".into());
        }
        if self.mesh < 9 {
            return bad(format!("mesh = {} is below 9", self.mesh));
        }
        for s in &self.stages {
            if !STAGES.contains(&s.as_str()) {
                return bad(format!("unknown stage '{s}' (expected one of {})", STAGES.join(", ")));
            }
        }
        let w = &self.weight;
        if !(w.epsilon > 0.0 && w.epsilon < 1.0) {
            return bad(format!("weight.epsilon = {} not in (0, 1)", w.epsilon));
        }
        if !matches!(w.tau_min.partial_cmp(&w.tau_max), Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)) || w.tau_samples == 0 {
            return bad(format!("weight: need tau_min ≤ tau_max and tau_samples > 0, got {}, {}, {}", w.tau_min, w.tau_max, w.tau_samples));
        }
        if self.three_spheres.radii.is_empty() {
            return bad("three_spheres.radii is empty".into());
        }
        for &[a, b, r0] in &self.three_spheres.radii {
            let ok = if self.is_flat() { a > 0.0 && a < b && b < r0 / 2.0 && r0 < 1.0 } else { a > 0.0 && a < b && r0 < 1.0 };
            if !ok {
                return bad(format!("three_spheres.radii ({a}, {b}, {r0}) not admissible"));
            }
        }
        let [r1, r2, r0] = self.sucp.radii;
        if !(0.0 < r1 && r1 < r2 && r2 < r0) {
            return bad(format!("sucp.radii ({r1}, {r2}, {r0}) must increase"));
        }
        if self.is_flat() && self.sucp.c.is_none() {
            return bad("sucp.c is required for a flat boundary".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_round_trip() {
        for (name, _) in BUNDLED {
            let sc = Scenario::load(name).unwrap();
            assert_eq!(sc.name, name);
            assert_eq!(Scenario::parse(&sc.to_toml()).unwrap(), sc);
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let src = BUNDLED[0].1.replace("mesh = 129", "mesch = 129");
        let e = Scenario::parse(&src).unwrap_err();
        assert!(e.0.contains("mesch"), "{e}");
    }
}
