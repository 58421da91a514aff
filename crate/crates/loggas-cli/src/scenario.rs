//! Scenario schema (versioned JSON) and validation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use loggas::hydro::InitialData;
use loggas::potential::{equilibrium_density, Potential};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// Polynomial coefficients of V in ascending degree.
    pub coeffs: Vec<f64>,
    /// Uniform convexity constant α ≤ min V'' (0 or omitted: auto-derived
    /// from the sampled minimum of V'' on [−radius, radius]).
    #[serde(default)]
    pub alpha: f64,
    /// Large-deviation radius bound for the particle system.
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    50.0
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialDensitySpec {
    /// Harmonic β-equilibrium dilated by s0.
    ScaledSemicircle { s0: f64 },
    /// Equilibrium measure of the scenario potential.
    Equilibrium,
    /// Equilibrium of a quartic potential (alias of `equilibrium` kept for
    /// scenario readability).
    QuarticEquilibrium,
    /// Grid-tabulated density.  Not supported: the characteristic solver
    /// requires the exact analytic continuation of U₀ off the real axis,
    /// which a tabulated density cannot provide at the accuracy contract.
    Tabulated { x: Vec<f64>, rho: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub beta: f64,
    pub potential: PotentialSpec,
    pub initial_density: InitialDensitySpec,
    pub n_particles: usize,
    pub horizon: f64,
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Named positive tolerances, forwarded to diagnostics output.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, String> {
        let sc: Scenario =
            serde_json::from_str(text).map_err(|e| format!("scenario parse error: {e}"))?;
        sc.validate()?;
        Ok(sc)
    }

    fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.beta < 1.0 {
            return Err("beta ≥ 1 required".into());
        }
        if self.n_particles == 0 {
            return Err("n_particles ≥ 1 required".into());
        }
        if !(self.horizon > 0.0) {
            return Err("horizon > 0 required".into());
        }
        if !(self.dt > 0.0) {
            return Err("dt > 0 required".into());
        }
        if self.replicas == 0 {
            return Err("replicas ≥ 1 required".into());
        }
        for (name, &tol) in &self.tolerances {
            if !(tol > 0.0) {
                return Err(format!("tolerance '{name}' must be > 0"));
            }
        }
        if self.potential.coeffs.iter().any(|c| !c.is_finite()) {
            return Err("potential coefficients must be finite".into());
        }
        if let InitialDensitySpec::ScaledSemicircle { s0 } = self.initial_density {
            if !(s0 > 0.0) {
                return Err("initial_density s0 > 0 required".into());
            }
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential, String> {
        let alpha = if self.potential.alpha > 0.0 {
            self.potential.alpha
        } else {
            // Auto-derive: half the sampled minimum of V'' on the radius
            // interval, floored so flat-bottomed potentials stay valid.
            let poly = |x: f64, k: usize| -> f64 {
                self.potential
                    .coeffs
                    .iter()
                    .enumerate()
                    .skip(k)
                    .map(|(j, c)| {
                        let fall: f64 = (j - k + 1..=j).map(|m| m as f64).product::<f64>().max(1.0);
                        c * fall * x.powi((j - k) as i32)
                    })
                    .sum()
            };
            let n = 1000;
            let r = self.potential.radius;
            let min_vpp = (0..=n)
                .map(|i| poly(-r + 2.0 * r * i as f64 / n as f64, 2))
                .fold(f64::INFINITY, f64::min);
            (min_vpp / 2.0).max(1e-12)
        };
        Potential::new(self.potential.coeffs.clone(), alpha, self.potential.radius)
            .map_err(|e| format!("invalid potential: {e}"))
    }

    pub fn initial_data(&self) -> Result<InitialData, String> {
        match &self.initial_density {
            InitialDensitySpec::ScaledSemicircle { s0 } => {
                InitialData::scaled_semicircle(self.beta, *s0)
                    .map_err(|e| format!("invalid initial density: {e}"))
            }
            InitialDensitySpec::Equilibrium | InitialDensitySpec::QuarticEquilibrium => {
                let p = self.potential()?;
                let eq = equilibrium_density(&p, self.beta)
                    .map_err(|e| format!("no closed-form equilibrium for this potential: {e}"))?;
                Ok(InitialData::Equilibrium(eq))
            }
            InitialDensitySpec::Tabulated { x, rho } => Err(format!(
                "tabulated initial densities ({} grid points, {} values) are not \
                 supported: the characteristic solver needs the exact analytic \
                 continuation of U₀",
                x.len(),
                rho.len()
            )),
        }
    }
}
