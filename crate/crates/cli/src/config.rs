use std::collections::HashSet;
use std::path::{Path, PathBuf};

use graphop_core::summability::{KernelFamily, SummabilityKernel};
use graphop_core::{CouplingSpec, Graphop, GraphopSpec, InitialDensity, PicardConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One graphop paired with one initial density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub graphop: GraphopSpec,
    pub density: InitialDensity,
}

/// `n` node cells with `M` oscillators each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instances: Vec<Instance>,
    #[serde(default = "default_kernel")]
    pub kernel: KernelFamily,
    /// Kernel indices `K`, strictly increasing.
    pub k_schedule: Vec<usize>,
    /// `(n, M)` pairs, strictly increasing in both entries.
    pub scaling: Vec<ScalePoint>,
    /// `K` used by the discrete-scaling run; the last scheduled `K` when absent.
    #[serde(default)]
    pub scaling_k: Option<usize>,
    pub coupling: CouplingSpec,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_stamps")]
    pub stamps: usize,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    pub seeds: Vec<u64>,
    /// Quantile particles per fiber in the mean-field solves.
    pub particles: usize,
    /// Gaps are maximized over every `metric_stride`-th stamp and the last one.
    #[serde(default = "default_stride")]
    pub metric_stride: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_kernel() -> KernelFamily {
    KernelFamily::Fejer
}
fn default_stamps() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-4
}
fn default_max_iter() -> usize {
    30
}
fn default_stride() -> usize {
    1
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn band() -> GraphopSpec {
    GraphopSpec::Band {
        halfwidth: 0.1,
        height: 5.0,
    }
}

/// The default graphops: all-to-all, the band, the quarter shift and a mixture.
pub fn default_graphops() -> Vec<(&'static str, GraphopSpec)> {
    vec![
        ("ones", GraphopSpec::Constant { value: 1.0 }),
        ("band", band()),
        ("shift", GraphopSpec::AtomicShift { r: 0.25 }),
        (
            "mixture",
            GraphopSpec::Mixture {
                components: vec![
                    graphop_core::graphop::MixtureComponent {
                        coefficient: 0.5,
                        graphop: GraphopSpec::AtomicShift { r: 0.125 },
                    },
                    graphop_core::graphop::MixtureComponent {
                        coefficient: 0.5,
                        graphop: band(),
                    },
                ],
            },
        ),
    ]
}

impl ExperimentConfig {
    /// The triangle experiment on the default instance set.
    pub fn default_triangle() -> Self {
        let densities = [("uniform", InitialDensity::Uniform), ("bump", InitialDensity::bump(1.0, 1.0))];
        let instances = default_graphops()
            .into_iter()
            .flat_map(|(g, spec)| {
                densities.iter().map(move |(d, rho)| Instance {
                    name: format!("{g}-{d}"),
                    graphop: spec.clone(),
                    density: rho.clone(),
                })
            })
            .collect();
        Self {
            instances,
            kernel: KernelFamily::Fejer,
            k_schedule: vec![4, 9, 19, 49],
            scaling: vec![ScalePoint { n: 8, m: 25 }, ScalePoint { n: 16, m: 50 }, ScalePoint { n: 32, m: 100 }],
            scaling_k: None,
            coupling: CouplingSpec::sine(1.0).expect("valid"),
            t_end: 1.0,
            dt: 0.01,
            stamps: 50,
            alpha: None,
            tol: 1e-4,
            max_iter: 30,
            seeds: vec![1, 2, 3, 4, 5],
            particles: 100,
            metric_stride: 5,
            out_dir: default_out_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        // a run manifest carries its config under "config"
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("not valid JSON: {e}")))?;
        let value = match value.get("config") {
            Some(inner) if value.get("instances").is_none() => inner.clone(),
            _ => value,
        };
        let cfg: Self = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn kernel_for(&self, k: usize) -> SummabilityKernel {
        SummabilityKernel::new(self.kernel, k)
    }

    pub fn picard(&self) -> PicardConfig {
        PicardConfig {
            t_end: self.t_end,
            dt: self.dt,
            stamps: self.stamps,
            alpha: self.alpha,
            tol: self.tol,
            max_iter: self.max_iter,
            contraction_slack: None,
        }
    }

    pub fn scaling_k(&self) -> usize {
        self.scaling_k
            .unwrap_or_else(|| *self.k_schedule.last().expect("validated non-empty"))
    }

    pub fn instance(&self, name: &str) -> Result<&Instance, CliError> {
        self.instances
            .iter()
            .find(|i| i.name == name)
            .ok_or_else(|| CliError::Config(format!("no instance named {name:?}")))
    }

    /// Stamp indices entering the `sup_t` of every gap.
    pub fn metric_stamps(&self) -> Vec<usize> {
        let mut k: Vec<usize> = (0..=self.stamps).step_by(self.metric_stride).collect();
        if k.last() != Some(&self.stamps) {
            k.push(self.stamps);
        }
        k
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.instances.is_empty() {
            return bad("no instances".into());
        }
        let mut names = HashSet::new();
        for inst in &self.instances {
            if !names.insert(inst.name.as_str()) {
                return bad(format!("duplicate instance name {:?}", inst.name));
            }
        }
        if self.k_schedule.is_empty() || self.k_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("K schedule must be non-empty and increasing, got {:?}", self.k_schedule));
        }
        if self.scaling.is_empty()
            || self.scaling.iter().any(|p| p.n == 0 || p.m == 0)
            || self.scaling.windows(2).any(|w| w[1].n <= w[0].n || w[1].m <= w[0].m)
        {
            return bad("(n, M) schedule must be non-empty, positive and increasing in both entries".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.particles == 0 || self.metric_stride == 0 {
            return bad("particles and metric_stride must be positive".into());
        }
        if !self.coupling.frequencies.is_empty() {
            return bad("frequencies are not supported by the mean-field runs".into());
        }
        self.coupling.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.picard().validate().map_err(|e| CliError::Config(e.to_string()))?;
        let interval = self.t_end / self.stamps as f64;
        let steps = (interval / self.dt).round();
        if steps < 1.0 || (steps * self.dt - interval).abs() > 1e-9 * interval {
            return bad(format!(
                "stamp interval {interval} must be a whole number of steps dt = {}",
                self.dt
            ));
        }
        for inst in &self.instances {
            let a = build(&inst.graphop, &inst.name)?;
            inst.density
                .validate()
                .map_err(|e| CliError::Config(format!("instance {}: {e}", inst.name)))?;
            if a.gamma() > 1.0 + 1e-12 {
                return bad(format!("instance {}: gamma_A = {} exceeds 1", inst.name, a.gamma()));
            }
            if let Some(alpha) = self.alpha {
                let floor = 2.0 * self.coupling.strength + a.gamma();
                if !(alpha > floor) {
                    return bad(format!(
                        "instance {}: alpha = {alpha} must exceed 2Cb + b*gamma_A = {floor}",
                        inst.name
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn build(spec: &GraphopSpec, name: &str) -> Result<Graphop, CliError> {
    spec.build()
        .map_err(|e| CliError::Config(format!("instance {name}: {e}")))
}
