//! Run configuration: JSON document or CLI flags (flags override file).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Acoustic,
    Elastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Fast Bernstein update (multiplication + telescoping projection).
    Fast,
    /// Quadrature-based update with the same degree-M projected weight.
    Oracle,
    /// Quadrature-based update with exact weight values (reference scheme).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshSpec {
    /// `uniform:n` - uniform simplicial mesh of `[-1,1]^d` with n cells/dim.
    Uniform(usize),
    /// `gmsh:path` - MSH 2.2 ASCII file.
    Gmsh(String),
}

impl MeshSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(n) = s.strip_prefix("uniform:") {
            let n: usize = n
                .parse()
                .map_err(|_| Error::Config(format!("bad uniform mesh spec: {s}")))?;
            if n == 0 {
                return Err(Error::Config("uniform mesh needs >= 1 cell".into()));
            }
            Ok(MeshSpec::Uniform(n))
        } else if let Some(path) = s.strip_prefix("gmsh:") {
            Ok(MeshSpec::Gmsh(path.to_string()))
        } else {
            Err(Error::Config(format!(
                "mesh spec must be uniform:<n> or gmsh:<path>, got {s}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavespeedModel {
    /// Constant squared wavespeed.
    Const { value: f64 },
    /// `c^2(x) = 1 + sin(k pi x) sin(k pi y) (sin(k pi z)) / 2`.
    Sine { k: f64 },
}

impl WavespeedModel {
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(v) = s.strip_prefix("const:") {
            let value: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("bad wavespeed spec: {s}")))?;
            if value <= 0.0 {
                return Err(Error::Config("constant wavespeed must be positive".into()));
            }
            Ok(WavespeedModel::Const { value })
        } else if let Some(k) = s.strip_prefix("sine:") {
            let k: f64 = k
                .parse()
                .map_err(|_| Error::Config(format!("bad wavespeed spec: {s}")))?;
            Ok(WavespeedModel::Sine { k })
        } else {
            Err(Error::Config(format!(
                "wavespeed spec must be const:<v> or sine:<k>, got {s}"
            )))
        }
    }

    /// Squared wavespeed at a point.
    pub fn c2(&self, dim: usize, x: &[f64; 3]) -> f64 {
        match *self {
            WavespeedModel::Const { value } => value,
            WavespeedModel::Sine { k } => {
                let mut prod = 1.0;
                for c in x.iter().take(dim) {
                    prod *= (k * std::f64::consts::PI * c).sin();
                }
                1.0 + 0.5 * prod
            }
        }
    }
}

fn default_cfl() -> f64 {
    0.5
}
fn default_final_time() -> f64 {
    1.0
}
fn default_tau() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: System,
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    pub mode: Mode,
    pub mesh: MeshSpec,
    pub wavespeed: WavespeedModel,
    #[serde(default = "default_final_time")]
    pub final_time: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_tau")]
    pub tau_p: f64,
    #[serde(default = "default_tau")]
    pub tau_u: f64,
    #[serde(default = "default_tau")]
    pub tau_v: f64,
    #[serde(default = "default_tau")]
    pub tau_sigma: f64,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Write VTK snapshots every this many steps (0 = never).
    #[serde(default)]
    pub vtk_every: usize,
    /// Sub-sampling level for VTK output.
    #[serde(default)]
    pub vtk_subsample: usize,
    /// Disable the manufactured source/error machinery (plain simulation).
    #[serde(default)]
    pub plain: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Config("dim must be 2 or 3".into()));
        }
        if self.system == System::Elastic && self.dim != 3 {
            return Err(Error::Config("the elastic system is 3D only".into()));
        }
        if self.n < 1 {
            return Err(Error::Config("N must be >= 1".into()));
        }
        if self.m > self.n {
            return Err(Error::Config(format!(
                "M must satisfy 0 <= M <= N, got M={} N={}",
                self.m, self.n
            )));
        }
        if self.final_time <= 0.0 {
            return Err(Error::Config("final time must be positive".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= 2.0) {
            return Err(Error::Config("CFL must lie in (0, 2]".into()));
        }
        for (name, tau) in [
            ("tau-p", self.tau_p),
            ("tau-u", self.tau_u),
            ("tau-v", self.tau_v),
            ("tau-sigma", self.tau_sigma),
        ] {
            if tau < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_and_wavespeed_specs_parse() {
        assert_eq!(MeshSpec::parse("uniform:8").unwrap(), MeshSpec::Uniform(8));
        assert!(matches!(
            MeshSpec::parse("gmsh:/tmp/a.msh").unwrap(),
            MeshSpec::Gmsh(_)
        ));
        assert!(MeshSpec::parse("uniform:0").is_err());
        assert!(MeshSpec::parse("cube:3").is_err());
        assert!(matches!(
            WavespeedModel::parse("const:1.5").unwrap(),
            WavespeedModel::Const { .. }
        ));
        assert!(WavespeedModel::parse("const:-1").is_err());
        assert!(matches!(
            WavespeedModel::parse("sine:4").unwrap(),
            WavespeedModel::Sine { .. }
        ));
    }

    #[test]
    fn validation_catches_field_errors() {
        let mut cfg = RunConfig {
            system: System::Acoustic,
            dim: 2,
            n: 3,
            m: 1,
            mode: Mode::Fast,
            mesh: MeshSpec::Uniform(4),
            wavespeed: WavespeedModel::Sine { k: 1.0 },
            final_time: 1.0,
            cfl: 0.5,
            tau_p: 1.0,
            tau_u: 1.0,
            tau_v: 1.0,
            tau_sigma: 1.0,
            out_dir: None,
            seed: 0,
            vtk_every: 0,
            vtk_subsample: 0,
            plain: false,
        };
        assert!(cfg.validate().is_ok());
        cfg.m = 5;
        assert!(cfg.validate().is_err());
        cfg.m = 1;
        cfg.cfl = 3.0;
        assert!(cfg.validate().is_err());
        cfg.cfl = 0.5;
        cfg.system = System::Elastic;
        assert!(cfg.validate().is_err(), "elastic requires dim 3");
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{
            "system": "acoustic", "dim": 2, "n": 4, "m": 1,
            "mode": "fast", "mesh": {"uniform": 8},
            "wavespeed": {"sine": {"k": 1.0}}
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.final_time, 1.0);
        assert_eq!(cfg.cfl, 0.5);
    }
}
