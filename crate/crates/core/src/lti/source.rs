//! Where a ground-truth system comes from.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::hovorka::{hovorka_continuous, HovorkaParams};
use super::system::{discretize_euler, random_stable, LtiSystem, SystemFile};
use crate::error::{Result, SysidError};

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemSource {
    /// Shipped insulin-model parameters, Euler-discretized with step `dt`.
    HovorkaDefault {
        #[serde(default = "half")]
        dt: f64,
    },
    /// Insulin-model parameters read from a JSON file.
    HovorkaFile {
        path: PathBuf,
        #[serde(default = "half")]
        dt: f64,
    },
    /// A system JSON file (`n`, `m`, `a`, `b`).
    UserFile { path: PathBuf },
    Inline { system: SystemFile },
    RandomStable {
        n: usize,
        #[serde(default)]
        m: usize,
        rho: f64,
        seed: u64,
    },
}

impl Default for SystemSource {
    fn default() -> Self {
        SystemSource::HovorkaDefault { dt: 0.5 }
    }
}

impl SystemSource {
    pub fn resolve(&self) -> Result<LtiSystem> {
        match self {
            SystemSource::HovorkaDefault { dt } => {
                let (ac, bc, _) = hovorka_continuous(&HovorkaParams::default_params())?;
                discretize_euler(&ac, &bc, *dt)
            }
            SystemSource::HovorkaFile { path, dt } => {
                let (ac, bc, _) = hovorka_continuous(&HovorkaParams::load(path)?)?;
                discretize_euler(&ac, &bc, *dt)
            }
            SystemSource::UserFile { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| SysidError::io(path, e))?;
                let file: SystemFile =
                    serde_json::from_str(&text).map_err(|e| SysidError::parse(path.display().to_string(), e))?;
                file.into_system()
            }
            SystemSource::Inline { system } => system.clone().into_system(),
            SystemSource::RandomStable { n, m, rho, seed } => random_stable(*n, *m, *rho, *seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sources_resolve() {
        let h = SystemSource::default().resolve().unwrap();
        assert_eq!((h.n(), h.m()), (6, 0));
        let r: SystemSource = serde_json::from_str(r#"{"kind":"random-stable","n":3,"rho":0.7,"seed":4}"#).unwrap();
        assert!((r.resolve().unwrap().spectral_radius() - 0.7).abs() < 1e-9);
        let i: SystemSource =
            serde_json::from_str(r#"{"kind":"inline","system":{"n":1,"m":0,"a":[[0.5]]}}"#).unwrap();
        assert_eq!(i.resolve().unwrap().a()[(0, 0)], 0.5);
        let missing = SystemSource::UserFile {
            path: "/nonexistent/system.json".into(),
        };
        assert!(missing.resolve().unwrap_err().is_io());
    }
}
