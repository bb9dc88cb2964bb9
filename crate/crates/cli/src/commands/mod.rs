//! One module per subcommand.

pub mod approx;
pub mod gradcheck;
pub mod opcount;
pub mod props;
pub mod toy;
pub mod train;
pub mod variance;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use addernet::net::{LayerKind, NetworkSpec};
use addernet::Error;

use crate::config::Resolver;
use crate::output::CsvReport;
use crate::Common;

/// Files written and lines to print.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Settings shared by every subcommand.
pub(crate) struct Session {
    pub resolver: Resolver,
    pub command: &'static str,
    pub seed: u64,
    pub out: PathBuf,
    pub wall_time: bool,
}

impl Session {
    pub fn start(command: &'static str, common: &Common) -> Result<Self, Error> {
        let mut resolver = Resolver::new(common.config.as_deref())?;
        let seed = resolver.value("seed", common.seed, 0u64)?;
        let out = resolver.value("out", common.out.as_ref().map(|p| p.display().to_string()), "out".into())?;
        let wall_time = resolver.value("wall-time", common.wall_time.then_some(true), false)?;
        Ok(Session {
            resolver,
            command,
            seed,
            out: PathBuf::from(out),
            wall_time,
        })
    }

    /// Validates the settings file, creates the output directory and
    /// returns the metadata block.
    pub fn finish(self) -> Result<Prepared, Error> {
        let mut meta = vec![
            ("tool".to_string(), format!("addernet {}", env!("CARGO_PKG_VERSION"))),
            ("command".to_string(), self.command.to_string()),
        ];
        meta.extend(self.resolver.finish()?);
        std::fs::create_dir_all(&self.out)?;
        Ok(Prepared {
            meta,
            out: self.out,
            files: Vec::new(),
        })
    }
}

pub(crate) struct Prepared {
    pub meta: Vec<(String, String)>,
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Prepared {
    pub fn csv(&self, header: &[&str]) -> CsvReport {
        CsvReport::new(&self.meta, header)
    }

    pub fn write_csv(&mut self, name: &str, csv: &CsvReport) -> Result<(), Error> {
        let path = self.out.join(name);
        csv.write(&path)?;
        self.files.push(path);
        Ok(())
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        let path = self.out.join(name);
        self.files.push(path.clone());
        path
    }

    pub fn outcome(self, summary: Vec<String>) -> Outcome {
        Outcome {
            files: self.files,
            summary,
        }
    }
}

/// Adaptive-scaling setting: a positive number or `none`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eta(pub Option<f64>);

impl FromStr for Eta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "none" {
            return Ok(Eta(None));
        }
        let v: f64 = s.trim().parse().map_err(|e| format!("{e}"))?;
        if !(v > 0.0) {
            return Err(format!("eta {v} must be positive"));
        }
        Ok(Eta(Some(v)))
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("none"),
        }
    }
}

pub(crate) fn parse_eta(flag: &Option<String>) -> Result<Option<Eta>, Error> {
    flag.as_deref()
        .map(|s| s.parse().map_err(|e| invalid(format!("--eta: {e}"))))
        .transpose()
}

/// Architecture preset.
#[derive(Clone, Debug, PartialEq)]
pub enum Arch {
    Lenet5Bn,
    /// multiplication-based two-layer net with `n` hidden units
    Mlp(usize),
    AdderMlp(usize),
    File(PathBuf),
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let hidden = |prefix: &str| -> Option<Result<usize, String>> {
            let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(match inner.trim().parse::<usize>() {
                Ok(0) | Err(_) => Err(format!("bad hidden-unit count in '{s}'")),
                Ok(n) => Ok(n),
            })
        };
        if s == "lenet5bn" {
            Ok(Arch::Lenet5Bn)
        } else if let Some(n) = hidden("adder-mlp") {
            n.map(Arch::AdderMlp)
        } else if let Some(n) = hidden("mlp") {
            n.map(Arch::Mlp)
        } else if s.ends_with(".json") {
            Ok(Arch::File(PathBuf::from(s)))
        } else {
            Err(format!("unknown architecture '{s}' (lenet5bn, mlp(N), adder-mlp(N) or a .json spec)"))
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arch::Lenet5Bn => f.write_str("lenet5bn"),
            Arch::Mlp(n) => write!(f, "mlp({n})"),
            Arch::AdderMlp(n) => write!(f, "adder-mlp({n})"),
            Arch::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl Arch {
    /// Layer kind fixed by the preset, if any.
    pub fn implied_kind(&self) -> Option<LayerKind> {
        match self {
            Arch::Mlp(_) => Some(LayerKind::Conv),
            Arch::AdderMlp(_) => Some(LayerKind::Adder),
            _ => None,
        }
    }

    /// The spec, with feature layers of `kind` (custom files are used as written).
    pub fn spec(&self, kind: LayerKind) -> Result<NetworkSpec, Error> {
        Ok(match self {
            Arch::Lenet5Bn => NetworkSpec::lenet5_bn(kind, false),
            Arch::Mlp(n) | Arch::AdderMlp(n) => NetworkSpec::two_layer(kind, *n),
            Arch::File(p) => NetworkSpec::from_json(&std::fs::read_to_string(p)?)?,
        })
    }
}

pub(crate) fn parse_arch(flag: &Option<String>) -> Result<Option<Arch>, Error> {
    flag.as_deref()
        .map(|s| s.parse().map_err(|e: String| invalid(e)))
        .transpose()
}

/// `$ADDERNET_MNIST_DIR`, else `data/mnist-subset`.
pub fn default_mnist_dir() -> PathBuf {
    std::env::var_os("ADDERNET_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/mnist-subset"))
}

pub(crate) fn path_setting(r: &mut Resolver, key: &str, flag: &Option<PathBuf>, default: &Path) -> Result<PathBuf, Error> {
    let v = r.value(key, flag.as_ref().map(|p| p.display().to_string()), default.display().to_string())?;
    Ok(PathBuf::from(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arch_round_trip() {
        for s in ["lenet5bn", "mlp(3)", "adder-mlp(1)", "net.json"] {
            assert_eq!(s.parse::<Arch>().unwrap().to_string(), s);
        }
        assert!("mlp(0)".parse::<Arch>().is_err());
        assert!("mlp(x)".parse::<Arch>().is_err());
        assert!("resnet".parse::<Arch>().is_err());
    }

    #[test]
    fn eta_values() {
        assert_eq!("none".parse::<Eta>().unwrap(), Eta(None));
        assert_eq!("0.2".parse::<Eta>().unwrap().to_string(), "0.2");
        assert!("-1".parse::<Eta>().is_err());
    }
}
