//! Run configuration: an optional TOML file merged under command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use hho_core::analysis::L2Field;
use hho_core::assembly::SolverKind;
use hho_core::cases::{ManufacturedCase, CASE_NAMES};
use hho_core::linalg::CondMethod;
use hho_core::local::{HpScaling, LocalOptions};
use hho_core::quadrature::DEFAULT_SUBEDGES;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HpArg {
    None,
    Literal,
    Symmetric,
}

impl From<HpArg> for HpScaling {
    fn from(h: HpArg) -> Self {
        match h {
            HpArg::None => HpScaling::None,
            HpArg::Literal => HpScaling::Literal,
            HpArg::Symmetric => HpScaling::Symmetric,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    Direct,
    Cg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CondArg {
    Auto,
    Dense,
    Lanczos,
}

impl From<CondArg> for CondMethod {
    fn from(c: CondArg) -> Self {
        match c {
            CondArg::Auto => CondMethod::Auto,
            CondArg::Dense => CondMethod::Dense,
            CondArg::Lanczos => CondMethod::Lanczos,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum L2FieldArg {
    Reconstruction,
    Cell,
}

/// Flags shared by the solver subcommands. Every field is optional so that a
/// config file can supply it.
#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mesh source: `gen:rect:N` or a mesh file. Repeat or comma-separate for
    /// a refinement family.
    #[arg(long, value_delimiter = ',')]
    pub mesh: Vec<String>,
    /// Polynomial degree k (cell unknowns have degree k + 2).
    #[arg(long)]
    pub k: Option<usize>,
    /// Singular perturbation parameter.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Several eps values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Vec<f64>,
    /// Built-in case: smooth-square, smooth-annulus, layer-annulus, poly-exact.
    #[arg(long)]
    pub case: Option<String>,
    /// Polynomial-degree scaling of the penalty weights.
    #[arg(long, value_enum)]
    pub hp: Option<HpArg>,
    /// Sub-arcs per curved face in cell quadrature.
    #[arg(long)]
    pub subedges: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Layer-flagging threshold in (0, 1).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Also report the condition number of the condensed matrix.
    #[arg(long, value_enum, num_args = 0..=1, default_missing_value = "auto")]
    pub cond: Option<CondArg>,
    /// Field measured by the L² error.
    #[arg(long, value_enum)]
    pub l2_field: Option<L2FieldArg>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Single-threaded, bitwise reproducible execution.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mesh: Option<Vec<String>>,
    k: Option<usize>,
    eps: Option<f64>,
    eps_list: Option<Vec<f64>>,
    case: Option<String>,
    hp: Option<HpArg>,
    subedges: Option<usize>,
    solver: Option<SolverArg>,
    theta: Option<f64>,
    cond: Option<CondArg>,
    l2_field: Option<L2FieldArg>,
    out: Option<PathBuf>,
    serial: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    Rect(usize),
    File(PathBuf),
}

impl MeshSource {
    pub fn parse(s: &str, base: Option<&Path>) -> Result<Self, CliError> {
        if let Some(rest) = s.strip_prefix("gen:") {
            let n = rest
                .strip_prefix("rect:")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::Config(format!("bad mesh generator '{s}' (expected gen:rect:N with N >= 1)")))?;
            return Ok(MeshSource::Rect(n));
        }
        let p = PathBuf::from(s);
        Ok(MeshSource::File(match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        }))
    }
}

impl std::fmt::Display for MeshSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshSource::Rect(n) => write!(f, "gen:rect:{n}"),
            MeshSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub meshes: Vec<MeshSource>,
    pub k: usize,
    pub eps: Vec<f64>,
    pub case: String,
    pub hp: HpScaling,
    pub n_subedges: usize,
    pub solver: SolverKind,
    pub theta: f64,
    pub cond: Option<CondMethod>,
    pub l2_field: L2Field,
    pub out: Option<PathBuf>,
    pub serial: bool,
}

pub const MAX_K: usize = 3;

impl RunConfig {
    /// Merges the optional config file under the flags and validates.
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let (file, base) = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
                let cfg: FileConfig =
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
                (cfg, path.parent().map(Path::to_path_buf))
            }
            None => (FileConfig::default(), None),
        };

        let meshes = if !args.mesh.is_empty() {
            args.mesh.iter().map(|m| MeshSource::parse(m, None)).collect::<Result<Vec<_>, _>>()?
        } else {
            let list = file.mesh.unwrap_or_default();
            list.iter().map(|m| MeshSource::parse(m, base.as_deref())).collect::<Result<Vec<_>, _>>()?
        };
        if meshes.is_empty() {
            return Err(CliError::Config("no mesh given (use --mesh)".into()));
        }

        let k = args.k.or(file.k).unwrap_or(1);
        if k > MAX_K {
            return Err(CliError::Config(format!("k = {k} is outside 0..={MAX_K}")));
        }

        let eps = if !args.eps_list.is_empty() {
            args.eps_list.clone()
        } else if let Some(e) = args.eps {
            vec![e]
        } else if let Some(list) = file.eps_list {
            list
        } else {
            vec![file.eps.unwrap_or(1.0)]
        };
        if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(CliError::Config(format!("eps values must be finite and non-negative, got {eps:?}")));
        }

        let case = args.case.clone().or(file.case).unwrap_or_else(|| "smooth-square".into());
        if !CASE_NAMES.contains(&case.as_str()) {
            return Err(CliError::Config(format!("unknown case '{case}' (expected one of {})", CASE_NAMES.join(", "))));
        }

        let theta = args.theta.or(file.theta).unwrap_or(0.3);
        if !(theta > 0.0 && theta < 1.0) {
            return Err(CliError::Config(format!("theta must lie in (0, 1), got {theta}")));
        }

        let n_subedges = args.subedges.or(file.subedges).unwrap_or(DEFAULT_SUBEDGES);
        if n_subedges == 0 {
            return Err(CliError::Config("subedges must be at least 1".into()));
        }

        let solver = match args.solver.or(file.solver).unwrap_or(SolverArg::Direct) {
            SolverArg::Direct => SolverKind::Direct,
            SolverArg::Cg => SolverKind::Cg,
        };
        let l2_field = match args.l2_field.or(file.l2_field).unwrap_or(L2FieldArg::Reconstruction) {
            L2FieldArg::Reconstruction => L2Field::Reconstruction,
            L2FieldArg::Cell => L2Field::Cell,
        };

        Ok(Self {
            meshes,
            k,
            eps,
            case,
            hp: args.hp.or(file.hp).map(HpScaling::from).unwrap_or_default(),
            n_subedges,
            solver,
            theta,
            cond: args.cond.or(file.cond).map(CondMethod::from),
            l2_field,
            out: args.out.clone().or(file.out.map(|p| match &base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            })),
            serial: args.serial || file.serial.unwrap_or(false),
        })
    }

    pub fn manufactured_case(&self) -> Result<ManufacturedCase, CliError> {
        ManufacturedCase::by_name(&self.case, self.k).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn local_options(&self) -> LocalOptions {
        LocalOptions { hp: self.hp, n_subedges: self.n_subedges, ..Default::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(mesh: &[&str]) -> CommonArgs {
        CommonArgs { mesh: mesh.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    #[test]
    fn mesh_sources() {
        assert_eq!(MeshSource::parse("gen:rect:16", None).unwrap(), MeshSource::Rect(16));
        assert!(MeshSource::parse("gen:rect:0", None).is_err());
        assert!(MeshSource::parse("gen:tri:4", None).is_err());
        let f = MeshSource::parse("a.msh", Some(Path::new("/cfg"))).unwrap();
        assert_eq!(f, MeshSource::File(PathBuf::from("/cfg/a.msh")));
    }

    #[test]
    fn defaults_and_validation() {
        let c = RunConfig::resolve(&args(&["gen:rect:2"])).unwrap();
        assert_eq!((c.k, c.eps.clone(), c.case.as_str(), c.theta), (1, vec![1.0], "smooth-square", 0.3));
        assert!(RunConfig::resolve(&args(&[])).is_err());
        let mut a = args(&["gen:rect:2"]);
        a.case = Some("nope".into());
        assert!(matches!(RunConfig::resolve(&a), Err(CliError::Config(_))));
        a.case = None;
        a.eps = Some(-1.0);
        assert!(RunConfig::resolve(&a).is_err());
        a.eps = None;
        a.k = Some(4);
        assert!(RunConfig::resolve(&a).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "mesh = [\"gen:rect:4\"]\nk = 2\neps_list = [0.0, 1.0]\ncase = \"poly-exact\"\nhp = \"literal\"\n").unwrap();
        let mut a = CommonArgs { config: Some(path), ..Default::default() };
        let c = RunConfig::resolve(&a).unwrap();
        assert_eq!((c.k, c.eps.clone(), c.hp), (2, vec![0.0, 1.0], HpScaling::Literal));
        a.k = Some(0);
        a.eps = Some(0.5);
        a.mesh = vec!["gen:rect:8".into()];
        let c = RunConfig::resolve(&a).unwrap();
        assert_eq!((c.k, c.eps, c.meshes), (0, vec![0.5], vec![MeshSource::Rect(8)]));
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "mesh = [\"gen:rect:4\"]\nbogus = 1\n").unwrap();
        let a = CommonArgs { config: Some(path), ..Default::default() };
        assert!(matches!(RunConfig::resolve(&a), Err(CliError::Config(_))));
    }
}
