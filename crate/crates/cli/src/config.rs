//! INI configuration. Precedence, lowest first: built-in defaults, the config
//! file (`--config`, else `$SPHK_CONFIG`), command-line flags.
//!
//! ```ini
//! [eval]
//! eps_rel = 1e-12
//! t_crossover = 1
//! quad_nodes_init = 32
//! quad_nodes_max = 4096
//! smallt_quad_threshold = 0.05
//!
//! [theta]
//! eps_rel = 1e-15
//! regime_switch = 1
//! overlap_lo = 0.5
//! overlap_hi = 1.5
//!
//! [output]
//! format = csv
//! path = out.csv
//! threads = 4
//! seed = 7
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use sphere_heat::sphere_kernel::EvalConfig;
use sphere_heat::{Error, Result};

pub const CONFIG_ENV: &str = "SPHK_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub eval: EvalConfig,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

fn parse<T: FromStr>(section: &str, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Domain(format!("config: cannot parse [{section}] {key} = '{v}'")))
}

impl Config {
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Domain(format!("config: {e}")))?;
        let mut c = Config::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, v) in props.iter() {
                match (section, key) {
                    ("eval", "eps_rel") => c.eval.eps_rel = parse(section, key, v)?,
                    ("eval", "t_crossover") => c.eval.t_crossover = parse(section, key, v)?,
                    ("eval", "quad_nodes_init") => c.eval.quad_nodes_init = parse(section, key, v)?,
                    ("eval", "quad_nodes_max") => c.eval.quad_nodes_max = parse(section, key, v)?,
                    ("eval", "smallt_quad_threshold") => c.eval.smallt_quad_threshold = parse(section, key, v)?,
                    ("theta", "eps_rel") => c.eval.theta.eps_rel = parse(section, key, v)?,
                    ("theta", "regime_switch") => c.eval.theta.regime_switch = parse(section, key, v)?,
                    ("theta", "overlap_lo") => c.eval.theta.overlap_band.0 = parse(section, key, v)?,
                    ("theta", "overlap_hi") => c.eval.theta.overlap_band.1 = parse(section, key, v)?,
                    ("output", "format") => {
                        c.format = match v.trim() {
                            "csv" => Format::Csv,
                            "json" => Format::Json,
                            _ => return Err(Error::Domain(format!("config: unknown format '{v}'"))),
                        }
                    }
                    ("output", "path") => c.output = Some(PathBuf::from(v.trim())),
                    ("output", "threads") => c.threads = Some(parse(section, key, v)?),
                    ("output", "seed") => c.seed = Some(parse(section, key, v)?),
                    _ => {
                        let name = if section.is_empty() { key.to_string() } else { format!("[{section}] {key}") };
                        return Err(Error::Domain(format!("config: unknown key {name}")));
                    }
                }
            }
        }
        c.eval.validate()?;
        if c.threads == Some(0) {
            return Err(Error::Domain("config: threads must be positive".into()));
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    /// The explicit path if given, else `$SPHK_CONFIG`, else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::from_file(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::from_file(Path::new(&p)),
                _ => Ok(Config::default()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let c = Config::from_ini_str(
            "[eval]\neps_rel = 1e-10\nquad_nodes_max = 2048\n[theta]\nregime_switch = 0.8\n\
             [output]\nformat = json\nthreads = 2\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(c.eval.eps_rel, 1e-10);
        assert_eq!(c.eval.quad_nodes_max, 2048);
        assert_eq!(c.eval.theta.regime_switch, 0.8);
        assert_eq!(c.format, Format::Json);
        assert_eq!(c.threads, Some(2));
        assert_eq!(c.seed, Some(9));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(Config::from_ini_str("[eval]\nepsilon = 1e-10\n").is_err());
        assert!(Config::from_ini_str("stray = 1\n").is_err());
        assert!(Config::from_ini_str("[eval]\neps_rel = abc\n").is_err());
        assert!(Config::from_ini_str("[eval]\neps_rel = 2\n").is_err());
        assert!(Config::from_ini_str("[output]\nformat = xml\n").is_err());
        assert!(Config::from_ini_str("[output]\nthreads = 0\n").is_err());
    }

    #[test]
    fn empty_is_default() {
        assert_eq!(Config::from_ini_str("").unwrap(), Config::default());
    }
}
