//! Effective run configuration: flags layered over an optional `key = value` file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Evolve,
    Measures,
    Gqd,
    Wigner,
    Sweep,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Measures => "measures",
            Command::Gqd => "gqd",
            Command::Wigner => "wigner",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
        }
    }

    /// Grids default to JSON, series and reports to CSV/text.
    fn default_format(self) -> Format {
        match self {
            Command::Evolve | Command::Wigner => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => bail!("unknown format `{other}` (expected csv or json)"),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config file,
/// then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Config file with `key = value` lines; keys are the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hopping amplitude Omega.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Bath rate D.
    #[arg(long)]
    pub diss: Option<f64>,
    /// Comma-separated times.
    #[arg(long = "t", conflicts_with = "t_range", allow_hyphen_values = true)]
    pub t: Option<String>,
    /// Times as `start:stop:step`, stop included.
    #[arg(long)]
    pub t_range: Option<String>,
    /// Truncation tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Force the window radius instead of the certified choice.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Largest mirror site in the per-site discord breakdown.
    #[arg(long)]
    pub s_max: Option<usize>,
    /// Momentum grid size for full Wigner grids.
    #[arg(long)]
    pub k_points: Option<usize>,
    /// Emit the Wigner slice at k = (dk/2, -dk/2) instead of the full grid.
    #[arg(long, allow_hyphen_values = true)]
    pub delta_k: Option<f64>,
    /// Also write the full density matrix (single time only) to this JSON file.
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub omega: f64,
    pub diss: f64,
    pub times: Vec<f64>,
    pub tol: f64,
    pub window: Option<usize>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub threads: usize,
    pub s_max: usize,
    pub k_points: Option<usize>,
    pub delta_k: Option<f64>,
    pub dump_matrix: Option<PathBuf>,
}

const KEYS: [&str; 14] = [
    "command",
    "omega",
    "diss",
    "t",
    "t-range",
    "tol",
    "window",
    "format",
    "out",
    "threads",
    "s-max",
    "k-points",
    "delta-k",
    "dump-matrix",
];

/// Parse `key = value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key `{key}`", n + 1);
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            bail!("line {}: duplicate key `{key}`", n + 1);
        }
    }
    Ok(map)
}

fn lookup<T: FromStr>(
    flag: Option<T>,
    file: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    match file.get(key) {
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| anyhow!("config key `{key}`: cannot parse `{v}`: {e}")),
        None => Ok(None),
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("bad time `{s}`"))
        })
        .collect()
}

pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("time range `{text}` must be start:stop:step");
    }
    let nums = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number `{p}` in time range"))
        })
        .collect::<Result<Vec<_>>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(stop >= start) {
        bail!("time range `{text}` needs step > 0 and stop >= start");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        bail!("time range `{text}` has too many points");
    }
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

impl RunConfig {
    /// Layer `flags` over the config file named in them (if any).
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                parse_pairs(&text).with_context(|| format!("in config file {}", path.display()))?
            }
            None => BTreeMap::new(),
        };
        Self::from_layers(command, flags, &file)
    }

    pub fn from_layers(
        command: Command,
        flags: &Flags,
        file: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let times = if let Some(t) = &flags.t {
            parse_list(t)?
        } else if let Some(r) = &flags.t_range {
            parse_range(r)?
        } else {
            match (file.get("t"), file.get("t-range")) {
                (Some(_), Some(_)) => bail!("config sets both `t` and `t-range`"),
                (Some(t), None) => parse_list(t)?,
                (None, Some(r)) => parse_range(r)?,
                (None, None) => vec![1.0],
            }
        };
        let cfg = Self {
            command,
            omega: lookup(flags.omega, file, "omega")?.unwrap_or(1.0),
            diss: lookup(flags.diss, file, "diss")?.unwrap_or(0.5),
            times,
            tol: lookup(flags.tol, file, "tol")?.unwrap_or(1e-10),
            window: lookup(flags.window, file, "window")?,
            format: lookup(flags.format, file, "format")?.unwrap_or(command.default_format()),
            out: lookup(flags.out.clone(), file, "out")?,
            threads: lookup(flags.threads, file, "threads")?.unwrap_or(0),
            s_max: lookup(flags.s_max, file, "s-max")?.unwrap_or(4),
            k_points: lookup(flags.k_points, file, "k-points")?,
            delta_k: lookup(flags.delta_k, file, "delta-k")?,
            dump_matrix: lookup(flags.dump_matrix.clone(), file, "dump-matrix")?,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            bail!("omega must be finite and >= 0");
        }
        if !(self.diss.is_finite() && self.diss >= 0.0) {
            bail!("diss must be finite and >= 0");
        }
        if self.times.is_empty() {
            bail!("no times given");
        }
        if self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            bail!("times must be finite and >= 0");
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            bail!("times must be sorted");
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            bail!("tol must lie in (0, 1e-2]");
        }
        if self.dump_matrix.is_some() && (self.command != Command::Evolve || self.times.len() != 1)
        {
            bail!("dump-matrix needs the evolve command and a single time");
        }
        Ok(())
    }

    /// Effective configuration as `key = value` pairs, readable by [`parse_pairs`].
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let times: Vec<String> = self.times.iter().map(|t| t.to_string()).collect();
        let mut out = vec![
            ("command", self.command.name().to_string()),
            ("omega", self.omega.to_string()),
            ("diss", self.diss.to_string()),
            ("t", times.join(",")),
            ("tol", format!("{:e}", self.tol)),
            ("format", self.format.to_string()),
            ("threads", self.threads.to_string()),
            ("s-max", self.s_max.to_string()),
        ];
        if let Some(w) = self.window {
            out.push(("window", w.to_string()));
        }
        if let Some(k) = self.k_points {
            out.push(("k-points", k.to_string()));
        }
        if let Some(dk) = self.delta_k {
            out.push(("delta-k", dk.to_string()));
        }
        if let Some(p) = &self.out {
            out.push(("out", p.display().to_string()));
        }
        if let Some(p) = &self.dump_matrix {
            out.push(("dump-matrix", p.display().to_string()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Recover the configuration pairs from an output header (`# key = value`
    /// lines; `##` lines are diagnostics).
    pub fn parse_header(text: &str) -> Result<BTreeMap<String, String>> {
        let body: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .filter(|l| !l.starts_with("##"))
            .map(|l| format!("{}\n", l.trim_start_matches('#')))
            .collect();
        parse_pairs(&body)
    }

    #[test]
    fn flags_override_file() {
        let file = parse_pairs("omega = 2\n# note\ndiss=0.25\nt-range = 0:1:0.5\n").unwrap();
        let flags = Flags {
            omega: Some(3.0),
            ..Flags::default()
        };
        let cfg = RunConfig::from_layers(Command::Measures, &flags, &file).unwrap();
        assert_eq!(cfg.omega, 3.0);
        assert_eq!(cfg.diss, 0.25);
        assert_eq!(cfg.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(cfg.format, Format::Csv);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_pairs("omega 2").is_err());
        assert!(parse_pairs("colour = red").is_err());
        assert!(parse_pairs("tol = 1\ntol = 2").is_err());
        let bad = |text: &str| {
            let file = parse_pairs(text).unwrap();
            RunConfig::from_layers(Command::Gqd, &Flags::default(), &file).is_err()
        };
        assert!(bad("t = 1,0.5"));
        assert!(bad("t = -1"));
        assert!(bad("tol = 0.5"));
        assert!(bad("t = 1\nt-range = 0:1:1"));
        assert!(bad("dump-matrix = m.json"));
        assert!(parse_range("0:1:0").is_err());
    }

    #[test]
    fn pairs_round_trip() {
        let file =
            parse_pairs("omega = 0.7\nt = 0,0.1,0.30000000000000004\nwindow = 9\ndelta-k = -1.5")
                .unwrap();
        let cfg = RunConfig::from_layers(Command::Wigner, &Flags::default(), &file).unwrap();
        let text: String = cfg
            .pairs()
            .iter()
            .map(|(k, v)| format!("# {k} = {v}\n"))
            .collect();
        let back = parse_header(&format!("{text}## diagnostic\nrow")).unwrap();
        let again = RunConfig::from_layers(Command::Wigner, &Flags::default(), &back).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn range_includes_stop() {
        let t = parse_range("0:2:0.25").unwrap();
        assert_eq!(t.len(), 9);
        assert!((t[8] - 2.0).abs() < 1e-12);
    }
}
