use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anisoflow::{Charge, Clamp, Vec2};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "anisoflow", version, about = "Anisotropic curvature flow for contour parametrization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a curve onto the dark object of a PGM image.
    Evolve(EvolveArgs),
    /// Plain curvature flow, no image and no charges.
    Mcf(McfArgs),
    /// Condition numbers of the stage matrices for a list of charge positions.
    Diagnose(DiagnoseArgs),
    /// Wall time of the circle-onto-disk run for several point counts.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CurveArgs {
    /// Initial curve, one `x,y` per line.
    #[arg(long, conflicts_with = "circle")]
    pub curve: Option<PathBuf>,
    /// Initial circle as `cx,cy,r`.
    #[arg(long, value_parser = parse_circle, allow_hyphen_values = true)]
    pub circle: Option<(Vec2, f64)>,
    /// Number of curve nodes; the curve is resampled to it.
    #[arg(long)]
    pub n: Option<usize>,
    /// Curvature stencil weight.
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long = "trace-every")]
    pub trace_every: Option<usize>,
    /// Add a `stability_bound` column to summary.csv.
    #[arg(long)]
    pub stability: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub overwrite: bool,
    /// `key=value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// World units per pixel.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Point charge `c@x,y`; repeatable.
    #[arg(long = "charge", value_parser = parse_charge, allow_hyphen_values = true)]
    pub charges: Vec<Charge>,
    /// Matched fraction that ends the run.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Write the first step's stage matrices and right-hand sides as CSV.
    #[arg(long = "dump-matrices")]
    pub dump_matrices: bool,
    #[command(flatten)]
    pub curve: CurveArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct McfArgs {
    /// `min0` or `max0`.
    #[arg(long)]
    pub clamp: Option<Clamp>,
    #[command(flatten)]
    pub curve: CurveArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Charge `c@x,y` per position; the first is the reference.
    #[arg(long = "charge", value_parser = parse_charge, allow_hyphen_values = true)]
    pub charges: Vec<Charge>,
    #[arg(long = "dump-matrices")]
    pub dump_matrices: bool,
    #[command(flatten)]
    pub curve: CurveArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated point counts.
    #[arg(long = "ns", value_delimiter = ',')]
    pub ns: Vec<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn parse_circle(s: &str) -> std::result::Result<(Vec2, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format!("expected cx,cy,r, got {s:?}"))?;
    match nums[..] {
        [cx, cy, r] if r > 0.0 => Ok((Vec2::new(cx, cy), r)),
        [_, _, _] => Err(format!("circle radius must be positive in {s:?}")),
        _ => Err(format!("expected cx,cy,r, got {s:?}")),
    }
}

pub fn parse_charge(s: &str) -> std::result::Result<Charge, String> {
    let bad = || format!("expected c@x,y, got {s:?}");
    let (c, pos) = s.split_once('@').ok_or_else(bad)?;
    let (x, y) = pos.split_once(',').ok_or_else(bad)?;
    let c: f64 = c.trim().parse().map_err(|_| bad())?;
    let x: f64 = x.trim().parse().map_err(|_| bad())?;
    let y: f64 = y.trim().parse().map_err(|_| bad())?;
    Ok(Charge::new(c, Vec2::new(x, y)))
}

/// Parsed `key=value` file. `charge` may repeat; other keys may not.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    charges: Vec<Charge>,
}

const CONFIG_KEYS: &[&str] = &[
    "image",
    "scale",
    "curve",
    "circle",
    "n",
    "dt",
    "mu",
    "threshold",
    "max-iters",
    "trace-every",
    "out",
    "clamp",
    "stability",
    "dump-matrices",
    "reps",
    "ns",
];

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key=value", i + 1);
            };
            let key = key.trim().replace('_', "-");
            let value = value.trim().to_string();
            if key == "charge" {
                cfg.charges.push(parse_charge(&value).map_err(anyhow::Error::msg)?);
                continue;
            }
            if !CONFIG_KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key {key:?}", i + 1);
            }
            if cfg.values.insert(key.clone(), value).is_some() {
                bail!("line {}: {key:?} given twice", i + 1);
            }
        }
        Ok(cfg)
    }

    pub fn charges(&self) -> &[Charge] {
        &self.charges
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key {key:?}: {e}")),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(PathBuf::from)
    }

    pub fn circle(&self) -> Result<Option<(Vec2, f64)>> {
        self.values
            .get("circle")
            .map(|s| parse_circle(s).map_err(anyhow::Error::msg))
            .transpose()
    }

    pub fn ns(&self) -> Result<Option<Vec<usize>>> {
        self.values
            .get("ns")
            .map(|s| {
                s.split(',')
                    .map(|p| p.trim().parse::<usize>().with_context(|| format!("config key \"ns\": {s:?}")))
                    .collect()
            })
            .transpose()
    }
}
