use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anisoflow::boundary::BoundarySystem;
use anisoflow::image::DEFAULT_SCALE;
use anisoflow::io::{curve_csv, matrix_csv, vector_csv, write_trace};
use anisoflow::{
    load_pgm, local_frames, run, ChargeSet, DiscreteCurve, Evolution, FlowConfig, FlowTrace, PixelField,
    TerminalReason, Vec2,
};
use anyhow::{bail, Context, Result};

use crate::args::{BenchArgs, ConfigFile, CurveArgs, DiagnoseArgs, EvolveArgs, McfArgs, OutputArgs, RunArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_BUDGET: u8 = 2;
pub const EXIT_ERROR: u8 = 3;

const MCF_DEFAULT_ITERS: usize = 1000;

/// Resolved inputs, written to `manifest.txt` before the run starts.
struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    fn new(subcommand: &str) -> Self {
        Self {
            entries: vec![("subcommand".into(), subcommand.into())],
        }
    }

    fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(text, "{k}={v}");
        }
        fs::write(dir.join("manifest.txt"), text).context("writing manifest")
    }
}

fn prepare_out(output: &OutputArgs, cfg: &ConfigFile, default: &str) -> Result<PathBuf> {
    let dir = output
        .out
        .clone()
        .or_else(|| cfg.path("out"))
        .unwrap_or_else(|| PathBuf::from(default));
    if dir.exists() {
        let non_empty = fs::read_dir(&dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if non_empty && !output.overwrite {
            bail!("output directory {} is not empty; pass --overwrite", dir.display());
        }
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(fs::canonicalize(&dir)?)
}

fn absolute(p: &Path) -> Result<PathBuf> {
    fs::canonicalize(p).with_context(|| format!("cannot open {}", p.display()))
}

/// Initial curve and its node count. CSV curves keep their own count unless
/// `--n` is given; circles default to 64 nodes.
fn resolve_curve(args: &CurveArgs, cfg: &ConfigFile, manifest: &mut Manifest) -> Result<(DiscreteCurve, usize)> {
    let n_flag = match args.n {
        Some(n) => Some(n),
        None => cfg.get::<usize>("n")?,
    };
    let circle = match args.circle {
        Some(c) => Some(c),
        None if args.curve.is_none() => cfg.circle()?,
        None => None,
    };
    let curve_path = args.curve.clone().or_else(|| if circle.is_none() { cfg.path("curve") } else { None });
    let (curve, n) = match (curve_path, circle) {
        (Some(path), _) => {
            let path = absolute(&path)?;
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let curve = anisoflow::io::parse_curve_csv(&text).with_context(|| format!("in {}", path.display()))?;
            manifest.push("curve", path.display());
            let n = n_flag.unwrap_or(curve.len());
            (curve, n)
        }
        (None, Some((centre, r))) => {
            let n = n_flag.unwrap_or(64);
            manifest.push("circle", format!("{:?},{:?},{:?}", centre.x, centre.y, r));
            (DiscreteCurve::circle(centre, r, n)?, n)
        }
        (None, None) => bail!("an initial curve is required: pass --curve PATH or --circle cx,cy,r"),
    };
    manifest.push("n", n);
    Ok((curve, n))
}

fn resolve_run(
    n: usize,
    mu: Option<f64>,
    run: &RunArgs,
    cfg: &ConfigFile,
    default_iters: usize,
) -> Result<FlowConfig> {
    let mut fc = FlowConfig::with_points(n);
    if let Some(dt) = run.dt.or(cfg.get("dt")?) {
        fc.dt = dt;
    }
    if let Some(mu) = mu.or(cfg.get("mu")?) {
        fc.mu = mu;
    }
    fc.max_iterations = run.max_iters.or(cfg.get("max-iters")?).unwrap_or(default_iters);
    if let Some(k) = run.trace_every.or(cfg.get("trace-every")?) {
        fc.trace_every = k;
    }
    fc.stability = run.stability || cfg.flag("stability")?;
    fc.validate()?;
    Ok(fc)
}

fn echo_config(m: &mut Manifest, fc: &FlowConfig) {
    m.push("dt", format!("{:?}", fc.dt));
    m.push("mu", format!("{:?}", fc.mu));
    m.push("threshold", format!("{:?}", fc.match_threshold));
    m.push("max-iters", fc.max_iterations);
    m.push("trace-every", fc.trace_every);
    m.push("stability", fc.stability);
}

fn echo_charges(m: &mut Manifest, charges: &ChargeSet) {
    for c in charges {
        m.push("charge", format!("{:?}@{:?},{:?}", c.strength, c.position.x, c.position.y));
    }
}

fn report(trace: &FlowTrace) {
    let t = &trace.termination;
    let last = trace.last();
    println!(
        "{} after {} iterations: matched {:.4}, area {:e}",
        t.reason, t.iteration, last.matched_fraction, last.area
    );
    if let Some(err) = &t.error {
        eprintln!("error at iteration {}: {err}", t.iteration);
    }
}

fn dump_first_step(
    dir: &Path,
    curve: &DiscreteCurve,
    mask: &[f64],
    charges: &ChargeSet,
    fc: &FlowConfig,
) -> Result<()> {
    let dir = dir.join("matrices");
    fs::create_dir_all(&dir)?;
    let frames = local_frames(curve, fc.mu)?;
    let sys = BoundarySystem::new(curve, &frames)?;
    let kappa: Vec<f64> = frames.curvature.iter().zip(mask).map(|(k, m)| k * m).collect();
    let u = sys.solve_stage1(&kappa)?;
    fs::write(dir.join("stage1_matrix.csv"), matrix_csv(&sys.stage1_matrix()))?;
    fs::write(dir.join("stage1_rhs.csv"), vector_csv(&sys.stage1_rhs(&kappa)?))?;
    fs::write(dir.join("stage2_matrix.csv"), matrix_csv(&sys.stage2_matrix(charges)?))?;
    fs::write(dir.join("stage2_rhs.csv"), vector_csv(&sys.stage2_rhs(&u, charges.len())?))?;
    Ok(())
}

pub fn evolve(args: &EvolveArgs) -> Result<u8> {
    let cfg = ConfigFile::load(args.output.config.as_deref())?;
    let mut m = Manifest::new("evolve");
    let Some(image_path) = args.image.clone().or_else(|| cfg.path("image")) else {
        bail!("missing --image PATH\n\nUsage: anisoflow evolve --image PATH (--curve PATH | --circle cx,cy,r) [OPTIONS]");
    };
    let image_path = absolute(&image_path)?;
    let bytes = fs::read(&image_path).with_context(|| format!("reading {}", image_path.display()))?;
    let scale = args.scale.or(cfg.get("scale")?).unwrap_or(DEFAULT_SCALE);
    let field = load_pgm(&bytes)
        .and_then(|f| f.with_scale(scale))
        .with_context(|| format!("in {}", image_path.display()))?;
    m.push("image", image_path.display());
    m.push("scale", format!("{scale:?}"));

    let (curve, n) = resolve_curve(&args.curve, &cfg, &mut m)?;
    let mut fc = resolve_run(n, args.curve.mu, &args.run, &cfg, 50_000)?;
    if let Some(t) = args.threshold.or(cfg.get("threshold")?) {
        fc.match_threshold = t;
        fc.validate()?;
    }
    let charges = if args.charges.is_empty() {
        ChargeSet::new(cfg.charges().to_vec())
    } else {
        ChargeSet::new(args.charges.clone())
    };
    echo_config(&mut m, &fc);
    echo_charges(&mut m, &charges);
    let dump = args.dump_matrices || cfg.flag("dump-matrices")?;
    m.push("dump-matrices", dump);

    let out = prepare_out(&args.output, &cfg, "anisoflow_evolve")?;
    m.push("out", out.display());
    m.write(&out)?;

    if dump {
        let evo = Evolution::new(&curve, &charges, Some(&field), &fc)?;
        dump_first_step(&out, evo.curve(), &evo.mask(), &charges, &fc)?;
    }

    let trace = run(&curve, &charges, Some(&field), &fc)?;
    write_trace(&out, &trace, fc.stability)?;
    fs::write(out.join("final.csv"), curve_csv(&trace.final_curve))?;
    fs::write(out.join("overlay.pgm"), field.with_curve_burned(&trace.final_curve).to_pgm())?;
    report(&trace);
    Ok(match trace.termination.reason {
        TerminalReason::Matched => EXIT_OK,
        TerminalReason::MaxIterations => EXIT_BUDGET,
        _ => EXIT_ERROR,
    })
}

pub fn mcf(args: &McfArgs) -> Result<u8> {
    let cfg = ConfigFile::load(args.output.config.as_deref())?;
    let mut m = Manifest::new("mcf");
    let (curve, n) = resolve_curve(&args.curve, &cfg, &mut m)?;
    let mut fc = resolve_run(n, args.curve.mu, &args.run, &cfg, MCF_DEFAULT_ITERS)?;
    fc.clamp = match args.clamp {
        Some(c) => Some(c),
        None => cfg.get("clamp")?,
    };
    echo_config(&mut m, &fc);
    m.push("clamp", fc.clamp.map(|c| format!("{c:?}").to_lowercase()).unwrap_or_default());

    let out = prepare_out(&args.output, &cfg, "anisoflow_mcf")?;
    m.push("out", out.display());
    m.write(&out)?;

    let trace = run(&curve, &ChargeSet::default(), None, &fc)?;
    write_trace(&out, &trace, fc.stability)?;
    fs::write(out.join("final.csv"), curve_csv(&trace.final_curve))?;
    report(&trace);
    Ok(match trace.termination.reason {
        TerminalReason::MaxIterations | TerminalReason::Matched => EXIT_OK,
        _ => EXIT_ERROR,
    })
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<u8> {
    let cfg = ConfigFile::load(args.output.config.as_deref())?;
    let mut m = Manifest::new("diagnose");
    let (curve, n) = resolve_curve(&args.curve, &cfg, &mut m)?;
    let curve = if curve.len() == n { curve } else { curve.resample_uniform(n)? };
    let mu = match args.curve.mu {
        Some(mu) => mu,
        None => cfg.get("mu")?.unwrap_or(0.15),
    };
    m.push("mu", format!("{mu:?}"));
    let positions = if args.charges.is_empty() {
        cfg.charges().to_vec()
    } else {
        args.charges.clone()
    };
    if positions.is_empty() {
        bail!("diagnose needs at least one --charge c@x,y; the first is the reference");
    }
    echo_charges(&mut m, &ChargeSet::new(positions.clone()));
    let dump = args.dump_matrices || cfg.flag("dump-matrices")?;
    m.push("dump-matrices", dump);
    let out = prepare_out(&args.output, &cfg, "anisoflow_diagnose")?;
    m.push("out", out.display());
    m.write(&out)?;

    let frames = local_frames(&curve, mu)?;
    let sys = BoundarySystem::new(&curve, &frames)?;
    if dump {
        let dir = out.join("matrices");
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("stage1_matrix.csv"), matrix_csv(&sys.stage1_matrix()))?;
    }

    let mut csv = String::from("index,strength,x,y,distance,cond_stage1,cond_stage2,ratio,error\n");
    let mut reference: Option<f64> = None;
    let mut reference_failed = false;
    for (i, charge) in positions.iter().enumerate() {
        let set = ChargeSet::new(vec![*charge]);
        let result = if curve.contains(charge.position) {
            sys.conditions(&set).map_err(|e| e.to_string())
        } else {
            Err("charge is not inside the curve".to_string())
        };
        if dump {
            if let Ok(a) = sys.stage2_matrix(&set) {
                fs::write(out.join("matrices").join(format!("stage2_matrix_{i}.csv")), matrix_csv(&a))?;
            }
        }
        let distance = curve.min_distance_to(charge.position);
        let p = charge.position;
        let _ = write!(csv, "{i},{:?},{:?},{:?},{distance:?},", charge.strength, p.x, p.y);
        match result {
            Ok((c1, c2)) => {
                if i == 0 {
                    reference = Some(c2.condition);
                }
                let ratio = reference.map(|r| format!("{:?}", c2.condition / r)).unwrap_or_default();
                let _ = writeln!(csv, "{:?},{:?},{ratio},", c1.condition, c2.condition);
            }
            Err(e) => {
                reference_failed |= i == 0;
                let _ = writeln!(csv, ",,,{}", e.replace(',', ";"));
                eprintln!("position {i} ({:?}, {:?}): {e}", p.x, p.y);
            }
        }
    }
    fs::write(out.join("condition.csv"), csv)?;
    println!("wrote {}", out.join("condition.csv").display());
    Ok(if reference_failed { EXIT_ERROR } else { EXIT_OK })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn bench(args: &BenchArgs) -> Result<u8> {
    let cfg = ConfigFile::load(args.output.config.as_deref())?;
    let mut m = Manifest::new("bench");
    let ns = if args.ns.is_empty() {
        cfg.ns()?.unwrap_or_else(|| vec![16, 32, 64])
    } else {
        args.ns.clone()
    };
    let reps = args.reps.or(cfg.get("reps")?).unwrap_or(10);
    if reps == 0 {
        bail!("--reps must be at least 1");
    }
    let max_iters = args.max_iters.or(cfg.get("max-iters")?).unwrap_or(50_000);
    let list: Vec<String> = ns.iter().map(usize::to_string).collect();
    m.push("ns", list.join(","));
    m.push("reps", reps);
    m.push("max-iters", max_iters);
    m.push("fixture", "disk radius 40 px on 256x256, scale 0.005, circle radius 100 px, charge -1@0,0");
    let out = prepare_out(&args.output, &cfg, "anisoflow_bench")?;
    m.push("out", out.display());
    m.write(&out)?;

    let field = PixelField::disk(256, 256, 40.0, 0.005)?;
    let charges = ChargeSet::new(vec![anisoflow::Charge::new(-1.0, Vec2::zeros())]);
    let mut csv = String::from("n,reps,mean_seconds,std_seconds,iterations,reason,error\n");
    let mut any_ok = false;
    for &n in &ns {
        let fc = FlowConfig {
            max_iterations: max_iters,
            trace_every: max_iters.max(1),
            ..FlowConfig::with_points(n)
        };
        let start = DiscreteCurve::circle(Vec2::zeros(), 0.5, n.max(DiscreteCurve::MIN_POINTS));
        let mut times = Vec::with_capacity(reps);
        let mut outcome = Ok((0, TerminalReason::MaxIterations));
        for _ in 0..reps {
            let t = Instant::now();
            let result = start.clone().and_then(|c| run(&c, &charges, Some(&field), &fc));
            times.push(t.elapsed().as_secs_f64());
            outcome = result.map(|tr| (tr.termination.iteration, tr.termination.reason));
            if outcome.is_err() {
                break;
            }
        }
        match outcome {
            Ok((iters, reason)) => {
                any_ok = true;
                let (mean, std) = mean_std(&times);
                let _ = writeln!(csv, "{n},{reps},{mean:?},{std:?},{iters},{reason},");
                println!("n {n}: {mean:.4}s ± {std:.4}s over {reps} runs, {reason} after {iters} iterations");
            }
            Err(e) => {
                let _ = writeln!(csv, "{n},{reps},,,,,{}", e.to_string().replace(',', ";"));
                eprintln!("n {n}: {e}");
            }
        }
    }
    fs::write(out.join("bench.csv"), csv)?;
    Ok(if any_ok { EXIT_OK } else { EXIT_ERROR })
}
