use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use limsup::covering::{borel_cantelli_check, greedy_disjoint_cover, weak_redundancy_report, BallSequence, BcStrategy, CoverOptions};
use limsup::dimension::{hausdorff_content_upper_with_budget, natural_cover_critical_exponent, predict_rect_dim, predict_shrunk_ball_dim, CoverItem, CoverShape, CriticalOptions};
use limsup::experiments::{
    default_out, gen_farey, gen_ifs_orbit, gen_random, rerun_manifest, run_pipeline, ExperimentConfig, GeneratorSpec,
    LengthRule, RunManifest,
};
use limsup::extraction::{
    extract_conditioned, extract_lower_conditioned, extract_upper_conditioned, extract_weakly_redundant,
    ConditionedOptions, Schedule,
};
use limsup::geometry::{Ball, OpenSet};
use limsup::measure::SelfSimilarMeasure;
use limsup::{Error, Flag, Result};

#[derive(Parser)]
#[command(name = "limsup", version, about = "Coverings, extractions and dimension estimates for limsup sets of balls")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory; standard output when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the random generator
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Node budget for measure evaluation and content refinement
    #[arg(long, global = true)]
    budget: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a ball sequence
    Gen(GenArgs),
    /// Extract a subsequence
    Extract(ExtractArgs),
    /// Weak-redundancy profile J_k per scale bucket
    Redundancy {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long, default_value_t = 12)]
        k_max: i32,
    },
    /// Greedy disjoint cover of an open set
    Cover {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long, default_value = "lebesgue:1")]
        measure: String,
        /// File of `box lo.. hi..` lines; the unit cube by default
        #[arg(long)]
        omega: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        g: usize,
        #[arg(long, default_value_t = 0.75)]
        target: f64,
        #[arg(long, default_value_t = 8)]
        rounds: usize,
    },
    /// Borel–Cantelli sums for the balls inside a ball B
    BcCheck {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long, default_value = "lebesgue:1")]
        measure: String,
        /// Ball `d c.. r`
        #[arg(long)]
        ball: String,
        #[arg(long, default_value_t = 1000)]
        q_max: usize,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Hausdorff content upper estimate of a union of boxes
    Content {
        /// File of `box lo.. hi..` lines
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        s: f64,
        /// Scale bound; infinite when absent
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 12)]
        depth: u32,
    },
    /// Critical exponent of the natural cover of a sequence
    Dim {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long, default_value = "lebesgue:1")]
        measure: String,
        #[arg(long, conflicts_with = "tau")]
        delta: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        tau: Option<Vec<f64>>,
    },
    /// Run a configured pipeline, or re-run a manifest and compare outputs
    Pipeline {
        /// Manifest of an earlier run to reproduce
        #[arg(long)]
        rerun: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: Option<GenKind>,
    #[arg(long, default_value_t = 100)]
    q_max: u64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// `l_n = a / n`
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value = "cantor:0.5")]
    measure: String,
    #[arg(long, default_value_t = 8)]
    depth: u32,
    #[arg(long, default_value_t = 3.0)]
    factor: f64,
    /// Base point, comma separated
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Farey,
    Random,
    Ifs,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(value_enum)]
    mode: ExtractMode,
    #[arg(long)]
    seq: PathBuf,
    #[arg(long, default_value = "lebesgue:1")]
    measure: String,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 12)]
    k_max: u32,
    #[arg(long, default_value_t = 0.5)]
    v: f64,
    #[arg(long, default_value_t = 0.75)]
    target: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractMode {
    WeaklyRedundant,
    Lower,
    Upper,
    Conditioned,
}

/// Parses `lebesgue:d`, `cantor:p` or a measure file path.
fn measure(arg: &str) -> Result<SelfSimilarMeasure> {
    if let Some(d) = arg.strip_prefix("lebesgue:") {
        return SelfSimilarMeasure::lebesgue(d.parse().map_err(|_| Error::InvalidArgument(format!("bad dimension {d:?}")))?);
    }
    if let Some(p) = arg.strip_prefix("cantor:") {
        return SelfSimilarMeasure::cantor(p.parse().map_err(|_| Error::InvalidArgument(format!("bad weight {p:?}")))?);
    }
    SelfSimilarMeasure::parse(&std::fs::read_to_string(arg)?)
}

fn read_seq(path: &Path) -> Result<BallSequence> {
    BallSequence::parse(&std::fs::read_to_string(path)?, path.display().to_string())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_config(path: &Path, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?;
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(b) = common.budget {
        cfg.budget = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Vec<String>> {
    let common = &cli.common;
    let mut warnings: Vec<String> = Vec::new();
    let mut flag = |flags: &[Flag]| warnings.extend(flags.iter().map(|f| f.to_string()));
    match cli.cmd {
        Cmd::Gen(g) => {
            let seq = match (&common.config, g.kind) {
                (Some(path), _) => {
                    let cfg = load_config(path, common)?;
                    match &cfg.generator {
                        GeneratorSpec::Farey { q_max } => gen_farey(*q_max)?,
                        GeneratorSpec::Random { n, dim, .. } => {
                            gen_random(*n, &cfg.length_rule().expect("random"), cfg.seed.expect("validated"), *dim)?.0
                        }
                        GeneratorSpec::Ifs { depth, factor, x } => {
                            let mu = cfg.measure.build(path.parent())?;
                            let x = x.clone().unwrap_or_else(|| mu.maps()[0].fixed_point());
                            gen_ifs_orbit(&mu, &x, *depth, *factor)?
                        }
                    }
                }
                (None, Some(GenKind::Farey)) => gen_farey(g.q_max)?,
                (None, Some(GenKind::Random)) => {
                    let seed = common.seed.ok_or_else(|| Error::InvalidArgument("random generation needs --seed".into()))?;
                    let (seq, diag) = gen_random(g.n, &LengthRule::Harmonic { a: g.a }, seed, g.dim)?;
                    eprintln!("shepp diagnostic: exponent {:?}, verdict {:?}", diag.term_exponent, diag.verdict);
                    seq
                }
                (None, Some(GenKind::Ifs)) => {
                    let mu = measure(&g.measure)?;
                    let x = g.x.clone().unwrap_or_else(|| mu.maps()[0].fixed_point());
                    gen_ifs_orbit(&mu, &x, g.depth, g.factor)?
                }
                (None, None) => return Err(Error::InvalidArgument("give a generator kind or --config".into())),
            };
            flag(&seq.check_radii());
            emit(&common.out, &seq.to_text())?;
        }
        Cmd::Extract(e) => {
            let seq = read_seq(&e.seq)?;
            let mu = measure(&e.measure)?;
            let res = match e.mode {
                ExtractMode::WeaklyRedundant => extract_weakly_redundant(&seq, &mu, e.k_max, e.target, 1e-10)?,
                ExtractMode::Lower => extract_lower_conditioned(&seq, &mu, e.eps, 1e-10)?,
                ExtractMode::Upper => extract_upper_conditioned(&seq, &mu, e.eps, e.v, None, 1e-10)?,
                ExtractMode::Conditioned => {
                    let opts = ConditionedOptions {
                        schedule: Schedule::Harmonic,
                        k_max: e.k_max,
                        report_eps: e.eps,
                        ..Default::default()
                    };
                    let r = extract_conditioned(&seq, &mu, &opts)?;
                    if let Some(c) = r.cut {
                        eprintln!("cut position {} of {} for eps {}", c.position, r.kept.len(), c.eps);
                    }
                    r
                }
            };
            flag(&res.flags);
            emit(&common.out, &res.to_csv())?;
        }
        Cmd::Redundancy { seq, k_max } => {
            let rep = weak_redundancy_report(&read_seq(&seq)?, k_max);
            flag(&rep.flags);
            emit(&common.out, &rep.to_csv())?;
        }
        Cmd::Cover { seq, measure: m, omega, g, target, rounds } => {
            let seq = read_seq(&seq)?;
            let mu = measure(&m)?;
            let omega = match omega {
                Some(p) => OpenSet::parse(&std::fs::read_to_string(p)?)?,
                None => OpenSet::unit(seq.dim()),
            };
            let fam = greedy_disjoint_cover(&seq, &mu, &omega, g, &CoverOptions { target, rounds, tol: 1e-10 })?;
            eprintln!("covered fraction {} with {} balls", fam.covered_fraction, fam.indices.len());
            flag(&fam.flags);
            emit(&common.out, &fam.to_csv())?;
        }
        Cmd::BcCheck { seq, measure: m, ball, q_max, c } => {
            let seq = read_seq(&seq)?;
            let b: Ball = ball.parse()?;
            let rep = borel_cantelli_check(&seq, &measure(&m)?, &b, &BcStrategy::default(), q_max, c, 1e-10)?;
            if let Some(q) = rep.quasi_independent() {
                eprintln!("quasi-independence observed: {q}");
            }
            flag(&rep.flags);
            emit(&common.out, &rep.to_csv())?;
        }
        Cmd::Content { set, s, t, depth } => {
            let set = OpenSet::parse(&std::fs::read_to_string(set)?)?;
            let budget = common.budget.unwrap_or(limsup::dimension::DEFAULT_CONTENT_BUDGET);
            let est = hausdorff_content_upper_with_budget(&set, s, t, depth, budget)?;
            flag(&est.flags);
            let lower = est.value_lower.map_or(String::new(), |v| v.to_string());
            let text = format!("s,t,value_upper,value_lower,dyadic_factor,cover_size\n{},{},{},{},{},{}\n",
                s, t.map_or("inf".into(), |t| t.to_string()), est.value_upper, lower, est.dyadic_factor, est.cover.len());
            if let Some(p) = &common.out {
                let cover: String = est.cover.iter().filter_map(|b| OpenSet::new(vec![b.clone()]).ok()).map(|o| o.to_string()).collect();
                std::fs::write(p.with_extension("cover.txt"), cover)?;
            }
            emit(&common.out, &text)?;
        }
        Cmd::Dim { seq, measure: m, delta, tau } => {
            let seq = read_seq(&seq)?;
            let mu = measure(&m)?;
            let shape = tau.clone().map_or(CoverShape::Ball, CoverShape::Rect);
            let delta = delta.unwrap_or(1.0);
            let items: Vec<CoverItem> = seq
                .iter()
                .filter(|b| tau.is_none() || b.radius <= 1.0)
                .map(|b| CoverItem {
                    radius: if tau.is_some() { b.radius } else { b.radius.powf(delta) },
                    mass: f64::NAN,
                    weight: 1.0,
                })
                .collect();
            let mut opts = CriticalOptions::new(seq.dim() as f64);
            if let Ok(dm) = mu.dimension() {
                opts.prediction = Some(match &tau {
                    Some(t) => (predict_rect_dim(dm, t)?, "rect".into()),
                    None => (predict_shrunk_ball_dim(dm, delta)?, "dim(mu)/delta".into()),
                });
            }
            let rep = natural_cover_critical_exponent(&items, &shape, &opts)?;
            eprintln!("estimate {:?}, prediction {:?}, tail crossing {:?}", rep.estimate, rep.prediction, rep.tail_cross);
            flag(&rep.flags);
            emit(&common.out, &rep.to_csv())?;
        }
        Cmd::Pipeline { rerun } => {
            if let Some(mpath) = rerun {
                let manifest = RunManifest::from_toml(&std::fs::read_to_string(&mpath)?)?;
                let out = common.out.clone().unwrap_or_else(|| mpath.with_file_name("rerun"));
                let diff = rerun_manifest(&manifest, &out, mpath.parent())?;
                if !diff.is_empty() {
                    return Err(Error::InvalidArgument(format!("outputs differ from the manifest: {}", diff.join(", "))));
                }
                eprintln!("all {} outputs reproduced byte for byte", manifest.output_hashes().len());
            } else {
                let path = common.config.as_ref().ok_or_else(|| Error::InvalidArgument("pipeline needs --config".into()))?;
                let cfg = load_config(path, common)?;
                let out = common.out.clone().unwrap_or_else(|| default_out(&cfg));
                let manifest = run_pipeline(&cfg, &out, path.parent())?;
                for s in &manifest.steps {
                    let summary: Vec<String> = s.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    eprintln!("{} ({} ms): {}", s.name, s.wall_ms, summary.join(" "));
                }
                warnings.extend(manifest.warnings.iter().cloned());
            }
        }
    }
    Ok(warnings)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(w) if w.is_empty() => ExitCode::SUCCESS,
        Ok(w) => {
            for x in w {
                eprintln!("warning: {x}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
