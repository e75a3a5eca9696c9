use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covering::BallSequence;
use crate::dimension::{
    natural_cover_critical_exponent, predict_rect_dim, predict_shrunk_ball_dim, CoverItem, CoverShape,
    CriticalOptions, DimensionReport,
};
use crate::error::{Error, Flag, Result};
use crate::extraction::{extract_conditioned, extract_weakly_redundant, ConditionedOptions};
use crate::geometry::Aabb;
use crate::measure::SelfSimilarMeasure;

use super::config::{ExperimentConfig, GeneratorSpec};
use super::generators::{farey_denominators, gen_farey, gen_ifs_orbit, gen_random, PRNG_NAME};

/// Rows written per CSV file; longer tables are cut and flagged.
pub const CSV_ROW_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub name: String,
    pub wall_ms: u64,
    pub outputs: Vec<OutputFile>,
    pub summary: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub config_hash: String,
    pub tool_version: String,
    pub prng: String,
    pub steps: Vec<StepReport>,
    pub warnings: Vec<String>,
    /// Canonical configuration, enough to re-run.
    pub config: String,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(0, e.message().to_string()))
    }

    pub fn clean(&self) -> bool {
        self.warnings.is_empty()
    }

    /// `(file, sha256)` of every CSV output, in order.
    pub fn output_hashes(&self) -> Vec<(String, String)> {
        self.steps.iter().flat_map(|s| s.outputs.iter().map(|o| (o.file.clone(), o.sha256.clone()))).collect()
    }

    pub fn step(&self, name: &str) -> Option<&StepReport> {
        self.steps.iter().find(|s| s.name == name)
    }

    pub fn summary(&self, step: &str, key: &str) -> Option<&str> {
        self.step(step)?.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

struct Step {
    report: StepReport,
    start: Instant,
}

impl Step {
    fn new(name: &str) -> Self {
        Step {
            report: StepReport {
                name: name.into(),
                wall_ms: 0,
                outputs: Vec::new(),
                summary: Vec::new(),
                warnings: Vec::new(),
            },
            start: Instant::now(),
        }
    }

    fn write(&mut self, dir: &Path, file: &str, text: &str) -> Result<()> {
        std::fs::write(dir.join(file), text)?;
        self.report.outputs.push(OutputFile { file: file.into(), sha256: hex::encode(Sha256::digest(text.as_bytes())) });
        Ok(())
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.report.summary.push((key.into(), value.to_string()));
    }

    fn flags(&mut self, flags: &[Flag]) {
        self.report.warnings.extend(flags.iter().map(|f| f.to_string()));
    }

    fn finish(mut self, steps: &mut Vec<StepReport>) {
        self.report.wall_ms = self.start.elapsed().as_millis() as u64;
        steps.push(self.report);
    }
}

fn sequence_csv(seq: &BallSequence) -> (String, bool) {
    let mut s = String::from("index");
    for i in 0..seq.dim() {
        let _ = write!(s, ",c{i}");
    }
    s.push_str(",radius\n");
    for (n, b) in seq.iter().enumerate().take(CSV_ROW_CAP) {
        let _ = write!(s, "{n}");
        for c in b.center {
            let _ = write!(s, ",{c}");
        }
        let _ = writeln!(s, ",{}", b.radius);
    }
    (s, seq.len() > CSV_ROW_CAP)
}

/// Either a materialized sequence or the Farey family grouped by denominator.
enum Family {
    Balls(BallSequence),
    FareyGroups(Vec<(u64, u64, f64)>),
}

/// Runs generator → extractions → set transform → critical exponent, writing
/// every intermediate table to `out` together with `manifest.toml`.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path, base: Option<&Path>) -> Result<RunManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let mu = cfg.measure.build(base)?;
    let mut steps = Vec::new();
    let p = &cfg.pipeline;
    let extracting = p.weakly_redundant || p.conditioned;

    let mut step = Step::new("generate");
    let mut family = match &cfg.generator {
        GeneratorSpec::Farey { q_max } => {
            let groups = farey_denominators(*q_max);
            let count: u64 = groups.iter().map(|g| g.1).sum();
            step.note("balls", count);
            if count as usize <= cfg.max_balls {
                Family::Balls(gen_farey(*q_max)?)
            } else if extracting || !p.regions.is_empty() {
                return Err(Error::Budget(format!(
                    "{count} Farey balls exceed max_balls = {}; extraction and regions need them materialized",
                    cfg.max_balls
                )));
            } else {
                step.note("grouped_by_denominator", "true");
                Family::FareyGroups(groups)
            }
        }
        GeneratorSpec::Random { n, dim, .. } => {
            let rule = cfg.length_rule().expect("random generator");
            let seed = cfg.seed.expect("validated");
            let (seq, diag) = gen_random(*n, &rule, seed, *dim)?;
            let mut csv = String::from("N,partial_sum\n");
            for (n, v) in &diag.partial_sums {
                let _ = writeln!(csv, "{n},{v}");
            }
            step.write(out, "shepp.csv", &csv)?;
            step.note("shepp_term_exponent", diag.term_exponent.map_or("none".into(), |x| format!("{x}")));
            step.note("shepp_verdict", format!("{:?}", diag.verdict));
            step.note("prng", PRNG_NAME);
            Family::Balls(seq)
        }
        GeneratorSpec::Ifs { depth, factor, x } => {
            let x = x.clone().unwrap_or_else(|| mu.maps()[0].fixed_point());
            Family::Balls(gen_ifs_orbit(&mu, &x, *depth, *factor)?)
        }
    };
    if let Family::Balls(seq) = &family {
        crate::geometry::check_dim(mu.dim(), seq.dim())?;
        step.note("balls", seq.len());
        step.flags(&seq.check_radii());
        let (csv, cut) = sequence_csv(seq);
        if cut {
            step.flags(&[Flag::Truncated(format!("sequence.csv keeps the first {CSV_ROW_CAP} rows"))]);
        }
        step.write(out, "sequence.csv", &csv)?;
    }
    step.finish(&mut steps);

    if let Family::Balls(seq) = &mut family {
        if p.weakly_redundant {
            let mut step = Step::new("weakly_redundant");
            let res = extract_weakly_redundant(seq, &mu, p.k_max, p.cover_target, 1e-10)?;
            step.note("kept", res.kept.len());
            step.note("certified", res.certificate.iter().all(|c| c.verified && c.families as i32 <= c.k + 1));
            step.flags(&res.flags);
            step.write(out, "weakly_redundant.csv", &res.to_csv())?;
            if let Some(r) = &res.redundancy {
                step.write(out, "redundancy.csv", &r.to_csv())?;
            }
            *seq = res.subsequence(seq);
            step.finish(&mut steps);
        }
        if p.conditioned {
            let mut step = Step::new("conditioned");
            let opts = ConditionedOptions {
                schedule: p.schedule()?,
                k_max: p.k_max,
                report_eps: p.report_eps,
                ..Default::default()
            };
            let res = extract_conditioned(seq, &mu, &opts)?;
            step.note("kept", res.kept.len());
            if let Some(c) = res.cut {
                step.note("cut_position", c.position);
                let dim = mu.dimension()?;
                let worst = res.kept[c.position..]
                    .iter()
                    .filter_map(|k| k.ratio)
                    .map(|r| (r - dim).abs())
                    .fold(0.0, f64::max);
                step.note("max_ratio_deviation_beyond_cut", worst);
            }
            step.flags(&res.flags);
            step.write(out, "conditioned.csv", &res.to_csv())?;
            if let Some(a) = &res.ac {
                step.write(out, "conditioned_ac.csv", &a.to_csv())?;
            }
            *seq = res.subsequence(seq);
            step.finish(&mut steps);
        }
    }

    let mut step = Step::new("dimension");
    let d = mu.dim() as f64;
    let (shape, items, region_items) = transform(&family, cfg, &mu, &mut step)?;
    let mut opts = CriticalOptions::new(d);
    opts.tail_fraction = p.tail_fraction;
    opts.tolerance = p.tolerance;
    match mu.dimension() {
        Ok(dim_mu) => {
            opts.prediction = Some(match &shape {
                CoverShape::Ball => {
                    (predict_shrunk_ball_dim(dim_mu, p.delta.unwrap_or(1.0))?, "dim(mu)/delta".to_string())
                }
                CoverShape::Rect(tau) => {
                    if !mu.support_is_regular_closed() {
                        step.report.warnings.push(
                            "the rectangle prediction assumes the support is the closure of its interior".into(),
                        );
                    }
                    (predict_rect_dim(dim_mu, tau)?, "min_i (dim(mu) + sum_{j<=i} (tau_i - tau_j)) / tau_i".to_string())
                }
            });
        }
        Err(e) => step.report.warnings.push(format!("no prediction: {e}")),
    }
    let report = natural_cover_critical_exponent(&items, &shape, &opts)?;
    write_report(&mut step, out, "dimension", &report)?;
    if !region_items.is_empty() {
        let mut csv = String::from("region,lo,hi,count,estimate,tail_cross\n");
        for (i, (bx, its)) in region_items.iter().enumerate() {
            let fmt = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            let (est, cross) = if its.is_empty() {
                (None, None)
            } else {
                let r = natural_cover_critical_exponent(its, &shape, &opts)?;
                (r.estimate, r.tail_cross)
            };
            let o = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            let _ = writeln!(csv, "{i},{},{},{},{},{}", fmt(&bx.lo), fmt(&bx.hi), its.len(), o(est), o(cross));
        }
        step.write(out, "regions.csv", &csv)?;
    }
    step.finish(&mut steps);

    let warnings: Vec<String> =
        steps.iter().flat_map(|s| s.warnings.iter().map(move |w| format!("{}: {w}", s.name))).collect();
    let manifest = RunManifest {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        prng: PRNG_NAME.to_string(),
        steps,
        warnings,
        config: cfg.to_toml(),
    };
    std::fs::write(out.join("manifest.toml"), manifest.to_toml())?;
    Ok(manifest)
}

fn write_report(step: &mut Step, out: &Path, stem: &str, r: &DimensionReport) -> Result<()> {
    let o = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x}"));
    step.note("prediction", o(r.prediction));
    step.note("formula", &r.formula);
    step.note("estimate", o(r.estimate));
    step.note("tail_cross", o(r.tail_cross));
    step.note("agrees", r.agrees().map_or("unknown".to_string(), |a| a.to_string()));
    step.flags(&r.flags);
    step.write(out, &format!("{stem}.csv"), &r.to_csv())?;
    step.write(out, &format!("{stem}_tail.dat"), &r.plot_tail())?;
    step.write(out, &format!("{stem}_slope.dat"), &r.plot_slope())?;
    Ok(())
}

type RegionItems = Vec<(Aabb, Vec<CoverItem>)>;

/// Applies the contraction or rectangle transform and groups the items by
/// configured region.
fn transform(
    family: &Family,
    cfg: &ExperimentConfig,
    mu: &SelfSimilarMeasure,
    step: &mut Step,
) -> Result<(CoverShape, Vec<CoverItem>, RegionItems)> {
    let p = &cfg.pipeline;
    let shape = match &p.tau {
        Some(t) => {
            crate::geometry::check_dim(mu.dim(), t.len())?;
            CoverShape::Rect(t.clone())
        }
        None => CoverShape::Ball,
    };
    let delta = p.delta.unwrap_or(1.0);
    let radius = |r: f64| match shape {
        CoverShape::Ball => r.powf(delta),
        CoverShape::Rect(_) => r,
    };
    let mut regions: RegionItems = Vec::new();
    for r in &p.regions {
        let d = mu.dim();
        if r.len() != 2 * d {
            return Err(Error::invalid(format!("a region needs {} numbers", 2 * d)));
        }
        regions.push((Aabb::new(r[..d].to_vec(), r[d..].to_vec())?, Vec::new()));
    }
    let mut skipped = 0usize;
    let items = match family {
        Family::FareyGroups(groups) => groups
            .iter()
            .map(|&(_, count, r)| CoverItem { radius: radius(r), mass: f64::NAN, weight: count as f64 })
            .collect(),
        Family::Balls(seq) => {
            let mut items = Vec::with_capacity(seq.len());
            for b in seq.iter() {
                if matches!(shape, CoverShape::Rect(_)) && b.radius > 1.0 {
                    skipped += 1;
                    continue;
                }
                let it = CoverItem { radius: radius(b.radius), mass: f64::NAN, weight: 1.0 };
                for (bx, its) in regions.iter_mut() {
                    if (0..bx.dim()).all(|i| bx.lo[i] <= b.center[i] && b.center[i] <= bx.hi[i]) {
                        its.push(it);
                    }
                }
                items.push(it);
            }
            items
        }
    };
    if skipped > 0 {
        step.report.warnings.push(format!("{skipped} balls with radius above 1 have no rectangle and were skipped"));
    }
    step.note("sets", items.len());
    Ok((shape, items, regions))
}

/// Re-runs the configuration stored in a manifest into `out` and lists the
/// outputs whose hashes differ.
pub fn rerun_manifest(manifest: &RunManifest, out: &Path, base: Option<&Path>) -> Result<Vec<String>> {
    let cfg = ExperimentConfig::from_toml(&manifest.config)?;
    let again = run_pipeline(&cfg, out, base)?;
    let old = manifest.output_hashes();
    let new = again.output_hashes();
    let mut diff: Vec<String> = old.iter().filter(|o| !new.contains(o)).map(|o| o.0.clone()).collect();
    diff.extend(new.iter().filter(|n| !old.iter().any(|o| o.0 == n.0)).map(|n| n.0.clone()));
    Ok(diff)
}

/// Default output directory of a configuration.
pub fn default_out(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(cfg.out.clone().unwrap_or_else(|| format!("runs/{}", cfg.name)))
}
