//! One function per subcommand.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use rayon::prelude::*;

use har_core::eval::{pca_summary, run_cv, CvOptions, EvaluationReport, ScenarioSpec};
use har_core::features::{extract_all, FeatureManifest, FeatureMatrix};
use har_core::ingest::{load_session_manifest, parse_canonical_csv, SessionEntry, SessionMeta};
use har_core::preprocess::{apply_scaler, fit_scaler, rank_features, ImportanceRanking};
use har_core::rng::{derive_seed, tag};
use har_core::segment::segment;
use har_core::synth::write_dataset;

use crate::bundle::{read_bundle, summary_grid, write_bundle, write_index};
use crate::config::ScenarioEntry;
use crate::{EvaluateArgs, ExtractArgs, Failure, PcaArgs, PipelineConfig, RankArgs, ReportArgs, SynthArgs};

type CmdResult = Result<(), Failure>;

fn validated(cfg: PipelineConfig) -> Result<PipelineConfig, Failure> {
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

fn create_file(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Write a file through `body`, flushing before returning.
pub(crate) fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> anyhow::Result<()> {
    let mut w = create_file(path)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
}

fn load_features(path: &Path) -> anyhow::Result<FeatureMatrix> {
    let mut fm = FeatureMatrix::load(path).with_context(|| format!("loading feature matrix {}", path.display()))?;
    fm.sort_canonical();
    Ok(fm)
}

fn scenario_arg(name: &str) -> Result<ScenarioSpec, Failure> {
    ScenarioEntry::Name(name.to_string()).resolve().map_err(Failure::Usage)
}

/// Ranking on all rows after scaling with the configured mode.
fn rank_all(fm: &FeatureMatrix, scenario: &ScenarioSpec, cfg: &PipelineConfig) -> anyhow::Result<ImportanceRanking> {
    let params = fit_scaler(fm.values.view(), cfg.scale)?;
    let x = apply_scaler(fm.values.view(), &params)?;
    let codes: Vec<usize> = fm.rows.iter().map(|r| scenario.map(r.label).code()).collect();
    let mut classes = codes.clone();
    classes.sort_unstable();
    classes.dedup();
    let y: Vec<usize> = codes
        .iter()
        .map(|c| classes.binary_search(c).expect("present"))
        .collect();
    let seed = derive_seed(cfg.seed, &[tag("rank")]);
    Ok(rank_features(x.view(), &y, &fm.feature_ids, cfg.ranking.n_trees, seed)?)
}

pub fn synth(mut cfg: PipelineConfig, a: SynthArgs) -> CmdResult {
    if let Some(out) = a.out {
        cfg.paths.data_dir = out;
    }
    if let Some(n) = a.users {
        cfg.synth.n_users = n;
    }
    if let Some(d) = a.days {
        cfg.synth.days = d;
    }
    let cfg = validated(cfg)?;
    let dir = &cfg.paths.data_dir;
    let paths = write_dataset(&cfg.synth_spec(), dir)?;
    println!("wrote {} recordings to {}", paths.len(), dir.display());
    Ok(())
}

fn sessions(cfg: &PipelineConfig, a: &ExtractArgs) -> Result<Vec<SessionEntry>, Failure> {
    if let Some(input) = &a.input {
        let (user, day, activity) = match (&a.user, a.day, &a.activity) {
            (Some(u), Some(d), Some(act)) => (u.clone(), d, act),
            _ => return Err(Failure::Usage(anyhow!("--input needs --user, --day and --activity"))),
        };
        let label = activity.parse().map_err(|e: har_core::HarError| Failure::Usage(e.into()))?;
        return Ok(vec![SessionEntry {
            path: input.clone(),
            meta: SessionMeta::new(user, day, label),
        }]);
    }
    let manifest = cfg.sessions_path();
    if !manifest.is_file() {
        return Err(Failure::Data(anyhow!(
            "no session manifest at {}; pass --sessions or --input",
            manifest.display()
        )));
    }
    let entries = load_session_manifest(&manifest)?;
    if entries.is_empty() {
        return Err(Failure::Data(anyhow!("session manifest {} lists no recordings", manifest.display())));
    }
    Ok(entries)
}

pub fn extract(mut cfg: PipelineConfig, a: ExtractArgs) -> CmdResult {
    if let Some(d) = &a.data {
        cfg.paths.data_dir = d.clone();
    }
    if let Some(s) = &a.sessions {
        cfg.paths.sessions = Some(s.clone());
    }
    if let Some(m) = &a.manifest {
        cfg.paths.feature_manifest = Some(m.clone());
    }
    if let Some(w) = a.window_len {
        cfg.window_len = w;
    }
    if let Some(o) = &a.out {
        cfg.paths.features = o.clone();
    }
    let cfg = validated(cfg)?;
    let manifest = match &cfg.paths.feature_manifest {
        Some(path) => FeatureManifest::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => FeatureManifest::default_manifest(),
    };
    let entries = sessions(&cfg, &a)?;
    let parsed = entries
        .par_iter()
        .map(|e| {
            parse_canonical_csv(&e.path, e.meta.clone(), &cfg.ingest)
                .with_context(|| format!("reading {}", e.path.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    for (e, p) in entries.iter().zip(&parsed) {
        if p.dropped > 0 {
            eprintln!("warning: {}: dropped {} rows", e.path.display(), p.dropped);
        }
    }
    let windows: Vec<_> = parsed
        .iter()
        .flat_map(|p| segment(&p.series, cfg.window_len))
        .collect();
    if windows.is_empty() {
        return Err(Failure::Data(anyhow!(
            "no recording is long enough for a {}-sample window",
            cfg.window_len
        )));
    }
    let mut fm = extract_all(&windows, &manifest)?;
    fm.sort_canonical();
    let out = &cfg.paths.features;
    write_file(out, |w| fm.write_csv(w))?;
    println!(
        "{} sessions, {} rows, {} features -> {}",
        entries.len(),
        fm.n_rows(),
        fm.n_features(),
        out.display()
    );
    Ok(())
}

pub fn rank(mut cfg: PipelineConfig, a: RankArgs) -> CmdResult {
    if let Some(f) = &a.features {
        cfg.paths.features = f.clone();
    }
    if let Some(n) = a.n_trees {
        cfg.ranking.n_trees = n;
    }
    let cfg = validated(cfg)?;
    let scenario = scenario_arg(&a.scenario)?;
    let fm = load_features(&cfg.paths.features)?;
    let ranking = rank_all(&fm, &scenario, &cfg)?;
    let out = a.out.unwrap_or_else(|| cfg.paths.out_dir.join("ranking.csv"));
    write_file(&out, |w| ranking.write_csv(w, None))?;
    for (i, (id, v)) in ranking.top(a.top).iter().enumerate() {
        println!("{:>4}  {:<40} {:.6}", i + 1, id, v);
    }
    println!("ranking of {} features -> {}", ranking.ranked.len(), out.display());
    Ok(())
}

pub fn evaluate(mut cfg: PipelineConfig, a: EvaluateArgs) -> CmdResult {
    if let Some(f) = a.features {
        cfg.paths.features = f;
    }
    if let Some(o) = a.out {
        cfg.paths.out_dir = o;
    }
    if let Some(m) = a.models {
        cfg.models = m;
    }
    if let Some(s) = a.scenarios {
        cfg.scenarios = s.into_iter().map(ScenarioEntry::Name).collect();
    }
    if let Some(f) = a.feature_sets {
        cfg.feature_sets = Some(f);
    }
    if let Some(k) = a.folds {
        cfg.folds = k;
    }
    if a.group_by_user {
        cfg.group_by_user = true;
    }
    if let Some(n) = a.n_trees {
        cfg.ranking.n_trees = n;
    }
    let cfg = validated(cfg)?;
    let kinds = cfg.model_kinds().map_err(Failure::Usage)?;
    let scenarios = cfg.scenario_list().map_err(Failure::Usage)?;
    let options = CvOptions {
        n_folds: cfg.folds,
        feature_sets: cfg.feature_set_list().map_err(Failure::Usage)?,
        scale: cfg.scale,
        n_trees: cfg.ranking.n_trees,
        group_by_user: cfg.group_by_user,
        pca_top: cfg.pca.top,
        pca_components: cfg.pca.components,
        seed: cfg.seed,
    };
    let fm = load_features(&cfg.paths.features)?;
    for set in &options.feature_sets {
        if let har_core::eval::FeatureSet::Top(k) = set {
            if *k > fm.n_features() {
                return Err(Failure::Usage(anyhow!(
                    "feature set {set} exceeds the {} available features",
                    fm.n_features()
                )));
            }
        }
    }
    let mut reports = Vec::with_capacity(scenarios.len());
    for scenario in &scenarios {
        eprintln!("evaluating scenario {scenario}");
        let report = run_cv(&fm, scenario, &kinds, &cfg.specs, &options)?;
        write_bundle(&cfg.paths.out_dir, &report)?;
        reports.push(report);
    }
    finish_report(&cfg.paths.out_dir, &reports)?;
    Ok(())
}

fn finish_report(dir: &Path, reports: &[EvaluationReport]) -> anyhow::Result<()> {
    write_index(dir, reports)?;
    let grid = summary_grid(reports);
    write_file(&dir.join("summary.txt"), |w| w.write_all(grid.as_bytes()))?;
    print!("{grid}");
    Ok(())
}

pub fn pca(mut cfg: PipelineConfig, a: PcaArgs) -> CmdResult {
    if let Some(f) = &a.features {
        cfg.paths.features = f.clone();
    }
    if let Some(t) = a.top {
        cfg.pca.top = t;
    }
    if let Some(c) = a.components {
        cfg.pca.components = c;
    }
    let cfg = validated(cfg)?;
    let scenario = scenario_arg(&a.scenario)?;
    let fm = load_features(&cfg.paths.features)?;
    if cfg.pca.top > fm.n_features() {
        return Err(Failure::Usage(anyhow!(
            "--top {} exceeds the {} available features",
            cfg.pca.top,
            fm.n_features()
        )));
    }
    let ranking = rank_all(&fm, &scenario, &cfg)?;
    let ids = ranking.ranked[..cfg.pca.top].to_vec();
    let top = fm.select_columns(&ids)?;
    let params = fit_scaler(top.values.view(), har_core::preprocess::ScaleMode::Standardize)?;
    let x = apply_scaler(top.values.view(), &params)?;
    let summary = pca_summary(x.view(), &ids, cfg.pca.components)?;
    let labels: Vec<String> = fm
        .rows
        .iter()
        .map(|r| scenario.class_name(scenario.map(r.label)))
        .collect();
    let out = a.out.unwrap_or_else(|| cfg.paths.out_dir.join("pca_projection.csv"));
    write_file(&out, |w| summary.write_projection_csv(w, &labels))?;
    for (i, (v, r)) in summary.explained_variance.iter().zip(&summary.explained_ratio).enumerate() {
        println!("pc{}  variance {:.6}  ratio {:.4}", i + 1, v, r);
    }
    println!("projection of {} rows -> {}", fm.n_rows(), out.display());
    Ok(())
}

pub fn report(mut cfg: PipelineConfig, a: ReportArgs) -> CmdResult {
    if let Some(d) = a.dir {
        cfg.paths.out_dir = d;
    }
    let reports = read_bundle(&cfg.paths.out_dir)?;
    if reports.is_empty() {
        return Err(Failure::Data(anyhow!("no evaluation found under {}", cfg.paths.out_dir.display())));
    }
    print!("{}", summary_grid(&reports));
    Ok(())
}
