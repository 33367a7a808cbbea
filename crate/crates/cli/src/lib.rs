//! Subcommands of the `cdrs` binary, callable as library functions.

mod args;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cdrs_core::eval::{evaluate, threshold, DEFAULT_GRID_SIZE};
use cdrs_core::geom::{score_scene, Combine, GeoScoreConfig, PairFailure, PairScoreConfig, RansacConfig};
use cdrs_core::grids::pnm::{write_mask, write_pgm8};
use cdrs_core::grids::{read_tensor, write_tensor, FeatureMap, ScalarMap};
use cdrs_core::manifest::DEFAULT_FEATURE_WINDOW;
use cdrs_core::mrf::{refine_with_stages, ImageStages};
use cdrs_core::scoring::label_to_score;
use cdrs_core::synth::{generate, write_scene, SynthConfig};
use cdrs_core::{EvalReport, RefineOutput, RefineParams, SceneManifest, ScopeMode, SparseMatches};

pub use args::*;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;

/// A request that can never succeed whatever the data; exits with
/// [`EXIT_USAGE`]. Every other error is a data error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<UsageError>() {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Output name of image `i`'s refined map.
pub fn map_file_name(i: usize) -> String {
    format!("map_{i:03}.fmap")
}

/// Defaults, overridden by the manifest, overridden by flags.
pub fn resolve_params(manifest: &SceneManifest, flags: &ParamFlags) -> RefineParams {
    let mut p = RefineParams::default();
    manifest.params.apply(&mut p);
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = flags.$f { p.$f = v; })* };
    }
    set!(alpha, lambda, k, beta, bins, seed, eps_log, eps_grad, intensity_scale, sample_stride, max_sweeps);
    if let Some(s) = flags.scope {
        p.scope = match s {
            ScopeArg::Single => ScopeMode::Single,
            ScopeArg::Multi => ScopeMode::Multi,
        };
    }
    p.ml |= flags.ml;
    p
}

pub fn feature_window(manifest: &SceneManifest, flags: &ParamFlags) -> usize {
    flags
        .feature_window
        .or(manifest.params.feature_window)
        .unwrap_or(DEFAULT_FEATURE_WINDOW)
}

pub fn grid_size(manifest: &SceneManifest, flag: Option<usize>) -> usize {
    flag.or(manifest.params.grid_size).unwrap_or(DEFAULT_GRID_SIZE)
}

pub fn read_manifest(path: &Path) -> anyhow::Result<SceneManifest> {
    Ok(SceneManifest::read(path)?)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn cmd_synth(args: &SynthArgs) -> anyhow::Result<SceneManifest> {
    let mut cfg = SynthConfig {
        height: args.size,
        width: args.size,
        images: args.images,
        square: args.square,
        salt: args.salt,
        matches_per_pair: args.matches,
        seed: args.seed,
    };
    if args.static_scene {
        cfg = cfg.static_scene();
    }
    let scene = generate(&cfg).map_err(|e| usage(e.to_string()))?;
    Ok(write_scene(&scene, &args.out_dir, &args.name)?)
}

impl GeoscoreArgs {
    pub fn config(&self) -> GeoScoreConfig {
        GeoScoreConfig {
            ransac: RansacConfig {
                iterations: self.iterations,
                inlier_threshold: self.inlier_threshold,
                seed: self.seed,
                ..RansacConfig::default()
            },
            pair: PairScoreConfig {
                band: self.band,
                step: self.step,
                tau: self.tau,
            },
            combine: match self.combine {
                CombineArg::Mean => Combine::Mean,
                CombineArg::Min => Combine::Min,
                CombineArg::Median => Combine::Median,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoscoreOutput {
    pub maps: Vec<ScalarMap>,
    pub failures: Vec<PairFailure>,
    /// A copy of the input manifest whose score maps are the new ones.
    pub manifest: PathBuf,
}

/// Scores every image of the scene and writes `score_NNN.fmap` plus a
/// derived `manifest.json` into `out_dir`.
pub fn cmd_geoscore(
    manifest: &SceneManifest,
    cfg: &GeoScoreConfig,
    window: usize,
    out_dir: &Path,
    dump_png8: bool,
) -> anyhow::Result<GeoscoreOutput> {
    if manifest.len() < 2 {
        bail!("geometric scoring needs at least 2 images, the manifest lists {}", manifest.len());
    }
    manifest.require_all_matches()?;
    let images = manifest.load_images()?;
    let dims = images[0].dims();
    let features = images
        .iter()
        .enumerate()
        .map(|(i, im)| manifest.load_features(i, im, window))
        .collect::<Result<Vec<_>, _>>()?;

    let names = manifest.image_names();
    let mut pairs: HashMap<(usize, usize), SparseMatches> = HashMap::new();
    for r in 0..manifest.len() {
        for o in r + 1..manifest.len() {
            let m = manifest
                .load_matches(r, o)?
                .expect("require_all_matches checked every pair");
            m.check_bounds(dims, dims)
                .with_context(|| format!("matches of pair ({r}, {o}) [{}, {}]", names[r], names[o]))?;
            pairs.insert((r, o), m);
        }
    }
    let lookup = |r: usize, o: usize| {
        if r < o {
            pairs.get(&(r, o)).cloned()
        } else {
            pairs.get(&(o, r)).map(SparseMatches::swapped)
        }
    };
    let scores = score_scene(&features, lookup, cfg)?;

    create_dir(out_dir)?;
    let base = std::path::absolute(manifest.base_dir())?;
    let mut derived = manifest.clone();
    for (i, map) in scores.maps.iter().enumerate() {
        let name = format!("score_{i:03}.fmap");
        write_tensor(map, out_dir.join(&name))?;
        if dump_png8 {
            write_pgm8(map, out_dir.join(format!("score_{i:03}.pgm")))?;
        }
        let rec = &mut derived.images[i];
        rec.image = base.join(&rec.image);
        rec.features = rec.features.as_ref().map(|p| base.join(p));
        rec.mask = rec.mask.as_ref().map(|p| base.join(p));
        rec.score = Some(name.into());
    }
    for m in &mut derived.matches {
        m.path = base.join(&m.path);
    }
    let path = out_dir.join("manifest.json");
    derived.write(&path)?;
    Ok(GeoscoreOutput {
        maps: scores.maps,
        failures: scores.failures,
        manifest: path,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefineOptions {
    pub out_dir: PathBuf,
    pub threshold: Option<f64>,
    pub dump_png8: bool,
    pub dump_stages: bool,
}

/// Refines the scene's score maps and writes `map_NNN.fmap` per image.
pub fn cmd_refine(
    manifest: &SceneManifest,
    params: &RefineParams,
    window: usize,
    opts: &RefineOptions,
) -> anyhow::Result<RefineOutput> {
    params.validate().map_err(|e| usage(e.to_string()))?;
    let inputs = manifest.load_inputs(window).context("loading scene inputs")?;
    let out = refine_with_stages(&inputs, params, opts.dump_stages)?;

    create_dir(&opts.out_dir)?;
    for (i, res) in out.images.iter().enumerate() {
        write_tensor(&res.map, opts.out_dir.join(map_file_name(i)))?;
        if let Some(t) = opts.threshold {
            write_mask(&threshold(&res.map, t), opts.out_dir.join(format!("mask_{i:03}.pgm")))?;
        }
        if opts.dump_png8 {
            write_pgm8(&res.map, opts.out_dir.join(format!("map_{i:03}.pgm")))?;
        }
        if let Some(st) = &res.stages {
            dump_stages(st, params.bins, &opts.out_dir.join("stages"), i)?;
        }
    }
    Ok(out)
}

fn dump_stages(st: &ImageStages, bins: usize, dir: &Path, i: usize) -> anyhow::Result<()> {
    create_dir(dir)?;
    let (h, w) = st.geometric.dims();
    let delta = st
        .geometric
        .data()
        .iter()
        .flat_map(|&m| (1..=bins as u32).map(move |l| if l == m { 1.0 } else { 0.0 }))
        .collect();
    write_tensor(&FeatureMap::new(h, w, bins, delta)?, dir.join(format!("hg_{i:03}.fmap")))?;
    for (name, pdfs) in [("ha", &st.appearance), ("h", &st.mixed)] {
        let data = pdfs.iter().flat_map(|p| p.probs().iter().map(|&v| v as f32)).collect();
        write_tensor(&FeatureMap::new(h, w, bins, data)?, dir.join(format!("{name}_{i:03}.fmap")))?;
    }
    let ml = st
        .ml
        .data()
        .iter()
        .map(|&m| label_to_score(m, bins).map(|s| s as f32))
        .collect::<Result<Vec<_>, _>>()?;
    write_tensor(&ScalarMap::new(h, w, ml)?, dir.join(format!("ml_{i:03}.fmap")))?;
    Ok(())
}

fn read_map(path: &Path) -> anyhow::Result<ScalarMap> {
    let map = read_tensor(path)?.into_scalar()?;
    map.validate_scores()
        .with_context(|| format!("{} is not a score map", path.display()))?;
    Ok(map)
}

/// Evaluates the maps in `maps_dir`, or the manifest's own score maps.
pub fn cmd_eval(manifest: &SceneManifest, maps_dir: Option<&Path>, grid_size: usize) -> anyhow::Result<EvalReport> {
    if grid_size < 2 {
        return Err(usage(format!("grid size must be at least 2, got {grid_size}")));
    }
    let mut maps = Vec::with_capacity(manifest.len());
    for (i, rec) in manifest.images.iter().enumerate() {
        let path = match (maps_dir, &rec.score) {
            (Some(dir), _) => dir.join(map_file_name(i)),
            (None, Some(p)) => manifest.resolve(p),
            (None, None) => bail!("image {i} has no score map and no --maps directory was given"),
        };
        maps.push(read_map(&path)?);
    }
    let truths = maps
        .iter()
        .enumerate()
        .map(|(i, m)| manifest.load_mask(i, m.dims()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(evaluate(&manifest.scene, &manifest.image_names(), &maps, &truths, grid_size)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub mean_per_image: f64,
    pub mean_per_set: f64,
}

/// One refine and evaluation per value; inputs are loaded once.
pub fn cmd_sweep(
    manifest: &SceneManifest,
    base: &RefineParams,
    window: usize,
    param: SweepParam,
    values: &[f64],
    grid_size: usize,
) -> anyhow::Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(usage("sweep needs at least one value"));
    }
    let runs = values
        .iter()
        .map(|&v| {
            let mut p = *base;
            match param {
                SweepParam::Alpha => p.alpha = v,
                SweepParam::Lambda => p.lambda = v,
                SweepParam::K => {
                    if v.fract() != 0.0 || v < 1.0 {
                        return Err(usage(format!("k must be a positive integer, got {v}")));
                    }
                    p.k = v as usize;
                }
            }
            p.validate().map_err(|e| usage(e.to_string()))?;
            Ok(p)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let inputs = manifest.load_inputs(window).context("loading scene inputs")?;
    let truths = manifest.load_masks(inputs.images[0].dims())?;
    let names = manifest.image_names();
    let mut rows = Vec::with_capacity(runs.len());
    for (p, &value) in runs.iter().zip(values) {
        let out = refine_with_stages(&inputs, p, false)?;
        let report = evaluate(&manifest.scene, &names, &out.maps(), &truths, grid_size)?;
        rows.push(SweepRow {
            value,
            mean_per_image: report.mean_per_image,
            mean_per_set: report.mean_per_set,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,mean_per_image,mean_per_set\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.value, r.mean_per_image, r.mean_per_set));
    }
    out
}

/// Runs a parsed command line, printing results to stdout.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Synth(a) => {
            let m = cmd_synth(&a)?;
            println!("wrote {} images to {}", m.len(), a.out_dir.join("manifest.json").display());
        }
        Command::Geoscore(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let window = manifest.params.feature_window.unwrap_or(DEFAULT_FEATURE_WINDOW);
            let out = cmd_geoscore(&manifest, &a.config(), window, &a.out_dir, a.dump_png8)?;
            for f in &out.failures {
                eprintln!("warning: pair ({}, {}) skipped: {}", f.reference, f.other, f.reason);
            }
            for (i, m) in out.maps.iter().enumerate() {
                println!("score_{i:03}.fmap  mean {:.4}", m.mean());
            }
            println!("manifest: {}", out.manifest.display());
        }
        Command::Refine(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let params = resolve_params(&manifest, &a.params);
            let opts = RefineOptions {
                out_dir: a.out_dir.clone(),
                threshold: a.threshold,
                dump_png8: a.dump_png8,
                dump_stages: a.dump_stages,
            };
            let out = cmd_refine(&manifest, &params, feature_window(&manifest, &a.params), &opts)?;
            for (i, r) in out.images.iter().enumerate() {
                println!(
                    "{}  energy {:.3} -> {:.3}  sweeps {}",
                    map_file_name(i),
                    r.initial_energy,
                    r.final_energy,
                    r.sweeps
                );
            }
        }
        Command::Eval(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let report = cmd_eval(&manifest, a.maps.as_deref(), grid_size(&manifest, a.grid_size))?;
            if let Some(path) = &a.json {
                std::fs::write(path, report.to_json()).with_context(|| format!("cannot write {}", path.display()))?;
            }
            print!("{}", report.to_table());
        }
        Command::Sweep(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let params = resolve_params(&manifest, &a.params);
            let rows = cmd_sweep(
                &manifest,
                &params,
                feature_window(&manifest, &a.params),
                a.param,
                &a.values,
                grid_size(&manifest, a.grid_size),
            )?;
            let csv = sweep_csv(&rows);
            match &a.out {
                Some(path) => std::fs::write(path, csv).with_context(|| format!("cannot write {}", path.display()))?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cdrs_core::manifest::ImageRecord;

    #[test]
    fn flags_override_manifest_override_defaults() {
        let mut m = SceneManifest::new(
            "x",
            vec![ImageRecord {
                image: "a.ppm".into(),
                features: None,
                score: None,
                mask: None,
            }],
        );
        m.params.lambda = Some(10.0);
        m.params.alpha = Some(0.5);
        let flags = ParamFlags {
            alpha: Some(0.9),
            scope: Some(ScopeArg::Single),
            ..ParamFlags::default()
        };
        let p = resolve_params(&m, &flags);
        assert_eq!(p.alpha, 0.9);
        assert_eq!(p.lambda, 10.0);
        assert_eq!(p.k, RefineParams::default().k);
        assert_eq!(p.scope, ScopeMode::Single);
        assert_eq!(grid_size(&m, None), DEFAULT_GRID_SIZE);
        assert_eq!(feature_window(&m, &flags), DEFAULT_FEATURE_WINDOW);
    }

    #[test]
    fn csv_has_one_row_per_value() {
        let rows = [0.0, 0.2, 1.0].map(|v| SweepRow {
            value: v,
            mean_per_image: 0.5,
            mean_per_set: 0.25,
        });
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().nth(2), Some("0.2,0.5,0.25"));
    }

    #[test]
    fn usage_errors_are_told_apart() {
        assert_eq!(exit_code(&usage("bad")), EXIT_USAGE);
        assert_eq!(exit_code(&anyhow::anyhow!("missing file")), EXIT_DATA);
    }
}
