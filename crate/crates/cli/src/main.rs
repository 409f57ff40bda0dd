mod args;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::Parser;
use radiofill::estimators::{build_estimator, train_from_map, Dictionary, EstimatorConfig, Method};
use radiofill::experiment::{self, summarize, RunConfig, SweepConfig, TrialResult, RESULTS_HEADER, SUMMARY_HEADER};
use radiofill::io::{read_grid_file, read_mask_file, read_obstacle_file, write_flag_file, write_grid_file, write_map_file};
use radiofill::metrics::{evaluate, evaluate_mask};
use radiofill::pgm::write_pgm;
use radiofill::scenegen::{generate, Layout, SceneSpec};
use radiofill::{
    denormalize, init_region_state, normalize, reconstruct, ObstacleMap, PriorityConfig, PriorityMode, RadioMap,
    RegionState, Transmitter,
};
use serde_json::json;

use args::{Cli, Command, EngineArgs, EvaluateArgs, LayoutArg, MethodArg, PriorityArg, ReconstructArgs, SceneArgs,
    SceneFlags, SweepArgs};

/// Bad flag combinations detected after parsing; exit code 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let res = match cli.command {
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Genscene(a) => cmd_genscene(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn priority_config(engine: &EngineArgs, mode: PriorityMode) -> PriorityConfig {
    PriorityConfig {
        patch_size: engine.patch_size,
        beta: engine.beta,
        mode,
        ..PriorityConfig::default()
    }
}

fn estimator_config(engine: &EngineArgs, method: Method) -> EstimatorConfig {
    EstimatorConfig {
        method,
        lambda: engine.lambda,
        dict_size: engine.dict_size,
        train_patches: engine.train_patches,
        ksvd_iters: engine.ksvd_iters,
        clamp_output: engine.clamp,
        rng_seed: engine.seed,
        ..EstimatorConfig::default()
    }
}

fn load_state(map: &RadioMap, mask: Option<&Path>, rect: Option<args::RectArg>) -> Result<RegionState> {
    match (mask, rect) {
        (Some(path), None) => {
            let mask = read_mask_file(path)?;
            if mask.dim() != map.shape() {
                bail!(
                    "mask {} is {:?} but the map is {:?}",
                    path.display(),
                    mask.dim(),
                    map.shape()
                );
            }
            Ok(RegionState::from_mask(&mask)?)
        }
        (None, Some(r)) => Ok(init_region_state(map, r.0)?),
        _ => Err(usage("give exactly one of --mask or --rect")),
    }
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    let raw = read_grid_file(&a.map)?;
    let map = normalize(&raw).with_context(|| format!("normalizing {}", a.map.display()))?;
    let mut state = load_state(&map, a.mask.as_deref(), a.rect)?;
    let input_mask = state.missing_mask();
    let obstacles = match &a.obstacles {
        Some(p) => read_obstacle_file(p)?,
        None => ObstacleMap::empty(map.rows(), map.cols()),
    };
    let txs: Vec<Transmitter> = a
        .tx
        .iter()
        .enumerate()
        .map(|(i, p)| Transmitter::new(p.0, p.1).with_id(i as u32))
        .collect();
    let mode = match a.priority {
        PriorityArg::Full => PriorityMode::Full,
        PriorityArg::Texture => PriorityMode::TextureOnly,
    };
    let pcfg = priority_config(&a.engine, mode);
    pcfg.validate()?;
    let method = match a.method {
        MethodArg::Epc => Method::Epc,
        MethodArg::Epd => Method::Epd,
    };
    let ecfg = estimator_config(&a.engine, method);

    let dictionary = match (method, &a.dictionary) {
        (Method::Epd, Some(p)) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(Dictionary::from_csv(&text, p)?)
        }
        (Method::Epd, None) => Some(train_from_map(&ecfg, &map, &state, pcfg.patch_size)?),
        (Method::Epc, Some(_)) => return Err(usage("--dictionary only applies to --method epd")),
        (Method::Epc, None) => None,
    };
    if let Some(path) = &a.save_dictionary {
        let d = dictionary
            .as_ref()
            .ok_or_else(|| usage("--save-dictionary only applies to --method epd"))?;
        fs::write(path, d.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    let estimator = build_estimator(&ecfg, &map, &state, pcfg.patch_size, dictionary)?;
    let (out, report) = reconstruct(&map, &mut state, &obstacles, &txs, &pcfg, estimator.as_ref())?;

    if a.watts {
        write_grid_file(&a.out, &denormalize(&out))?;
    } else {
        write_map_file(&a.out, &out)?;
    }
    if let Some(p) = &a.fill_order {
        fs::write(p, report.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }

    let truth = match &a.truth {
        Some(p) => {
            let t = read_grid_file(p)?;
            if t.dim() != map.shape() {
                bail!("truth {} is {:?} but the map is {:?}", p.display(), t.dim(), map.shape());
            }
            Some(t.mapv(|v| map.to_normalized(v)))
        }
        None => None,
    };
    if let Some(t) = &truth {
        let m = evaluate_mask(t, &out.values, &input_mask)?;
        println!("mse={} ne={}", m.mse, m.ne);
    }
    if let Some(dir) = &a.heatmap_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut input = map.values.clone();
        input.zip_mut_with(&input_mask, |v, &m| {
            if m {
                *v = 0.0;
            }
        });
        write_pgm(dir.join("input.pgm"), &input)?;
        write_pgm(dir.join("output.pgm"), &out.values)?;
        if let Some(t) = &truth {
            let err = (t - &out.values).mapv(f64::abs);
            write_pgm(dir.join("error.pgm"), &err)?;
        }
    }
    println!(
        "filled {} cells in {} iterations -> {}",
        report.cells_filled,
        report.iterations,
        a.out.display()
    );
    Ok(())
}

fn append_results(path: &Path, rows: &[String]) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if fresh {
        writeln!(f, "{RESULTS_HEADER}")?;
    }
    for r in rows {
        writeln!(f, "{r}")?;
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let truth_raw = read_grid_file(&a.truth)?;
    let est_raw = read_grid_file(&a.estimate)?;
    let (truth, estimate) = if a.watts {
        let t = normalize(&truth_raw)?;
        let e = est_raw.mapv(|v| t.to_normalized(v));
        (t.values, e)
    } else {
        (truth_raw, est_raw)
    };
    let report = match (&a.mask, a.rect) {
        (Some(p), None) => {
            let mask = read_mask_file(p)?;
            evaluate_mask(&truth, &estimate, &mask)?
        }
        (None, Some(r)) => evaluate(&truth, &estimate, &r.0)?,
        _ => return Err(usage("give exactly one of --mask or --rect")),
    };
    println!("mse={} ne={}", report.mse, report.ne);
    if let Some(path) = &a.results {
        let row = format!(
            "{},{},{},{},{},{},{},{}",
            a.method, a.scenario, report.region.height, report.region.width, a.seed, report.mse, report.ne, 0
        );
        append_results(path, &[row])?;
    }
    Ok(())
}

fn scene_spec(s: &SceneFlags) -> SceneSpec {
    SceneSpec {
        rows: s.rows,
        cols: s.cols,
        tx: (s.scene_tx.0, s.scene_tx.1),
        pathloss_exponent: s.gamma,
        attenuation: s.attenuation,
        layout: match s.layout {
            LayoutArg::Empty => Layout::Empty,
            LayoutArg::VerticalStripes => Layout::VerticalStripes,
            LayoutArg::CityBlocks => Layout::CityBlocks,
        },
        shadow_amplitude: s.shadow,
        correlation_length: s.corr_length,
        seed: s.scene_seed,
        ..SceneSpec::default()
    }
}

fn layout_name(l: LayoutArg) -> &'static str {
    match l {
        LayoutArg::Empty => "empty",
        LayoutArg::VerticalStripes => "vertical_stripes",
        LayoutArg::CityBlocks => "city_blocks",
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    if a.trials == 0 || a.sizes.is_empty() || a.methods.is_empty() {
        return Err(usage("sweep needs at least one method, one size and one trial"));
    }
    let scene = generate(&scene_spec(&a.scene))?;
    let cfg = RunConfig {
        priority: priority_config(&a.engine, PriorityMode::Full),
        estimator: estimator_config(&a.engine, Method::Epc),
        ..RunConfig::default()
    };
    let sweep = SweepConfig {
        methods: a.methods.clone(),
        sizes: a.sizes.clone(),
        trials: a.trials,
        seed: a.engine.seed,
        margin: a.margin,
        scenario: format!("{}-{}", layout_name(a.scene.layout), a.scene.scene_seed),
    };
    let results: Vec<TrialResult> = experiment::sweep(&scene.map, &scene.obstacles, &[scene.tx], &sweep, &cfg)?;
    if let Some(p) = &a.results {
        append_results(p, &results.iter().map(TrialResult::csv_row).collect::<Vec<_>>())?;
    }
    let mut text = format!("{SUMMARY_HEADER}\n");
    for s in summarize(&results) {
        println!("{:>4} size {:>3}: mse={:.6e} ne={:.6e}", s.method, s.mask_size, s.mean_mse, s.mean_ne);
        text.push_str(&s.csv_row());
        text.push('\n');
    }
    fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn cmd_genscene(a: SceneArgs) -> Result<()> {
    let spec = scene_spec(&a.scene);
    let scene = generate(&spec)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_grid_file(a.out_dir.join("map.csv"), &scene.raw)?;
    write_flag_file(a.out_dir.join("obstacles.csv"), &scene.obstacles.cells)?;
    let manifest = json!({
        "map": "map.csv",
        "obstacles": "obstacles.csv",
        "tx": [scene.tx.row, scene.tx.col],
        "norm_min": scene.map.norm_min,
        "norm_max": scene.map.norm_max,
        "spec": spec,
    });
    let path = a.out_dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote scene to {}", a.out_dir.display());
    Ok(())
}
