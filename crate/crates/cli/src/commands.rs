use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use graspforge::bc::{self, BcLayout, BcPolicy, EvalShape, ExperimentSpec};
use graspforge::config::RunConfig;
use graspforge::datagen::{generate, write_dataset, DatasetInfo, GenerateOptions};
use graspforge::geometry::{export_mesh, write_obj, Superquadric};
use graspforge::math::Pose;
use graspforge::policy::checkpoint;
use graspforge::policy::{append_metrics, train, ResidualPolicy, TrainState, ZeroResidual};
use graspforge::sim::{render_depth, write_pgm, CameraSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::provenance::{beside, Run};
use crate::{Common, UsageError};

fn load_config(common: &Common) -> anyhow::Result<(RunConfig, u64)> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn create_parent(file: &Path) -> anyhow::Result<()> {
    if let Some(dir) = file.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn train_rl(
    argv: &[String],
    common: &Common,
    out: &Path,
    total_updates: Option<usize>,
    resume: Option<&Path>,
) -> anyhow::Result<()> {
    let (mut cfg, seed) = load_config(common)?;
    if let Some(n) = total_updates {
        cfg.ppo.total_updates = n;
    }
    cfg.ppo.validate().map_err(UsageError)?;
    let mut run = Run::start("train-rl", argv, seed, &cfg);
    let env = cfg.env();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let ckpt = out.join("checkpoint.bin");
    let metrics = out.join("metrics.csv");
    let mut state = match resume {
        Some(p) => {
            run.input(p)?;
            checkpoint::load(p, cfg.ppo.learning_rate).with_context(|| format!("loading {}", p.display()))?
        }
        None => {
            if metrics.exists() {
                fs::remove_file(&metrics)?;
            }
            TrainState::new(&env, &cfg.ppo, seed)?
        }
    };
    let first = state.update;
    if first >= cfg.ppo.total_updates {
        log::warn!("checkpoint is already at update {first}; nothing to train");
    }
    let mut io_err: Option<anyhow::Error> = None;
    let records = train(&env, &cfg.ppo, &mut state, seed, cfg.ppo.total_updates, |s, rec| {
        if io_err.is_some() {
            return;
        }
        let r = append_metrics(&metrics, std::slice::from_ref(rec))
            .context("writing metrics")
            .and_then(|_| checkpoint::save(&ckpt, s).context("writing checkpoint"));
        if let Err(e) = r {
            io_err = Some(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    checkpoint::save(&ckpt, &state).context("writing checkpoint")?;
    let last = records.last().map(|r| r.stats.success_rate());
    run.finish(
        &out.join("run.json"),
        json!({ "first_update": first, "final_update": state.update, "last_success_rate": last }),
    )?;
    println!("trained updates {}..{} -> {}", first + 1, state.update, ckpt.display());
    Ok(())
}

pub fn gen_data(
    argv: &[String],
    common: &Common,
    out: &Path,
    episodes: usize,
    policy: Option<&Path>,
    zero_residual: bool,
    keep_failures: bool,
) -> anyhow::Result<()> {
    let (cfg, seed) = load_config(common)?;
    if policy.is_none() && !zero_residual {
        return Err(UsageError("gen-data needs --policy <checkpoint> or --zero-residual".into()).into());
    }
    let mut run = Run::start("gen-data", argv, seed, &cfg);
    let env = cfg.env();
    let residual: Box<dyn ResidualPolicy> = match policy {
        Some(p) => {
            run.input(p)?;
            Box::new(checkpoint::load_policy(p).with_context(|| format!("loading {}", p.display()))?)
        }
        None => Box::new(ZeroResidual { dim: env.act_dim() }),
    };
    let mut opts = GenerateOptions::new(episodes, seed);
    opts.keep_failures = keep_failures;
    let g = generate(&env, residual.as_ref(), &opts, |g| {
        log::info!("{} stored of {} attempted", g.records.len(), g.attempted)
    });
    let info = DatasetInfo {
        seed,
        attempted: g.attempted,
        skipped: g.skipped,
        keep_failures,
        zero_residual: policy.is_none(),
        sampling: env.sampling.clone(),
        sim: env.sim.config.clone(),
        skill: env.skill.clone(),
    };
    let manifest = write_dataset(out, &g.records, &info)?;
    run.finish(
        &out.join("run.json"),
        json!({ "stored": manifest.episodes, "attempted": g.attempted, "skipped": g.skipped }),
    )?;
    println!(
        "{} episodes ({} successes) from {} attempts -> {}",
        manifest.episodes,
        manifest.successes,
        g.attempted,
        out.display()
    );
    if g.records.len() < episodes {
        return Err(anyhow!(
            "stopped after {} attempts with {} of {} episodes",
            g.attempted,
            g.records.len(),
            episodes
        ));
    }
    Ok(())
}

/// On-disk behavior-cloning checkpoint.
#[derive(Serialize, Deserialize)]
pub struct BcCheckpoint {
    pub format: String,
    pub version: u32,
    pub policy: BcPolicy<f32>,
}

const BC_FORMAT: &str = "graspforge-bc";

pub fn load_bc(path: &Path) -> anyhow::Result<BcPolicy<f32>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ck: BcCheckpoint = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if ck.format != BC_FORMAT || ck.version != 1 {
        return Err(anyhow!("{}: unsupported checkpoint {} v{}", path.display(), ck.format, ck.version));
    }
    if !ck.policy.is_finite() {
        return Err(anyhow!("{}: non-finite parameters", path.display()));
    }
    Ok(ck.policy)
}

pub fn train_bc(
    argv: &[String],
    common: &Common,
    data: &[PathBuf],
    out: &Path,
    epochs: Option<usize>,
) -> anyhow::Result<()> {
    let (mut cfg, seed) = load_config(common)?;
    if let Some(e) = epochs {
        cfg.bc.epochs = e;
    }
    cfg.bc.validate().map_err(UsageError)?;
    let mut run = Run::start("train-bc", argv, seed, &cfg);
    for d in data {
        run.input(&d.join(graspforge::datagen::MANIFEST_FILE))?;
    }
    let dirs: Vec<&Path> = data.iter().map(|p| p.as_path()).collect();
    let layout = BcLayout {
        steps: cfg.skill.episode_steps(),
        ..BcLayout::default_hand()
    };
    let set = bc::load_bc_data(&dirs, layout)?;
    log::info!("{} samples from {} episodes", set.len(), set.episodes);
    let (policy, report) = bc::train_bc(&set, &cfg.bc, seed, |e, l| log::info!("epoch {e} loss {l:.6}"))?;
    create_parent(out)?;
    let ck = BcCheckpoint {
        format: BC_FORMAT.into(),
        version: 1,
        policy,
    };
    fs::write(out, serde_json::to_string(&ck)?).with_context(|| format!("writing {}", out.display()))?;
    run.finish(&beside(out), serde_json::to_value(&report)?)?;
    println!(
        "{} samples, final loss {:.6} -> {}",
        report.samples,
        report.final_loss,
        out.display()
    );
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ShapeEntry {
    Named { id: String, phi: [f64; 5] },
    Bare([f64; 5]),
}

fn read_shapes(path: &Path) -> anyhow::Result<Vec<EvalShape>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let entries: Vec<ShapeEntry> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut shapes = Vec::with_capacity(entries.len());
    for (i, e) in entries.into_iter().enumerate() {
        let (id, phi) = match e {
            ShapeEntry::Named { id, phi } => (id, phi),
            ShapeEntry::Bare(phi) => (format!("phi-{i}"), phi),
        };
        Superquadric::from_array(phi).map_err(|e| UsageError(format!("shape {id}: {e}")))?;
        shapes.push(EvalShape { id, phi });
    }
    Ok(shapes)
}

pub fn eval(
    argv: &[String],
    common: &Common,
    ckpt: &Path,
    shapes: &Path,
    trials: usize,
    out: &Path,
) -> anyhow::Result<()> {
    let (cfg, seed) = load_config(common)?;
    if trials == 0 {
        return Err(UsageError("--trials must be positive".into()).into());
    }
    let mut run = Run::start("eval", argv, seed, &cfg);
    run.input(ckpt)?;
    run.input(shapes)?;
    let shapes = read_shapes(shapes)?;
    let policy = load_bc(ckpt)?;
    let env = cfg.env();
    let mut rows = bc::eval_policy(&env, &policy, &shapes, trials, seed);
    rows.push(bc::total("total", &rows));
    create_parent(out)?;
    fs::write(out, bc::eval_csv(&rows)).with_context(|| format!("writing {}", out.display()))?;
    print!("{}", bc::format_table(&[("policy", &rows)]));
    run.finish(&beside(out), json!({ "shapes": shapes, "trials": trials }))?;
    Ok(())
}

pub fn experiment(
    argv: &[String],
    common: &Common,
    spec: Option<&Path>,
    narrow: &Path,
    augmented: &Path,
    out: &Path,
) -> anyhow::Result<()> {
    let (cfg, seed) = load_config(common)?;
    let mut run = Run::start("experiment", argv, seed, &cfg);
    let mut es = match spec {
        Some(p) => {
            run.input(p)?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<ExperimentSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentSpec {
            bc: cfg.bc.clone(),
            ..ExperimentSpec::default()
        },
    };
    if let Some(s) = common.seed {
        es.seed = s;
    }
    for d in [narrow, augmented] {
        run.input(&d.join(graspforge::datagen::MANIFEST_FILE))
            .with_context(|| format!("dataset {} is missing", d.display()))?;
    }
    let env = cfg.env();
    let es = es.with_generated_ood(&env);
    let report = bc::run_experiment(&env, &es, narrow, augmented)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let text = report.text();
    fs::write(out.join("report.txt"), &text)?;
    fs::write(out.join("report.csv"), report.csv())?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    print!("{text}");
    run.finish(&out.join("run.json"), json!({ "spec": es }))?;
    Ok(())
}

pub fn render(
    argv: &[String],
    phi: &[f64],
    out: &Path,
    sweep_eps2: Option<&[f64]>,
    resolution: usize,
) -> anyhow::Result<()> {
    let p: [f64; 5] = phi
        .try_into()
        .map_err(|_| UsageError("--phi takes five comma-separated values".into()))?;
    let shape = Superquadric::from_array(p).map_err(|e| UsageError(format!("--phi: {e}")))?;
    let cfg = RunConfig::default();
    let run = Run::start("render", argv, 0, &cfg);
    let write_mesh = |s: &Superquadric<f64>, path: &Path| -> anyhow::Result<()> {
        let f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_obj(&export_mesh(s, resolution, 2 * resolution), std::io::BufWriter::new(f))?;
        Ok(())
    };
    if let Some(eps) = sweep_eps2 {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let mut files = Vec::new();
        for &e in eps {
            let s = Superquadric::new(p[0], p[1], p[2], p[3], e).map_err(|err| UsageError(format!("eps2 {e}: {err}")))?;
            let path = out.join(format!("eps2_{e:.2}.obj"));
            write_mesh(&s, &path)?;
            files.push(path.display().to_string());
        }
        println!("{} meshes -> {}", files.len(), out.display());
        return run.finish(&out.join("run.json"), json!({ "phi": p, "eps2": eps, "files": files }));
    }
    create_parent(out)?;
    match out.extension().and_then(|e| e.to_str()) {
        Some("obj") => write_mesh(&shape, out)?,
        Some("pgm") => {
            let env = cfg.env();
            let state = env.sim.reset(shape, Pose::identity())?;
            let depth = render_depth(&env.sim, &state, &CameraSpec::nominal());
            let f = fs::File::create(out).with_context(|| format!("writing {}", out.display()))?;
            write_pgm(&depth, CameraSpec::nominal().resolution, std::io::BufWriter::new(f))?;
        }
        _ => return Err(UsageError("--out must end in .obj or .pgm".into()).into()),
    }
    println!("wrote {}", out.display());
    run.finish(&beside(out), json!({ "phi": p }))
}

pub fn config(emit_default: bool, check: Option<&Path>) -> anyhow::Result<()> {
    match (emit_default, check) {
        (true, _) => println!("{}", RunConfig::default_json()),
        (false, Some(p)) => {
            let cfg = RunConfig::load(p)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
        (false, None) => return Err(UsageError("config needs --emit-default or --check <file>".into()).into()),
    }
    Ok(())
}
